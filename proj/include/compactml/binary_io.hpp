#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "compactml/error.hpp"

namespace compactml {

// Little-endian binary writer used by model blobs. Doubles are stored as
// raw IEEE-754 bits so a save/load round trip is exact.
class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream& os) : os_(os) {}

    void u8(std::uint8_t v) { os_.put(static_cast<char>(v)); }

    void u64(std::uint64_t v) {
        unsigned char buf[8];
        for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
        os_.write(reinterpret_cast<const char*>(buf), 8);
    }

    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

    void str(const std::string& s) {
        u64(s.size());
        os_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

    void f64s(const std::vector<double>& v) {
        u64(v.size());
        for (double d : v) f64(d);
    }

    void u64s(const std::vector<std::uint64_t>& v) {
        u64(v.size());
        for (auto d : v) u64(d);
    }

private:
    std::ostream& os_;
};

class BinaryReader {
public:
    explicit BinaryReader(std::istream& is) : is_(is) {}

    std::uint8_t u8() {
        const int c = is_.get();
        if (c == std::char_traits<char>::eof()) throw FormatError("truncated model blob");
        return static_cast<std::uint8_t>(c);
    }

    std::uint64_t u64() {
        unsigned char buf[8];
        if (!is_.read(reinterpret_cast<char*>(buf), 8)) throw FormatError("truncated model blob");
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
        return v;
    }

    double f64() { return std::bit_cast<double>(u64()); }

    std::size_t size(std::size_t limit = std::size_t{1} << 32) {
        const auto n = u64();
        if (n > limit) throw FormatError("implausible length in model blob");
        return static_cast<std::size_t>(n);
    }

    std::string str() {
        std::string s(size(), '\0');
        if (!s.empty() && !is_.read(s.data(), static_cast<std::streamsize>(s.size())))
            throw FormatError("truncated model blob");
        return s;
    }

    std::vector<double> f64s() {
        std::vector<double> v(size());
        for (auto& d : v) d = f64();
        return v;
    }

    std::vector<std::uint64_t> u64s() {
        std::vector<std::uint64_t> v(size());
        for (auto& d : v) d = u64();
        return v;
    }

private:
    std::istream& is_;
};

}  // namespace compactml
