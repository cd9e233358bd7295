#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "compactml/error.hpp"

namespace compactml {

// Dense row-major matrix of feature values.
class FeatureMatrix {
public:
    FeatureMatrix() = default;

    FeatureMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            throw ShapeError("matrix data size does not match rows*cols");
    }

    static FeatureMatrix from_rows(const std::vector<std::vector<double>>& rows,
                                   std::size_t cols) {
        FeatureMatrix m(rows.size(), cols);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != cols) throw ShapeError("ragged row in feature matrix");
            std::copy(rows[i].begin(), rows[i].end(), m.data_.begin() + i * cols);
        }
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return rows_ == 0; }

    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

    std::vector<double> column(std::size_t c) const {
        std::vector<double> out(rows_);
        for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
        return out;
    }

    FeatureMatrix select_rows(std::span<const std::size_t> idx) const {
        FeatureMatrix out(idx.size(), cols_);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            auto src = row(idx[i]);
            std::copy(src.begin(), src.end(), out.data_.begin() + i * cols_);
        }
        return out;
    }

    const std::vector<double>& data() const noexcept { return data_; }

    bool operator==(const FeatureMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

}  // namespace compactml
