#include "compactml/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "compactml/error.hpp"
#include "compactml/log.hpp"
#include "compactml/rng.hpp"

namespace compactml {
namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string upper(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(trim(std::string_view(line).substr(
            start, comma == std::string::npos ? std::string::npos : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return cells;
}

// Canonical name for a header cell, or empty if the column is not ours.
std::string canonical_column(const std::string& raw) {
    static const std::map<std::string, std::string> aliases{
        {"LL", "LL"}, {"PL", "PL"}, {"G", "G"},     {"G%", "G"},     {"S", "S"},
        {"S%", "S"},  {"F", "F"},   {"F%", "F"},    {"OMC", "OMC"},  {"MDD", "MDD"}};
    auto it = aliases.find(upper(raw));
    return it == aliases.end() ? std::string{} : it->second;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
    double value = 0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, value, std::chars_format::general);
    if (cell.empty() || ec != std::errc{} || ptr != last)
        throw ParseError("row " + std::to_string(row) + ", column " + column +
                             ": cannot parse '" + cell + "' as a decimal number",
                         row, column);
    if (!std::isfinite(value))
        throw ParseError("row " + std::to_string(row) + ", column " + column +
                             ": value is not finite",
                         row, column);
    return value;
}

struct CsvFile {
    std::string header;
    std::vector<std::string> header_cells;
    std::vector<std::string> lines;
};

CsvFile read_csv_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    CsvFile f;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!have_header) {
            if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
            if (trim(line).empty()) continue;
            f.header = line;
            f.header_cells = split_line(line);
            have_header = true;
            continue;
        }
        if (trim(line).empty()) continue;
        f.lines.push_back(line);
    }
    if (!have_header) throw EmptyInputError(path.string() + ": file is empty");
    return f;
}

// Maps each canonical column to its position in the header.
std::map<std::string, std::size_t> locate_columns(const CsvFile& f,
                                                  const std::vector<std::string>& required) {
    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < f.header_cells.size(); ++i) {
        auto name = canonical_column(f.header_cells[i]);
        if (name.empty()) continue;
        if (!pos.emplace(name, i).second)
            throw SchemaError("column " + name + " appears more than once in header");
    }
    for (const auto& r : required)
        if (!pos.count(r)) throw SchemaError("missing required column " + r);
    return pos;
}

template <typename T>
void hash_bytes(std::uint64_t& h, const T& v) {
    const auto* p = reinterpret_cast<const unsigned char*>(&v);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
}

void hash_string(std::uint64_t& h, const std::string& s) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    hash_bytes(h, s.size());
}

}  // namespace

std::string to_string(Target t) { return t == Target::omc ? "omc" : "mdd"; }

Target parse_target(const std::string& s) {
    const auto u = upper(s);
    if (u == "OMC") return Target::omc;
    if (u == "MDD") return Target::mdd;
    throw ConfigError("unknown target '" + s + "' (expected omc or mdd)");
}

std::vector<std::string> SoilSample::warnings() const {
    std::vector<std::string> w;
    if (ll < pl) w.push_back("liquid limit below plastic limit");
    const double grains = gravel_pct + sand_pct + fines_pct;
    if (grains < 95.0 || grains > 105.0)
        w.push_back("gravel+sand+fines = " + std::to_string(grains) + " outside [95, 105]");
    return w;
}

TabularDataset::TabularDataset(std::vector<std::string> column_names, FeatureMatrix features,
                               std::string target_name, std::vector<double> targets)
    : column_names_(std::move(column_names)),
      features_(std::move(features)),
      target_name_(std::move(target_name)),
      targets_(std::move(targets)) {
    if (features_.cols() != column_names_.size())
        throw ShapeError("feature matrix width does not match column names");
    if (targets_.size() != features_.rows())
        throw ShapeError("target vector length does not match row count");
    for (double v : features_.data())
        if (!std::isfinite(v)) throw NumericError("non-finite feature value");
    for (double v : targets_)
        if (!std::isfinite(v)) throw NumericError("non-finite target value");
}

TabularDataset TabularDataset::subset(std::span<const std::size_t> idx) const {
    std::vector<double> t(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) t[i] = targets_.at(idx[i]);
    return TabularDataset(column_names_, features_.select_rows(idx), target_name_, std::move(t));
}

std::uint64_t TabularDataset::content_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& c : column_names_) hash_string(h, c);
    hash_string(h, target_name_);
    hash_bytes(h, rows());
    for (double v : features_.data()) hash_bytes(h, std::bit_cast<std::uint64_t>(v));
    for (double v : targets_) hash_bytes(h, std::bit_cast<std::uint64_t>(v));
    return h;
}

TabularDataset to_dataset(std::span<const SoilSample> samples, Target target) {
    FeatureMatrix x(samples.size(), 5);
    std::vector<double> y(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        auto r = x.row(i);
        r[0] = s.ll;
        r[1] = s.pl;
        r[2] = s.gravel_pct;
        r[3] = s.sand_pct;
        r[4] = s.fines_pct;
        y[i] = target == Target::omc ? s.omc : s.mdd;
    }
    return TabularDataset(soil_feature_names(), std::move(x), upper(to_string(target)),
                          std::move(y));
}

std::vector<SoilSample> read_soil_csv(const std::filesystem::path& path) {
    const auto f = read_csv_lines(path);
    const auto pos = locate_columns(f, {"LL", "PL", "G", "S", "F", "OMC", "MDD"});
    if (f.lines.empty()) throw EmptyInputError(path.string() + ": no data rows");

    std::vector<SoilSample> out;
    out.reserve(f.lines.size());
    for (std::size_t r = 0; r < f.lines.size(); ++r) {
        const auto cells = split_line(f.lines[r]);
        if (cells.size() != f.header_cells.size())
            throw ParseError("row " + std::to_string(r + 1) + ": expected " +
                                 std::to_string(f.header_cells.size()) + " cells, got " +
                                 std::to_string(cells.size()),
                             r + 1, "");
        auto get = [&](const char* name) {
            const double v = parse_cell(cells[pos.at(name)], r + 1, name);
            if (v < 0)
                throw ParseError("row " + std::to_string(r + 1) + ", column " + name +
                                     ": negative value",
                                 r + 1, name);
            return v;
        };
        SoilSample s;
        s.ll = get("LL");
        s.pl = get("PL");
        s.gravel_pct = get("G");
        s.sand_pct = get("S");
        s.fines_pct = get("F");
        s.omc = get("OMC");
        s.mdd = get("MDD");
        for (const auto& w : s.warnings())
            log_warning(path.filename().string() + " row " + std::to_string(r + 1) + ": " + w);
        out.push_back(s);
    }
    return out;
}

TabularDataset load_csv(const std::filesystem::path& path, Target target) {
    const auto samples = read_soil_csv(path);
    return to_dataset(samples, target);
}

FeatureTable load_feature_csv(const std::filesystem::path& path) {
    const auto f = read_csv_lines(path);
    const auto& names = soil_feature_names();
    const auto pos = locate_columns(f, names);
    FeatureTable t;
    t.header = f.header;
    t.lines = f.lines;
    t.features = FeatureMatrix(f.lines.size(), names.size());
    for (std::size_t r = 0; r < f.lines.size(); ++r) {
        const auto cells = split_line(f.lines[r]);
        if (cells.size() != f.header_cells.size())
            throw ParseError("row " + std::to_string(r + 1) + ": wrong number of cells", r + 1,
                             "");
        for (std::size_t c = 0; c < names.size(); ++c)
            t.features(r, c) = parse_cell(cells[pos.at(names[c])], r + 1, names[c]);
    }
    return t;
}

DedupResult deduplicate(const TabularDataset& ds) {
    std::set<std::vector<std::uint64_t>> seen;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        std::vector<std::uint64_t> key;
        key.reserve(ds.cols() + 1);
        for (double v : ds.features().row(i)) key.push_back(std::bit_cast<std::uint64_t>(v));
        key.push_back(std::bit_cast<std::uint64_t>(ds.targets()[i]));
        if (seen.insert(std::move(key)).second) keep.push_back(i);
    }
    return {ds.subset(keep), ds.rows() - keep.size()};
}

std::size_t test_rows_for(std::size_t n_rows, double test_fraction) {
    // The epsilon absorbs representation error, e.g. 0.2 * 115.
    return static_cast<std::size_t>(
        std::ceil(test_fraction * static_cast<double>(n_rows) - 1e-9));
}

void validate_plan(const SplitPlan& plan, std::size_t n_rows) {
    if (!(plan.test_fraction > 0.0 && plan.test_fraction < 1.0))
        throw ConfigError("test_fraction must lie in (0, 1)");
    const auto n_test = test_rows_for(n_rows, plan.test_fraction);
    if (n_test < 1 || n_test >= n_rows)
        throw ConfigError("test_fraction " + std::to_string(plan.test_fraction) + " on " +
                          std::to_string(n_rows) + " rows leaves a partition empty");
    if (plan.n_folds < 2 || plan.n_folds > n_rows - n_test)
        throw ConfigError("n_folds must lie in [2, number of training rows]");
}

SplitIndices split_indices(std::size_t n_rows, const SplitPlan& plan) {
    validate_plan(plan, n_rows);
    const auto n_test = test_rows_for(n_rows, plan.test_fraction);
    Rng rng(derive_seed(plan.seed, {0x5b1}));
    const auto perm = rng.permutation(n_rows);
    SplitIndices s;
    s.train.assign(perm.begin(), perm.end() - static_cast<std::ptrdiff_t>(n_test));
    s.test.assign(perm.end() - static_cast<std::ptrdiff_t>(n_test), perm.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

std::pair<TabularDataset, TabularDataset> train_test_split(const TabularDataset& ds,
                                                           const SplitPlan& plan) {
    const auto s = split_indices(ds.rows(), plan);
    return {ds.subset(s.train), ds.subset(s.test)};
}

std::vector<Fold> kfold_plan(std::size_t n_rows, std::size_t k, std::uint64_t seed) {
    if (k < 2 || k > n_rows)
        throw ConfigError("fold count " + std::to_string(k) + " outside [2, " +
                          std::to_string(n_rows) + "]");
    Rng rng(derive_seed(seed, {0xf01d}));
    const auto perm = rng.permutation(n_rows);
    std::vector<Fold> folds(k);
    const std::size_t base = n_rows / k;
    const std::size_t extra = n_rows % k;
    std::size_t start = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = base + (f < extra ? 1 : 0);
        folds[f].holdout.assign(perm.begin() + static_cast<std::ptrdiff_t>(start),
                                perm.begin() + static_cast<std::ptrdiff_t>(start + size));
        std::sort(folds[f].holdout.begin(), folds[f].holdout.end());
        start += size;
    }
    for (auto& fold : folds) {
        std::vector<bool> held(n_rows, false);
        for (auto i : fold.holdout) held[i] = true;
        for (std::size_t i = 0; i < n_rows; ++i)
            if (!held[i]) fold.train.push_back(i);
    }
    return folds;
}

}  // namespace compactml
