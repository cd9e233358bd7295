#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "compactml/matrix.hpp"

namespace compactml {

enum class Target { omc, mdd };

std::string to_string(Target t);
Target parse_target(const std::string& s);

// Canonical feature order used by every model.
inline const std::vector<std::string>& soil_feature_names() {
    static const std::vector<std::string> names{"LL", "PL", "G", "S", "F"};
    return names;
}

// One laboratory record. mdd is passed through in whatever unit the source
// file uses.
struct SoilSample {
    double ll = 0;
    double pl = 0;
    double gravel_pct = 0;
    double sand_pct = 0;
    double fines_pct = 0;
    double omc = 0;
    double mdd = 0;

    // Soft checks only (LL < PL, grain sizes not summing to ~100).
    std::vector<std::string> warnings() const;
};

// Feature matrix plus one active target. Immutable once built; every
// transform returns a new dataset.
class TabularDataset {
public:
    TabularDataset() = default;
    TabularDataset(std::vector<std::string> column_names, FeatureMatrix features,
                   std::string target_name, std::vector<double> targets);

    const std::vector<std::string>& column_names() const noexcept { return column_names_; }
    const FeatureMatrix& features() const noexcept { return features_; }
    const std::string& target_name() const noexcept { return target_name_; }
    const std::vector<double>& targets() const noexcept { return targets_; }

    std::size_t rows() const noexcept { return features_.rows(); }
    std::size_t cols() const noexcept { return features_.cols(); }
    bool empty() const noexcept { return rows() == 0; }

    TabularDataset subset(std::span<const std::size_t> idx) const;

    // 64-bit FNV-1a over names and the exact bit patterns of every value.
    std::uint64_t content_hash() const;

    bool operator==(const TabularDataset&) const = default;

private:
    std::vector<std::string> column_names_;
    FeatureMatrix features_;
    std::string target_name_;
    std::vector<double> targets_;
};

TabularDataset to_dataset(std::span<const SoilSample> samples, Target target);

// Reads soil records. Header names are case-insensitive and order-free;
// "G%", "S%", "F%" are accepted for G, S, F. Extra columns are ignored.
std::vector<SoilSample> read_soil_csv(const std::filesystem::path& path);

TabularDataset load_csv(const std::filesystem::path& path, Target target);

// Feature-only CSV (target columns optional and ignored). Raw lines are
// kept so callers can echo the input verbatim.
struct FeatureTable {
    std::string header;
    std::vector<std::string> lines;
    FeatureMatrix features;
};

FeatureTable load_feature_csv(const std::filesystem::path& path);

struct DedupResult {
    TabularDataset dataset;
    std::size_t removed = 0;
};

// Drops rows whose five features and target are bitwise equal to an
// earlier row. Survivors keep their relative order.
DedupResult deduplicate(const TabularDataset& ds);

struct SplitPlan {
    std::uint64_t seed = 0;
    double test_fraction = 0.2;
    std::size_t n_folds = 5;
};

std::size_t test_rows_for(std::size_t n_rows, double test_fraction);

void validate_plan(const SplitPlan& plan, std::size_t n_rows);

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

// Seeded permutation; its last ceil(test_fraction * n) entries form the test
// set. Both index lists are returned sorted.
SplitIndices split_indices(std::size_t n_rows, const SplitPlan& plan);

std::pair<TabularDataset, TabularDataset> train_test_split(const TabularDataset& ds,
                                                           const SplitPlan& plan);

struct Fold {
    std::vector<std::size_t> train;
    std::vector<std::size_t> holdout;
};

std::vector<Fold> kfold_plan(std::size_t n_rows, std::size_t k, std::uint64_t seed);

}  // namespace compactml
