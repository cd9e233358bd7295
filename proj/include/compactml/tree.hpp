#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "compactml/binary_io.hpp"
#include "compactml/matrix.hpp"
#include "compactml/rng.hpp"

namespace compactml {

struct SplitCandidate {
    std::size_t feature_index = 0;
    double threshold = 0;  // rows with x <= threshold go left
    std::size_t left_count = 0;
    std::size_t right_count = 0;
    double gain = 0;
};

// Exhaustive variance-reduction split over midpoints of consecutive distinct
// values. xs must be sorted ascending, ys aligned. Gain is
// SS_tot - (SS_left + SS_right). Ties go to the lowest threshold.
std::optional<SplitCandidate> best_split(std::span<const double> xs, std::span<const double> ys,
                                         std::size_t min_leaf);

struct TreeOptions {
    std::size_t max_depth = 6;
    std::size_t min_samples_leaf = 1;
    double max_features = 1.0;   // fraction of candidate features tried per node
    bool random_thresholds = false;
    double l2 = 0.0;             // leaf value = sum / (count + l2)
};

// Binary CART regression tree.
class RegressionTree {
public:
    struct Node {
        std::int32_t feature = -1;  // -1 marks a leaf
        double threshold = 0;
        std::uint32_t left = 0;
        std::uint32_t right = 0;
        double value = 0;
    };

    // rows may contain repeats (bootstrap). features restricts the candidate
    // columns; empty means all.
    static RegressionTree grow(const FeatureMatrix& x, std::span<const double> y,
                               std::span<const std::size_t> rows, const TreeOptions& options,
                               Rng& rng, std::span<const std::size_t> features = {});

    double predict(std::span<const double> row) const;

    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    std::size_t depth() const;

    void save(BinaryWriter& w) const;
    static RegressionTree load(BinaryReader& r);

private:
    std::vector<Node> nodes_;
};

struct ObliviousOptions {
    std::size_t depth = 6;
    double l2 = 3.0;
    std::size_t max_borders = 64;
};

// Candidate thresholds for each feature: midpoints of consecutive distinct
// values, thinned to at most max_borders by even spacing.
std::vector<std::vector<double>> oblivious_borders(const FeatureMatrix& x,
                                                   std::size_t max_borders);

// Symmetric tree: every node at a given depth applies the same
// (feature, threshold) test, so a leaf is addressed by a bit string.
class ObliviousTree {
public:
    struct Level {
        std::size_t feature = 0;
        double threshold = 0;
    };

    static ObliviousTree grow(const FeatureMatrix& x, std::span<const double> y,
                              const std::vector<std::vector<double>>& borders,
                              const ObliviousOptions& options);

    std::size_t leaf_index(std::span<const double> row) const;
    double predict(std::span<const double> row) const { return leaves_[leaf_index(row)]; }

    const std::vector<Level>& levels() const noexcept { return levels_; }
    const std::vector<double>& leaves() const noexcept { return leaves_; }

    void save(BinaryWriter& w) const;
    static ObliviousTree load(BinaryReader& r);

private:
    std::vector<Level> levels_;
    std::vector<double> leaves_;
};

}  // namespace compactml
