#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "compactml/dataset.hpp"
#include "compactml/ensemble.hpp"

namespace compactml {

struct ImportanceRow {
    std::string feature;
    double importance = 0;  // mean R^2 drop over the shuffles
    double std_dev = 0;     // sample standard deviation of the drops
    double p_value = 1;     // one-sided t-test, H0: mean drop <= 0
    std::size_t n = 0;
    double p99_high = 0;
    double p99_low = 0;
    std::vector<double> drops;  // per-shuffle drops, kept for auditing
};

inline constexpr std::size_t kDefaultImportanceRepeats = 5;

// Statistics for one feature from its per-shuffle drops. The 99% bounds are
// mean +/- t(0.995, n-1) * sd / sqrt(n). With zero spread the p-value is 0
// for a positive mean and 1 otherwise.
ImportanceRow summarize_drops(std::string feature, std::vector<double> drops);

// Shuffles one column at a time, n times each, and records the R^2 drop.
// The shuffle for (feature j, repeat r) is seeded from (seed, j, r) only.
// Rows come back sorted by importance, descending.
std::vector<ImportanceRow> permutation_importance(const PredictFn& model,
                                                  const TabularDataset& eval_set, std::size_t n,
                                                  std::uint64_t seed);

// Student t helpers (backed by Boost.Math).
double student_t_quantile(double p, double dof);
double student_t_upper_tail(double t, double dof);

}  // namespace compactml
