#include "compactml/importance.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>

#include "compactml/error.hpp"
#include "compactml/metrics.hpp"
#include "compactml/rng.hpp"

namespace compactml {

double student_t_quantile(double p, double dof) {
    boost::math::students_t dist(dof);
    return boost::math::quantile(dist, p);
}

double student_t_upper_tail(double t, double dof) {
    boost::math::students_t dist(dof);
    return boost::math::cdf(boost::math::complement(dist, t));
}

ImportanceRow summarize_drops(std::string feature, std::vector<double> drops) {
    if (drops.size() < 2) throw ConfigError("importance needs at least 2 shuffles per feature");
    ImportanceRow row;
    row.feature = std::move(feature);
    row.n = drops.size();
    const double n = static_cast<double>(row.n);

    double mean = 0;
    for (double d : drops) mean += d;
    mean /= n;
    double ss = 0;
    for (double d : drops) ss += (d - mean) * (d - mean);
    const double sd = std::sqrt(ss / (n - 1.0));

    row.importance = mean;
    row.std_dev = sd;
    const double dof = n - 1.0;
    const double se = sd / std::sqrt(n);
    if (se > 0) {
        row.p_value = std::clamp(student_t_upper_tail(mean / se, dof), 0.0, 1.0);
        const double half = student_t_quantile(0.995, dof) * se;
        row.p99_high = mean + half;
        row.p99_low = mean - half;
    } else {
        row.p_value = mean > 0 ? 0.0 : 1.0;
        row.p99_high = mean;
        row.p99_low = mean;
    }
    row.drops = std::move(drops);
    return row;
}

std::vector<ImportanceRow> permutation_importance(const PredictFn& model,
                                                  const TabularDataset& eval_set, std::size_t n,
                                                  std::uint64_t seed) {
    if (n < 2) throw ConfigError("importance repeat count n must be >= 2, got " + std::to_string(n));
    const auto& x = eval_set.features();
    const auto& y = eval_set.targets();
    const double base = r_squared(y, model(x)).value;

    std::vector<ImportanceRow> rows;
    for (std::size_t j = 0; j < eval_set.cols(); ++j) {
        std::vector<double> drops;
        drops.reserve(n);
        const auto column = x.column(j);
        for (std::size_t r = 0; r < n; ++r) {
            Rng rng(derive_seed(seed, {j, r}));
            const auto perm = rng.permutation(x.rows());
            FeatureMatrix shuffled = x;
            for (std::size_t i = 0; i < x.rows(); ++i) shuffled(i, j) = column[perm[i]];
            drops.push_back(base - r_squared(y, model(shuffled)).value);
        }
        rows.push_back(summarize_drops(eval_set.column_names()[j], std::move(drops)));
    }
    std::stable_sort(rows.begin(), rows.end(), [](const ImportanceRow& a, const ImportanceRow& b) {
        return a.importance > b.importance;
    });
    return rows;
}

}  // namespace compactml
