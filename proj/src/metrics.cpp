#include "compactml/metrics.hpp"

#include <cmath>
#include <string>

#include "compactml/error.hpp"

namespace compactml {
namespace {

void check_pair(std::span<const double> y_true, std::span<const double> y_pred) {
    if (y_true.size() != y_pred.size())
        throw ShapeError("length mismatch: " + std::to_string(y_true.size()) + " targets vs " +
                         std::to_string(y_pred.size()) + " predictions");
    if (y_true.size() < 2) throw ShapeError("at least two points are required for scoring");
    for (std::size_t i = 0; i < y_true.size(); ++i)
        if (!std::isfinite(y_true[i]) || !std::isfinite(y_pred[i]))
            throw NumericError("non-finite value at index " + std::to_string(i));
}

}  // namespace

double r2_value(std::span<const double> y_true, std::span<const double> y_pred) {
    check_pair(y_true, y_pred);
    double mean = 0;
    for (double v : y_true) mean += v;
    mean /= static_cast<double>(y_true.size());
    double ss_res = 0;
    double ss_tot = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const double r = y_true[i] - y_pred[i];
        const double d = y_true[i] - mean;
        ss_res += r * r;
        ss_tot += d * d;
    }
    if (ss_tot == 0.0) throw UndefinedScoreError("R^2 is undefined for constant targets");
    return 1.0 - ss_res / ss_tot;
}

double rmse_value(std::span<const double> y_true, std::span<const double> y_pred) {
    check_pair(y_true, y_pred);
    double ss = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const double r = y_true[i] - y_pred[i];
        ss += r * r;
    }
    return std::sqrt(ss / static_cast<double>(y_true.size()));
}

Score r_squared(std::span<const double> y_true, std::span<const double> y_pred) {
    return {r2_value(y_true, y_pred), "r2"};
}

Score rmse(std::span<const double> y_true, std::span<const double> y_pred) {
    return {rmse_value(y_true, y_pred), "rmse"};
}

Score mae(std::span<const double> y_true, std::span<const double> y_pred) {
    check_pair(y_true, y_pred);
    double s = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) s += std::abs(y_true[i] - y_pred[i]);
    return {s / static_cast<double>(y_true.size()), "mae"};
}

}  // namespace compactml
