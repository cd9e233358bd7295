#pragma once

#include <span>
#include <string>

namespace compactml {

struct Score {
    double value = 0;
    std::string metric_name;
};

// Coefficient of determination. Throws UndefinedScoreError when y_true is
// constant and ShapeError on length mismatch or fewer than two points.
Score r_squared(std::span<const double> y_true, std::span<const double> y_pred);
Score rmse(std::span<const double> y_true, std::span<const double> y_pred);
Score mae(std::span<const double> y_true, std::span<const double> y_pred);

// Plain-double conveniences for hot loops.
double r2_value(std::span<const double> y_true, std::span<const double> y_pred);
double rmse_value(std::span<const double> y_true, std::span<const double> y_pred);

}  // namespace compactml
