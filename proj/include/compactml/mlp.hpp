#pragma once

#include <span>
#include <vector>

#include "compactml/matrix.hpp"

namespace compactml {

// One hidden ReLU layer, linear output. Flat parameter layout:
// [W1 (hidden x inputs, row-major) | b1 (hidden) | w2 (hidden) | b2].
struct MlpShape {
    std::size_t inputs = 0;
    std::size_t hidden = 0;

    std::size_t parameter_count() const noexcept { return hidden * inputs + 2 * hidden + 1; }
    std::size_t w1_offset() const noexcept { return 0; }
    std::size_t b1_offset() const noexcept { return hidden * inputs; }
    std::size_t w2_offset() const noexcept { return hidden * inputs + hidden; }
    std::size_t b2_offset() const noexcept { return hidden * inputs + 2 * hidden; }
};

struct LossGradient {
    double loss = 0;
    std::vector<double> gradient;
};

// Mean squared error (1/n) * sum (f(x_i) - y_i)^2 and its exact gradient.
// Throws NumericError naming the layer if an activation is not finite.
LossGradient mlp_loss_gradient(std::span<const double> params, const MlpShape& shape,
                               const FeatureMatrix& x, std::span<const double> y);

double mlp_forward(std::span<const double> params, const MlpShape& shape,
                   std::span<const double> row);

}  // namespace compactml
