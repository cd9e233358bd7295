#include "compactml/mlp.hpp"

#include <cmath>
#include <string>

#include "compactml/error.hpp"

namespace compactml {
namespace {

void check_shape(std::span<const double> params, const MlpShape& shape, std::size_t cols) {
    if (params.size() != shape.parameter_count())
        throw ShapeError("parameter vector has " + std::to_string(params.size()) +
                         " entries, architecture needs " +
                         std::to_string(shape.parameter_count()));
    if (cols != shape.inputs) throw ShapeError("input width does not match network");
}

}  // namespace

double mlp_forward(std::span<const double> params, const MlpShape& shape,
                   std::span<const double> row) {
    const double* w1 = params.data() + shape.w1_offset();
    const double* b1 = params.data() + shape.b1_offset();
    const double* w2 = params.data() + shape.w2_offset();
    double out = params[shape.b2_offset()];
    for (std::size_t h = 0; h < shape.hidden; ++h) {
        double z = b1[h];
        for (std::size_t j = 0; j < shape.inputs; ++j) z += w1[h * shape.inputs + j] * row[j];
        if (z > 0) out += w2[h] * z;
    }
    return out;
}

LossGradient mlp_loss_gradient(std::span<const double> params, const MlpShape& shape,
                               const FeatureMatrix& x, std::span<const double> y) {
    check_shape(params, shape, x.cols());
    if (y.size() != x.rows()) throw ShapeError("batch targets do not match batch rows");
    if (x.rows() == 0) throw ShapeError("empty batch");

    const std::size_t n = x.rows();
    const std::size_t d = shape.inputs;
    const std::size_t hdim = shape.hidden;
    const double* w1 = params.data() + shape.w1_offset();
    const double* b1 = params.data() + shape.b1_offset();
    const double* w2 = params.data() + shape.w2_offset();
    const double b2 = params[shape.b2_offset()];

    LossGradient out;
    out.gradient.assign(params.size(), 0.0);
    double* g_w1 = out.gradient.data() + shape.w1_offset();
    double* g_b1 = out.gradient.data() + shape.b1_offset();
    double* g_w2 = out.gradient.data() + shape.w2_offset();
    double& g_b2 = out.gradient[shape.b2_offset()];

    std::vector<double> z(hdim);
    const double scale = 2.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = x.row(i);
        double pred = b2;
        for (std::size_t h = 0; h < hdim; ++h) {
            double s = b1[h];
            for (std::size_t j = 0; j < d; ++j) s += w1[h * d + j] * row[j];
            if (!std::isfinite(s)) throw NumericError("non-finite activation in hidden layer");
            z[h] = s;
            if (s > 0) pred += w2[h] * s;
        }
        if (!std::isfinite(pred)) throw NumericError("non-finite activation in output layer");
        const double err = pred - y[i];
        out.loss += err * err;

        const double dpred = scale * err;
        g_b2 += dpred;
        for (std::size_t h = 0; h < hdim; ++h) {
            if (!(z[h] > 0)) continue;
            g_w2[h] += dpred * z[h];
            const double dz = dpred * w2[h];
            g_b1[h] += dz;
            for (std::size_t j = 0; j < d; ++j) g_w1[h * d + j] += dz * row[j];
        }
    }
    out.loss /= static_cast<double>(n);
    return out;
}

}  // namespace compactml
