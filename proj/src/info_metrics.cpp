#include "crbig/info_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "crbig/error.hpp"
#include "crbig/marginal.hpp"
#include "crbig/model.hpp"
#include "crbig/parallel.hpp"

namespace crbig {

double digamma(double x) noexcept {
    double acc = 0.0;
    while (x < 10.0) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    const double series =
        inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 * (1.0 / 240 - inv2 / 132))));
    return acc + std::log(x) - 0.5 * inv - series;
}

double entropy_univariate(std::span<const double> samples) {
    const std::size_t n = samples.size();
    if (n < 100) {
        fail(ErrorKind::DegenerateSamples, "entropy needs at least 100 samples, got " + std::to_string(n));
    }
    std::vector<double> x(samples.begin(), samples.end());
    std::sort(x.begin(), x.end());
    if (!(x.back() > x.front())) fail(ErrorKind::DegenerateSamples, "samples are constant");
    if (!std::isfinite(x.front()) || !std::isfinite(x.back())) {
        fail(ErrorKind::DegenerateSamples, "samples contain non-finite values");
    }

    const std::size_t m = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
    const double np1 = static_cast<double>(n) + 1.0;

    double min_spacing = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + m < n; ++i) {
        const double s = x[i + m] - x[i];
        if (s > 0.0) min_spacing = std::min(min_spacing, s);
    }
    if (!std::isfinite(min_spacing)) {
        // Every m-spacing is zero; fall back to the smallest positive gap.
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double s = x[i + 1] - x[i];
            if (s > 0.0) min_spacing = std::min(min_spacing, s);
        }
    }

    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= m ? i - m : 0;
        const std::size_t hi = std::min(i + m, n - 1);
        const double k = static_cast<double>(hi - lo);
        const double spacing = std::max(x[hi] - x[lo], min_spacing);
        sum += std::log(np1 / k * spacing) + std::log(k) - digamma(k);
    }
    return sum / static_cast<double>(n) - (std::log(np1) - digamma(np1));
}

std::vector<double> channel_entropies(const ImageBatch& batch) {
    const Shape s = batch_shape(batch);
    const std::size_t per_image = s.height * s.width;
    std::vector<double> out(s.channels);
    parallel_for(s.channels, [&](std::size_t c) {
        std::vector<double> pooled;
        pooled.reserve(per_image * batch.size());
        for (const auto& img : batch) {
            const auto v = img.data();
            for (std::size_t p = 0; p < per_image; ++p) pooled.push_back(v[p * s.channels + c]);
        }
        out[c] = entropy_univariate(pooled);
    });
    return out;
}

namespace {
double mean(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}
} // namespace

double delta_mi_layer(const ImageBatch& x, const ImageBatch& y, bool assume_rotation) {
    if (!assume_rotation) {
        fail(ErrorKind::NotSupported, "log|C| is only available for rotations (assume_rotation)");
    }
    const Shape sx = batch_shape(x);
    const Shape sy = batch_shape(y);
    if (sx.size() != sy.size() || x.size() != y.size()) {
        fail(ErrorKind::ShapeMismatch, "layer input and output must have equal element counts");
    }
    // sum_d h(x_d) / D = (h w sum_c h_c) / (h w ch) = mean_c h_c.
    return mean(channel_entropies(x)) - mean(channel_entropies(y));
}

void MiReport::append(double delta_train, double delta_valid, double ortho_residual) {
    MiLayerEntry e;
    e.layer_index = layers.size();
    e.delta_mi_train = delta_train;
    e.delta_mi_valid = delta_valid;
    e.accumulated_train = (layers.empty() ? 0.0 : layers.back().accumulated_train) + delta_train;
    e.accumulated_valid = (layers.empty() ? 0.0 : layers.back().accumulated_valid) + delta_valid;
    e.ortho_residual = ortho_residual;
    layers.push_back(e);
}

MiReport accumulated_mi_curve(const RbigModel& model, const ImageBatch& data) {
    MiReport report;
    const Shape s = batch_shape(data);
    if (s != model.input_shape()) {
        fail(ErrorKind::ShapeMismatch, "data shape does not match the model input");
    }
    report.n_samples_valid = data.size();
    report.n_samples_train = model.training_meta().n_train;

    ImageBatch current = data;
    for (const auto& layer : model.layers()) {
        ImageBatch gaussianized(current.size());
        ImageBatch rotated(current.size());
        parallel_for(current.size(), [&](std::size_t i) {
            gaussianized[i] = marginal_forward(layer.marginal, current[i]);
            rotated[i] = conv_forward(gaussianized[i], layer.filter);
        });
        const double delta = delta_mi_layer(gaussianized, rotated, true);
        report.append(layer.delta_mi_train, delta, layer.ortho_residual);
        current = std::move(rotated);
    }
    return report;
}

} // namespace crbig
