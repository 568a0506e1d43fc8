#include "crbig/marginal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "crbig/error.hpp"

namespace crbig {

double normal_cdf(double y) noexcept {
    return 0.5 * std::erfc(-y / std::numbers::sqrt2);
}

double normal_quantile(double p) noexcept {
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    if (p >= 1.0) return std::numeric_limits<double>::infinity();

    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00, 2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    // Halley refinement; the upper tail is refined on the complement so
    // 1 - p does not lose precision.
    if (p <= 0.5) {
        const double e = normal_cdf(x) - p;
        const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
        x -= u / (1.0 + 0.5 * x * u);
    } else {
        const double e = 0.5 * std::erfc(x / std::numbers::sqrt2) - (1.0 - p);
        const double u = -e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    return x;
}

double ChannelCdf::cdf(double x) const noexcept {
    if (x <= knots_x.front()) return knots_u.front();
    if (x >= knots_x.back()) return knots_u.back();
    const auto it = std::upper_bound(knots_x.begin(), knots_x.end(), x);
    const std::size_t k = static_cast<std::size_t>(it - knots_x.begin()) - 1;
    const double t = (x - knots_x[k]) / (knots_x[k + 1] - knots_x[k]);
    return knots_u[k] + t * (knots_u[k + 1] - knots_u[k]);
}

double ChannelCdf::quantile(double u) const noexcept {
    if (u <= knots_u.front()) return knots_x.front();
    if (u >= knots_u.back()) return knots_x.back();
    const auto it = std::upper_bound(knots_u.begin(), knots_u.end(), u);
    const std::size_t k = static_cast<std::size_t>(it - knots_u.begin()) - 1;
    const double t = (u - knots_u[k]) / (knots_u[k + 1] - knots_u[k]);
    return knots_x[k] + t * (knots_x[k + 1] - knots_x[k]);
}

MarginalMap::MarginalMap(std::vector<ChannelCdf> channels, double tail_extension, double clamp_eps)
    : channels_(std::move(channels)), tail_extension_(tail_extension), clamp_eps_(clamp_eps) {
    if (channels_.empty()) fail(ErrorKind::CorruptModel, "marginal map without channels");
    if (!(clamp_eps_ > 0.0 && clamp_eps_ < 0.5)) {
        fail(ErrorKind::CorruptModel, "clamp_eps outside (0, 0.5)");
    }
    if (!(tail_extension_ >= 0.0)) fail(ErrorKind::CorruptModel, "negative tail_extension");
    for (std::size_t c = 0; c < channels_.size(); ++c) {
        const auto& ch = channels_[c];
        const std::string where = "marginal channel " + std::to_string(c);
        if (ch.knots_x.size() != ch.knots_u.size() || ch.knots_x.size() < 2) {
            fail(ErrorKind::CorruptModel, where + ": knot vectors must have equal length >= 2");
        }
        for (std::size_t k = 0; k < ch.knots_x.size(); ++k) {
            if (!std::isfinite(ch.knots_x[k]) || !(ch.knots_u[k] > 0.0 && ch.knots_u[k] < 1.0)) {
                fail(ErrorKind::CorruptModel, where + ": knot out of range");
            }
            if (k > 0 && !(ch.knots_x[k] > ch.knots_x[k - 1] && ch.knots_u[k] > ch.knots_u[k - 1])) {
                fail(ErrorKind::CorruptModel, where + ": knots not strictly increasing");
            }
        }
    }
}

double MarginalMap::forward_value(std::size_t c, double x) const noexcept {
    const double u = std::clamp(channels_[c].cdf(x), clamp_eps_, 1.0 - clamp_eps_);
    return normal_quantile(u);
}

double MarginalMap::inverse_value(std::size_t c, double y) const noexcept {
    const double u = std::clamp(normal_cdf(y), clamp_eps_, 1.0 - clamp_eps_);
    return channels_[c].quantile(u);
}

ChannelCdf fit_channel_cdf(std::vector<double> samples, const MarginalOptions& opts) {
    if (opts.bins < 1) fail(ErrorKind::InvalidConfig, "bins must be positive");
    if (samples.size() < 100) {
        fail(ErrorKind::InsufficientData,
             "need at least 100 samples per channel, got " + std::to_string(samples.size()));
    }
    std::sort(samples.begin(), samples.end());
    const std::size_t n = samples.size();
    const double lo = samples.front();
    const double hi = samples.back();
    if (!(hi > lo)) fail(ErrorKind::DegenerateMarginal, "channel is constant");
    if (!std::isfinite(lo) || !std::isfinite(hi)) {
        fail(ErrorKind::DegenerateMarginal, "channel contains non-finite samples");
    }

    const double eps = opts.clamp_eps;
    const double ext = opts.tail_extension * (hi - lo);
    const double nd = static_cast<double>(n);

    ChannelCdf cdf;
    auto push = [&](double x, double u) {
        if (cdf.knots_x.empty() || (x > cdf.knots_x.back() && u > cdf.knots_u.back())) {
            cdf.knots_x.push_back(x);
            cdf.knots_u.push_back(u);
        }
    };

    if (ext > 0.0) push(lo - ext, eps);
    for (std::size_t k = 0; k <= opts.bins; ++k) {
        // Equal-count knot at fractional (0-based) rank r, plotting position (r+1)/(n+1).
        const double r = static_cast<double>(k) * (nd - 1.0) / static_cast<double>(opts.bins);
        const auto i = std::min(static_cast<std::size_t>(r), n - 2);
        const double t = r - static_cast<double>(i);
        const double x = samples[i] + t * (samples[i + 1] - samples[i]);
        const double u = std::clamp((r + 1.0) / (nd + 1.0), 2.0 * eps, 1.0 - 2.0 * eps);
        push(x, u);
    }
    if (ext > 0.0) push(hi + ext, 1.0 - eps);
    return cdf;
}

MarginalMap fit_marginal(const ImageBatch& data, const MarginalOptions& opts) {
    const Shape s = batch_shape(data);
    const std::size_t per_image = s.height * s.width;
    std::vector<ChannelCdf> cdfs;
    cdfs.reserve(s.channels);
    for (std::size_t c = 0; c < s.channels; ++c) {
        std::vector<double> pooled;
        pooled.reserve(per_image * data.size());
        for (const auto& img : data) {
            const auto v = img.data();
            for (std::size_t p = 0; p < per_image; ++p) pooled.push_back(v[p * s.channels + c]);
        }
        try {
            cdfs.push_back(fit_channel_cdf(std::move(pooled), opts));
        } catch (const Error& e) {
            throw Error(e.kind(), "channel " + std::to_string(c) + ": " + e.what());
        }
    }
    return MarginalMap(std::move(cdfs), opts.tail_extension, opts.clamp_eps);
}

ImageTensor marginal_forward(const MarginalMap& m, const ImageTensor& x) {
    if (x.channels() != m.channels()) {
        fail(ErrorKind::ShapeMismatch, "marginal map has " + std::to_string(m.channels()) +
                                           " channels, input has " + std::to_string(x.channels()));
    }
    ImageTensor y(x.shape());
    const std::size_t ch = x.channels();
    for (std::size_t k = 0; k < x.size(); ++k) y.data()[k] = m.forward_value(k % ch, x.data()[k]);
    return y;
}

ImageTensor marginal_inverse(const MarginalMap& m, const ImageTensor& y) {
    if (y.channels() != m.channels()) {
        fail(ErrorKind::ShapeMismatch, "marginal map has " + std::to_string(m.channels()) +
                                           " channels, input has " + std::to_string(y.channels()));
    }
    ImageTensor x(y.shape());
    const std::size_t ch = y.channels();
    for (std::size_t k = 0; k < y.size(); ++k) x.data()[k] = m.inverse_value(k % ch, y.data()[k]);
    return x;
}

} // namespace crbig
