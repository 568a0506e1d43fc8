#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "crbig/tensor.hpp"

namespace crbig {

double normal_cdf(double y) noexcept;
// Inverse of normal_cdf on (0, 1): Acklam's rational approximation followed
// by one Halley step against erfc.
double normal_quantile(double p) noexcept;

struct MarginalOptions {
    std::size_t bins = 256;
    double tail_extension = 0.1;
    double clamp_eps = 1e-6;
};

// Piecewise-linear CDF of one channel. Both knot vectors are strictly
// increasing and of equal length >= 2.
struct ChannelCdf {
    std::vector<double> knots_x;
    std::vector<double> knots_u;

    double cdf(double x) const noexcept;
    double quantile(double u) const noexcept;
};

// Channel-wise marginal Gaussianization: y = Phi^-1(clamp(F_c(x))).
class MarginalMap {
public:
    MarginalMap() = default;
    // Validates the knot invariants; throws CorruptModel on violation.
    MarginalMap(std::vector<ChannelCdf> channels, double tail_extension, double clamp_eps);

    std::size_t channels() const noexcept { return channels_.size(); }
    const ChannelCdf& channel(std::size_t c) const { return channels_.at(c); }
    const std::vector<ChannelCdf>& channel_cdfs() const noexcept { return channels_; }
    double tail_extension() const noexcept { return tail_extension_; }
    double clamp_eps() const noexcept { return clamp_eps_; }

    double forward_value(std::size_t c, double x) const noexcept;
    double inverse_value(std::size_t c, double y) const noexcept;

private:
    std::vector<ChannelCdf> channels_;
    double tail_extension_ = 0.1;
    double clamp_eps_ = 1e-6;
};

// Fits one channel from raw samples (order irrelevant).
ChannelCdf fit_channel_cdf(std::vector<double> samples, const MarginalOptions& opts);

// Pools every spatial position of every image per channel. Requires at
// least 100 samples per channel (InsufficientData) and a non-constant
// channel (DegenerateMarginal).
MarginalMap fit_marginal(const ImageBatch& data, const MarginalOptions& opts = {});

ImageTensor marginal_forward(const MarginalMap& m, const ImageTensor& x);
ImageTensor marginal_inverse(const MarginalMap& m, const ImageTensor& y);

} // namespace crbig
