#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "crbig/tensor.hpp"

namespace crbig {

class RbigModel;

double digamma(double x) noexcept;

// Vasicek m-spacing differential entropy in nats, m = floor(sqrt(n)).
//
// Spacings near the sample edges are one-sided and shorter; each term is
// normalized by its actual spacing width k and shifted by
// log k - digamma(k), minus the global log(n+1) - digamma(n+1), which
// removes the estimator's bias exactly for uniform data. Tied order
// statistics (zero spacings) take the smallest positive spacing.
// Throws DegenerateSamples for n < 100 or constant input.
double entropy_univariate(std::span<const double> samples);

// Mean per-channel entropy of a batch, samples pooled over spatial
// positions and images.
std::vector<double> channel_entropies(const ImageBatch& batch);

// Multi-information removed by a linear layer y = C x, in nats per
// dimension: (sum_d h(x_d) - sum_d h(y_d)) / D, with each sum taken
// channel-wise under stationarity. Only rotations are supported, where the
// log-determinant vanishes; assume_rotation = false throws NotSupported.
double delta_mi_layer(const ImageBatch& x, const ImageBatch& y, bool assume_rotation = true);

struct MiLayerEntry {
    std::size_t layer_index = 0;
    double delta_mi_train = 0.0;
    double delta_mi_valid = 0.0;
    double accumulated_train = 0.0;
    double accumulated_valid = 0.0;
    double ortho_residual = 0.0;
};

struct MiReport {
    std::vector<MiLayerEntry> layers;
    std::size_t n_samples_train = 0;
    std::size_t n_samples_valid = 0;
    std::string estimator = "vasicek-m-spacing(m=floor(sqrt(n)),bias-corrected)";

    // Appends a layer and updates both running sums.
    void append(double delta_train, double delta_valid, double ortho_residual);
};

// Pushes `data` through the model and measures the MI removed by each
// convolution (marginal steps contribute nothing). The measured values go
// into the "valid" columns; the "train" columns carry the values recorded
// in the model at training time.
MiReport accumulated_mi_curve(const RbigModel& model, const ImageBatch& data);

} // namespace crbig
