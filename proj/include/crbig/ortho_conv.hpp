#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "crbig/tensor.hpp"

namespace crbig {

struct TrainConfig {
    double lambda_act = 0.0;       // weight on mean |C x|
    double lambda_w = 0.0;         // weight on sum |c|
    double learning_rate = 1e-2;
    std::size_t epochs = 50;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
    double target_residual = 1e-4; // early stop on reconstruction RMSE

    // Throws InvalidConfig naming the first offending field.
    void validate() const;
};

struct EpochStats {
    std::size_t epoch = 0;
    double reconstruction_rmse = 0.0;
    double activity_l1 = 0.0;  // mean |C x| per element
    double weight_l1 = 0.0;    // sum |c|

    friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    // ||C^T C - I||_F / sqrt(D) on the training image size when that matrix
    // is small enough to build; otherwise the final reconstruction RMSE and
    // orthonormality_exact is false.
    double orthonormality_residual = 0.0;
    bool orthonormality_exact = true;

    friend bool operator==(const TrainReport&, const TrainReport&) = default;
};

struct LossAndGrad {
    double loss = 0.0;
    double reconstruction_mse = 0.0; // batch mean
    double activity_l1 = 0.0;        // batch mean of mean |C x|
    std::vector<double> grad;        // shaped like f.weights()
};

// Mini-autoencoder cost averaged over the batch:
//   mean_i [ mean((x_i - C^T C x_i)^2) + lambda_act * mean|C x_i| ] + lambda_w * sum|c|
// with the exact (sub)gradient, sign(0) = 0.
LossAndGrad loss_and_grad(const ConvFilter& f, const ImageBatch& batch, const TrainConfig& cfg);

// Random normal weights (std 1/sqrt(k_h k_w ch_in)) whose unfolded
// (k_h k_w ch_in) x ch_out matrix is then QR-orthonormalized.
ConvFilter init_filter(std::size_t k_h, std::size_t k_w, std::size_t ch_in, std::size_t stride,
                       std::uint64_t seed);

// Minibatch SGD on loss_and_grad. Stops after cfg.epochs or once the
// full-data reconstruction RMSE reaches cfg.target_residual. Throws Diverged
// if any tracked quantity turns non-finite.
std::pair<ConvFilter, TrainReport> train_filter(const ConvFilter& init, const ImageBatch& data,
                                                const TrainConfig& cfg);

// ||C^T C - I||_F / sqrt(h w ch_in). Throws TooLarge with filter_as_sparse.
double orthonormality_residual(const ConvFilter& f, std::size_t h, std::size_t w);

} // namespace crbig
