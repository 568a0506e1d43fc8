#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "crbig/model.hpp"

namespace crbig {

struct NoiseSpec {
    std::size_t count = 1;
    std::uint64_t seed = 0;
};

// Standard-normal latent of the given shape for image `index`: stream
// `index` of Rng(seed), filled in row-major order.
ImageTensor gaussian_latent(const Shape& shape, std::uint64_t seed, std::size_t index);

// Inverts Gaussian noise through the model. With `after_block` = b, the
// noise takes the shape of block b's output and only the first b blocks
// are inverted.
ImageBatch synthesize(const RbigModel& m, const NoiseSpec& spec,
                      std::optional<std::size_t> after_block = std::nullopt);

// Image whose latent code is all zeros (every marginal at its median).
ImageTensor zero_response(const RbigModel& m);

struct ProbeResult {
    ImageBatch images;
    std::vector<double> energies;  // RMS deviation from zero_response
};

// For each amplitude a, inverts a * (white noise restricted to the `band`
// channels of the final representation). One noise draw is shared by all
// amplitudes.
ProbeResult probe_direction(const RbigModel& m, const std::vector<std::size_t>& band,
                            const std::vector<double>& amplitudes, std::uint64_t seed);

} // namespace crbig
