#include "crbig/synthesis.hpp"

#include <cmath>
#include <string>

#include "crbig/error.hpp"
#include "crbig/parallel.hpp"
#include "crbig/rng.hpp"

namespace crbig {

ImageTensor gaussian_latent(const Shape& shape, std::uint64_t seed, std::size_t index) {
    ImageTensor z(shape);
    Rng rng(seed, index);
    rng.fill_normal(z.data());
    return z;
}

ImageBatch synthesize(const RbigModel& m, const NoiseSpec& spec, std::optional<std::size_t> after_block) {
    if (spec.count == 0) fail(ErrorKind::InvalidConfig, "count: must be >= 1");
    const std::size_t n_layers =
        after_block ? m.arch().layers_through_block(*after_block) : m.layers().size();
    const Shape latent = m.shape_after(n_layers);
    ImageBatch out(spec.count);
    parallel_for(spec.count, [&](std::size_t i) {
        out[i] = inverse_layers(m, gaussian_latent(latent, spec.seed, i), n_layers);
    });
    return out;
}

ImageTensor zero_response(const RbigModel& m) {
    return inverse(m, ImageTensor(m.output_shape()));
}

ProbeResult probe_direction(const RbigModel& m, const std::vector<std::size_t>& band,
                            const std::vector<double>& amplitudes, std::uint64_t seed) {
    if (band.empty()) fail(ErrorKind::EmptyBand, "probe band selects no channels");
    const Shape latent = m.output_shape();
    std::vector<char> in_band(latent.channels, 0);
    for (std::size_t c : band) {
        if (c >= latent.channels) {
            fail(ErrorKind::EmptyBand, "band channel " + std::to_string(c) + " outside the " +
                                           std::to_string(latent.channels) + " latent channels");
        }
        in_band[c] = 1;
    }
    for (std::size_t i = 0; i < amplitudes.size(); ++i) {
        if (!(amplitudes[i] >= 0.0) || (i > 0 && !(amplitudes[i] > amplitudes[i - 1]))) {
            fail(ErrorKind::InvalidConfig, "amplitudes: must be nonnegative and increasing");
        }
    }

    ImageTensor noise = gaussian_latent(latent, seed, 0);
    for (std::size_t k = 0; k < noise.size(); ++k) {
        if (!in_band[k % latent.channels]) noise.data()[k] = 0.0;
    }
    const ImageTensor base = zero_response(m);

    ProbeResult result;
    result.images.resize(amplitudes.size());
    result.energies.resize(amplitudes.size());
    parallel_for(amplitudes.size(), [&](std::size_t i) {
        ImageTensor z = noise;
        for (double& v : z.data()) v *= amplitudes[i];
        result.images[i] = inverse(m, z);
        double sq = 0.0;
        for (std::size_t k = 0; k < base.size(); ++k) {
            const double d = result.images[i].data()[k] - base.data()[k];
            sq += d * d;
        }
        result.energies[i] = std::sqrt(sq / static_cast<double>(base.size()));
    });
    return result;
}

} // namespace crbig
