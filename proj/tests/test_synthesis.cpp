#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "crbig/error.hpp"
#include "crbig/synthesis.hpp"
#include "oracles.hpp"

using namespace crbig;

namespace {

ImageBatch gaussian_images(std::size_t n, const Shape& s, std::uint64_t seed) {
    Rng rng(seed);
    ImageBatch b;
    for (std::size_t i = 0; i < n; ++i) b.push_back(oracle::random_tensor(s, rng));
    return b;
}

// Marginal whose CDF is the standard normal sampled on a dense grid, so
// forward and inverse are the identity up to interpolation error.
MarginalMap identity_like_marginal(std::size_t channels) {
    ChannelCdf c;
    for (int k = -1400; k <= 1400; ++k) {
        const double x = k / 200.0;
        c.knots_x.push_back(x);
        c.knots_u.push_back(oracle::std_normal_cdf(x));
    }
    return MarginalMap(std::vector<ChannelCdf>(channels, c), 0.0, 1e-12);
}

// Two blocks: space-to-depth then a 1x1 identity, exactly orthonormal.
RbigModel exact_model(const Shape& in, bool identity_marginals) {
    const ImageBatch fit = gaussian_images(100, in, 3);
    std::vector<RbigLayer> layers(2);
    layers[0].marginal = identity_marginals ? identity_like_marginal(in.channels) : fit_marginal(fit);
    layers[0].filter = space_to_depth_filter(in.channels, 2);
    const std::size_t ch = in.channels * 4;
    ImageBatch mid;
    for (const auto& x : fit) mid.push_back(conv_forward(marginal_forward(layers[0].marginal, x), layers[0].filter));
    layers[1].marginal = identity_marginals ? identity_like_marginal(ch) : fit_marginal(mid);
    layers[1].filter = delta_filter(ch);
    ArchitectureSpec arch;
    arch.blocks = {BlockSpec{2, 1, 1, 2}, BlockSpec{1, 1, 1, 0}};
    return RbigModel(in, arch, layers, {});
}

} // namespace

TEST_CASE("latent noise is standard normal and seeded per image") {
    const Shape s{32, 32, 10};  // 1.024e4 samples per channel
    const ImageTensor z = gaussian_latent(s, 5, 0);
    for (std::size_t c = 0; c < s.channels; ++c) {
        std::vector<double> v;
        for (std::size_t k = c; k < z.size(); k += s.channels) v.push_back(z.values()[k]);
        CHECK(oracle::ks_normal(v) < oracle::ks_critical_001(v.size()));
    }
    CHECK(gaussian_latent(s, 5, 0).values() == z.values());
    CHECK(gaussian_latent(s, 5, 1).values() != z.values());
    Rng rng(5, 1);
    CHECK(gaussian_latent(s, 5, 1).values()[0] == rng.normal());
}

TEST_CASE("a model without layers returns the raw noise") {
    const RbigModel m(Shape{4, 4, 3});
    const ImageBatch out = synthesize(m, {3, 11});
    REQUIRE(out.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(out[i].values() == gaussian_latent(Shape{4, 4, 3}, 11, i).values());
}

TEST_CASE("synthesis is deterministic and block truncation is consistent") {
    const RbigModel m = exact_model(Shape{8, 8, 2}, false);
    const ImageBatch a = synthesize(m, {4, 7});
    const ImageBatch b = synthesize(m, {4, 7});
    const ImageBatch full = synthesize(m, {4, 7}, 2);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(a[i].shape() == Shape{8, 8, 2});
        CHECK(a[i].values() == b[i].values());
        CHECK(a[i].values() == full[i].values());
    }
    const ImageBatch first = synthesize(m, {1, 7}, 1);
    CHECK(first[0].values() ==
          inverse_layers(m, gaussian_latent(m.shape_after(1), 7, 0), 1).values());
    const ImageBatch none = synthesize(m, {1, 7}, 0);
    CHECK(none[0].values() == gaussian_latent(Shape{8, 8, 2}, 7, 0).values());
    CHECK_THROWS_AS(synthesize(m, {1, 7}, 3), Error);
}

TEST_CASE("zero latent gives a flat image at the channel medians") {
    // With a single exactly orthonormal layer the image is exactly flat.
    const ImageBatch fit = gaussian_images(100, Shape{8, 8, 2}, 3);
    RbigLayer layer;
    layer.marginal = fit_marginal(fit);
    layer.filter = space_to_depth_filter(2, 2);
    const RbigModel one(Shape{8, 8, 2}, ArchitectureSpec::uniform(1, 1, 2, 7, 2), {layer}, {});
    const ImageTensor z1 = zero_response(one);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 8; ++j)
            for (std::size_t c = 0; c < 2; ++c) {
                CHECK(z1.at(i, j, c) == doctest::Approx(layer.marginal.inverse_value(c, 0.0)).epsilon(1e-12));
            }
    // The fitted median of standard-normal data is about 0.
    CHECK(std::abs(z1.at(0, 0, 0)) < 0.05);

    // Deeper models pass the median of each intermediate channel, which
    // is about 0 in the Gaussianized domain, so the image stays nearly flat.
    const RbigModel m = exact_model(Shape{8, 8, 2}, false);
    const ImageTensor z = zero_response(m);
    for (double v : z.values()) CHECK(std::abs(v) < 0.15);
}

TEST_CASE("probe energy is zero at amplitude 0 and linear for a linear model") {
    const RbigModel m = exact_model(Shape{8, 8, 2}, true);
    const ProbeResult p = probe_direction(m, {0, 3, 5}, {0.0, 0.25, 0.5, 0.75, 1.0}, 4);
    REQUIRE(p.energies.size() == 5);
    CHECK(p.energies[0] == 0.0);
    CHECK(p.images[0].values() == zero_response(m).values());
    for (std::size_t k = 1; k < 5; ++k) {
        CHECK(p.energies[k] == doctest::Approx(p.energies[4] * 0.25 * static_cast<double>(k)).epsilon(1e-3));
    }
}

TEST_CASE("probe band and amplitude validation") {
    const RbigModel m = exact_model(Shape{4, 4, 1}, true);
    auto kind = [&](const std::vector<std::size_t>& band, const std::vector<double>& amps) {
        try {
            probe_direction(m, band, amps, 0);
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::Io;
    };
    CHECK(kind({}, {1.0}) == ErrorKind::EmptyBand);
    CHECK(kind({4}, {1.0}) == ErrorKind::EmptyBand);
    CHECK(kind({0}, {1.0, 0.5}) == ErrorKind::InvalidConfig);
}

TEST_CASE("a trained model saturates at high probe amplitude") {
    // Patches of a procedural texture; marginal inverses are bounded by the
    // extended support, so image energy must flatten out.
    const ImageTensor tex = oracle::procedural_texture(64, 3);
    ImageBatch patches;
    for (std::size_t r = 0; r + 8 <= 64; r += 4)
        for (std::size_t c = 0; c + 8 <= 64; c += 4) {
            ImageTensor p(Shape{8, 8, 3});
            for (std::size_t i = 0; i < 8; ++i)
                for (std::size_t j = 0; j < 8; ++j)
                    for (std::size_t ch = 0; ch < 3; ++ch) p.at(i, j, ch) = tex.at(r + i, c + j, ch);
            patches.push_back(p);
        }
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.learning_rate = 0.1;
    const RbigModel m = train_model(patches, ArchitectureSpec::uniform(2, 1, 2, 3), cfg, patches).model;
    std::vector<double> amps;
    for (int k = 0; k <= 12; ++k) amps.push_back(5.0 * k);
    const ProbeResult p = probe_direction(m, {0, 1, 2, 3}, amps, 9);
    int negative = 0, total = 0;
    for (std::size_t k = 7; k + 1 < amps.size(); ++k) {
        const double second = p.energies[k + 1] - 2.0 * p.energies[k] + p.energies[k - 1];
        negative += second < 0.0;
        ++total;
    }
    CHECK(negative * 2 > total);
    for (std::size_t k = 1; k < amps.size(); ++k) CHECK(p.energies[k] >= p.energies[k - 1]);
}
