#pragma once

// Reference implementations used only by tests. They are written
// independently of the library code paths they check: naive loops, closed
// forms and textbook definitions.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "crbig/rng.hpp"
#include "crbig/tensor.hpp"

namespace oracle {

using crbig::ConvFilter;
using crbig::ImageBatch;
using crbig::ImageTensor;
using crbig::Shape;

// Direct-sum strided convolution: out(i, j, o) = sum over taps that land
// inside the image of w(a, b, c, o) * x(i*s + a - p_h, j*s + b - p_w, c).
inline ImageTensor naive_conv(const ImageTensor& x, const ConvFilter& f) {
    const long s = static_cast<long>(f.stride());
    const long ph = static_cast<long>((f.k_h() - f.stride()) / 2);
    const long pw = static_cast<long>((f.k_w() - f.stride()) / 2);
    const long h = static_cast<long>(x.height());
    const long w = static_cast<long>(x.width());
    ImageTensor out(Shape{x.height() / f.stride(), x.width() / f.stride(), f.ch_out()});
    for (long i = 0; i < h / s; ++i)
        for (long j = 0; j < w / s; ++j)
            for (std::size_t o = 0; o < f.ch_out(); ++o) {
                double acc = 0.0;
                for (long a = 0; a < static_cast<long>(f.k_h()); ++a)
                    for (long b = 0; b < static_cast<long>(f.k_w()); ++b) {
                        const long r = i * s + a - ph;
                        const long c = j * s + b - pw;
                        if (r < 0 || c < 0 || r >= h || c >= w) continue;
                        for (std::size_t ci = 0; ci < f.ch_in(); ++ci) {
                            acc += f.weight(a, b, ci, o) *
                                   x.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c), ci);
                        }
                    }
                out.at(i, j, o) = acc;
            }
    return out;
}

// Dense matrix built column by column from naive_conv on basis images.
inline std::vector<std::vector<double>> dense_matrix(const ConvFilter& f, std::size_t h,
                                                     std::size_t w) {
    const Shape in{h, w, f.ch_in()};
    const std::size_t n_in = in.size();
    const std::size_t n_out = (h / f.stride()) * (w / f.stride()) * f.ch_out();
    std::vector<std::vector<double>> m(n_out, std::vector<double>(n_in, 0.0));
    for (std::size_t j = 0; j < n_in; ++j) {
        ImageTensor e(in);
        e.values()[j] = 1.0;
        const ImageTensor col = naive_conv(e, f);
        for (std::size_t i = 0; i < n_out; ++i) m[i][j] = col.values()[i];
    }
    return m;
}

inline std::vector<double> matvec(const std::vector<std::vector<double>>& m,
                                  const std::vector<double>& v, bool transpose = false) {
    const std::size_t rows = m.size();
    const std::size_t cols = rows ? m[0].size() : 0;
    std::vector<double> out(transpose ? cols : rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) {
            if (transpose)
                out[j] += m[i][j] * v[i];
            else
                out[i] += m[i][j] * v[j];
        }
    return out;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

inline ImageTensor random_tensor(const Shape& s, crbig::Rng& rng) {
    ImageTensor t(s);
    for (double& v : t.values()) v = rng.normal();
    return t;
}

inline ConvFilter random_filter(std::size_t k, std::size_t ch_in, std::size_t stride,
                                crbig::Rng& rng) {
    ConvFilter f(k, k, ch_in, ch_in * stride * stride, stride);
    for (double& v : f.weights()) v = rng.normal();
    return f;
}

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// One-sample Kolmogorov-Smirnov statistic against N(0, 1).
inline double ks_normal(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = std_normal_cdf(xs[i]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    return d;
}

// Asymptotic critical value of the KS statistic at alpha = 0.01.
inline double ks_critical_001(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

// Differential entropies in nats.
inline double gaussian_entropy(double sigma) {
    return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * sigma * sigma);
}
inline double uniform_entropy(double width) { return std::log(width); }
inline double exponential_entropy(double rate) { return 1.0 - std::log(rate); }

// Mutual information of a bivariate Gaussian with correlation rho.
inline double gaussian_pair_mi(double rho) { return -0.5 * std::log(1.0 - rho * rho); }

// Smooth oriented colour texture: a sum of a few plane waves per channel
// with shared phases, plus weak noise, tiled periodically.
inline ImageTensor procedural_texture(std::size_t size, std::uint64_t seed) {
    crbig::Rng rng(seed);
    struct Wave {
        double fx, fy, phase, amp[3];
    };
    std::vector<Wave> waves;
    for (int k = 0; k < 6; ++k) {
        Wave wv{};
        wv.fx = static_cast<double>(1 + rng.index(8));
        wv.fy = static_cast<double>(rng.index(8));
        wv.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (double& a : wv.amp) a = rng.uniform(0.02, 0.08);
        waves.push_back(wv);
    }
    ImageTensor t(Shape{size, size, 3});
    const double base[3] = {0.45, 0.55, 0.35};
    for (std::size_t i = 0; i < size; ++i)
        for (std::size_t j = 0; j < size; ++j)
            for (std::size_t c = 0; c < 3; ++c) {
                double v = base[c];
                for (const auto& wv : waves) {
                    const double arg = 2.0 * std::numbers::pi *
                                           (wv.fx * static_cast<double>(j) + wv.fy * static_cast<double>(i)) /
                                           static_cast<double>(size) +
                                       wv.phase;
                    v += wv.amp[c] * std::sin(arg);
                }
                t.at(i, j, c) = v + 0.02 * rng.normal();
            }
    return t;
}

// Dead-leaves image: opaque discs with power-law radii (density ~ 1/r^3,
// radii in [1, 16]) stacked front to back, grey level plus a small colour
// offset per disc, and Gaussian pixel noise of std 0.02.
inline ImageTensor dead_leaves(std::size_t size, std::uint64_t seed) {
    crbig::Rng rng(seed);
    ImageTensor t(Shape{size, size, 3});
    std::vector<char> covered(size * size, 0);
    std::size_t left = size * size;
    const double rmin = 1.0, rmax = 16.0;
    const double n = static_cast<double>(size);
    while (left > 0) {
        const double r = rmin * rmax / (rmax - rng.uniform() * (rmax - rmin));
        const double cx = rng.uniform(-rmax, n + rmax);
        const double cy = rng.uniform(-rmax, n + rmax);
        const double grey = rng.uniform();
        double col[3];
        for (double& c : col) c = std::clamp(grey + 0.1 * rng.normal(), 0.0, 1.0);
        const long i0 = std::max(0L, static_cast<long>(cy - r));
        const long i1 = std::min(static_cast<long>(size) - 1, static_cast<long>(cy + r));
        const long j0 = std::max(0L, static_cast<long>(cx - r));
        const long j1 = std::min(static_cast<long>(size) - 1, static_cast<long>(cx + r));
        for (long i = i0; i <= i1; ++i)
            for (long j = j0; j <= j1; ++j) {
                const double di = static_cast<double>(i) - cy;
                const double dj = static_cast<double>(j) - cx;
                const std::size_t k = static_cast<std::size_t>(i) * size + static_cast<std::size_t>(j);
                if (di * di + dj * dj > r * r || covered[k]) continue;
                covered[k] = 1;
                --left;
                for (std::size_t c = 0; c < 3; ++c) t.at(i, j, c) = col[c];
            }
    }
    for (double& v : t.values()) v += 0.02 * rng.normal();
    return t;
}

// Radially averaged power spectrum of the channel-mean image (DC excluded),
// by direct 2-D DFT. Bin r collects integer radii in [r, r + 1).
inline std::vector<double> radial_power_spectrum(const ImageTensor& img) {
    const std::size_t h = img.height();
    const std::size_t w = img.width();
    std::vector<double> gray(h * w, 0.0);
    double mean = 0.0;
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
            double v = 0.0;
            for (std::size_t c = 0; c < img.channels(); ++c) v += img.at(i, j, c);
            gray[i * w + j] = v / static_cast<double>(img.channels());
            mean += gray[i * w + j];
        }
    mean /= static_cast<double>(h * w);
    for (double& v : gray) v -= mean;

    const std::size_t nbins = std::min(h, w) / 2;
    std::vector<double> power(nbins, 0.0);
    std::vector<double> counts(nbins, 0.0);
    for (std::size_t u = 0; u < h; ++u)
        for (std::size_t v = 0; v < w; ++v) {
            const double fu = static_cast<double>(u <= h / 2 ? u : h - u);
            const double fv = static_cast<double>(v <= w / 2 ? v : w - v);
            const double r = std::sqrt(fu * fu + fv * fv);
            const auto bin = static_cast<std::size_t>(r);
            if (bin == 0 || bin >= nbins) continue;
            std::complex<double> acc = 0.0;
            for (std::size_t i = 0; i < h; ++i)
                for (std::size_t j = 0; j < w; ++j) {
                    const double ang = -2.0 * std::numbers::pi *
                                       (static_cast<double>(u * i) / static_cast<double>(h) +
                                        static_cast<double>(v * j) / static_cast<double>(w));
                    acc += gray[i * w + j] * std::polar(1.0, ang);
                }
            power[bin] += std::norm(acc);
            counts[bin] += 1.0;
        }
    std::vector<double> out;
    for (std::size_t b = 1; b < nbins; ++b) out.push_back(power[b] / std::max(counts[b], 1.0));
    return out;
}

inline std::vector<double> mean_radial_spectrum(const ImageBatch& batch) {
    std::vector<double> acc;
    for (const auto& img : batch) {
        const auto s = radial_power_spectrum(img);
        if (acc.empty()) acc.assign(s.size(), 0.0);
        for (std::size_t i = 0; i < s.size(); ++i) acc[i] += s[i] / static_cast<double>(batch.size());
    }
    return acc;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i] / n;
        mb += b[i] / n;
    }
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

inline std::vector<double> log_of(std::vector<double> v) {
    for (double& x : v) x = std::log(std::max(x, 1e-300));
    return v;
}

// Per-channel mean and standard deviation over a batch.
inline void channel_moments(const ImageBatch& batch, std::vector<double>& mean,
                            std::vector<double>& stddev) {
    const std::size_t ch = batch.at(0).channels();
    mean.assign(ch, 0.0);
    stddev.assign(ch, 0.0);
    std::vector<double> sq(ch, 0.0);
    double n = 0.0;
    for (const auto& img : batch)
        for (std::size_t i = 0; i < img.size(); ++i) {
            mean[i % ch] += img.values()[i];
            sq[i % ch] += img.values()[i] * img.values()[i];
        }
    n = static_cast<double>(batch.size() * batch[0].height() * batch[0].width());
    for (std::size_t c = 0; c < ch; ++c) {
        mean[c] /= n;
        stddev[c] = std::sqrt(std::max(sq[c] / n - mean[c] * mean[c], 0.0));
    }
}

} // namespace oracle
