#include "crbig/tensor.hpp"

#include <cmath>
#include <string>

#include "crbig/error.hpp"

namespace crbig {

namespace {

std::string shape_str(const Shape& s) {
    return "(" + std::to_string(s.height) + "," + std::to_string(s.width) + "," +
           std::to_string(s.channels) + ")";
}

// Input coordinate hit by output coordinate `o` through tap `a`, or -1 when
// it falls into the zero padding.
inline long tap_coord(std::size_t o, std::size_t a, std::size_t stride, std::size_t pad,
                      std::size_t extent) {
    const long p = static_cast<long>(o * stride + a) - static_cast<long>(pad);
    return (p < 0 || p >= static_cast<long>(extent)) ? -1 : p;
}

} // namespace

ImageTensor::ImageTensor(Shape shape, double fill) : shape_(shape), data_(shape.size(), fill) {
    if (shape.height == 0 || shape.width == 0 || shape.channels == 0) {
        fail(ErrorKind::ShapeMismatch, "tensor dimensions must be positive, got " + shape_str(shape));
    }
}

ImageTensor::ImageTensor(Shape shape, std::vector<double> data)
    : shape_(shape), data_(std::move(data)) {
    if (shape.height == 0 || shape.width == 0 || shape.channels == 0) {
        fail(ErrorKind::ShapeMismatch, "tensor dimensions must be positive, got " + shape_str(shape));
    }
    if (data_.size() != shape.size()) {
        fail(ErrorKind::ShapeMismatch, "data length " + std::to_string(data_.size()) +
                                           " does not match shape " + shape_str(shape));
    }
}

bool ImageTensor::all_finite() const noexcept {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Shape batch_shape(const ImageBatch& batch) {
    if (batch.empty()) fail(ErrorKind::ShapeMismatch, "empty batch");
    const Shape s = batch.front().shape();
    for (const auto& img : batch) {
        if (img.shape() != s) {
            fail(ErrorKind::ShapeMismatch, "batch mixes shapes " + shape_str(s) + " and " +
                                               shape_str(img.shape()));
        }
    }
    return s;
}

ConvFilter::ConvFilter(std::size_t k_h, std::size_t k_w, std::size_t ch_in, std::size_t ch_out,
                       std::size_t stride)
    : ConvFilter(k_h, k_w, ch_in, ch_out, stride,
                 std::vector<double>(k_h * k_w * ch_in * ch_out, 0.0)) {}

ConvFilter::ConvFilter(std::size_t k_h, std::size_t k_w, std::size_t ch_in, std::size_t ch_out,
                       std::size_t stride, std::vector<double> weights)
    : k_h_(k_h), k_w_(k_w), ch_in_(ch_in), ch_out_(ch_out), stride_(stride),
      weights_(std::move(weights)) {
    if (k_h == 0 || k_w == 0 || ch_in == 0 || ch_out == 0 || stride == 0) {
        fail(ErrorKind::ShapeMismatch, "filter dimensions and stride must be positive");
    }
    if (ch_out != ch_in * stride * stride) {
        fail(ErrorKind::ShapeMismatch,
             "ch_out must equal ch_in * stride^2 (ch_in=" + std::to_string(ch_in) +
                 ", ch_out=" + std::to_string(ch_out) + ", stride=" + std::to_string(stride) + ")");
    }
    if (k_h % stride != 0 || k_w % stride != 0) {
        fail(ErrorKind::ShapeMismatch, "kernel size must be a multiple of the stride");
    }
    if (weights_.size() != k_h * k_w * ch_in * ch_out) {
        fail(ErrorKind::ShapeMismatch, "weight count does not match filter dimensions");
    }
}

Shape ConvFilter::output_shape(const Shape& in) const {
    if (in.channels != ch_in_) {
        fail(ErrorKind::ShapeMismatch, "input has " + std::to_string(in.channels) +
                                           " channels, filter expects " + std::to_string(ch_in_));
    }
    if (in.height % stride_ != 0 || in.width % stride_ != 0) {
        fail(ErrorKind::ShapeMismatch, "input " + shape_str(in) + " not divisible by stride " +
                                           std::to_string(stride_));
    }
    return {in.height / stride_, in.width / stride_, ch_out_};
}

Shape ConvFilter::input_shape(const Shape& out) const {
    if (out.channels != ch_out_) {
        fail(ErrorKind::ShapeMismatch, "activation has " + std::to_string(out.channels) +
                                           " channels, filter produces " + std::to_string(ch_out_));
    }
    return {out.height * stride_, out.width * stride_, ch_in_};
}

ConvFilter delta_filter(std::size_t channels) { return delta_filter(channels, 1); }

ConvFilter delta_filter(std::size_t channels, std::size_t k) {
    ConvFilter f(k, k, channels, channels, 1);
    const std::size_t centre = (k - 1) / 2;
    for (std::size_t c = 0; c < channels; ++c) f.weight(centre, centre, c, c) = 1.0;
    return f;
}

ConvFilter space_to_depth_filter(std::size_t ch_in, std::size_t stride) {
    ConvFilter f(stride, stride, ch_in, ch_in * stride * stride, stride);
    for (std::size_t a = 0; a < stride; ++a) {
        for (std::size_t b = 0; b < stride; ++b) {
            for (std::size_t c = 0; c < ch_in; ++c) {
                f.weight(a, b, c, (a * stride + b) * ch_in + c) = 1.0;
            }
        }
    }
    return f;
}

ImageTensor conv_forward(const ImageTensor& x, const ConvFilter& f) {
    const Shape in = x.shape();
    ImageTensor y(f.output_shape(in));
    const std::size_t cin = f.ch_in();
    const std::size_t cout = f.ch_out();
    const double* w = f.weights().data();
    for (std::size_t i = 0; i < y.height(); ++i) {
        for (std::size_t j = 0; j < y.width(); ++j) {
            double* out = &y.at(i, j, 0);
            for (std::size_t a = 0; a < f.k_h(); ++a) {
                const long p = tap_coord(i, a, f.stride(), f.pad_h(), in.height);
                if (p < 0) continue;
                for (std::size_t b = 0; b < f.k_w(); ++b) {
                    const long q = tap_coord(j, b, f.stride(), f.pad_w(), in.width);
                    if (q < 0) continue;
                    const double* xin = x.data().data() + x.index(static_cast<std::size_t>(p), static_cast<std::size_t>(q), 0);
                    const double* wtap = w + f.weight_index(a, b, 0, 0);
                    for (std::size_t c = 0; c < cin; ++c) {
                        const double xv = xin[c];
                        const double* wrow = wtap + c * cout;
                        for (std::size_t o = 0; o < cout; ++o) out[o] += xv * wrow[o];
                    }
                }
            }
        }
    }
    return y;
}

ImageTensor conv_transpose(const ImageTensor& y, const ConvFilter& f) {
    const Shape in = f.input_shape(y.shape());
    ImageTensor x(in);
    const std::size_t cin = f.ch_in();
    const std::size_t cout = f.ch_out();
    const double* w = f.weights().data();
    for (std::size_t i = 0; i < y.height(); ++i) {
        for (std::size_t j = 0; j < y.width(); ++j) {
            const double* yin = y.data().data() + y.index(i, j, 0);
            for (std::size_t a = 0; a < f.k_h(); ++a) {
                const long p = tap_coord(i, a, f.stride(), f.pad_h(), in.height);
                if (p < 0) continue;
                for (std::size_t b = 0; b < f.k_w(); ++b) {
                    const long q = tap_coord(j, b, f.stride(), f.pad_w(), in.width);
                    if (q < 0) continue;
                    double* xout = x.data().data() + x.index(static_cast<std::size_t>(p), static_cast<std::size_t>(q), 0);
                    const double* wtap = w + f.weight_index(a, b, 0, 0);
                    for (std::size_t c = 0; c < cin; ++c) {
                        const double* wrow = wtap + c * cout;
                        double acc = 0.0;
                        for (std::size_t o = 0; o < cout; ++o) acc += wrow[o] * yin[o];
                        xout[c] += acc;
                    }
                }
            }
        }
    }
    return x;
}

void conv_weight_grad(const ImageTensor& x, const ImageTensor& out_grad, const ConvFilter& f,
                      std::span<double> grad) {
    const Shape in = x.shape();
    if (f.output_shape(in) != out_grad.shape()) {
        fail(ErrorKind::ShapeMismatch, "output gradient shape does not match conv output");
    }
    if (grad.size() != f.weights().size()) {
        fail(ErrorKind::ShapeMismatch, "gradient buffer has wrong length");
    }
    const std::size_t cin = f.ch_in();
    const std::size_t cout = f.ch_out();
    for (std::size_t i = 0; i < out_grad.height(); ++i) {
        for (std::size_t j = 0; j < out_grad.width(); ++j) {
            const double* g = out_grad.data().data() + out_grad.index(i, j, 0);
            for (std::size_t a = 0; a < f.k_h(); ++a) {
                const long p = tap_coord(i, a, f.stride(), f.pad_h(), in.height);
                if (p < 0) continue;
                for (std::size_t b = 0; b < f.k_w(); ++b) {
                    const long q = tap_coord(j, b, f.stride(), f.pad_w(), in.width);
                    if (q < 0) continue;
                    const double* xin = x.data().data() + x.index(static_cast<std::size_t>(p), static_cast<std::size_t>(q), 0);
                    double* gtap = grad.data() + f.weight_index(a, b, 0, 0);
                    for (std::size_t c = 0; c < cin; ++c) {
                        const double xv = xin[c];
                        double* grow = gtap + c * cout;
                        for (std::size_t o = 0; o < cout; ++o) grow[o] += xv * g[o];
                    }
                }
            }
        }
    }
}

Eigen::SparseMatrix<double> filter_as_sparse(const ConvFilter& f, std::size_t h, std::size_t w) {
    const Shape in{h, w, f.ch_in()};
    if (in.size() > kMaxMatrixElements) {
        fail(ErrorKind::TooLarge, "convolution matrix for " + shape_str(in) +
                                      " exceeds " + std::to_string(kMaxMatrixElements) +
                                      " input elements");
    }
    const Shape out = f.output_shape(in);
    const ImageTensor probe_in(in);
    const ImageTensor probe_out(out);

    std::vector<Eigen::Triplet<double>> triplets;
    for (std::size_t i = 0; i < out.height; ++i) {
        for (std::size_t j = 0; j < out.width; ++j) {
            for (std::size_t a = 0; a < f.k_h(); ++a) {
                const long p = tap_coord(i, a, f.stride(), f.pad_h(), h);
                if (p < 0) continue;
                for (std::size_t b = 0; b < f.k_w(); ++b) {
                    const long q = tap_coord(j, b, f.stride(), f.pad_w(), w);
                    if (q < 0) continue;
                    for (std::size_t c = 0; c < f.ch_in(); ++c) {
                        const auto col = probe_in.index(static_cast<std::size_t>(p),
                                                        static_cast<std::size_t>(q), c);
                        for (std::size_t o = 0; o < f.ch_out(); ++o) {
                            const double v = f.weight(a, b, c, o);
                            if (v != 0.0) {
                                triplets.emplace_back(static_cast<int>(probe_out.index(i, j, o)),
                                                      static_cast<int>(col), v);
                            }
                        }
                    }
                }
            }
        }
    }
    Eigen::SparseMatrix<double> m(static_cast<Eigen::Index>(out.size()),
                                  static_cast<Eigen::Index>(in.size()));
    m.setFromTriplets(triplets.begin(), triplets.end());
    return m;
}

Eigen::MatrixXd filter_as_matrix(const ConvFilter& f, std::size_t h, std::size_t w) {
    return Eigen::MatrixXd(filter_as_sparse(f, h, w));
}

double dot(const ImageTensor& a, const ImageTensor& b) {
    if (a.size() != b.size()) fail(ErrorKind::ShapeMismatch, "dot of tensors with different sizes");
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) acc += a.data()[k] * b.data()[k];
    return acc;
}

} // namespace crbig
