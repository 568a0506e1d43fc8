#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace crbig {

struct Shape {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;

    std::size_t size() const noexcept { return height * width * channels; }
    friend bool operator==(const Shape&, const Shape&) = default;
};

// Dense h x w x ch image or activation map, row-major (h, w, ch).
class ImageTensor {
public:
    ImageTensor() = default;
    explicit ImageTensor(Shape shape, double fill = 0.0);
    ImageTensor(Shape shape, std::vector<double> data);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t height() const noexcept { return shape_.height; }
    std::size_t width() const noexcept { return shape_.width; }
    std::size_t channels() const noexcept { return shape_.channels; }
    std::size_t size() const noexcept { return data_.size(); }

    std::size_t index(std::size_t row, std::size_t col, std::size_t ch) const noexcept {
        return (row * shape_.width + col) * shape_.channels + ch;
    }
    double& at(std::size_t row, std::size_t col, std::size_t ch) noexcept {
        return data_[index(row, col, ch)];
    }
    double at(std::size_t row, std::size_t col, std::size_t ch) const noexcept {
        return data_[index(row, col, ch)];
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::vector<double>& values() noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    bool all_finite() const noexcept;

private:
    Shape shape_;
    std::vector<double> data_;
};

using ImageBatch = std::vector<ImageTensor>;

// Throws ShapeMismatch unless every image in the batch has the same shape.
Shape batch_shape(const ImageBatch& batch);

// Convolution kernel of size k_h x k_w x ch_in x ch_out (row-major in that
// order) applied with the given stride and "same" zero padding.
//
// Invariants: ch_out == ch_in * stride^2 so the associated matrix is square,
// and k_h, k_w are multiples of the stride.
class ConvFilter {
public:
    ConvFilter() = default;
    ConvFilter(std::size_t k_h, std::size_t k_w, std::size_t ch_in, std::size_t ch_out,
               std::size_t stride);
    ConvFilter(std::size_t k_h, std::size_t k_w, std::size_t ch_in, std::size_t ch_out,
               std::size_t stride, std::vector<double> weights);

    std::size_t k_h() const noexcept { return k_h_; }
    std::size_t k_w() const noexcept { return k_w_; }
    std::size_t ch_in() const noexcept { return ch_in_; }
    std::size_t ch_out() const noexcept { return ch_out_; }
    std::size_t stride() const noexcept { return stride_; }
    std::size_t pad_h() const noexcept { return (k_h_ - stride_) / 2; }
    std::size_t pad_w() const noexcept { return (k_w_ - stride_) / 2; }

    std::size_t weight_index(std::size_t a, std::size_t b, std::size_t c,
                             std::size_t o) const noexcept {
        return ((a * k_w_ + b) * ch_in_ + c) * ch_out_ + o;
    }
    double& weight(std::size_t a, std::size_t b, std::size_t c, std::size_t o) noexcept {
        return weights_[weight_index(a, b, c, o)];
    }
    double weight(std::size_t a, std::size_t b, std::size_t c, std::size_t o) const noexcept {
        return weights_[weight_index(a, b, c, o)];
    }

    std::vector<double>& weights() noexcept { return weights_; }
    const std::vector<double>& weights() const noexcept { return weights_; }

    Shape output_shape(const Shape& input) const;
    Shape input_shape(const Shape& output) const;

private:
    std::size_t k_h_ = 1;
    std::size_t k_w_ = 1;
    std::size_t ch_in_ = 1;
    std::size_t ch_out_ = 1;
    std::size_t stride_ = 1;
    std::vector<double> weights_ = {1.0};
};

// 1x1 stride-1 identity over `channels`.
ConvFilter delta_filter(std::size_t channels);
// k x k stride-1 kernel that is the identity at the centre tap (k odd).
ConvFilter delta_filter(std::size_t channels, std::size_t k);
// stride x stride kernel that rearranges each stride x stride block into
// channels: output channel (a * stride + b) * ch_in + c takes input (a, b, c).
ConvFilter space_to_depth_filter(std::size_t ch_in, std::size_t stride);

ImageTensor conv_forward(const ImageTensor& x, const ConvFilter& f);
ImageTensor conv_transpose(const ImageTensor& y, const ConvFilter& f);

// Gradient of <out_grad, conv_forward(x, f)> with respect to f.weights().
// Accumulates into `grad`, which must have f.weights().size() entries.
void conv_weight_grad(const ImageTensor& x, const ImageTensor& out_grad, const ConvFilter& f,
                      std::span<double> grad);

inline constexpr std::size_t kMaxMatrixElements = 16384;

// Matrix C with C * vec(x) == vec(conv_forward(x, f)) for inputs of size
// h x w x ch_in. Throws TooLarge past kMaxMatrixElements input elements.
Eigen::SparseMatrix<double> filter_as_sparse(const ConvFilter& f, std::size_t h, std::size_t w);
Eigen::MatrixXd filter_as_matrix(const ConvFilter& f, std::size_t h, std::size_t w);

double dot(const ImageTensor& a, const ImageTensor& b);

} // namespace crbig
