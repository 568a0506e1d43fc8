#include "crbig/ortho_conv.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "crbig/error.hpp"
#include "crbig/parallel.hpp"
#include "crbig/rng.hpp"

namespace crbig {

namespace {

inline double sign(double v) noexcept { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

struct ItemTerms {
    double recon_mse = 0.0;
    double activity = 0.0;
    std::vector<double> grad;
};

// Reconstruction and activity terms of one image. When `want_grad` is set
// the gradient buffer is filled from zero.
void item_terms(const ConvFilter& f, const ImageTensor& x, double lambda_act, bool want_grad,
                ItemTerms& out) {
    const ImageTensor y = conv_forward(x, f);
    const ImageTensor xhat = conv_transpose(y, f);
    const double d = static_cast<double>(x.size());
    const double dy = static_cast<double>(y.size());

    ImageTensor g(x.shape());  // d(mse)/d(xhat)
    double sq = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double r = xhat.data()[k] - x.data()[k];
        sq += r * r;
        g.data()[k] = 2.0 * r / d;
    }
    double abs_sum = 0.0;
    for (double v : y.data()) abs_sum += std::abs(v);
    out.recon_mse = sq / d;
    out.activity = abs_sum / dy;
    if (!want_grad) return;

    out.grad.assign(f.weights().size(), 0.0);
    // xhat = C^T y: the transposed pass contributes <C g, y>.
    conv_weight_grad(g, y, f, out.grad);
    // y = C x feeds both the reconstruction and the activity penalty.
    ImageTensor upstream = conv_forward(g, f);
    if (lambda_act != 0.0) {
        const double scale = lambda_act / dy;
        for (std::size_t k = 0; k < y.size(); ++k) upstream.data()[k] += scale * sign(y.data()[k]);
    }
    conv_weight_grad(x, upstream, f, out.grad);
}

double weight_l1(const ConvFilter& f) {
    double s = 0.0;
    for (double w : f.weights()) s += std::abs(w);
    return s;
}

bool finite(double v) { return std::isfinite(v); }

// Evaluates `items` in waves of thread_count() and hands each result to
// `reduce` in index order.
template <class Reduce>
void for_items_ordered(const ConvFilter& f, const ImageBatch& data, std::span<const std::size_t> items,
                       double lambda_act, bool want_grad, Reduce reduce) {
    const std::size_t wave = std::max<std::size_t>(1, thread_count());
    std::vector<ItemTerms> slots(std::min(wave, items.size()));
    for (std::size_t start = 0; start < items.size(); start += wave) {
        const std::size_t count = std::min(wave, items.size() - start);
        parallel_for(count, [&](std::size_t k) {
            item_terms(f, data[items[start + k]], lambda_act, want_grad, slots[k]);
        });
        for (std::size_t k = 0; k < count; ++k) reduce(slots[k]);
    }
}

} // namespace

void TrainConfig::validate() const {
    auto bad = [](const std::string& field, const std::string& why) {
        fail(ErrorKind::InvalidConfig, field + ": " + why);
    };
    if (!(lambda_act >= 0.0) || !finite(lambda_act)) bad("lambda_act", "must be finite and >= 0");
    if (!(lambda_w >= 0.0) || !finite(lambda_w)) bad("lambda_w", "must be finite and >= 0");
    if (!(learning_rate > 0.0) || !finite(learning_rate)) bad("learning_rate", "must be > 0");
    if (epochs == 0) bad("epochs", "must be > 0");
    if (batch_size == 0) bad("batch_size", "must be > 0");
    if (!(target_residual > 0.0)) bad("target_residual", "must be > 0");
}

LossAndGrad loss_and_grad(const ConvFilter& f, const ImageBatch& batch, const TrainConfig& cfg) {
    const Shape s = batch_shape(batch);
    (void)f.output_shape(s);

    std::vector<std::size_t> items(batch.size());
    std::iota(items.begin(), items.end(), std::size_t{0});

    LossAndGrad out;
    out.grad.assign(f.weights().size(), 0.0);
    for_items_ordered(f, batch, items, cfg.lambda_act, true, [&](const ItemTerms& t) {
        out.reconstruction_mse += t.recon_mse;
        out.activity_l1 += t.activity;
        for (std::size_t k = 0; k < out.grad.size(); ++k) out.grad[k] += t.grad[k];
    });

    const double n = static_cast<double>(batch.size());
    out.reconstruction_mse /= n;
    out.activity_l1 /= n;
    for (double& g : out.grad) g /= n;
    for (std::size_t k = 0; k < out.grad.size(); ++k) {
        out.grad[k] += cfg.lambda_w * sign(f.weights()[k]);
    }
    out.loss = out.reconstruction_mse + cfg.lambda_act * out.activity_l1 + cfg.lambda_w * weight_l1(f);
    return out;
}

ConvFilter init_filter(std::size_t k_h, std::size_t k_w, std::size_t ch_in, std::size_t stride,
                       std::uint64_t seed) {
    ConvFilter f(k_h, k_w, ch_in, ch_in * stride * stride, stride);
    const auto rows = static_cast<Eigen::Index>(k_h * k_w * ch_in);
    const auto cols = static_cast<Eigen::Index>(f.ch_out());

    Rng rng(seed);
    const double std_dev = 1.0 / std::sqrt(static_cast<double>(rows));
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = std_dev * rng.normal();
    }
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
    for (Eigen::Index c = 0; c < cols; ++c) {
        if (r(c, c) < 0.0) q.col(c) *= -1.0;
    }
    for (Eigen::Index r_ = 0; r_ < rows; ++r_) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            f.weights()[static_cast<std::size_t>(r_ * cols + c)] = q(r_, c);
        }
    }
    return f;
}

std::pair<ConvFilter, TrainReport> train_filter(const ConvFilter& init, const ImageBatch& data,
                                                const TrainConfig& cfg) {
    cfg.validate();
    const Shape s = batch_shape(data);
    (void)init.output_shape(s);

    ConvFilter f = init;
    TrainReport report;
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::vector<std::size_t> all = order;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, order.size() - start);
            ImageBatch batch;
            batch.reserve(count);
            for (std::size_t k = 0; k < count; ++k) batch.push_back(data[order[start + k]]);
            const LossAndGrad lg = loss_and_grad(f, batch, cfg);
            if (!finite(lg.loss)) {
                fail(ErrorKind::Diverged, "loss became non-finite in epoch " + std::to_string(epoch));
            }
            for (std::size_t k = 0; k < lg.grad.size(); ++k) {
                f.weights()[k] -= cfg.learning_rate * lg.grad[k];
            }
        }

        double mse = 0.0;
        double act = 0.0;
        for_items_ordered(f, data, all, cfg.lambda_act, false, [&](const ItemTerms& t) {
            mse += t.recon_mse;
            act += t.activity;
        });
        const double n = static_cast<double>(data.size());
        EpochStats st{epoch, std::sqrt(mse / n), act / n, weight_l1(f)};
        if (!finite(st.reconstruction_rmse) || !finite(st.activity_l1) || !finite(st.weight_l1)) {
            fail(ErrorKind::Diverged, "training diverged in epoch " + std::to_string(epoch));
        }
        report.epochs.push_back(st);
        if (st.reconstruction_rmse <= cfg.target_residual) break;
    }

    if (s.size() <= kMaxMatrixElements) {
        report.orthonormality_residual = orthonormality_residual(f, s.height, s.width);
        report.orthonormality_exact = true;
    } else {
        report.orthonormality_residual = report.epochs.back().reconstruction_rmse;
        report.orthonormality_exact = false;
    }
    return {std::move(f), std::move(report)};
}

double orthonormality_residual(const ConvFilter& f, std::size_t h, std::size_t w) {
    const Eigen::SparseMatrix<double> c = filter_as_sparse(f, h, w);
    const Eigen::SparseMatrix<double> gram = c.transpose() * c;
    double sq = 0.0;
    for (Eigen::Index k = 0; k < gram.outerSize(); ++k) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(gram, k); it; ++it) {
            if (it.row() != it.col()) sq += it.value() * it.value();
        }
    }
    for (Eigen::Index i = 0; i < gram.rows(); ++i) {
        const double d = gram.coeff(i, i) - 1.0;
        sq += d * d;
    }
    return std::sqrt(sq / static_cast<double>(c.cols()));
}

} // namespace crbig
