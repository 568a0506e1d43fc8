#include "crbig/model.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <string>

#include "binary_io.hpp"
#include "crbig/error.hpp"
#include "crbig/parallel.hpp"
#include "crbig/rng.hpp"
#include "json.hpp"

namespace crbig {

using nlohmann::json;

ArchitectureSpec ArchitectureSpec::default_arch() { return uniform(5, 5, 2, 7); }

ArchitectureSpec ArchitectureSpec::uniform(std::size_t blocks, std::size_t layers, std::size_t stride,
                                           std::size_t kernel, std::size_t sub_kernel) {
    ArchitectureSpec a;
    a.blocks.assign(blocks, BlockSpec{stride, kernel, layers, sub_kernel});
    return a;
}

std::size_t ArchitectureSpec::total_layers() const noexcept {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.layers;
    return n;
}

std::size_t ArchitectureSpec::layers_through_block(std::size_t count) const {
    if (count > blocks.size()) {
        fail(ErrorKind::ShapeMismatch, "block " + std::to_string(count) + " beyond the " +
                                           std::to_string(blocks.size()) + " blocks of the model");
    }
    std::size_t n = 0;
    for (std::size_t b = 0; b < count; ++b) n += blocks[b].layers;
    return n;
}

namespace {

std::size_t clamp_kernel(std::size_t k, std::size_t stride, std::size_t n) {
    if (stride == 1) return std::min(k, 2 * n - 1);
    const std::size_t reach = (2 * n - stride) / stride * stride;
    return std::min(k, reach);
}

} // namespace

std::vector<LayerGeometry> plan_layers(const ArchitectureSpec& arch, const Shape& input) {
    std::vector<LayerGeometry> plan;
    Shape cur = input;
    for (std::size_t b = 0; b < arch.blocks.size(); ++b) {
        const BlockSpec& blk = arch.blocks[b];
        const std::string where = "block " + std::to_string(b);
        if (blk.stride == 0 || blk.kernel == 0 || blk.layers == 0) {
            fail(ErrorKind::ArchMismatch, where + ": stride, kernel and layers must be positive");
        }
        for (std::size_t l = 0; l < blk.layers; ++l) {
            LayerGeometry g;
            g.block = b;
            g.stride = l == 0 ? blk.stride : 1;
            const std::size_t k = (l == 0 && g.stride > 1) ? blk.subsampling_kernel() : blk.kernel;
            if (k % g.stride != 0) {
                fail(ErrorKind::ArchMismatch, where + ": kernel " + std::to_string(k) +
                                                  " is not a multiple of stride " +
                                                  std::to_string(g.stride));
            }
            if (cur.height % g.stride != 0 || cur.width % g.stride != 0) {
                fail(ErrorKind::ArchMismatch,
                     where + ": stride " + std::to_string(g.stride) + " does not tile " +
                         std::to_string(cur.height) + "x" + std::to_string(cur.width));
            }
            g.kernel = clamp_kernel(k, g.stride, std::min(cur.height, cur.width));
            g.input = cur;
            g.output = {cur.height / g.stride, cur.width / g.stride,
                        cur.channels * g.stride * g.stride};
            cur = g.output;
            plan.push_back(g);
        }
    }
    return plan;
}

RbigModel::RbigModel(Shape input_shape) : input_shape_(input_shape) {
    if (input_shape.size() == 0) fail(ErrorKind::ShapeMismatch, "model input shape must be positive");
}

RbigModel::RbigModel(Shape input_shape, ArchitectureSpec arch, std::vector<RbigLayer> layers,
                     TrainingMeta meta)
    : input_shape_(input_shape), arch_(std::move(arch)), layers_(std::move(layers)),
      meta_(std::move(meta)) {
    if (input_shape_.size() == 0) fail(ErrorKind::CorruptModel, "model input shape must be positive");
    std::vector<LayerGeometry> plan;
    try {
        plan = plan_layers(arch_, input_shape_);
    } catch (const Error& e) {
        fail(ErrorKind::CorruptModel, std::string("architecture: ") + e.what());
    }
    if (plan.size() != layers_.size()) {
        fail(ErrorKind::CorruptModel, "architecture declares " + std::to_string(plan.size()) +
                                          " layers, model has " + std::to_string(layers_.size()));
    }
    for (std::size_t i = 0; i < plan.size(); ++i) {
        const auto& f = layers_[i].filter;
        const auto& g = plan[i];
        if (f.stride() != g.stride || f.ch_in() != g.input.channels || f.k_h() != g.kernel ||
            f.k_w() != g.kernel || layers_[i].marginal.channels() != f.ch_in()) {
            fail(ErrorKind::CorruptModel, "layer " + std::to_string(i) +
                                              " does not match its planned geometry");
        }
    }
}

Shape RbigModel::shape_after(std::size_t n) const {
    if (n > layers_.size()) fail(ErrorKind::ShapeMismatch, "layer count beyond model depth");
    Shape s = input_shape_;
    for (std::size_t i = 0; i < n; ++i) s = layers_[i].filter.output_shape(s);
    return s;
}

Shape RbigModel::output_shape() const { return shape_after(layers_.size()); }

ImageTensor forward_layers(const RbigModel& m, const ImageTensor& x, std::size_t n_layers) {
    if (x.shape() != m.input_shape()) {
        fail(ErrorKind::ShapeMismatch, "input shape does not match the model input");
    }
    if (n_layers > m.layers().size()) fail(ErrorKind::ShapeMismatch, "layer count beyond model depth");
    ImageTensor cur = x;
    for (std::size_t i = 0; i < n_layers; ++i) {
        const auto& layer = m.layers()[i];
        cur = conv_forward(marginal_forward(layer.marginal, cur), layer.filter);
    }
    return cur;
}

ImageTensor inverse_layers(const RbigModel& m, const ImageTensor& z, std::size_t n_layers) {
    if (n_layers > m.layers().size()) fail(ErrorKind::ShapeMismatch, "layer count beyond model depth");
    if (z.shape() != m.shape_after(n_layers)) {
        fail(ErrorKind::ShapeMismatch, "latent shape does not match the model output");
    }
    ImageTensor cur = z;
    for (std::size_t i = n_layers; i-- > 0;) {
        const auto& layer = m.layers()[i];
        cur = marginal_inverse(layer.marginal, conv_transpose(cur, layer.filter));
    }
    return cur;
}

ImageTensor forward(const RbigModel& m, const ImageTensor& x) {
    return forward_layers(m, x, m.layers().size());
}

ImageTensor inverse(const RbigModel& m, const ImageTensor& z) {
    return inverse_layers(m, z, m.layers().size());
}

std::string dataset_digest(const ImageBatch& data) {
    std::uint64_t h = detail::kFnvOffset;
    std::vector<unsigned char> buf;
    for (const auto& img : data) {
        buf.clear();
        for (double v : img.data()) detail::put_f64(buf, v);
        h = detail::fnv1a(h, buf.data(), buf.size());
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

TrainResult train_model(const ImageBatch& data, const ArchitectureSpec& arch,
                        const TrainConfig& cfg, const ImageBatch& validation,
                        const MarginalOptions& marginal, const LayerObserver& observer) {
    cfg.validate();
    const Shape input = batch_shape(data);
    if (batch_shape(validation) != input) {
        fail(ErrorKind::ShapeMismatch, "validation images differ in shape from training images");
    }
    const std::vector<LayerGeometry> plan = plan_layers(arch, input);

    TrainingMeta meta;
    meta.dataset_digest = dataset_digest(data);
    meta.seed = cfg.seed;
    meta.config = cfg;
    meta.marginal = marginal;
    meta.n_train = data.size();
    meta.n_valid = validation.size();

    TrainResult result;
    result.mi.n_samples_train = data.size();
    result.mi.n_samples_valid = validation.size();

    std::vector<RbigLayer> layers;
    ImageBatch train_cur = data;
    ImageBatch valid_cur = validation;

    auto map_batch = [](ImageBatch& batch, const auto& fn) {
        parallel_for(batch.size(), [&](std::size_t i) { batch[i] = fn(batch[i]); });
    };

    for (std::size_t li = 0; li < plan.size(); ++li) {
        const LayerGeometry& g = plan[li];
        RbigLayer layer;
        layer.marginal = fit_marginal(train_cur, marginal);
        map_batch(train_cur, [&](const ImageTensor& x) { return marginal_forward(layer.marginal, x); });
        map_batch(valid_cur, [&](const ImageTensor& x) { return marginal_forward(layer.marginal, x); });

        const ConvFilter init =
            init_filter(g.kernel, g.kernel, g.input.channels, g.stride, stream_seed(cfg.seed, 2 * li));
        TrainConfig layer_cfg = cfg;
        layer_cfg.seed = stream_seed(cfg.seed, 2 * li + 1);
        auto [filter, report] = train_filter(init, train_cur, layer_cfg);
        layer.filter = std::move(filter);
        layer.trained_residual = report.epochs.back().reconstruction_rmse;
        layer.ortho_residual = report.orthonormality_residual;

        ImageBatch train_next(train_cur.size());
        ImageBatch valid_next(valid_cur.size());
        parallel_for(train_cur.size(),
                     [&](std::size_t i) { train_next[i] = conv_forward(train_cur[i], layer.filter); });
        parallel_for(valid_cur.size(),
                     [&](std::size_t i) { valid_next[i] = conv_forward(valid_cur[i], layer.filter); });

        layer.delta_mi_train = delta_mi_layer(train_cur, train_next, true);
        const double delta_valid = delta_mi_layer(valid_cur, valid_next, true);
        result.mi.append(layer.delta_mi_train, delta_valid, layer.ortho_residual);
        result.layer_reports.push_back(std::move(report));
        layers.push_back(std::move(layer));

        train_cur = std::move(train_next);
        valid_cur = std::move(valid_next);

        if (observer) {
            ArchitectureSpec partial_arch;
            std::size_t remaining = layers.size();
            for (const auto& blk : arch.blocks) {
                if (remaining == 0) break;
                BlockSpec b = blk;
                b.layers = std::min(b.layers, remaining);
                remaining -= b.layers;
                partial_arch.blocks.push_back(b);
            }
            observer(li, RbigModel(input, partial_arch, layers, meta));
        }
    }

    result.model = RbigModel(input, arch, std::move(layers), std::move(meta));
    return result;
}

// --- container format ---------------------------------------------------

namespace {

constexpr unsigned char kMagic[4] = {'C', 'R', 'B', 'G'};

json meta_to_json(const TrainingMeta& m) {
    return json{
        {"dataset_digest", m.dataset_digest},
        {"seed", m.seed},
        {"n_train", m.n_train},
        {"n_valid", m.n_valid},
        {"config",
         {{"lambda_act", m.config.lambda_act},
          {"lambda_w", m.config.lambda_w},
          {"learning_rate", m.config.learning_rate},
          {"epochs", m.config.epochs},
          {"batch_size", m.config.batch_size},
          {"seed", m.config.seed},
          {"target_residual", m.config.target_residual}}},
        {"marginal",
         {{"bins", m.marginal.bins},
          {"tail_extension", m.marginal.tail_extension},
          {"clamp_eps", m.marginal.clamp_eps}}},
    };
}

TrainingMeta meta_from_json(const json& j) {
    TrainingMeta m;
    m.dataset_digest = j.at("dataset_digest").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.n_train = j.at("n_train").get<std::size_t>();
    m.n_valid = j.at("n_valid").get<std::size_t>();
    const json& c = j.at("config");
    m.config.lambda_act = c.at("lambda_act").get<double>();
    m.config.lambda_w = c.at("lambda_w").get<double>();
    m.config.learning_rate = c.at("learning_rate").get<double>();
    m.config.epochs = c.at("epochs").get<std::size_t>();
    m.config.batch_size = c.at("batch_size").get<std::size_t>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
    m.config.target_residual = c.at("target_residual").get<double>();
    const json& mg = j.at("marginal");
    m.marginal.bins = mg.at("bins").get<std::size_t>();
    m.marginal.tail_extension = mg.at("tail_extension").get<double>();
    m.marginal.clamp_eps = mg.at("clamp_eps").get<double>();
    return m;
}

} // namespace

std::vector<unsigned char> serialize_model(const RbigModel& m) {
    json header;
    header["format"] = "crbig-model";
    header["input_shape"] = {m.input_shape().height, m.input_shape().width, m.input_shape().channels};
    json blocks = json::array();
    for (const auto& b : m.arch().blocks) {
        blocks.push_back({{"stride", b.stride}, {"kernel", b.kernel}, {"layers", b.layers},
                          {"sub_kernel", b.sub_kernel}});
    }
    header["arch"] = {{"blocks", blocks}};

    std::vector<unsigned char> blob;
    json layers = json::array();
    for (const auto& layer : m.layers()) {
        json knots = json::array();
        for (const auto& ch : layer.marginal.channel_cdfs()) {
            knots.push_back(ch.knots_x.size());
            for (double v : ch.knots_x) detail::put_f64(blob, v);
            for (double v : ch.knots_u) detail::put_f64(blob, v);
        }
        for (double w : layer.filter.weights()) detail::put_f64(blob, w);
        const auto& f = layer.filter;
        layers.push_back({
            {"k_h", f.k_h()},
            {"k_w", f.k_w()},
            {"ch_in", f.ch_in()},
            {"ch_out", f.ch_out()},
            {"stride", f.stride()},
            {"knots", knots},
            {"tail_extension", layer.marginal.tail_extension()},
            {"clamp_eps", layer.marginal.clamp_eps()},
            {"trained_residual", layer.trained_residual},
            {"ortho_residual", layer.ortho_residual},
            {"delta_mi_train", layer.delta_mi_train},
        });
    }
    header["layers"] = layers;
    header["training_meta"] = meta_to_json(m.training_meta());
    header["blob_bytes"] = blob.size();

    const std::string text = header.dump();
    std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
    detail::put_u32(out, kModelFormatVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    out.insert(out.end(), blob.begin(), blob.end());
    return out;
}

RbigModel deserialize_model(const std::vector<unsigned char>& bytes) {
    auto corrupt = [](const std::string& why) { fail(ErrorKind::CorruptModel, why); };
    if (bytes.size() < 12 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
        corrupt("bad magic");
    }
    const std::uint32_t version = detail::get_u32(bytes.data() + 4);
    if (version != kModelFormatVersion) {
        corrupt("unsupported model format version " + std::to_string(version));
    }
    const std::uint32_t header_len = detail::get_u32(bytes.data() + 8);
    if (bytes.size() - 12 < header_len) corrupt("truncated header");

    json header;
    try {
        header = json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
    } catch (const json::exception& e) {
        corrupt(std::string("header is not valid JSON: ") + e.what());
    }

    std::size_t pos = 12 + header_len;
    const std::size_t blob_size = bytes.size() - pos;
    auto take = [&](std::size_t count) {
        if ((bytes.size() - pos) / 8 < count) corrupt("truncated blob");
        std::vector<double> v(count);
        for (std::size_t i = 0; i < count; ++i, pos += 8) v[i] = detail::get_f64(bytes.data() + pos);
        return v;
    };

    try {
        if (header.at("format").get<std::string>() != "crbig-model") corrupt("not a model container");
        if (header.at("blob_bytes").get<std::size_t>() != blob_size) {
            corrupt("blob length " + std::to_string(blob_size) + " does not match header " +
                    header.at("blob_bytes").dump());
        }
        const auto& is = header.at("input_shape");
        const Shape input{is.at(0).get<std::size_t>(), is.at(1).get<std::size_t>(),
                          is.at(2).get<std::size_t>()};
        ArchitectureSpec arch;
        for (const auto& b : header.at("arch").at("blocks")) {
            arch.blocks.push_back({b.at("stride").get<std::size_t>(), b.at("kernel").get<std::size_t>(),
                                   b.at("layers").get<std::size_t>(),
                                   b.at("sub_kernel").get<std::size_t>()});
        }
        std::vector<RbigLayer> layers;
        for (const auto& lj : header.at("layers")) {
            RbigLayer layer;
            std::vector<ChannelCdf> cdfs;
            for (const auto& kn : lj.at("knots")) {
                const auto count = kn.get<std::size_t>();
                ChannelCdf cdf;
                cdf.knots_x = take(count);
                cdf.knots_u = take(count);
                cdfs.push_back(std::move(cdf));
            }
            layer.marginal = MarginalMap(std::move(cdfs), lj.at("tail_extension").get<double>(),
                                         lj.at("clamp_eps").get<double>());
            const auto k_h = lj.at("k_h").get<std::size_t>();
            const auto k_w = lj.at("k_w").get<std::size_t>();
            const auto ch_in = lj.at("ch_in").get<std::size_t>();
            const auto ch_out = lj.at("ch_out").get<std::size_t>();
            const auto stride = lj.at("stride").get<std::size_t>();
            auto weights = take(k_h * k_w * ch_in * ch_out);
            layer.filter = ConvFilter(k_h, k_w, ch_in, ch_out, stride, std::move(weights));
            layer.trained_residual = lj.at("trained_residual").get<double>();
            layer.ortho_residual = lj.at("ortho_residual").get<double>();
            layer.delta_mi_train = lj.at("delta_mi_train").get<double>();
            layers.push_back(std::move(layer));
        }
        if (pos != bytes.size()) corrupt("trailing bytes after the last layer");
        return RbigModel(input, std::move(arch), std::move(layers),
                         meta_from_json(header.at("training_meta")));
    } catch (const json::exception& e) {
        corrupt(std::string("malformed header: ") + e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::CorruptModel) throw;
        corrupt(std::string("inconsistent model: ") + e.what());
    }
}

void save_model(const RbigModel& m, const std::filesystem::path& path) {
    const auto bytes = serialize_model(m);
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::Io, "failed writing " + path.string());
}

RbigModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_model(bytes);
}

} // namespace crbig
