#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "crbig/info_metrics.hpp"
#include "crbig/marginal.hpp"
#include "crbig/ortho_conv.hpp"
#include "crbig/tensor.hpp"

namespace crbig {

// One block: a layer with `stride` (kernel `sub_kernel`, default
// 2 * stride) followed by stride-1 layers with `kernel`. A stride-1 block
// uses `kernel` throughout.
struct BlockSpec {
    std::size_t stride = 1;
    std::size_t kernel = 7;
    std::size_t layers = 1;
    std::size_t sub_kernel = 0;

    std::size_t subsampling_kernel() const noexcept {
        return sub_kernel != 0 ? sub_kernel : 2 * stride;
    }
    friend bool operator==(const BlockSpec&, const BlockSpec&) = default;
};

struct ArchitectureSpec {
    std::vector<BlockSpec> blocks;

    // 5 blocks of 5 layers, stride 2, kernel 7 (subsampling kernel 4).
    static ArchitectureSpec default_arch();
    static ArchitectureSpec uniform(std::size_t blocks, std::size_t layers, std::size_t stride,
                                    std::size_t kernel, std::size_t sub_kernel = 0);

    std::size_t total_layers() const noexcept;
    // Number of layers in the first `blocks` blocks.
    std::size_t layers_through_block(std::size_t blocks) const;

    friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

struct LayerGeometry {
    std::size_t block = 0;
    Shape input;
    Shape output;
    std::size_t stride = 1;
    // Requested kernel clamped to the largest size whose every tap can
    // reach the input (2n - 1 for stride 1, the largest multiple of the
    // stride <= 2n - stride otherwise, n = min(height, width)).
    std::size_t kernel = 1;
};

// Throws ArchMismatch when a stride does not tile the current spatial size
// or a subsampling kernel is not a multiple of its stride.
std::vector<LayerGeometry> plan_layers(const ArchitectureSpec& arch, const Shape& input);

struct RbigLayer {
    MarginalMap marginal;
    ConvFilter filter;
    double trained_residual = 0.0;  // final reconstruction RMSE of the filter
    double ortho_residual = 0.0;    // see TrainReport::orthonormality_residual
    double delta_mi_train = 0.0;
};

struct TrainingMeta {
    std::string dataset_digest;  // FNV-1a 64 of the training data, hex
    std::uint64_t seed = 0;
    TrainConfig config;
    MarginalOptions marginal;
    std::size_t n_train = 0;
    std::size_t n_valid = 0;
};

class RbigModel {
public:
    RbigModel() = default;
    explicit RbigModel(Shape input_shape);
    // Checks that the layers chain and match the architecture; throws
    // CorruptModel otherwise.
    RbigModel(Shape input_shape, ArchitectureSpec arch, std::vector<RbigLayer> layers,
              TrainingMeta meta);

    const Shape& input_shape() const noexcept { return input_shape_; }
    Shape output_shape() const;
    // Shape after the first `n` layers.
    Shape shape_after(std::size_t n) const;

    const ArchitectureSpec& arch() const noexcept { return arch_; }
    const std::vector<RbigLayer>& layers() const noexcept { return layers_; }
    const TrainingMeta& training_meta() const noexcept { return meta_; }
    std::size_t block_count() const noexcept { return arch_.blocks.size(); }

private:
    Shape input_shape_;
    ArchitectureSpec arch_;
    std::vector<RbigLayer> layers_;
    TrainingMeta meta_;
};

ImageTensor forward(const RbigModel& m, const ImageTensor& x);
ImageTensor inverse(const RbigModel& m, const ImageTensor& z);
// Only the first `n_layers` layers.
ImageTensor forward_layers(const RbigModel& m, const ImageTensor& x, std::size_t n_layers);
ImageTensor inverse_layers(const RbigModel& m, const ImageTensor& z, std::size_t n_layers);

struct TrainResult {
    RbigModel model;
    MiReport mi;
    std::vector<TrainReport> layer_reports;
};

// Called after each layer is trained with the layer index and the model
// holding layers [0, index].
using LayerObserver = std::function<void(std::size_t, const RbigModel&)>;

// Layer-by-layer training: for each layer fit the marginal map on the
// current training representation, Gaussianize, train the filter on the
// Gaussianized data, rotate, and record the MI removed on train and
// validation data. Earlier layers are never revisited.
TrainResult train_model(const ImageBatch& data, const ArchitectureSpec& arch,
                        const TrainConfig& cfg, const ImageBatch& validation,
                        const MarginalOptions& marginal = {}, const LayerObserver& observer = {});

std::string dataset_digest(const ImageBatch& data);

inline constexpr std::uint32_t kModelFormatVersion = 1;

std::vector<unsigned char> serialize_model(const RbigModel& m);
RbigModel deserialize_model(const std::vector<unsigned char>& bytes);
void save_model(const RbigModel& m, const std::filesystem::path& path);
RbigModel load_model(const std::filesystem::path& path);

} // namespace crbig
