#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "crbig/info_metrics.hpp"
#include "crbig/ortho_conv.hpp"
#include "crbig/tensor.hpp"

namespace crbig {

// --- datasets -------------------------------------------------------------

inline constexpr std::size_t kCifarRecordBytes = 3073;

// CIFAR-10 binary: records of 1 label byte + 1024 R + 1024 G + 1024 B
// (row-major 32x32). Pixels scaled by 1/255; labels dropped.
ImageBatch parse_cifar10(const std::vector<unsigned char>& bytes);
ImageBatch read_cifar10(const std::filesystem::path& path);

// Adds uniform noise in [0, step) to every value (dequantizes byte images
// so that spacing-based entropies see no ties).
void dequantize(ImageBatch& batch, double step, std::uint64_t seed);

// Square patches: a grid with the given stride (0 disables the grid)
// followed by `random_count` seeded random crops.
ImageBatch extract_patches(const ImageBatch& batch, std::size_t size, std::size_t stride,
                           std::size_t random_count = 0, std::uint64_t seed = 0);

// --- PPM ------------------------------------------------------------------

// P6 for 3 channels, P5 for 1; maxval 255. Values are clamped to [0, 1]
// and scaled with round-half-up.
std::vector<unsigned char> encode_ppm(const ImageTensor& t);
ImageTensor decode_ppm(const std::vector<unsigned char>& bytes);
void write_image(const std::filesystem::path& path, const ImageTensor& t);
ImageTensor read_image(const std::filesystem::path& path);

// --- raw tensors ----------------------------------------------------------

// <base>.f64 holds little-endian doubles of every tensor back to back,
// <base>.json the shape: {"format":"crbig-tensor","version":1,
// "shape":[count,h,w,ch],"dtype":"f64le"}.
void write_tensor_blob(const std::filesystem::path& base, const ImageBatch& batch);
ImageBatch read_tensor_blob(const std::filesystem::path& base);

// --- reports --------------------------------------------------------------

inline constexpr int kCsvMajorVersion = 1;

std::string mi_report_csv(const MiReport& r);
std::string train_report_csv(const TrainReport& r);
MiReport parse_mi_report_csv(const std::string& text);
TrainReport parse_train_report_csv(const std::string& text);

// Line plot of accumulated MI on train (blue) and validation (orange),
// with axes and a zero line, as an RGB tensor.
ImageTensor render_mi_plot(const MiReport& r, std::size_t width = 640, std::size_t height = 400);

// Filter bank image: one column per output channel, the positive part on
// top and the negative part below, each min-max normalized per filter.
// Filters with 3 input channels render in colour, others as grey strips
// of their input channels.
ImageTensor render_filter_grid(const ConvFilter& f, std::size_t scale = 8,
                               std::size_t max_filters = 64);

// --- files ----------------------------------------------------------------

std::vector<unsigned char> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);
void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes);

} // namespace crbig
