#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "crbig/marginal.hpp"
#include "crbig/model.hpp"
#include "crbig/ortho_conv.hpp"

namespace crbig {

// Parameters of every CLI command. Loadable from a flat `key = value` text
// file (keys as the long flag names, '-' or '_' both accepted, '#'
// comments); command-line flags override file values.
struct RunConfig {
    // paths
    std::string data;
    std::string valid_data;
    std::string model;
    std::string out;
    std::string out_dir = ".";
    std::string input;

    // dataset handling
    std::size_t max_images = 0;  // 0 = all
    std::size_t patch_size = 0;  // 0 = whole images
    std::size_t patch_stride = 0;
    std::size_t random_patches = 0;
    double valid_fraction = 0.1;
    bool dequantize = true;

    // architecture
    std::size_t blocks = 5;
    std::size_t layers = 5;
    std::size_t stride = 2;
    std::size_t kernel = 7;
    std::size_t sub_kernel = 0;  // 0 = 2 * stride

    // filter training
    double lambda_act = 0.0;
    double lambda_w = 0.0;
    double learning_rate = 1e-2;
    std::size_t epochs = 50;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
    double target_residual = 1e-4;

    // marginal maps
    std::size_t bins = 256;
    double tail_extension = 0.1;
    double clamp_eps = 1e-6;

    // synth / probe / filters
    std::size_t count = 1;
    long after_block = -1;  // -1 = full depth
    std::size_t layer = 0;
    std::size_t scale = 8;
    std::size_t max_filters = 64;
    std::string band;        // comma-separated latent channels
    std::string amplitudes;  // comma-separated, increasing

    std::size_t threads = 0;  // 0 = hardware concurrency

    // Throws InvalidConfig for unknown keys or unparsable values.
    void set(const std::string& key, const std::string& value);
    void load_text(const std::string& text);

    // Every invalid field for `command`, each message starting with the
    // field name. Empty when the configuration is usable.
    std::vector<std::string> problems(const std::string& command) const;
    // Throws InvalidConfig listing all problems.
    void validate(const std::string& command) const;

    TrainConfig train_config() const;
    ArchitectureSpec arch() const;
    MarginalOptions marginal_options() const;
};

std::vector<std::size_t> parse_index_list(const std::string& text);
std::vector<double> parse_double_list(const std::string& text);

} // namespace crbig
