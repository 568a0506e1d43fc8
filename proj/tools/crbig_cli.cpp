// crbig: train, apply, invert and inspect convolutional RBIG models.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "crbig/config.hpp"
#include "crbig/error.hpp"
#include "crbig/info_metrics.hpp"
#include "crbig/io.hpp"
#include "crbig/model.hpp"
#include "crbig/parallel.hpp"
#include "crbig/rng.hpp"
#include "crbig/synthesis.hpp"

namespace fs = std::filesystem;
using namespace crbig;

namespace {

std::string numbered(const std::string& stem, std::size_t i, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "_%04zu", i);
    return stem + buf + ext;
}

bool has_ext(const fs::path& p, std::initializer_list<const char*> exts) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
    return std::any_of(exts.begin(), exts.end(), [&](const char* x) { return e == x; });
}

// CIFAR-10 .bin, a single .ppm/.pgm, a directory of them, or a raw tensor
// (<base>.json + <base>.f64).
ImageBatch load_images(const std::string& spec) {
    const fs::path p(spec);
    if (fs::is_directory(p)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(p)) {
            if (e.is_regular_file() && has_ext(e.path(), {".ppm", ".pgm"})) files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) fail(ErrorKind::Io, "no .ppm/.pgm images in " + spec);
        ImageBatch out;
        for (const auto& f : files) out.push_back(read_image(f));
        return out;
    }
    if (has_ext(p, {".bin"})) return read_cifar10(p);
    if (has_ext(p, {".ppm", ".pgm", ".pnm"})) return {read_image(p)};
    if (has_ext(p, {".json"})) return read_tensor_blob(p.parent_path() / p.stem());
    if (fs::exists(fs::path(spec + ".json"))) return read_tensor_blob(p);
    fail(ErrorKind::UnsupportedFormat, "cannot tell the format of " + spec);
}

void write_images(const fs::path& dir, const std::string& stem, const ImageBatch& batch) {
    fs::create_directories(dir);
    const std::size_t ch = batch_shape(batch).channels;
    if (ch == 1 || ch == 3) {
        for (std::size_t i = 0; i < batch.size(); ++i) {
            write_image(dir / numbered(stem, i, ".ppm"), batch[i]);
        }
    }
    write_tensor_blob(dir / stem, batch);
}

ImageBatch prepare(const RunConfig& cfg, const std::string& path, std::uint64_t stream) {
    ImageBatch images = load_images(path);
    if (cfg.max_images > 0 && images.size() > cfg.max_images) images.resize(cfg.max_images);
    if (cfg.patch_size > 0) {
        images = extract_patches(images, cfg.patch_size, cfg.patch_stride, cfg.random_patches,
                                 stream_seed(cfg.seed, stream));
    }
    if (cfg.dequantize) dequantize(images, 1.0 / 255.0, stream_seed(cfg.seed, stream + 1));
    return images;
}

int run_train(const RunConfig& cfg) {
    ImageBatch train = prepare(cfg, cfg.data, 100);
    ImageBatch valid;
    if (!cfg.valid_data.empty()) {
        valid = prepare(cfg, cfg.valid_data, 200);
    } else {
        const auto n_valid = std::max<std::size_t>(
            1, static_cast<std::size_t>(cfg.valid_fraction * static_cast<double>(train.size()) + 0.5));
        if (n_valid >= train.size()) fail(ErrorKind::InsufficientData, "too few images to split off validation");
        valid.assign(train.end() - static_cast<long>(n_valid), train.end());
        train.resize(train.size() - n_valid);
    }
    std::cout << "training on " << train.size() << " images, validating on " << valid.size() << "\n";

    const TrainResult result = train_model(train, cfg.arch(), cfg.train_config(), valid,
                                           cfg.marginal_options(), [](std::size_t i, const RbigModel& m) {
                                               const auto& l = m.layers().back();
                                               std::cout << "layer " << i << ": residual "
                                                         << l.trained_residual << ", dMI(train) "
                                                         << l.delta_mi_train << "\n";
                                           });

    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    save_model(result.model, dir / "model.crbg");
    write_file(dir / "mi_report.csv", mi_report_csv(result.mi));
    write_image(dir / "mi_report.ppm", render_mi_plot(result.mi));
    for (std::size_t i = 0; i < result.layer_reports.size(); ++i) {
        write_file(dir / numbered("train_layer", i, ".csv"), train_report_csv(result.layer_reports[i]));
    }
    if (!result.mi.layers.empty()) {
        const auto& last = result.mi.layers.back();
        std::cout << "accumulated MI reduction (nats/dim): train " << last.accumulated_train
                  << ", validation " << last.accumulated_valid << "\n";
    }
    return 0;
}

int run_transform(const RunConfig& cfg) {
    const RbigModel m = load_model(cfg.model);
    const ImageBatch images = load_images(cfg.data);
    ImageBatch out(images.size());
    parallel_for(images.size(), [&](std::size_t i) { out[i] = forward(m, images[i]); });
    write_tensor_blob(cfg.out, out);
    return 0;
}

int run_invert(const RunConfig& cfg) {
    const RbigModel m = load_model(cfg.model);
    const ImageBatch latents = load_images(cfg.input);
    ImageBatch out(latents.size());
    parallel_for(latents.size(), [&](std::size_t i) { out[i] = inverse(m, latents[i]); });
    write_images(cfg.out_dir, "recon", out);
    return 0;
}

int run_synth(const RunConfig& cfg) {
    const RbigModel m = load_model(cfg.model);
    std::optional<std::size_t> after;
    if (cfg.after_block >= 0) after = static_cast<std::size_t>(cfg.after_block);
    const ImageBatch out = synthesize(m, {cfg.count, cfg.seed}, after);
    write_images(cfg.out_dir, "synth", out);
    return 0;
}

int run_mi_report(const RunConfig& cfg) {
    const RbigModel m = load_model(cfg.model);
    ImageBatch images = load_images(cfg.data);
    if (cfg.max_images > 0 && images.size() > cfg.max_images) images.resize(cfg.max_images);
    if (cfg.dequantize) dequantize(images, 1.0 / 255.0, stream_seed(cfg.seed, 301));
    const MiReport r = accumulated_mi_curve(m, images);
    write_file(cfg.out, mi_report_csv(r));
    write_image(fs::path(cfg.out).replace_extension(".ppm"), render_mi_plot(r));
    return 0;
}

int run_filters(const RunConfig& cfg) {
    const RbigModel m = load_model(cfg.model);
    if (cfg.layer >= m.layers().size()) {
        fail(ErrorKind::InvalidConfig, "layer: model has " + std::to_string(m.layers().size()) + " layers");
    }
    write_image(cfg.out, render_filter_grid(m.layers()[cfg.layer].filter, cfg.scale, cfg.max_filters));
    return 0;
}

int run_probe(const RunConfig& cfg) {
    const RbigModel m = load_model(cfg.model);
    const auto amps = parse_double_list(cfg.amplitudes);
    const ProbeResult r = probe_direction(m, parse_index_list(cfg.band), amps, cfg.seed);
    write_images(cfg.out_dir, "probe", r.images);
    std::string csv = "# crbig probe 1.0\namplitude,energy\n";
    for (std::size_t i = 0; i < amps.size(); ++i) {
        char buf[80];
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", amps[i], r.energies[i]);
        csv += buf;
    }
    write_file(fs::path(cfg.out_dir) / "energies.csv", csv);
    return 0;
}

std::string config_path(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--config" && i + 1 < argc) return argv[i + 1];
        if (a.rfind("--config=", 0) == 0) return a.substr(9);
    }
    return {};
}

} // namespace

int main(int argc, char** argv) {
    RunConfig cfg;
    std::string config_file;
    try {
        config_file = config_path(argc, argv);
        if (!config_file.empty()) {
            const auto bytes = read_file(config_file);
            cfg.load_text(std::string(bytes.begin(), bytes.end()));
        }
    } catch (const Error& e) {
        std::cerr << "error: category=" << to_string(e.kind()) << " message=" << e.what() << "\n";
        return exit_code(e.kind());
    }

    CLI::App app{"Convolutional RBIG: train, apply, invert and inspect image Gaussianization models"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--config", config_file, "flat key=value file; flags override it");
    app.add_option("--threads", cfg.threads, "worker threads (0 = all cores); never changes results");

    auto* train = app.add_subcommand("train", "train a model layer by layer");
    auto* transform = app.add_subcommand("transform", "Gaussianize images");
    auto* invert = app.add_subcommand("invert", "reconstruct images from latent tensors");
    auto* synth = app.add_subcommand("synth", "invert Gaussian noise into images");
    auto* mi = app.add_subcommand("mi-report", "accumulated MI reduction on a dataset");
    auto* filters = app.add_subcommand("filters", "render a layer's filters");
    auto* probe = app.add_subcommand("probe", "invert band-limited noise of growing amplitude");

    for (auto* sc : {train, mi, transform}) {
        sc->add_option("--data", cfg.data, "CIFAR-10 .bin, .ppm, image directory or raw tensor");
        sc->add_option("--max-images", cfg.max_images);
    }
    for (auto* sc : {transform, invert, synth, mi, filters, probe}) {
        sc->add_option("--model", cfg.model, "model container");
    }
    for (auto* sc : {transform, mi, filters}) sc->add_option("--out", cfg.out, "output path");
    for (auto* sc : {train, invert, synth, probe}) sc->add_option("--out-dir", cfg.out_dir, "output directory");
    for (auto* sc : {train, synth, probe, mi}) sc->add_option("--seed", cfg.seed);
    for (auto* sc : {train, mi}) sc->add_option("--dequantize", cfg.dequantize, "add U[0,1/255) noise");

    train->add_option("--valid-data", cfg.valid_data, "validation set (default: split off the data)");
    train->add_option("--valid-fraction", cfg.valid_fraction);
    train->add_option("--patch-size", cfg.patch_size);
    train->add_option("--patch-stride", cfg.patch_stride);
    train->add_option("--random-patches", cfg.random_patches);
    train->add_option("--blocks", cfg.blocks);
    train->add_option("--layers", cfg.layers, "layers per block");
    train->add_option("--stride", cfg.stride, "stride of each block's first layer");
    train->add_option("--kernel", cfg.kernel, "kernel of stride-1 layers");
    train->add_option("--sub-kernel", cfg.sub_kernel, "kernel of subsampling layers (0 = 2*stride)");
    train->add_option("--lambda-act", cfg.lambda_act, "weight of the activation L1 penalty");
    train->add_option("--lambda-w", cfg.lambda_w, "weight of the kernel L1 penalty");
    train->add_option("--learning-rate", cfg.learning_rate);
    train->add_option("--epochs", cfg.epochs);
    train->add_option("--batch-size", cfg.batch_size);
    train->add_option("--target-residual", cfg.target_residual, "early stop on reconstruction RMSE");
    train->add_option("--bins", cfg.bins, "marginal CDF knots per channel");
    train->add_option("--tail-extension", cfg.tail_extension);
    train->add_option("--clamp-eps", cfg.clamp_eps);

    invert->add_option("--input", cfg.input, "latent tensor (<base> or <base>.json)");
    synth->add_option("--count", cfg.count);
    synth->add_option("--after-block", cfg.after_block, "invert only the first N blocks");
    filters->add_option("--layer", cfg.layer);
    filters->add_option("--scale", cfg.scale);
    filters->add_option("--max-filters", cfg.max_filters);
    probe->add_option("--band", cfg.band, "comma-separated latent channels");
    probe->add_option("--amplitudes", cfg.amplitudes, "comma-separated increasing amplitudes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: category=Usage message=" << e.what() << "\n";
        return 2;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        cfg.validate(command);
        set_thread_count(cfg.threads);
        if (command == "train") return run_train(cfg);
        if (command == "transform") return run_transform(cfg);
        if (command == "invert") return run_invert(cfg);
        if (command == "synth") return run_synth(cfg);
        if (command == "mi-report") return run_mi_report(cfg);
        if (command == "filters") return run_filters(cfg);
        if (command == "probe") return run_probe(cfg);
    } catch (const Error& e) {
        std::cerr << "error: category=" << to_string(e.kind()) << " message=" << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: category=Internal message=" << e.what() << "\n";
        return 1;
    }
    return 1;
}
