#include "crbig/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "binary_io.hpp"
#include "crbig/error.hpp"
#include "crbig/rng.hpp"
#include "json.hpp"

namespace crbig {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::Io, "failed writing " + path.string());
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    write_file(path, std::vector<unsigned char>(text.begin(), text.end()));
}

// --- datasets -------------------------------------------------------------

ImageBatch parse_cifar10(const std::vector<unsigned char>& bytes) {
    if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0) {
        fail(ErrorKind::BadRecordSize, "CIFAR-10 file length " + std::to_string(bytes.size()) +
                                           " is not a positive multiple of 3073");
    }
    const std::size_t n = bytes.size() / kCifarRecordBytes;
    ImageBatch out;
    out.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
        const unsigned char* rec = bytes.data() + r * kCifarRecordBytes + 1;
        ImageTensor img({32, 32, 3});
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t p = 0; p < 1024; ++p) {
                img.data()[p * 3 + c] = static_cast<double>(rec[c * 1024 + p]) / 255.0;
            }
        }
        out.push_back(std::move(img));
    }
    return out;
}

ImageBatch read_cifar10(const std::filesystem::path& path) { return parse_cifar10(read_file(path)); }

void dequantize(ImageBatch& batch, double step, std::uint64_t seed) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
        Rng rng(seed, i);
        for (double& v : batch[i].data()) v += step * rng.uniform();
    }
}

ImageBatch extract_patches(const ImageBatch& batch, std::size_t size, std::size_t stride,
                           std::size_t random_count, std::uint64_t seed) {
    if (size == 0) fail(ErrorKind::PatchTooLarge, "patch size must be positive");
    for (const auto& img : batch) {
        if (size > img.height() || size > img.width()) {
            fail(ErrorKind::PatchTooLarge, "patch size " + std::to_string(size) + " exceeds image " +
                                               std::to_string(img.height()) + "x" +
                                               std::to_string(img.width()));
        }
    }
    auto crop = [size](const ImageTensor& img, std::size_t r0, std::size_t c0) {
        ImageTensor p({size, size, img.channels()});
        for (std::size_t r = 0; r < size; ++r) {
            const double* src = img.data().data() + img.index(r0 + r, c0, 0);
            std::copy(src, src + size * img.channels(), &p.at(r, 0, 0));
        }
        return p;
    };

    ImageBatch out;
    if (stride > 0) {
        for (const auto& img : batch) {
            for (std::size_t r = 0; r + size <= img.height(); r += stride) {
                for (std::size_t c = 0; c + size <= img.width(); c += stride) {
                    out.push_back(crop(img, r, c));
                }
            }
        }
    }
    if (random_count > 0) {
        if (batch.empty()) fail(ErrorKind::PatchTooLarge, "no images to sample patches from");
        Rng rng(seed);
        for (std::size_t k = 0; k < random_count; ++k) {
            const auto& img = batch[rng.index(batch.size())];
            const auto r = rng.index(img.height() - size + 1);
            const auto c = rng.index(img.width() - size + 1);
            out.push_back(crop(img, r, c));
        }
    }
    return out;
}

// --- PPM ------------------------------------------------------------------

std::vector<unsigned char> encode_ppm(const ImageTensor& t) {
    const char* magic = nullptr;
    if (t.channels() == 3) {
        magic = "P6";
    } else if (t.channels() == 1) {
        magic = "P5";
    } else {
        fail(ErrorKind::UnsupportedFormat, "PPM/PGM output needs 1 or 3 channels, got " +
                                               std::to_string(t.channels()));
    }
    const std::string header = std::string(magic) + "\n" + std::to_string(t.width()) + " " +
                               std::to_string(t.height()) + "\n255\n";
    std::vector<unsigned char> out(header.begin(), header.end());
    out.reserve(header.size() + t.size());
    for (double v : t.data()) {
        const double c = std::clamp(std::isnan(v) ? 0.0 : v, 0.0, 1.0);
        out.push_back(static_cast<unsigned char>(std::floor(c * 255.0 + 0.5)));
    }
    return out;
}

ImageTensor decode_ppm(const std::vector<unsigned char>& bytes) {
    std::size_t pos = 0;
    auto skip_space = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_uint = [&](const char* what) {
        skip_space();
        std::size_t v = 0;
        std::size_t digits = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos]) && digits < 9) {
            v = v * 10 + (bytes[pos] - '0');
            ++pos;
            ++digits;
        }
        if (digits == 0 || v == 0) fail(ErrorKind::CorruptHeader, std::string("bad PPM ") + what);
        return v;
    };

    if (bytes.size() < 2 || bytes[0] != 'P') fail(ErrorKind::UnsupportedFormat, "not a PNM file");
    std::size_t channels = 0;
    if (bytes[1] == '6') {
        channels = 3;
    } else if (bytes[1] == '5') {
        channels = 1;
    } else {
        fail(ErrorKind::UnsupportedFormat, std::string("unsupported PNM type P") +
                                               static_cast<char>(bytes[1]));
    }
    pos = 2;
    const std::size_t width = read_uint("width");
    const std::size_t height = read_uint("height");
    const std::size_t maxval = read_uint("maxval");
    if (maxval != 255) fail(ErrorKind::UnsupportedFormat, "only maxval 255 is supported");
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
        fail(ErrorKind::CorruptHeader, "missing whitespace after maxval");
    }
    ++pos;
    const std::size_t n = width * height * channels;
    if (bytes.size() - pos != n) {
        fail(ErrorKind::CorruptHeader, "payload has " + std::to_string(bytes.size() - pos) +
                                           " bytes, header implies " + std::to_string(n));
    }
    ImageTensor t({height, width, channels});
    for (std::size_t k = 0; k < n; ++k) t.data()[k] = static_cast<double>(bytes[pos + k]) / 255.0;
    return t;
}

void write_image(const std::filesystem::path& path, const ImageTensor& t) {
    write_file(path, encode_ppm(t));
}

ImageTensor read_image(const std::filesystem::path& path) { return decode_ppm(read_file(path)); }

// --- raw tensors ----------------------------------------------------------

void write_tensor_blob(const std::filesystem::path& base, const ImageBatch& batch) {
    const Shape s = batch_shape(batch);
    std::vector<unsigned char> blob;
    blob.reserve(batch.size() * s.size() * 8);
    for (const auto& t : batch) {
        for (double v : t.data()) detail::put_f64(blob, v);
    }
    const nlohmann::json sidecar = {{"format", "crbig-tensor"},
                                    {"version", 1},
                                    {"dtype", "f64le"},
                                    {"shape", {batch.size(), s.height, s.width, s.channels}}};
    write_file(std::filesystem::path(base.string() + ".f64"), blob);
    write_file(std::filesystem::path(base.string() + ".json"), sidecar.dump(2) + "\n");
}

ImageBatch read_tensor_blob(const std::filesystem::path& base) {
    const auto side = read_file(std::filesystem::path(base.string() + ".json"));
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(side.begin(), side.end());
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::CorruptHeader, std::string("tensor sidecar: ") + e.what());
    }
    std::size_t n = 0;
    Shape s;
    try {
        if (j.at("format") != "crbig-tensor" || j.at("dtype") != "f64le") {
            fail(ErrorKind::UnsupportedFormat, "sidecar is not an f64le crbig tensor");
        }
        if (j.at("version").get<int>() != 1) {
            fail(ErrorKind::UnsupportedFormat, "unsupported tensor version");
        }
        const auto& sh = j.at("shape");
        n = sh.at(0).get<std::size_t>();
        s = {sh.at(1).get<std::size_t>(), sh.at(2).get<std::size_t>(), sh.at(3).get<std::size_t>()};
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::CorruptHeader, std::string("tensor sidecar: ") + e.what());
    }
    const auto blob = read_file(std::filesystem::path(base.string() + ".f64"));
    if (blob.size() != n * s.size() * 8) {
        fail(ErrorKind::CorruptHeader, "tensor blob length does not match its sidecar shape");
    }
    ImageBatch out;
    out.reserve(n);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ImageTensor t(s);
        for (double& v : t.data()) {
            v = detail::get_f64(blob.data() + pos);
            pos += 8;
        }
        out.push_back(std::move(t));
    }
    return out;
}

// --- reports --------------------------------------------------------------

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::vector<std::string>> parse_versioned_csv(const std::string& text,
                                                          const std::string& kind,
                                                          const std::string& header) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::CorruptHeader, kind + ": empty file");
    const std::string prefix = "# crbig " + kind + " ";
    if (line.rfind(prefix, 0) != 0) fail(ErrorKind::CorruptHeader, kind + ": missing version line");
    const std::string version = line.substr(prefix.size());
    const int major = std::atoi(version.substr(0, version.find('.')).c_str());
    if (major != kCsvMajorVersion) {
        fail(ErrorKind::UnsupportedFormat, kind + ": unsupported major version " + version);
    }
    if (!std::getline(in, line) || line != header) {
        fail(ErrorKind::CorruptHeader, kind + ": unexpected column header");
    }
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

double to_double(const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        fail(ErrorKind::CorruptHeader, "not a number: '" + s + "'");
    }
}

constexpr const char* kMiHeader =
    "layer_index,delta_mi_train,delta_mi_valid,accumulated_train,accumulated_valid,ortho_residual";
constexpr const char* kTrainHeader = "epoch,reconstruction_rmse,activity_l1,weight_l1";

} // namespace

std::string mi_report_csv(const MiReport& r) {
    std::string out = "# crbig mi-report 1.0\n";
    out += kMiHeader;
    out += "\n";
    for (const auto& e : r.layers) {
        out += std::to_string(e.layer_index) + "," + fmt_double(e.delta_mi_train) + "," +
               fmt_double(e.delta_mi_valid) + "," + fmt_double(e.accumulated_train) + "," +
               fmt_double(e.accumulated_valid) + "," + fmt_double(e.ortho_residual) + "\n";
    }
    return out;
}

std::string train_report_csv(const TrainReport& r) {
    std::string out = "# crbig train-report 1.0\n";
    out += kTrainHeader;
    out += "\n";
    for (const auto& e : r.epochs) {
        out += std::to_string(e.epoch) + "," + fmt_double(e.reconstruction_rmse) + "," +
               fmt_double(e.activity_l1) + "," + fmt_double(e.weight_l1) + "\n";
    }
    return out;
}

MiReport parse_mi_report_csv(const std::string& text) {
    MiReport r;
    for (const auto& row : parse_versioned_csv(text, "mi-report", kMiHeader)) {
        if (row.size() != 6) fail(ErrorKind::CorruptHeader, "mi-report: row needs 6 columns");
        MiLayerEntry e;
        e.layer_index = static_cast<std::size_t>(to_double(row[0]));
        e.delta_mi_train = to_double(row[1]);
        e.delta_mi_valid = to_double(row[2]);
        e.accumulated_train = to_double(row[3]);
        e.accumulated_valid = to_double(row[4]);
        e.ortho_residual = to_double(row[5]);
        r.layers.push_back(e);
    }
    return r;
}

TrainReport parse_train_report_csv(const std::string& text) {
    TrainReport r;
    for (const auto& row : parse_versioned_csv(text, "train-report", kTrainHeader)) {
        if (row.size() != 4) fail(ErrorKind::CorruptHeader, "train-report: row needs 4 columns");
        r.epochs.push_back({static_cast<std::size_t>(to_double(row[0])), to_double(row[1]),
                            to_double(row[2]), to_double(row[3])});
    }
    return r;
}

// --- plots ----------------------------------------------------------------

namespace {

struct Rgb {
    double r, g, b;
};

void put_pixel(ImageTensor& img, long x, long y, Rgb c) {
    if (x < 0 || y < 0 || x >= static_cast<long>(img.width()) || y >= static_cast<long>(img.height())) {
        return;
    }
    const auto ux = static_cast<std::size_t>(x);
    const auto uy = static_cast<std::size_t>(y);
    img.at(uy, ux, 0) = c.r;
    img.at(uy, ux, 1) = c.g;
    img.at(uy, ux, 2) = c.b;
}

void draw_line(ImageTensor& img, double x0, double y0, double x1, double y1, Rgb c, int thick = 1) {
    const double len = std::max(std::abs(x1 - x0), std::abs(y1 - y0));
    const int steps = std::max(1, static_cast<int>(std::ceil(len)));
    for (int s = 0; s <= steps; ++s) {
        const double t = static_cast<double>(s) / steps;
        const long x = std::lround(x0 + t * (x1 - x0));
        const long y = std::lround(y0 + t * (y1 - y0));
        for (int dx = -(thick / 2); dx <= thick / 2; ++dx) {
            for (int dy = -(thick / 2); dy <= thick / 2; ++dy) put_pixel(img, x + dx, y + dy, c);
        }
    }
}

} // namespace

ImageTensor render_mi_plot(const MiReport& r, std::size_t width, std::size_t height) {
    ImageTensor img({height, width, 3}, 1.0);
    const double left = 50, right = static_cast<double>(width) - 20;
    const double top = 20, bottom = static_cast<double>(height) - 40;
    const Rgb black{0, 0, 0}, grey{0.8, 0.8, 0.8};
    const Rgb blue{31 / 255.0, 119 / 255.0, 180 / 255.0};
    const Rgb orange{1.0, 127 / 255.0, 14 / 255.0};

    double lo = 0.0, hi = 0.0;
    for (const auto& e : r.layers) {
        for (double v : {e.accumulated_train, e.accumulated_valid}) {
            if (std::isfinite(v)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
    }
    if (hi - lo < 1e-12) hi = lo + 1.0;
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    // Layer k sits at x = k + 1; x = 0 is the untransformed input (0 nats).
    const double n = static_cast<double>(std::max<std::size_t>(r.layers.size(), 1));
    auto px = [&](double k) { return left + (right - left) * k / n; };
    auto py = [&](double v) { return bottom - (bottom - top) * (v - lo) / (hi - lo); };

    draw_line(img, left, py(0.0), right, py(0.0), grey);
    for (std::size_t k = 0; k <= r.layers.size(); ++k) {
        draw_line(img, px(static_cast<double>(k)), bottom, px(static_cast<double>(k)), bottom + 5, black);
    }
    draw_line(img, left, top, left, bottom, black);
    draw_line(img, left, bottom, right, bottom, black);

    auto series = [&](auto value, Rgb c) {
        double prev_x = px(0.0), prev_y = py(0.0);
        for (std::size_t k = 0; k < r.layers.size(); ++k) {
            const double x = px(static_cast<double>(k + 1));
            const double y = py(value(r.layers[k]));
            draw_line(img, prev_x, prev_y, x, y, c, 3);
            for (int d = -3; d <= 3; ++d) draw_line(img, x - 3, y + d, x + 3, y + d, c);
            prev_x = x;
            prev_y = y;
        }
    };
    series([](const MiLayerEntry& e) { return e.accumulated_train; }, blue);
    series([](const MiLayerEntry& e) { return e.accumulated_valid; }, orange);

    // Legend swatches, train then validation.
    for (int d = 0; d < 8; ++d) {
        draw_line(img, right - 60, top + d, right - 44, top + d, blue);
        draw_line(img, right - 30, top + d, right - 14, top + d, orange);
    }
    return img;
}

ImageTensor render_filter_grid(const ConvFilter& f, std::size_t scale, std::size_t max_filters) {
    if (scale == 0) scale = 1;
    const std::size_t count = std::min(f.ch_out(), std::max<std::size_t>(max_filters, 1));
    const bool colour = f.ch_in() == 3;
    const std::size_t strips = colour ? 1 : f.ch_in();
    const std::size_t tile_h = f.k_h() * scale;
    const std::size_t tile_w = f.k_w() * scale * strips;
    const std::size_t gap = std::max<std::size_t>(1, scale / 2);
    const std::size_t cols = std::min<std::size_t>(count, 16);
    const std::size_t rows = (count + cols - 1) / cols;
    const std::size_t cell_w = tile_w + gap;
    const std::size_t cell_h = 2 * tile_h + 3 * gap;

    ImageTensor img({rows * cell_h + gap, cols * cell_w + gap, 3}, 0.5);
    for (std::size_t o = 0; o < count; ++o) {
        for (int part = 0; part < 2; ++part) {
            const double sign = part == 0 ? 1.0 : -1.0;
            double lo = INFINITY, hi = -INFINITY;
            for (std::size_t a = 0; a < f.k_h(); ++a) {
                for (std::size_t b = 0; b < f.k_w(); ++b) {
                    for (std::size_t c = 0; c < f.ch_in(); ++c) {
                        const double v = std::max(0.0, sign * f.weight(a, b, c, o));
                        lo = std::min(lo, v);
                        hi = std::max(hi, v);
                    }
                }
            }
            const double span = hi - lo;
            const std::size_t y0 = (o / cols) * cell_h + gap + part * (tile_h + gap);
            const std::size_t x0 = (o % cols) * cell_w + gap;
            for (std::size_t a = 0; a < f.k_h(); ++a) {
                for (std::size_t b = 0; b < f.k_w(); ++b) {
                    for (std::size_t c = 0; c < f.ch_in(); ++c) {
                        const double v = std::max(0.0, sign * f.weight(a, b, c, o));
                        const double norm = span > 0.0 ? (v - lo) / span : 0.0;
                        const std::size_t strip = colour ? 0 : c;
                        for (std::size_t dy = 0; dy < scale; ++dy) {
                            for (std::size_t dx = 0; dx < scale; ++dx) {
                                const std::size_t y = y0 + a * scale + dy;
                                const std::size_t x = x0 + (strip * f.k_w() + b) * scale + dx;
                                if (colour) {
                                    img.at(y, x, c) = norm;
                                } else {
                                    for (std::size_t k = 0; k < 3; ++k) img.at(y, x, k) = norm;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return img;
}

} // namespace crbig
