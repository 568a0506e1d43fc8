#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "crbig/config.hpp"
#include "crbig/error.hpp"
#include "crbig/io.hpp"
#include "oracles.hpp"

using namespace crbig;

namespace {

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected crbig::Error");
    return ErrorKind::Io;
}

std::vector<unsigned char> cifar_record(unsigned char label, unsigned char base) {
    std::vector<unsigned char> rec(kCifarRecordBytes);
    rec[0] = label;
    for (std::size_t k = 1; k < rec.size(); ++k) rec[k] = static_cast<unsigned char>((base + k) % 256);
    return rec;
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("crbig_test_io_" + name);
}

} // namespace

TEST_CASE("CIFAR-10 records decode planar RGB scaled by 1/255") {
    auto bytes = cifar_record(3, 0);
    const auto second = cifar_record(7, 100);
    bytes.insert(bytes.end(), second.begin(), second.end());
    bytes[1 + 1024 * 2 + 5] = 255;  // blue plane, pixel (0, 5)
    const ImageBatch b = parse_cifar10(bytes);
    REQUIRE(b.size() == 2);
    CHECK(b[0].shape() == Shape{32, 32, 3});
    CHECK(b[0].at(0, 5, 2) == 1.0);
    // red plane byte k sits at row k / 32, column k % 32
    CHECK(b[0].at(1, 2, 0) == static_cast<double>((1 + 34) % 256) / 255.0);
    CHECK(b[1].at(0, 0, 1) == static_cast<double>((100 + 1 + 1024) % 256) / 255.0);
    bytes.pop_back();
    CHECK(kind_of([&] { parse_cifar10(bytes); }) == ErrorKind::BadRecordSize);
    CHECK(kind_of([] { parse_cifar10({}); }) == ErrorKind::BadRecordSize);
}

TEST_CASE("PPM encoding follows the P6 layout and rounding rule") {
    ImageTensor t(Shape{2, 3, 3}, 0.0);
    auto bytes = encode_ppm(t);
    const std::string header = "P6\n3 2\n255\n";
    CHECK(std::string(bytes.begin(), bytes.begin() + header.size()) == header);
    CHECK(bytes.size() == header.size() + 18);
    for (std::size_t k = header.size(); k < bytes.size(); ++k) CHECK(bytes[k] == 0);

    t.at(0, 0, 0) = 0.5;
    t.at(0, 0, 1) = 1.7;
    t.at(0, 0, 2) = -0.3;
    bytes = encode_ppm(t);
    CHECK(bytes[header.size()] == 128);
    CHECK(bytes[header.size() + 1] == 255);
    CHECK(bytes[header.size() + 2] == 0);

    const ImageTensor grey(Shape{2, 2, 1}, 1.0);
    const auto pgm = encode_ppm(grey);
    CHECK(std::string(pgm.begin(), pgm.begin() + 2) == "P5");
    CHECK(decode_ppm(pgm).values() == grey.values());
}

TEST_CASE("PPM round trip is within half a quantization step") {
    Rng rng(3);
    ImageTensor t(Shape{17, 9, 3});
    for (double& v : t.values()) v = rng.uniform();
    const auto path = temp_path("rt.ppm");
    write_image(path, t);
    const ImageTensor back = read_image(path);
    std::filesystem::remove(path);
    REQUIRE(back.shape() == t.shape());
    CHECK(oracle::max_abs_diff(back.values(), t.values()) <= 1.0 / 510.0 + 1e-15);
}

TEST_CASE("PPM decoder rejects bad input") {
    const std::string good = "P6\n# comment\n2 1\n255\n";
    std::vector<unsigned char> b(good.begin(), good.end());
    b.resize(b.size() + 6, 9);
    CHECK(decode_ppm(b).shape() == Shape{1, 2, 3});

    auto from = [](const std::string& s) { return std::vector<unsigned char>(s.begin(), s.end()); };
    CHECK(kind_of([&] { decode_ppm(from("P3\n1 1\n255\n0 0 0")); }) == ErrorKind::UnsupportedFormat);
    CHECK(kind_of([&] { decode_ppm(from("GIF89a")); }) == ErrorKind::UnsupportedFormat);
    CHECK(kind_of([&] { decode_ppm(from("P6\nx 1\n255\n")); }) == ErrorKind::CorruptHeader);
    CHECK(kind_of([&] { decode_ppm(from("P6\n1 1\n255\nab")); }) == ErrorKind::CorruptHeader);
    CHECK(kind_of([&] { decode_ppm(from("P6\n1 1\n65535\nabcdef")); }) == ErrorKind::UnsupportedFormat);
    CHECK(kind_of([&] { encode_ppm(ImageTensor(Shape{1, 1, 2})); }) == ErrorKind::UnsupportedFormat);
}

TEST_CASE("patch extraction") {
    ImageTensor img32(Shape{32, 32, 1});
    for (std::size_t k = 0; k < img32.size(); ++k) img32.values()[k] = static_cast<double>(k);
    auto one = extract_patches({img32}, 32, 32);
    REQUIRE(one.size() == 1);
    CHECK(one[0].values() == img32.values());

    const ImageTensor img64(Shape{64, 64, 3}, 0.25);
    CHECK(extract_patches({img64}, 32, 16).size() == 9);

    const auto a = extract_patches({img32, img32}, 8, 0, 100, 5);
    const auto b = extract_patches({img32, img32}, 8, 0, 100, 5);
    REQUIRE(a.size() == 100);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].values() == b[i].values());

    // a patch at (r, c) holds the source window
    const auto grid = extract_patches({img32}, 4, 8);
    CHECK(grid[5].at(0, 0, 0) == img32.at(8, 8, 0));
    CHECK(grid[5].at(3, 2, 0) == img32.at(11, 10, 0));

    CHECK(kind_of([&] { extract_patches({img32}, 33, 1); }) == ErrorKind::PatchTooLarge);
}

TEST_CASE("dequantization adds seeded noise below one step") {
    ImageBatch b{ImageTensor(Shape{4, 4, 3}, 0.2), ImageTensor(Shape{4, 4, 3}, 0.2)};
    ImageBatch c = b;
    dequantize(b, 1.0 / 255.0, 9);
    dequantize(c, 1.0 / 255.0, 9);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(b[i].values() == c[i].values());
        for (double v : b[i].values()) {
            CHECK(v >= 0.2);
            CHECK(v < 0.2 + 1.0 / 255.0);
        }
    }
    CHECK(b[0].values() != b[1].values());
}

TEST_CASE("raw tensor blob round trip is lossless") {
    Rng rng(4);
    ImageBatch batch;
    for (int i = 0; i < 3; ++i) batch.push_back(oracle::random_tensor(Shape{2, 5, 4}, rng));
    const auto base = temp_path("blob");
    write_tensor_blob(base, batch);
    CHECK(std::filesystem::file_size(base.string() + ".f64") == 3 * 40 * 8);
    const ImageBatch back = read_tensor_blob(base);
    REQUIRE(back.size() == 3);
    for (int i = 0; i < 3; ++i) CHECK(back[i].values() == batch[i].values());

    const auto text = read_file(base.string() + ".json");
    CHECK(std::string(text.begin(), text.end()).find("\"crbig-tensor\"") != std::string::npos);
    std::filesystem::resize_file(base.string() + ".f64", 100);
    CHECK(kind_of([&] { read_tensor_blob(base); }) == ErrorKind::CorruptHeader);
    std::filesystem::remove(base.string() + ".f64");
    std::filesystem::remove(base.string() + ".json");
}

TEST_CASE("report CSVs round trip and carry a major version") {
    MiReport r;
    r.append(0.125, 0.1, 1e-3);
    r.append(1.0 / 3.0, 0.2, 2e-3);
    const std::string csv = mi_report_csv(r);
    CHECK(csv.rfind("# crbig mi-report 1.", 0) == 0);
    const MiReport back = parse_mi_report_csv(csv);
    REQUIRE(back.layers.size() == 2);
    CHECK(back.layers[1].delta_mi_train == r.layers[1].delta_mi_train);
    CHECK(back.layers[1].accumulated_valid == r.layers[1].accumulated_valid);

    std::string future = csv;
    future.replace(future.find("1.0"), 3, "2.0");
    CHECK(kind_of([&] { parse_mi_report_csv(future); }) == ErrorKind::UnsupportedFormat);
    CHECK(kind_of([&] { parse_mi_report_csv("layer_index\n"); }) == ErrorKind::CorruptHeader);

    TrainReport t;
    t.epochs = {{1, 0.5, 0.25, 3.0}, {2, 0.125, 0.2, 2.5}};
    const TrainReport tb = parse_train_report_csv(train_report_csv(t));
    CHECK(tb.epochs == t.epochs);
}

TEST_CASE("plots and filter grids have the documented geometry") {
    MiReport r;
    for (int i = 0; i < 6; ++i) r.append(0.1 * i, 0.08 * i, 0.0);
    const ImageTensor plot = render_mi_plot(r, 320, 200);
    CHECK(plot.shape() == Shape{200, 320, 3});
    CHECK(plot.all_finite());
    double lo = 1.0, hi = 0.0;
    for (double v : plot.values()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo >= 0.0);
    CHECK(hi <= 1.0);
    CHECK(lo < hi);

    const ConvFilter f = space_to_depth_filter(3, 2);
    const ImageTensor grid = render_filter_grid(f, 4, 64);
    CHECK(grid.channels() == 3);
    // one column per output filter, positive part above the negative part
    CHECK(grid.width() >= f.ch_out() * f.k_w() * 4);
    CHECK(grid.height() >= 2 * f.k_h() * 4);
}

TEST_CASE("run configuration parsing and validation") {
    RunConfig c;
    c.load_text("# comment\ndata = a.bin\nlambda-act = 0.5\nblocks=2\n\n");
    CHECK(c.data == "a.bin");
    CHECK(c.lambda_act == 0.5);
    CHECK(c.blocks == 2);
    CHECK(kind_of([&] { c.set("no_such_key", "1"); }) == ErrorKind::InvalidConfig);
    CHECK(kind_of([&] { c.set("epochs", "ten"); }) == ErrorKind::InvalidConfig);
    CHECK(kind_of([&] { c.load_text("epochs 10\n"); }) == ErrorKind::InvalidConfig);

    RunConfig bad;
    bad.data = "x";
    bad.epochs = 0;
    bad.learning_rate = -1.0;
    bad.clamp_eps = 0.0;
    const auto p = bad.problems("train");
    REQUIRE(p.size() == 3);
    CHECK(p[0].rfind("learning_rate", 0) == 0);
    CHECK(p[1].rfind("epochs", 0) == 0);
    CHECK(p[2].rfind("clamp_eps", 0) == 0);
    CHECK(kind_of([&] { bad.validate("train"); }) == ErrorKind::InvalidConfig);

    RunConfig synth;
    CHECK(synth.problems("synth") == std::vector<std::string>{"model: required"});
    synth.model = "m.crbg";
    CHECK(synth.problems("synth").empty());

    CHECK(parse_index_list("0, 3,5") == std::vector<std::size_t>{0, 3, 5});
    CHECK(parse_double_list("0,0.5,1e1") == std::vector<double>{0.0, 0.5, 10.0});
}
