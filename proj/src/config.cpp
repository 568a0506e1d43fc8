#include "crbig/config.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "crbig/error.hpp"

namespace crbig {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string normalize_key(std::string key) {
    std::replace(key.begin(), key.end(), '-', '_');
    return key;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* type) {
    fail(ErrorKind::InvalidConfig, key + ": cannot parse '" + value + "' as " + type);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
        bad_value(key, v, "a nonnegative integer");
    }
    try {
        return std::stoull(v);
    } catch (const std::exception&) {
        bad_value(key, v, "a nonnegative integer");
    }
}

long parse_long(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long r = std::stol(v, &used);
        if (used != v.size()) bad_value(key, v, "an integer");
        return r;
    } catch (const std::exception&) {
        bad_value(key, v, "an integer");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double r = std::stod(v, &used);
        if (used != v.size()) bad_value(key, v, "a number");
        return r;
    } catch (const std::exception&) {
        bad_value(key, v, "a number");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    bad_value(key, v, "a boolean");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

template <class T>
Setter field(T RunConfig::*member) {
    return [member](RunConfig& c, const std::string& k, const std::string& v) {
        if constexpr (std::is_same_v<T, std::string>) {
            c.*member = v;
        } else if constexpr (std::is_same_v<T, bool>) {
            c.*member = parse_bool(k, v);
        } else if constexpr (std::is_same_v<T, double>) {
            c.*member = parse_double(k, v);
        } else if constexpr (std::is_same_v<T, long>) {
            c.*member = parse_long(k, v);
        } else {
            c.*member = static_cast<T>(parse_u64(k, v));
        }
    };
}

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"data", field(&RunConfig::data)},
        {"valid_data", field(&RunConfig::valid_data)},
        {"model", field(&RunConfig::model)},
        {"out", field(&RunConfig::out)},
        {"out_dir", field(&RunConfig::out_dir)},
        {"input", field(&RunConfig::input)},
        {"max_images", field(&RunConfig::max_images)},
        {"patch_size", field(&RunConfig::patch_size)},
        {"patch_stride", field(&RunConfig::patch_stride)},
        {"random_patches", field(&RunConfig::random_patches)},
        {"valid_fraction", field(&RunConfig::valid_fraction)},
        {"dequantize", field(&RunConfig::dequantize)},
        {"blocks", field(&RunConfig::blocks)},
        {"layers", field(&RunConfig::layers)},
        {"stride", field(&RunConfig::stride)},
        {"kernel", field(&RunConfig::kernel)},
        {"sub_kernel", field(&RunConfig::sub_kernel)},
        {"lambda_act", field(&RunConfig::lambda_act)},
        {"lambda_w", field(&RunConfig::lambda_w)},
        {"learning_rate", field(&RunConfig::learning_rate)},
        {"epochs", field(&RunConfig::epochs)},
        {"batch_size", field(&RunConfig::batch_size)},
        {"seed", field(&RunConfig::seed)},
        {"target_residual", field(&RunConfig::target_residual)},
        {"bins", field(&RunConfig::bins)},
        {"tail_extension", field(&RunConfig::tail_extension)},
        {"clamp_eps", field(&RunConfig::clamp_eps)},
        {"count", field(&RunConfig::count)},
        {"after_block", field(&RunConfig::after_block)},
        {"layer", field(&RunConfig::layer)},
        {"scale", field(&RunConfig::scale)},
        {"max_filters", field(&RunConfig::max_filters)},
        {"band", field(&RunConfig::band)},
        {"amplitudes", field(&RunConfig::amplitudes)},
        {"threads", field(&RunConfig::threads)},
    };
    return table;
}

} // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    const std::string k = normalize_key(trim(key));
    const auto it = setters().find(k);
    if (it == setters().end()) fail(ErrorKind::InvalidConfig, k + ": unknown configuration key");
    it->second(*this, k, trim(value));
}

void RunConfig::load_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            fail(ErrorKind::InvalidConfig, "line " + std::to_string(lineno) + ": expected key = value");
        }
        set(line.substr(0, eq), line.substr(eq + 1));
    }
}

std::vector<std::string> RunConfig::problems(const std::string& command) const {
    std::vector<std::string> p;
    auto need = [&](bool ok, const std::string& msg) {
        if (!ok) p.push_back(msg);
    };
    const bool training = command == "train";
    const bool reads_data = training || command == "transform" || command == "mi-report";
    const bool reads_model = !training;

    need(!reads_data || !data.empty(), "data: required");
    need(!reads_model || !model.empty(), "model: required");
    if (command == "transform" || command == "mi-report") need(!out.empty(), "out: required");
    if (command == "invert") need(!input.empty(), "input: required");
    if (command == "filters") need(!out.empty(), "out: required");

    if (training) {
        need(blocks >= 1, "blocks: must be >= 1");
        need(layers >= 1, "layers: must be >= 1");
        need(stride >= 1, "stride: must be >= 1");
        need(kernel >= 1, "kernel: must be >= 1");
        need(sub_kernel == 0 || sub_kernel % std::max<std::size_t>(stride, 1) == 0,
             "sub_kernel: must be a multiple of stride");
        need(lambda_act >= 0.0 && std::isfinite(lambda_act), "lambda_act: must be >= 0");
        need(lambda_w >= 0.0 && std::isfinite(lambda_w), "lambda_w: must be >= 0");
        need(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate: must be > 0");
        need(epochs >= 1, "epochs: must be >= 1");
        need(batch_size >= 1, "batch_size: must be >= 1");
        need(target_residual > 0.0, "target_residual: must be > 0");
        need(bins >= 1, "bins: must be >= 1");
        need(tail_extension >= 0.0 && std::isfinite(tail_extension), "tail_extension: must be >= 0");
        need(clamp_eps > 0.0 && clamp_eps < 0.25, "clamp_eps: must be in (0, 0.25)");
        need(valid_fraction > 0.0 && valid_fraction < 1.0, "valid_fraction: must be in (0, 1)");
        need(patch_size == 0 || patch_stride > 0 || random_patches > 0,
             "patch_stride: must be > 0 (or random_patches > 0) when patch_size is set");
    }
    if (command == "synth") need(count >= 1, "count: must be >= 1");
    if (command == "synth") need(after_block >= -1, "after_block: must be >= 0");
    if (command == "filters") need(scale >= 1, "scale: must be >= 1");
    if (command == "probe") {
        try {
            need(!parse_index_list(band).empty(), "band: must list at least one channel");
        } catch (const Error& e) {
            p.push_back(std::string("band: ") + e.what());
        }
        try {
            const auto a = parse_double_list(amplitudes);
            bool ok = !a.empty();
            for (std::size_t i = 0; i < a.size(); ++i) {
                ok = ok && a[i] >= 0.0 && (i == 0 || a[i] > a[i - 1]);
            }
            need(ok, "amplitudes: must be a nonempty, nonnegative, increasing list");
        } catch (const Error& e) {
            p.push_back(std::string("amplitudes: ") + e.what());
        }
    }
    return p;
}

void RunConfig::validate(const std::string& command) const {
    const auto p = problems(command);
    if (p.empty()) return;
    std::string msg;
    for (const auto& s : p) msg += (msg.empty() ? "" : "; ") + s;
    fail(ErrorKind::InvalidConfig, msg);
}

TrainConfig RunConfig::train_config() const {
    TrainConfig c;
    c.lambda_act = lambda_act;
    c.lambda_w = lambda_w;
    c.learning_rate = learning_rate;
    c.epochs = epochs;
    c.batch_size = batch_size;
    c.seed = seed;
    c.target_residual = target_residual;
    return c;
}

ArchitectureSpec RunConfig::arch() const {
    return ArchitectureSpec::uniform(blocks, layers, stride, kernel, sub_kernel);
}

MarginalOptions RunConfig::marginal_options() const { return {bins, tail_extension, clamp_eps}; }

std::vector<std::size_t> parse_index_list(const std::string& text) {
    std::vector<std::size_t> out;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(static_cast<std::size_t>(parse_u64("list", item)));
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(parse_double("list", item));
    }
    return out;
}

} // namespace crbig
