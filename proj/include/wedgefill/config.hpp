#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "wedgefill/schedule.hpp"
#include "wedgefill/tomo.hpp"

namespace wedgefill {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat key=value run configuration. Every key has a default; unknown keys
// are rejected. parse -> serialize -> parse is a fixed point.
struct RunConfig {
    // [geometry]
    int image_size = 128;
    int num_angles = 180;
    double angle_step_deg = 1.0;
    int detector_bins = 192;
    double detector_spacing = 1.0;
    // [schedule]
    int T = 100;
    double lambda = 0.5;
    double zeta_lo = 0.002;
    double zeta_hi = 0.04;
    // [train.score]
    int score_iterations = 20000;
    int score_batch = 4;
    double score_lr = 5e-4;
    double score_lr_min = 1e-5;
    int score_hidden = 32;
    double scenario_deg = 60.0;  // missing wedge used for all training stages
    uint64_t score_seed = 1;
    // [train.distill]
    int distill_iterations = 5000;
    int distill_batch = 8;
    double distill_lr = 5e-4;
    double distill_lr_min = 1e-5;
    int distill_hidden = 32;
    int distill_pairs = 2000;
    double boundary_weight = 0.01;
    double proxy_gamma = 0.5;
    uint64_t distill_seed = 2;
    // [train.postproc]
    int postproc_iterations = 5000;
    int postproc_batch = 8;
    double postproc_lr = 5e-4;
    double postproc_lr_min = 1e-5;
    int postproc_hidden = 32;
    int postproc_ensemble = 4;
    double postproc_proxy_weight = 0.5;
    uint64_t postproc_seed = 3;
    // [eval]
    std::vector<double> scenarios_deg = {60.0, 90.0, 120.0};
    int runs = 10;
    int eval_ensemble = 10;
    double tv_lambda = 0.1;
    int tv_iters = 500;
    int num_train = 200;
    int num_test = 20;
    uint64_t eval_seed = 4;
    std::string raw_dir;  // optional headerless float32 slice import
    int raw_size = 0;
    double hu_lo = -250.0;
    double hu_hi = 500.0;

    ScanGeometry geometry() const {
        return {num_angles, angle_step_deg, detector_bins, detector_spacing};
    }
    NoiseSchedule schedule() const { return make_linear_schedule(T, lambda, zeta_lo, zeta_hi); }
    // Fixed normalization putting typical line integrals near [0,1].
    double sino_scale() const { return static_cast<double>(image_size); }
};

namespace detail {

inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string fmt_list(const std::vector<double>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += fmt_double(v[i]);
    }
    return s;
}

struct KeyBinding {
    std::string section, key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

inline double parse_double(const std::string& s) {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw ConfigError("bad number: " + s);
    return v;
}
inline int parse_int(const std::string& s) {
    size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) throw ConfigError("bad integer: " + s);
    return static_cast<int>(v);
}
inline uint64_t parse_u64(const std::string& s) {
    size_t pos = 0;
    unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw ConfigError("bad seed: " + s);
    return v;
}
inline std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(item));
    return out;
}

inline const std::vector<KeyBinding>& key_bindings() {
    auto D = [](double RunConfig::*f) {
        return std::pair{std::function([f](const RunConfig& c) { return fmt_double(c.*f); }),
                         std::function([f](RunConfig& c, const std::string& s) { c.*f = parse_double(s); })};
    };
    auto I = [](int RunConfig::*f) {
        return std::pair{std::function([f](const RunConfig& c) { return std::to_string(c.*f); }),
                         std::function([f](RunConfig& c, const std::string& s) { c.*f = parse_int(s); })};
    };
    auto U = [](uint64_t RunConfig::*f) {
        return std::pair{std::function([f](const RunConfig& c) { return std::to_string(c.*f); }),
                         std::function([f](RunConfig& c, const std::string& s) { c.*f = parse_u64(s); })};
    };
    static const std::vector<KeyBinding> bindings = [&] {
        std::vector<KeyBinding> b;
        auto add = [&b](const char* sec, const char* key, auto pair) {
            b.push_back({sec, key, pair.first, pair.second});
        };
        add("geometry", "image_size", I(&RunConfig::image_size));
        add("geometry", "num_angles", I(&RunConfig::num_angles));
        add("geometry", "angle_step_deg", D(&RunConfig::angle_step_deg));
        add("geometry", "detector_bins", I(&RunConfig::detector_bins));
        add("geometry", "detector_spacing", D(&RunConfig::detector_spacing));
        add("schedule", "T", I(&RunConfig::T));
        add("schedule", "lambda", D(&RunConfig::lambda));
        add("schedule", "zeta_lo", D(&RunConfig::zeta_lo));
        add("schedule", "zeta_hi", D(&RunConfig::zeta_hi));
        add("train.score", "iterations", I(&RunConfig::score_iterations));
        add("train.score", "batch_size", I(&RunConfig::score_batch));
        add("train.score", "lr", D(&RunConfig::score_lr));
        add("train.score", "lr_min", D(&RunConfig::score_lr_min));
        add("train.score", "hidden_channels", I(&RunConfig::score_hidden));
        add("train.score", "scenario_deg", D(&RunConfig::scenario_deg));
        add("train.score", "seed", U(&RunConfig::score_seed));
        add("train.distill", "iterations", I(&RunConfig::distill_iterations));
        add("train.distill", "batch_size", I(&RunConfig::distill_batch));
        add("train.distill", "lr", D(&RunConfig::distill_lr));
        add("train.distill", "lr_min", D(&RunConfig::distill_lr_min));
        add("train.distill", "hidden_channels", I(&RunConfig::distill_hidden));
        add("train.distill", "pairs", I(&RunConfig::distill_pairs));
        add("train.distill", "boundary_weight", D(&RunConfig::boundary_weight));
        add("train.distill", "proxy_gamma", D(&RunConfig::proxy_gamma));
        add("train.distill", "seed", U(&RunConfig::distill_seed));
        add("train.postproc", "iterations", I(&RunConfig::postproc_iterations));
        add("train.postproc", "batch_size", I(&RunConfig::postproc_batch));
        add("train.postproc", "lr", D(&RunConfig::postproc_lr));
        add("train.postproc", "lr_min", D(&RunConfig::postproc_lr_min));
        add("train.postproc", "hidden_channels", I(&RunConfig::postproc_hidden));
        add("train.postproc", "n_ensemble", I(&RunConfig::postproc_ensemble));
        add("train.postproc", "proxy_weight", D(&RunConfig::postproc_proxy_weight));
        add("train.postproc", "seed", U(&RunConfig::postproc_seed));
        b.push_back({"eval", "scenarios_deg",
                     [](const RunConfig& c) { return fmt_list(c.scenarios_deg); },
                     [](RunConfig& c, const std::string& s) { c.scenarios_deg = parse_list(s); }});
        add("eval", "runs", I(&RunConfig::runs));
        add("eval", "n_ensemble", I(&RunConfig::eval_ensemble));
        add("eval", "tv_lambda", D(&RunConfig::tv_lambda));
        add("eval", "tv_iters", I(&RunConfig::tv_iters));
        add("eval", "num_train", I(&RunConfig::num_train));
        add("eval", "num_test", I(&RunConfig::num_test));
        add("eval", "seed", U(&RunConfig::eval_seed));
        b.push_back({"eval", "raw_dir", [](const RunConfig& c) { return c.raw_dir; },
                     [](RunConfig& c, const std::string& s) { c.raw_dir = s; }});
        add("eval", "raw_size", I(&RunConfig::raw_size));
        add("eval", "hu_lo", D(&RunConfig::hu_lo));
        add("eval", "hu_hi", D(&RunConfig::hu_hi));
        return b;
    }();
    return bindings;
}

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace detail

inline std::string serialize_config(const RunConfig& cfg) {
    std::string out;
    std::string cur;
    for (const auto& kb : detail::key_bindings()) {
        if (kb.section != cur) {
            if (!out.empty()) out += "\n";
            out += "[" + kb.section + "]\n";
            cur = kb.section;
        }
        out += kb.key + " = " + kb.get(cfg) + "\n";
    }
    return out;
}

inline RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::string section;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": bad section header");
            section = t.substr(1, t.size() - 2);
            continue;
        }
        size_t eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = detail::trim(t.substr(0, eq));
        std::string val = detail::trim(t.substr(eq + 1));
        bool found = false;
        for (const auto& kb : detail::key_bindings()) {
            if (kb.section == section && kb.key == key) {
                try {
                    kb.set(cfg, val);
                } catch (const std::exception& e) {
                    throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
                }
                found = true;
                break;
            }
        }
        if (!found)
            throw ConfigError("line " + std::to_string(lineno) + ": unknown key [" + section + "] " + key);
    }
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config: " + path.string());
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_config_text(text);
}

// 64-bit FNV-1a over the canonical serialization.
inline uint64_t config_hash(const RunConfig& cfg) {
    uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : serialize_config(cfg)) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline void validate_config(const RunConfig& cfg) {
    cfg.geometry().validate_covers(cfg.image_size);
    if (cfg.image_size < 16) throw ConfigError("image_size must be >= 16");
    if (!(cfg.lambda > 0.0)) throw ConfigError("schedule lambda must be positive");
    if (cfg.T < 1) throw ConfigError("schedule T must be >= 1");
    if (cfg.boundary_weight < 0.0) throw ConfigError("boundary_weight must be >= 0");
    if (cfg.eval_ensemble < 1 || cfg.postproc_ensemble < 1) throw ConfigError("n_ensemble must be >= 1");
    if (cfg.scenario_deg <= 0.0 || cfg.scenario_deg >= cfg.geometry().coverage_deg())
        throw ConfigError("scenario_deg out of range");
}

}  // namespace wedgefill
