#pragma once

// Flat `key = value` experiment configuration. Unknown keys are rejected; the
// resolved configuration serialises back to the same format.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "dsgan/data.hpp"
#include "dsgan/error.hpp"
#include "dsgan/train.hpp"

namespace dsgan {

enum class DatasetKind { synthetic, folder };

inline std::string_view to_string(DatasetKind k) { return k == DatasetKind::synthetic ? "synthetic" : "folder"; }

struct ExperimentConfig {
    TrainConfig train;
    DatasetKind dataset = DatasetKind::synthetic;
    std::string dataset_path;
    SceneStyle scene_style = SceneStyle::outdoor;
    int scene_classes = 4;
    int scene_count = 10000;
    double scene_noise = 0.04;
    std::uint64_t scene_seed = 1;
    bool conditional = false;
    std::string output_dir = "run";
    int eval_samples = 3000;
    std::uint64_t eval_seed = 7;
    int probe_iterations = 500;

    bool operator==(const ExperimentConfig& o) const { return to_text() == o.to_text(); }

    std::string to_text() const;
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long long x = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        if (x < 0 && std::is_unsigned_v<Int>) throw std::invalid_argument(v);
        return static_cast<Int>(x);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
    }
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

}  // namespace detail

inline std::string ExperimentConfig::to_text() const {
    const auto& t = train;
    std::ostringstream os;
    auto kv = [&](const char* k, const std::string& v) { os << k << " = " << v << '\n'; };
    kv("objective", std::string(to_string(t.objective)));
    kv("pretext", std::string(to_string(t.pretext)));
    kv("alpha", detail::fmt_double(t.alpha));
    kv("beta", detail::fmt_double(t.beta));
    kv("lr", detail::fmt_double(t.lr));
    kv("adam_beta1", detail::fmt_double(t.adam_beta1));
    kv("adam_beta2", detail::fmt_double(t.adam_beta2));
    kv("n_dis", std::to_string(t.n_dis));
    kv("batch", std::to_string(t.batch));
    kv("iters", std::to_string(t.iters));
    kv("grid", std::to_string(t.grid));
    kv("num_perms", std::to_string(t.num_perms));
    kv("seed", std::to_string(t.seed));
    kv("data_seed", std::to_string(t.data_seed));
    kv("perm_seed", std::to_string(t.perm_seed));
    kv("eval_every", std::to_string(t.eval_every));
    kv("checkpoint_every", std::to_string(t.checkpoint_every));
    kv("image_size", std::to_string(t.image_size));
    kv("channels", std::to_string(t.channels));
    kv("base_channels", std::to_string(t.base_channels));
    kv("latent_dim", std::to_string(t.latent_dim));
    kv("spectral_norm", t.spectral_norm ? "true" : "false");
    kv("conditional", conditional ? "true" : "false");
    kv("dataset", std::string(to_string(dataset)));
    kv("dataset_path", dataset_path);
    kv("scene_style", std::string(to_string(scene_style)));
    kv("scene_classes", std::to_string(scene_classes));
    kv("scene_count", std::to_string(scene_count));
    kv("scene_noise", detail::fmt_double(scene_noise));
    kv("scene_seed", std::to_string(scene_seed));
    kv("output_dir", output_dir);
    kv("eval_samples", std::to_string(eval_samples));
    kv("eval_seed", std::to_string(eval_seed));
    kv("probe_iterations", std::to_string(probe_iterations));
    return os.str();
}

/// Parses configuration text. Objective-dependent defaults (Adam moments,
/// n_dis, spectral norm) are applied first and explicit keys override them.
inline ExperimentConfig parse_config(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(std::string_view(t).substr(0, eq));
        const std::string value = detail::trim(std::string_view(t).substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        if (!kv.emplace(key, value).second) throw ConfigError("config key '" + key + "' given twice");
    }

    ExperimentConfig c;
    auto& t = c.train;
    auto take = [&](const char* key) -> std::optional<std::string> {
        const auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    auto wrap = [](const char* key, auto&& fn) {
        try {
            return fn();
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(std::string("config key '") + key + "': " + e.what());
        }
    };

    if (auto v = take("objective")) t.objective = wrap("objective", [&] { return parse_adversarial_kind(*v); });
    apply_objective_defaults(t);
    t.batch = 64;
    if (auto v = take("pretext")) t.pretext = wrap("pretext", [&] { return parse_pretext(*v); });
    if (auto v = take("alpha")) t.alpha = detail::parse_double("alpha", *v);
    if (auto v = take("beta")) t.beta = detail::parse_double("beta", *v);
    if (auto v = take("lr")) t.lr = detail::parse_double("lr", *v);
    if (auto v = take("adam_beta1")) t.adam_beta1 = detail::parse_double("adam_beta1", *v);
    if (auto v = take("adam_beta2")) t.adam_beta2 = detail::parse_double("adam_beta2", *v);
    if (auto v = take("n_dis")) t.n_dis = detail::parse_int<int>("n_dis", *v);
    if (auto v = take("batch")) t.batch = detail::parse_int<int>("batch", *v);
    if (auto v = take("iters")) t.iters = detail::parse_int<long>("iters", *v);
    if (auto v = take("grid")) t.grid = detail::parse_int<int>("grid", *v);
    if (auto v = take("num_perms")) t.num_perms = detail::parse_int<int>("num_perms", *v);
    else if (t.grid == 2) t.num_perms = 24;
    if (auto v = take("seed")) t.seed = detail::parse_int<std::uint64_t>("seed", *v);
    if (auto v = take("data_seed")) t.data_seed = detail::parse_int<std::uint64_t>("data_seed", *v);
    if (auto v = take("perm_seed")) t.perm_seed = detail::parse_int<std::uint64_t>("perm_seed", *v);
    if (auto v = take("eval_every")) t.eval_every = detail::parse_int<long>("eval_every", *v);
    if (auto v = take("checkpoint_every")) t.checkpoint_every = detail::parse_int<long>("checkpoint_every", *v);
    if (auto v = take("image_size")) t.image_size = detail::parse_int<int>("image_size", *v);
    if (auto v = take("channels")) t.channels = detail::parse_int<int>("channels", *v);
    if (auto v = take("base_channels")) t.base_channels = detail::parse_int<int>("base_channels", *v);
    if (auto v = take("latent_dim")) t.latent_dim = detail::parse_int<int>("latent_dim", *v);
    if (auto v = take("spectral_norm")) t.spectral_norm = detail::parse_bool("spectral_norm", *v);
    if (auto v = take("conditional")) c.conditional = detail::parse_bool("conditional", *v);

    if (auto v = take("dataset_path")) c.dataset_path = *v;
    if (auto v = take("dataset")) {
        if (*v == "synthetic") c.dataset = DatasetKind::synthetic;
        else if (*v == "folder") c.dataset = DatasetKind::folder;
        else throw ConfigError("config key 'dataset': expected synthetic or folder, got '" + *v + "'");
    } else if (!c.dataset_path.empty()) {
        c.dataset = DatasetKind::folder;
    }
    if (auto v = take("scene_style")) c.scene_style = wrap("scene_style", [&] { return parse_scene_style(*v); });
    if (auto v = take("scene_classes")) c.scene_classes = detail::parse_int<int>("scene_classes", *v);
    if (auto v = take("scene_count")) c.scene_count = detail::parse_int<int>("scene_count", *v);
    if (auto v = take("scene_noise")) c.scene_noise = detail::parse_double("scene_noise", *v);
    if (auto v = take("scene_seed")) c.scene_seed = detail::parse_int<std::uint64_t>("scene_seed", *v);
    if (auto v = take("output_dir")) c.output_dir = *v;
    if (auto v = take("eval_samples")) c.eval_samples = detail::parse_int<int>("eval_samples", *v);
    if (auto v = take("eval_seed")) c.eval_seed = detail::parse_int<std::uint64_t>("eval_seed", *v);
    if (auto v = take("probe_iterations")) c.probe_iterations = detail::parse_int<int>("probe_iterations", *v);

    if (!kv.empty()) throw ConfigError("unknown config key '" + kv.begin()->first + "'");

    if (c.dataset == DatasetKind::folder) {
        if (c.dataset_path.empty()) throw ConfigError("config key 'dataset_path': required for dataset = folder");
        if (!std::filesystem::is_directory(c.dataset_path))
            throw ConfigError("config key 'dataset_path': not a directory: " + c.dataset_path);
        c.dataset_path = std::filesystem::absolute(c.dataset_path).lexically_normal().string();
    }
    if (c.dataset == DatasetKind::synthetic) {
        if (c.scene_classes < 1) throw ConfigError("config key 'scene_classes': must be >= 1");
        if (c.scene_count < 2) throw ConfigError("config key 'scene_count': must be >= 2");
        if (c.scene_noise < 0) throw ConfigError("config key 'scene_noise': must be >= 0");
        t.num_classes = c.conditional ? c.scene_classes : 0;
    }
    if (t.image_size < 8) throw ConfigError("config key 'image_size': must be >= 8");
    if (c.eval_samples < 2) throw ConfigError("config key 'eval_samples': must be >= 2");
    if (c.probe_iterations < 1) throw ConfigError("config key 'probe_iterations': must be >= 1");
    if (c.output_dir.empty()) throw ConfigError("config key 'output_dir': must not be empty");
    try {
        t.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("invalid configuration: ") + e.what());
    }
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

}  // namespace dsgan
