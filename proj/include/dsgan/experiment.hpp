#pragma once

// Run orchestration: dataset preparation, periodic evaluation, CSV logging,
// checkpointing, standalone evaluation and the matched-budget comparison.

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dsgan/checkpoint.hpp"
#include "dsgan/config.hpp"
#include "dsgan/data.hpp"
#include "dsgan/eval.hpp"
#include "dsgan/image_io.hpp"
#include "dsgan/plot.hpp"
#include "dsgan/train.hpp"

namespace dsgan {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Data

struct ExperimentData {
    std::shared_ptr<const Dataset<float>> train;
    Dataset<float> heldout;  // real images never used for training
};

inline SyntheticSceneSpec scene_spec(const ExperimentConfig& c) {
    return {c.scene_style, c.scene_classes, c.train.image_size, c.train.channels, c.scene_noise, c.scene_seed};
}

/// Synthetic scenes: the first scene_count renders train, the next
/// eval_samples are held out. Folders: every fifth image (sorted order) is
/// held out once there are at least ten images.
inline ExperimentData prepare_data(const ExperimentConfig& c) {
    ExperimentData out;
    if (c.dataset == DatasetKind::synthetic) {
        Dataset<float> all = generate_synthetic_dataset(scene_spec(c), c.scene_count + c.eval_samples);
        out.train = std::make_shared<Dataset<float>>(all.subset(0, c.scene_count));
        out.heldout = all.subset(c.scene_count, all.size());
        return out;
    }
    FolderLoad load = load_image_folder(c.dataset_path, c.train.image_size, c.train.channels);
    const Dataset<float>& all = load.data;
    detail::require(all.size() > 0, "no decodable images in " + c.dataset_path);
    if (all.size() < 10) {
        out.train = std::make_shared<Dataset<float>>(all);
        out.heldout = all;
        return out;
    }
    std::vector<int> tr, ho;
    for (int i = 0; i < all.size(); ++i) (i % 5 == 4 ? ho : tr).push_back(i);
    auto pick = [&](const std::vector<int>& idx) {
        Dataset<float> d;
        d.images = gather_images(all.images, idx);
        if (all.labelled()) d.labels = gather_labels(all.labels, idx);
        d.num_classes = all.num_classes;
        return d;
    };
    out.train = std::make_shared<Dataset<float>>(pick(tr));
    out.heldout = pick(ho);
    return out;
}

/// Training configuration with the class count filled in from the data.
inline TrainConfig resolve_train_config(const ExperimentConfig& c, const ExperimentData& d) {
    TrainConfig t = c.train;
    if (c.conditional) {
        detail::require(d.train->labelled() && d.train->num_classes >= 2, "conditional training needs a labelled dataset");
        t.num_classes = d.train->num_classes;
    } else {
        t.num_classes = 0;
    }
    return t;
}

// ---------------------------------------------------------------------------
// Metric CSV

inline constexpr const char* kMetricHeader = "iter,L_theta,L_phi,V_theta,V_phi,fid,deshuffle_acc,probe_acc";

inline std::string fmt10(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::string format_metric_row(const MetricRecord& r) {
    auto opt = [](const std::optional<double>& v) { return v ? fmt10(*v) : std::string(); };
    return std::to_string(r.iter) + ',' + fmt10(r.L_theta) + ',' + fmt10(r.L_phi) + ',' + opt(r.V_theta) + ',' + opt(r.V_phi) + ',' +
           opt(r.fid) + ',' + opt(r.deshuffle_acc) + ',' + opt(r.probe_acc);
}

inline std::vector<MetricRecord> read_metric_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    std::string line;
    std::getline(is, line);
    if (detail::trim(line) != kMetricHeader) throw std::runtime_error(path + ": unexpected header");
    std::vector<MetricRecord> out;
    while (std::getline(is, line)) {
        if (detail::trim(line).empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        while (cells.size() < 8) cells.emplace_back();
        auto opt = [](const std::string& s) -> std::optional<double> {
            if (s.empty()) return std::nullopt;
            return std::stod(s);
        };
        MetricRecord r;
        r.iter = std::stol(cells[0]);
        r.L_theta = std::stod(cells[1]);
        r.L_phi = std::stod(cells[2]);
        r.V_theta = opt(cells[3]);
        r.V_phi = opt(cells[4]);
        r.fid = opt(cells[5]);
        r.deshuffle_acc = opt(cells[6]);
        r.probe_acc = opt(cells[7]);
        out.push_back(r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation during and after training

struct EvalSettings {
    int samples = 3000;
    std::uint64_t seed = 7;
    int probe_iterations = 500;
};

/// Evaluates a trainer against held-out real data. Each call draws from fresh
/// streams seeded by `settings.seed`, so results depend only on the weights.
class Evaluator {
public:
    Evaluator(Dataset<float> heldout, std::shared_ptr<const Dataset<float>> train, const EvalSettings& s)
        : heldout_(std::move(heldout)), train_(std::move(train)), settings_(s), embedder_(heldout_.images.c()) {
        const int n = std::min(settings_.samples, heldout_.size());
        real_stats_ = gaussian_stats(embedder_.embed(heldout_.images.slice(0, n), "heldout"));
    }

    const std::string& embedder_version() const noexcept { return embedder_.version(); }

    double fid(Trainer<float>& t) {
        Rng rng(settings_.seed);
        const Tensor<float> fake = t.sample_images(settings_.samples, rng);
        return frechet_distance(real_stats_, gaussian_stats(embedder_.embed(fake, "generated")));
    }

    std::optional<AccuracyEstimate> deshuffle_real(Trainer<float>& t, const Dataset<float>* data = nullptr) {
        if (t.config().pretext != Pretext::deshuffle) return std::nullopt;
        const Dataset<float>& d = data ? *data : heldout_;
        Rng rng(settings_.seed + 1);
        const int n = std::min(settings_.samples, d.size());
        return deshuffle_accuracy(t.discriminator(), d.images.slice(0, n), t.permutations(), rng);
    }

    std::optional<AccuracyEstimate> deshuffle_fake(Trainer<float>& t) {
        if (t.config().pretext != Pretext::deshuffle) return std::nullopt;
        Rng rng(settings_.seed + 2);
        const Tensor<float> fake = t.sample_images(settings_.samples, rng);
        Rng srng(settings_.seed + 3);
        return deshuffle_accuracy(t.discriminator(), fake, t.permutations(), srng);
    }

    std::optional<ProbeReport> probe(Discriminator<float>& d) {
        if (!train_->labelled() || !heldout_.labelled()) return std::nullopt;
        const int ntr = std::min(settings_.samples, train_->size());
        const int nte = std::min(settings_.samples, heldout_.size());
        const FeatureSet tr = trunk_features(d, train_->images.slice(0, ntr),
                                             std::vector<int>(train_->labels.begin(), train_->labels.begin() + ntr), "train");
        const FeatureSet te = trunk_features(d, heldout_.images.slice(0, nte),
                                             std::vector<int>(heldout_.labels.begin(), heldout_.labels.begin() + nte), "heldout");
        ProbeConfig pc;
        pc.iterations = settings_.probe_iterations;
        return linear_probe(tr, te, pc);
    }

    void fill(Trainer<float>& t, MetricRecord& rec) {
        rec.fid = fid(t);
        if (auto a = deshuffle_real(t)) rec.deshuffle_acc = a->accuracy;
        if (auto p = probe(t.discriminator())) rec.probe_acc = p->test_accuracy;
    }

private:
    Dataset<float> heldout_;
    std::shared_ptr<const Dataset<float>> train_;
    EvalSettings settings_;
    Embedder embedder_;
    GaussianStats real_stats_;
};

inline EvalSettings eval_settings(const ExperimentConfig& c) { return {c.eval_samples, c.eval_seed, c.probe_iterations}; }

// ---------------------------------------------------------------------------
// Training runs

inline void write_text(const fs::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << text;
}

inline std::string read_text(const fs::path& p) {
    std::ifstream is(p);
    if (!is) throw std::runtime_error("cannot read " + p.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline std::string seeds_text(const ExperimentConfig& c) {
    std::ostringstream os;
    os << "seed = " << c.train.seed << "\ndata_seed = " << c.train.data_seed << "\nperm_seed = " << c.train.perm_seed
       << "\nscene_seed = " << c.scene_seed << "\neval_seed = " << c.eval_seed << '\n';
    return os.str();
}

struct TrainRun {
    ExperimentConfig config;
    ExperimentData data;
    std::unique_ptr<Trainer<float>> trainer;
    std::vector<MetricRecord> log;
    fs::path dir;
};

inline std::string checkpoint_name(long iter) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "ckpt_%08ld.bin", iter);
    return buf;
}

/// Trains per `c`, writing config.txt, seeds.txt, perms.txt (deshuffle),
/// metrics.csv, timing.csv, checkpoints/ and STATUS into c.output_dir.
/// STATUS reads "incomplete" until the run finishes.
inline TrainRun run_training(const ExperimentConfig& c, std::ostream* progress = nullptr) {
    TrainRun run;
    run.config = c;
    run.dir = c.output_dir;
    fs::create_directories(run.dir / "checkpoints");
    write_text(run.dir / "STATUS", "incomplete\n");
    write_text(run.dir / "config.txt", c.to_text());
    write_text(run.dir / "seeds.txt", seeds_text(c));

    run.data = prepare_data(c);
    const TrainConfig tc = resolve_train_config(c, run.data);
    run.trainer = std::make_unique<Trainer<float>>(tc, run.data.train);
    if (tc.pretext == Pretext::deshuffle) save_permutation_set((run.dir / "perms.txt").string(), run.trainer->permutations());

    Evaluator evaluator(run.data.heldout, run.data.train, eval_settings(c));
    std::ofstream csv(run.dir / "metrics.csv", std::ios::trunc);
    csv << kMetricHeader << '\n';
    std::ofstream timing(run.dir / "timing.csv", std::ios::trunc);
    timing << "iter,seconds_per_1k\n";
    const std::string config_text = c.to_text();

    using clock = std::chrono::steady_clock;
    auto window_start = clock::now();
    long window_iter = 0;
    Trainer<float>::Hooks hooks;
    hooks.evaluate = [&](Trainer<float>& t, MetricRecord& rec) { evaluator.fill(t, rec); };
    hooks.checkpoint = [&](Trainer<float>& t) {
        const fs::path p = run.dir / "checkpoints" / checkpoint_name(t.iteration());
        save_checkpoint(p.string(), t, config_text);
        return p.string();
    };
    hooks.record = [&](const MetricRecord& r) {
        csv << format_metric_row(r) << '\n';
        csv.flush();
        if (r.iter % 1000 == 0 || r.iter == tc.iters) {
            const double secs = std::chrono::duration<double>(clock::now() - window_start).count();
            const long done = r.iter - window_iter;
            timing << r.iter << ',' << secs * 1000.0 / std::max(done, 1L) << '\n';
            timing.flush();
            window_start = clock::now();
            window_iter = r.iter;
        }
        if (progress && (r.fid || r.iter % 500 == 0)) {
            *progress << "iter " << r.iter << " L_theta " << r.L_theta << " L_phi " << r.L_phi;
            if (r.V_theta) *progress << " V_theta " << *r.V_theta;
            if (r.fid) *progress << " fid " << *r.fid;
            if (r.deshuffle_acc) *progress << " deshuffle_acc " << *r.deshuffle_acc;
            if (r.probe_acc) *progress << " probe_acc " << *r.probe_acc;
            *progress << std::endl;
        }
    };
    try {
        run.log = run.trainer->run(hooks);
    } catch (const std::exception& e) {
        write_text(run.dir / "STATUS", std::string("failed: ") + e.what() + '\n');
        throw;
    }
    write_text(run.dir / "STATUS", "complete\n");
    return run;
}

inline bool run_complete(const fs::path& dir) {
    return fs::exists(dir / "STATUS") && read_text(dir / "STATUS") == "complete\n";
}

/// Rebuilds the trainer of a finished run from its final checkpoint.
inline TrainRun load_run(const fs::path& dir) {
    TrainRun run;
    run.dir = dir;
    run.config = parse_config(read_text(dir / "config.txt"));
    run.data = prepare_data(run.config);
    run.trainer = std::make_unique<Trainer<float>>(resolve_train_config(run.config, run.data), run.data.train);
    load_checkpoint((dir / "checkpoints" / checkpoint_name(run.config.train.iters)).string(), *run.trainer);
    run.log = read_metric_csv((dir / "metrics.csv").string());
    return run;
}

// ---------------------------------------------------------------------------
// Standalone evaluation

struct EvalSummary {
    std::string checkpoint;
    double fid = 0;
    std::optional<AccuracyEstimate> deshuffle;       // held-out real shuffles
    std::optional<AccuracyEstimate> deshuffle_fake;  // shuffled generator samples
    std::optional<AccuracyEstimate> transfer;        // real shuffles from the other scene style
    std::optional<double> probe;
    std::string embedder_version;

    nlohmann::ordered_json to_json() const {
        auto acc = [](const std::optional<AccuracyEstimate>& a) -> nlohmann::ordered_json {
            return a ? nlohmann::ordered_json(a->accuracy) : nlohmann::ordered_json(nullptr);
        };
        auto ci = [](const std::optional<AccuracyEstimate>& a) -> nlohmann::ordered_json {
            return a ? nlohmann::ordered_json(a->ci95()) : nlohmann::ordered_json(nullptr);
        };
        nlohmann::ordered_json j;
        j["checkpoint"] = checkpoint;
        j["fid"] = fid;
        j["deshuffle_acc"] = acc(deshuffle);
        j["transfer_acc"] = acc(transfer);
        j["probe_acc"] = probe ? nlohmann::ordered_json(*probe) : nlohmann::ordered_json(nullptr);
        j["embedder_version"] = embedder_version;
        j["deshuffle_acc_fake"] = acc(deshuffle_fake);
        j["deshuffle_acc_ci95"] = ci(deshuffle);
        j["deshuffle_acc_fake_ci95"] = ci(deshuffle_fake);
        j["transfer_acc_ci95"] = ci(transfer);
        j["samples"] = deshuffle ? deshuffle->total : 0;
        return j;
    }
};

/// Evaluates a checkpoint with the experiment it came from. `transfer`
/// overrides the cross-dataset test set; by default a synthetic run is tested
/// on the other scene style.
inline EvalSummary evaluate_checkpoint(const std::string& checkpoint, std::optional<ExperimentConfig> transfer = std::nullopt) {
    ExperimentConfig c = parse_config(read_checkpoint_config(checkpoint));
    ExperimentData data = prepare_data(c);
    Trainer<float> t(resolve_train_config(c, data), data.train);
    load_checkpoint(checkpoint, t);
    Evaluator ev(data.heldout, data.train, eval_settings(c));

    EvalSummary s;
    s.checkpoint = checkpoint;
    s.embedder_version = ev.embedder_version();
    s.fid = ev.fid(t);
    s.deshuffle = ev.deshuffle_real(t);
    s.deshuffle_fake = ev.deshuffle_fake(t);
    if (auto p = ev.probe(t.discriminator())) s.probe = p->test_accuracy;

    if (!transfer && c.dataset == DatasetKind::synthetic) {
        transfer = c;
        transfer->scene_style = c.scene_style == SceneStyle::outdoor ? SceneStyle::portrait : SceneStyle::outdoor;
    }
    if (transfer && c.train.pretext == Pretext::deshuffle) {
        ExperimentConfig tcfg = *transfer;
        tcfg.train.image_size = c.train.image_size;
        tcfg.train.channels = c.train.channels;
        const ExperimentData other = prepare_data(tcfg);
        s.transfer = ev.deshuffle_real(t, &other.heldout);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Matched-budget comparison

struct Method {
    std::string name;
    Pretext pretext;
    int grid;
    int num_perms;
};

inline std::vector<Method> comparison_methods() {
    return {{"baseline", Pretext::none, 3, 30},
            {"rotate", Pretext::rotate, 3, 30},
            {"deshuffle-2x2", Pretext::deshuffle, 2, 24},
            {"deshuffle-3x3", Pretext::deshuffle, 3, 30}};
}

struct MethodSummary {
    std::string name;
    std::vector<double> final_fid;  // one per seed
    double mean = 0;
    double stddev = 0;  // sample standard deviation across seeds
};

struct CompareReport {
    std::vector<std::uint64_t> seeds;
    std::vector<MethodSummary> methods;
    bool ordering_3x3_vs_2x2 = false;
    bool ordering_3x3_vs_baseline = false;
    bool margin_3x3_vs_2x2 = false;
    bool margin_3x3_vs_baseline = false;

    const MethodSummary& method(const std::string& name) const {
        for (const auto& m : methods)
            if (m.name == name) return m;
        throw std::out_of_range("no method " + name);
    }
};

inline ExperimentConfig method_config(const ExperimentConfig& base, const Method& m, std::uint64_t seed, const fs::path& out) {
    ExperimentConfig c = base;
    c.train.pretext = m.pretext;
    c.train.grid = m.grid;
    c.train.num_perms = m.num_perms;
    c.train.seed = seed;
    c.train.data_seed = seed;
    c.output_dir = (out / m.name / ("seed_" + std::to_string(seed))).string();
    return c;
}

namespace detail {

inline double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

inline double sample_sd(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double acc = 0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / (v.size() - 1));
}

}  // namespace detail

/// Margin test: the gap between means must be at least twice the larger of
/// the two per-method standard deviations.
inline bool margin_holds(const MethodSummary& better, const MethodSummary& worse) {
    return worse.mean - better.mean >= 2.0 * std::max(better.stddev, worse.stddev);
}

/// Writes the three-seed table, side-by-side curves and plots into `out`.
inline CompareReport summarise_compare(const fs::path& out, const std::vector<std::uint64_t>& seeds) {
    CompareReport rep;
    rep.seeds = seeds;
    std::map<std::string, std::map<std::uint64_t, std::vector<MetricRecord>>> logs;
    for (const auto& m : comparison_methods()) {
        MethodSummary s;
        s.name = m.name;
        for (auto seed : seeds) {
            auto log = read_metric_csv((out / m.name / ("seed_" + std::to_string(seed)) / "metrics.csv").string());
            double last = std::nan("");
            for (const auto& r : log)
                if (r.fid) last = *r.fid;
            s.final_fid.push_back(last);
            logs[m.name][seed] = std::move(log);
        }
        s.mean = detail::mean_of(s.final_fid);
        s.stddev = detail::sample_sd(s.final_fid);
        rep.methods.push_back(s);
    }
    const auto& d3 = rep.method("deshuffle-3x3");
    const auto& d2 = rep.method("deshuffle-2x2");
    const auto& base = rep.method("baseline");
    rep.ordering_3x3_vs_2x2 = d3.mean <= d2.mean;
    rep.ordering_3x3_vs_baseline = d3.mean <= base.mean;
    rep.margin_3x3_vs_2x2 = margin_holds(d3, d2);
    rep.margin_3x3_vs_baseline = margin_holds(d3, base);

    // three-seed table
    {
        std::ofstream os(out / "fid_table.csv");
        os << "method";
        for (auto s : seeds) os << ",seed_" << s;
        os << ",mean,stddev\n";
        for (const auto& m : rep.methods) {
            os << m.name;
            for (double f : m.final_fid) os << ',' << f;
            os << ',' << m.mean << ',' << m.stddev << '\n';
        }
    }
    {
        std::ofstream os(out / "report.md");
        os << "# Matched-budget comparison\n\nFinal FID (lower is better) per seed:\n\n| method |";
        for (auto s : seeds) os << " seed " << s << " |";
        os << " mean | sd |\n|---|";
        for (std::size_t i = 0; i < seeds.size(); ++i) os << "---|";
        os << "---|---|\n";
        char buf[64];
        for (const auto& m : rep.methods) {
            os << "| " << m.name << " |";
            for (double f : m.final_fid) {
                std::snprintf(buf, sizeof buf, " %.4f |", f);
                os << buf;
            }
            std::snprintf(buf, sizeof buf, " %.4f | %.4f |\n", m.mean, m.stddev);
            os << buf;
        }
        auto yn = [](bool b) { return b ? "yes" : "no"; };
        os << "\n- deshuffle-3x3 mean <= deshuffle-2x2 mean: " << yn(rep.ordering_3x3_vs_2x2)
           << "\n- deshuffle-3x3 mean <= baseline mean: " << yn(rep.ordering_3x3_vs_baseline)
           << "\n- margin vs deshuffle-2x2 >= 2 sd: " << yn(rep.margin_3x3_vs_2x2)
           << "\n- margin vs baseline >= 2 sd: " << yn(rep.margin_3x3_vs_baseline) << '\n';
    }
    // side-by-side curves for the first seed, plus plots per seed
    for (auto seed : seeds) {
        const std::string tag = "seed_" + std::to_string(seed);
        std::ofstream os(out / ("curves_" + tag + ".csv"));
        os << "iter";
        for (const auto& m : rep.methods)
            for (const char* col : {"L_theta", "L_phi", "V_theta", "V_phi", "fid"}) os << ',' << m.name << ':' << col;
        os << '\n';
        const auto& ref = logs[rep.methods.front().name][seed];
        for (std::size_t i = 0; i < ref.size(); ++i) {
            os << ref[i].iter;
            for (const auto& m : rep.methods) {
                const auto& log = logs[m.name][seed];
                if (i >= log.size() || log[i].iter != ref[i].iter) throw std::runtime_error("compare: iteration grids differ for " + m.name);
                const auto& r = log[i];
                os << ',' << fmt10(r.L_theta) << ',' << fmt10(r.L_phi);
                for (const auto* v : {&r.V_theta, &r.V_phi, &r.fid}) os << ',' << (*v ? fmt10(**v) : std::string());
            }
            os << '\n';
        }
        auto series = [&](auto getter) {
            std::vector<Series> out_series;
            for (const auto& m : rep.methods) {
                Series s;
                s.name = m.name;
                for (const auto& r : logs[m.name][seed]) {
                    const std::optional<double> v = getter(r);
                    if (!v) continue;
                    s.x.push_back(static_cast<double>(r.iter));
                    s.y.push_back(*v);
                }
                if (!s.x.empty()) out_series.push_back(std::move(s));
            }
            return out_series;
        };
        auto smooth = [](std::vector<Series> ss, int window) {
            for (auto& s : ss) {
                std::vector<double> y(s.y.size());
                double acc = 0;
                for (std::size_t i = 0; i < s.y.size(); ++i) {
                    acc += s.y[i];
                    if (i >= static_cast<std::size_t>(window)) acc -= s.y[i - window];
                    y[i] = acc / std::min<std::size_t>(i + 1, window);
                }
                s.y = std::move(y);
            }
            return ss;
        };
        const int w = 50;
        save_line_plot((out / ("L_theta_" + tag + ".png")).string(),
                       smooth(series([](const MetricRecord& r) { return std::optional<double>(r.L_theta); }), w),
                       {"Discriminator adversarial loss (moving average)", "iteration", "L_theta"});
        save_line_plot((out / ("L_phi_" + tag + ".png")).string(),
                       smooth(series([](const MetricRecord& r) { return std::optional<double>(r.L_phi); }), w),
                       {"Generator adversarial loss (moving average)", "iteration", "L_phi"});
        save_line_plot((out / ("V_theta_" + tag + ".png")).string(),
                       smooth(series([](const MetricRecord& r) { return r.V_theta; }), w),
                       {"Discriminator pretext loss (moving average)", "iteration", "V_theta"});
        save_line_plot((out / ("V_phi_" + tag + ".png")).string(),
                       smooth(series([](const MetricRecord& r) { return r.V_phi; }), w),
                       {"Generator pretext loss (moving average)", "iteration", "V_phi"});
        save_line_plot((out / ("fid_" + tag + ".png")).string(), series([](const MetricRecord& r) { return r.fid; }),
                       {"FID on embedded features", "iteration", "FID"});
    }
    return rep;
}

/// Trains every method for every seed (reusing runs whose STATUS is complete
/// and whose config matches) and summarises them.
inline CompareReport run_compare(const ExperimentConfig& base, const std::vector<std::uint64_t>& seeds, const fs::path& out,
                                 std::ostream* progress = nullptr) {
    fs::create_directories(out);
    for (auto seed : seeds)
        for (const auto& m : comparison_methods()) {
            const ExperimentConfig c = method_config(base, m, seed, out);
            const fs::path dir = c.output_dir;
            if (run_complete(dir) && read_text(dir / "config.txt") == c.to_text()) {
                if (progress) *progress << "reusing " << dir.string() << std::endl;
                continue;
            }
            if (progress) *progress << "training " << m.name << " seed " << seed << " -> " << dir.string() << std::endl;
            run_training(c, progress);
        }
    return summarise_compare(out, seeds);
}

}  // namespace dsgan
