// Command-line driver: train, eval, permgen, probe, compare.
// Exit codes: 0 success, 1 validation failure, 2 runtime failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dsgan/experiment.hpp"

namespace {

using namespace dsgan;

/// Config text with `key=value` overrides replacing (or adding) entries.
std::string with_overrides(const std::string& text, const std::vector<std::string>& overrides) {
    std::vector<std::string> keys;
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
        keys.push_back(detail::trim(std::string_view(o).substr(0, eq)));
    }
    std::ostringstream out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::string body = line.substr(0, line.find('#'));
        const auto eq = body.find('=');
        const std::string key = eq == std::string::npos ? std::string() : detail::trim(std::string_view(body).substr(0, eq));
        if (!key.empty() && std::find(keys.begin(), keys.end(), key) != keys.end()) continue;
        out << line << '\n';
    }
    for (const auto& o : overrides) out << o << '\n';
    return out.str();
}

ExperimentConfig config_from(const std::string& path, const std::vector<std::string>& overrides) {
    std::string text;
    if (!path.empty()) {
        std::ifstream is(path);
        if (!is) throw ConfigError("cannot read config file " + path);
        std::stringstream ss;
        ss << is.rdbuf();
        text = ss.str();
    }
    return parse_config(with_overrides(text, overrides));
}

void write_json(const nlohmann::ordered_json& j, const std::string& path) {
    const std::string s = j.dump(2);
    std::cout << s << '\n';
    if (!path.empty()) {
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot write " + path);
        os << s << '\n';
    }
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(detail::parse_int<std::uint64_t>("seeds", detail::trim(item)));
    if (out.empty()) throw ConfigError("--seeds: expected a comma-separated list");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-supervised GAN training with a jigsaw-deshuffling discriminator head"};
    app.require_subcommand(1);

    std::string config_path, output, checkpoint, transfer_config, seeds = "1,2,3";
    std::vector<std::string> overrides;
    bool quiet = false;
    int tiles = 9, count = 30;
    std::uint64_t seed = 1;

    auto* train = app.add_subcommand("train", "Train a model; writes checkpoints and metrics.csv into output_dir");
    train->add_option("-c,--config", config_path, "Config file (key = value)");
    train->add_option("-s,--set", overrides, "Override a config entry: key=value (repeatable)");
    train->add_option("-o,--output", output, "Output directory (overrides output_dir)");
    train->add_flag("-q,--quiet", quiet, "No progress output");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint; prints a JSON summary");
    eval->add_option("checkpoint", checkpoint, "Checkpoint file")->required();
    eval->add_option("-o,--output", output, "Also write the JSON summary here");
    eval->add_option("-t,--transfer-config", transfer_config, "Config whose dataset is the cross-dataset test set");

    auto* permgen = app.add_subcommand("permgen", "Write a permutation set file");
    permgen->add_option("--tiles", tiles, "Tile count: 9 (greedy max-Hamming) or 4 (all 24)")->check(CLI::IsMember({4, 9}));
    permgen->add_option("-k,--count", count, "Number of permutations (9 tiles)");
    permgen->add_option("--seed", seed, "Seed for the first permutation");
    permgen->add_option("-o,--output", output, "Output file")->required();

    auto* probe = app.add_subcommand("probe", "Linear probe on trained vs randomly initialised discriminator features");
    probe->add_option("checkpoint", checkpoint, "Checkpoint file")->required();
    probe->add_option("-o,--output", output, "Also write the JSON report here");

    auto* compare = app.add_subcommand("compare", "Matched-budget runs of baseline, rotate, deshuffle-2x2 and deshuffle-3x3");
    compare->add_option("-c,--config", config_path, "Base config file");
    compare->add_option("-s,--set", overrides, "Override a config entry: key=value (repeatable)");
    compare->add_option("-o,--output", output, "Output directory (overrides output_dir)");
    compare->add_option("--seeds", seeds, "Comma-separated seeds");
    compare->add_flag("-q,--quiet", quiet, "No progress output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*train) {
            ExperimentConfig c = config_from(config_path, overrides);
            if (!output.empty()) c.output_dir = output;
            const auto run = run_training(c, quiet ? nullptr : &std::cerr);
            std::cout << "wrote " << (run.dir / "metrics.csv").string() << '\n';
        } else if (*eval) {
            std::optional<ExperimentConfig> transfer;
            if (!transfer_config.empty()) transfer = load_config(transfer_config);
            write_json(evaluate_checkpoint(checkpoint, transfer).to_json(), output);
        } else if (*permgen) {
            const PermutationSet set = tiles == 4 ? all_permutations(4) : select_max_hamming_set(9, count, seed);
            save_permutation_set(output, set);
            std::cout << "wrote " << set.size() << " permutations (min pairwise Hamming " << set.min_pairwise_hamming() << ") to "
                      << output << '\n';
        } else if (*probe) {
            ExperimentConfig c = parse_config(read_checkpoint_config(checkpoint));
            ExperimentData data = prepare_data(c);
            const TrainConfig tc = resolve_train_config(c, data);
            Trainer<float> trained(tc, data.train);
            load_checkpoint(checkpoint, trained);
            Trainer<float> fresh(tc, data.train);
            Evaluator ev(data.heldout, data.train, eval_settings(c));
            const auto a = ev.probe(trained.discriminator());
            const auto b = ev.probe(fresh.discriminator());
            if (!a || !b) throw ConfigError("probe needs a labelled dataset");
            nlohmann::ordered_json j;
            j["checkpoint"] = checkpoint;
            j["probe_acc"] = a->test_accuracy;
            j["probe_acc_random_init"] = b->test_accuracy;
            j["probe_train_acc"] = a->train_accuracy;
            j["probe_train_acc_random_init"] = b->train_accuracy;
            j["num_classes"] = a->num_classes;
            j["chance"] = 1.0 / a->num_classes;
            write_json(j, output);
        } else if (*compare) {
            ExperimentConfig c = config_from(config_path, overrides);
            if (!output.empty()) c.output_dir = output;
            const auto rep = run_compare(c, parse_seeds(seeds), c.output_dir, quiet ? nullptr : &std::cerr);
            std::cout << read_text(fs::path(c.output_dir) / "report.md");
        }
    } catch (const std::invalid_argument& e) {  // includes ConfigError
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::logic_error& e) {  // UnsupportedError and friends
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
