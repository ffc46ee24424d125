// Command-line front end: grid expansion, dictionary simulation, model
// training and validation, fast synthesis, phantom matching, and report
// aggregation. Every knob lives in a per-command JSON config; --seed,
// --threads and --out override the config.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ganmrf/bloch.hpp"
#include "ganmrf/dataset.hpp"
#include "ganmrf/dict_io.hpp"
#include "ganmrf/gan.hpp"
#include "ganmrf/grid.hpp"
#include "ganmrf/match.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ganmrf;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::string> out;
};

// Per-command config: JSON object restricted to an allowlist, with the shared
// keys (seed, threads, out) always accepted.
class Config {
public:
    Config(const GlobalOpts& opts, std::set<std::string> allowed) : allowed_(std::move(allowed)) {
        allowed_.insert({"seed", "threads", "out"});
        if (!opts.config_path.empty()) {
            std::ifstream in(opts.config_path);
            if (!in) throw ConfigError("cannot open config file: " + opts.config_path);
            try {
                in >> j_;
            } catch (const json::exception& e) {
                throw ConfigError("bad config JSON " + opts.config_path + ": " + e.what());
            }
            if (!j_.is_object()) throw ConfigError("config root must be a JSON object");
            for (const auto& [key, _] : j_.items())
                if (!allowed_.contains(key)) throw ConfigError("unknown config key: " + key);
        }
        if (opts.seed) j_["seed"] = *opts.seed;
        if (opts.threads) j_["threads"] = *opts.threads;
        if (opts.out) j_["out"] = *opts.out;
    }

    template <typename T>
    T get(const std::string& key, const T& fallback) const {
        if (!j_.contains(key)) return fallback;
        try {
            return j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError("config key \"" + key + "\" has the wrong type");
        }
    }

    std::string require_path(const std::string& key) const {
        if (!j_.contains(key)) throw ConfigError("config key \"" + key + "\" is required");
        const auto path = get<std::string>(key, "");
        if (!fs::exists(path)) throw ConfigError("missing file for \"" + key + "\": " + path);
        return path;
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    std::uint64_t seed() const { return get<std::uint64_t>("seed", 1234); }
    unsigned threads() const { return get<unsigned>("threads", 0); }

    // Output directory, created on demand; artifact paths resolve under it
    // unless the config gives them explicitly.
    fs::path out_dir() const {
        const fs::path dir = get<std::string>("out", ".");
        fs::create_directories(dir);
        return dir;
    }

    std::string out_path(const std::string& key, const std::string& default_name) const {
        if (has(key)) {
            const fs::path p = get<std::string>(key, "");
            if (p.has_parent_path()) fs::create_directories(p.parent_path());
            return p.string();
        }
        return (out_dir() / default_name).string();
    }

private:
    json j_;
    std::set<std::string> allowed_;
};

GridSpec resolve_grid_spec(const Config& cfg) {
    const auto name = cfg.get<std::string>("grid_spec", "");
    if (name.empty()) throw ConfigError("config key \"grid_spec\" is required");
    if (name == "standard") return standard_grid_spec();
    if (name == "coarse") return coarse_grid_spec();
    if (name == "fine") return fine_grid_spec();
    if (!fs::exists(name)) throw ConfigError("missing file for \"grid_spec\": " + name);
    return load_grid_spec(name);
}

// Sequence resolution shared by simulate/train/synth/match: an explicit CSV
// wins; otherwise the seeded default train is generated.
SequenceParams resolve_sequence(const Config& cfg, std::size_t default_frames) {
    SequenceParams seq;
    if (cfg.has("sequence_csv")) {
        seq = load_sequence_csv(cfg.require_path("sequence_csv"));
    } else {
        seq = default_sequence(cfg.get<std::size_t>("n_frames", default_frames),
                               cfg.get<std::uint64_t>("sequence_seed", 7));
    }
    seq.te_ms = cfg.get<double>("te_ms", 2.0);
    seq.ti_ms = cfg.get<double>("ti_ms", 20.64);
    seq.inversion_enabled = cfg.get<bool>("inversion", true);
    seq.validate();
    return seq;
}

SliceProfile resolve_profile(const Config& cfg, const SimGrid& grid) {
    if (cfg.has("profile_csv")) {
        SliceProfile p = load_slice_profile_csv(cfg.require_path("profile_csv"));
        if (p.size() != grid.n_profile)
            throw DataError("profile file has " + std::to_string(p.size()) +
                            " positions, n_profile is " + std::to_string(grid.n_profile));
        return p;
    }
    return default_slice_profile(grid.n_profile);
}

SimGrid resolve_sim_grid(const Config& cfg) {
    SimGrid grid;
    grid.n_profile = cfg.get<std::size_t>("n_profile", 21);
    grid.n_dephase = cfg.get<std::size_t>("n_dephase", 50);
    grid.validate();
    return grid;
}

void write_timing_csv(const std::string& path, std::size_t atoms, std::size_t frames,
                      double seconds) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write timing CSV: " + path);
    out << "atoms,frames,wall_seconds\n";
    out << atoms << "," << frames << "," << seconds << "\n";
}

double read_timing_seconds(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("missing timing file: " + path);
    std::string header, row;
    if (!std::getline(in, header) || !std::getline(in, row))
        throw DataError("timing CSV is incomplete: " + path);
    std::istringstream ss(row);
    std::size_t atoms, frames;
    double seconds;
    char c1, c2;
    if (!(ss >> atoms >> c1 >> frames >> c2 >> seconds))
        throw DataError("bad timing CSV row: " + path);
    return seconds;
}

// ----- commands -----

int cmd_grid(const Config& cfg) {
    const auto params = expand_grid(resolve_grid_spec(cfg));
    const auto csv = cfg.out_path("params_csv", "params.csv");
    std::ofstream out(csv);
    if (!out) throw DataError("cannot write params CSV: " + csv);
    out << "t1_ms,t2_ms\n";
    out.precision(12);
    for (const auto& p : params) out << p.t1_ms << "," << p.t2_ms << "\n";
    std::cout << params.size() << "\n";
    return 0;
}

int cmd_simulate(const Config& cfg) {
    const auto params = expand_grid(resolve_grid_spec(cfg));
    const SequenceParams seq = resolve_sequence(cfg, 1000);
    const SimGrid grid = resolve_sim_grid(cfg);
    const SliceProfile profile = resolve_profile(cfg, grid);

    double seconds = 0.0;
    const Dictionary dict =
        simulate_dictionary(params, seq, profile, grid, cfg.threads(), &seconds);
    const auto dict_path = cfg.out_path("dictionary", "dictionary.mrfd");
    save_dictionary(dict, dict_path);
    write_timing_csv(cfg.out_path("timing_csv", "timing.csv"), params.size(), seq.n_frames(),
                     seconds);
    if (cfg.get<bool>("export_csv", false))
        export_dictionary_csv(dict, cfg.out_path("dictionary_csv", "dictionary.csv"));
    std::cout << "simulated " << dict.n_atoms() << " atoms x " << dict.n_frames() << " frames in "
              << seconds << " s -> " << dict_path << "\n";
    return 0;
}

struct TrainSetup {
    Dictionary train_scaled;
    Dictionary val_normalized;
    Dictionary test_normalized;
    SequenceParams seq;
    gan::TrainConfig train_cfg;
};

TrainSetup prepare_training(const Config& cfg) {
    TrainSetup ts;
    const Dictionary raw = load_dictionary(cfg.require_path("dictionary"));
    const auto fr = cfg.get<std::vector<double>>("fractions", {0.6, 0.2, 0.2});
    if (fr.size() != 3) throw ConfigError("fractions must have three entries");
    const Dictionary normalized = normalize_atoms(raw);
    const DatasetSplit split = split_dataset(normalized, {fr[0], fr[1], fr[2]}, cfg.seed());
    ts.train_scaled = scale_for_training(select_atoms(normalized, split.train_idx));
    ts.val_normalized = select_atoms(normalized, split.val_idx);
    ts.test_normalized = select_atoms(normalized, split.test_idx);

    ts.seq = resolve_sequence(cfg, std::size_t(raw.n_frames()));
    if (ts.seq.n_frames() != std::size_t(raw.n_frames()))
        throw DataError("sequence has " + std::to_string(ts.seq.n_frames()) +
                        " frames, dictionary has " + std::to_string(raw.n_frames()));

    ts.train_cfg.lambda = cfg.get<double>("lambda", 100.0);
    ts.train_cfg.lr = cfg.get<double>("lr", 3e-4);
    ts.train_cfg.batch_size = cfg.get<std::size_t>("batch_size", 30);
    ts.train_cfg.iterations = cfg.get<std::size_t>("iterations", 20000);
    ts.train_cfg.z_dim = cfg.get<std::size_t>("z_dim", 4);
    ts.train_cfg.seed = cfg.seed();
    ts.train_cfg.d_steps_per_g_step = cfg.get<std::size_t>("d_steps_per_g_step", 1);
    ts.train_cfg.descriptor_bins = cfg.get<std::size_t>("descriptor_bins", 16);
    ts.train_cfg.eval_interval = cfg.get<std::size_t>("eval_interval", 0);
    ts.train_cfg.validate();
    return ts;
}

int cmd_train(const Config& cfg) {
    TrainSetup ts = prepare_training(cfg);
    const bool quiet = cfg.get<bool>("quiet", false);
    gan::TrainResult result =
        gan::train(ts.train_scaled, ts.seq, ts.test_normalized, ts.train_cfg,
                   [&](const gan::HistoryRow& h) {
                       if (!quiet)
                           std::cout << "iter " << h.iteration << "  d_loss " << h.d_loss
                                     << "  g_loss " << h.g_loss << "  train_rmse " << h.train_rmse
                                     << "%  test_rmse " << h.test_rmse << "%\n";
                   });
    gan::save_checkpoint(result.model, cfg.out_path("checkpoint", "checkpoint.gmrf"));
    gan::write_history_csv(result.history, cfg.out_path("history_csv", "history.csv"));
    gan::write_learning_curves_csv(result.history, cfg.out_path("curves_csv", "curves.csv"));
    if (!result.history.empty())
        std::cout << "final train_rmse " << result.history.back().train_rmse << "%  test_rmse "
                  << result.history.back().test_rmse << "%\n";
    return 0;
}

int cmd_validate(const Config& cfg) {
    TrainSetup ts = prepare_training(cfg);
    const auto grid = cfg.get<std::vector<double>>("lambda_grid",
                                                   {0.01, 0.1, 1.0, 10.0, 100.0, 1000.0});
    const gan::LambdaTable table =
        gan::validate_lambda(ts.train_scaled, ts.seq, ts.val_normalized, grid, ts.train_cfg);
    gan::write_lambda_table_csv(table, cfg.out_path("lambda_table_csv", "lambda_table.csv"));
    for (const auto& r : table.rows)
        std::cout << "lambda " << r.lambda << "  train_rmse " << r.train_rmse << "%  val_rmse "
                  << r.val_rmse << "%" << (r.selected ? "  <- selected" : "") << "\n";
    std::cout << "selected lambda: " << table.selected_lambda << "\n";
    return 0;
}

int cmd_synth(const Config& cfg) {
    const gan::GanModel model = gan::load_checkpoint(cfg.require_path("checkpoint"));
    const auto params = expand_grid(resolve_grid_spec(cfg));
    const SequenceParams seq = resolve_sequence(cfg, std::size_t(model.n_frames()));
    if (seq.n_frames() != std::size_t(model.n_frames()))
        throw DataError("sequence has " + std::to_string(seq.n_frames()) +
                        " frames, checkpoint generates " + std::to_string(model.n_frames()));

    gan::ZPolicy policy;
    const auto policy_name = cfg.get<std::string>("z_policy", "zeros");
    if (policy_name == "zeros") {
        policy.kind = gan::ZPolicy::Kind::Zeros;
    } else if (policy_name == "random") {
        policy.kind = gan::ZPolicy::Kind::SeededRandom;
        policy.seed = cfg.get<std::uint64_t>("z_seed", cfg.seed());
    } else {
        throw ConfigError("z_policy must be \"zeros\" or \"random\"");
    }

    double seconds = 0.0;
    const Dictionary dict = gan::synthesize(model, params, seq, policy, cfg.threads(), &seconds);
    const auto dict_path = cfg.out_path("dictionary", "synth_dictionary.mrfd");
    save_dictionary(dict, dict_path);
    write_timing_csv(cfg.out_path("timing_csv", "synth_timing.csv"), params.size(),
                     std::size_t(dict.n_frames()), seconds);
    std::cout << "synthesized " << dict.n_atoms() << " atoms x " << dict.n_frames()
              << " frames in " << seconds << " s -> " << dict_path << "\n";
    return 0;
}

int cmd_match(const Config& cfg) {
    Dictionary dict = load_dictionary(cfg.require_path("dictionary"));
    if (!dict.normalized) dict = normalize_atoms(dict);

    const match::PhantomSpec spec = cfg.has("phantom_spec")
                                        ? match::load_phantom_spec(cfg.require_path("phantom_spec"))
                                        : match::default_phantom_spec();
    const SequenceParams seq = resolve_sequence(cfg, std::size_t(dict.n_frames()));
    if (seq.n_frames() != std::size_t(dict.n_frames()))
        throw DataError("sequence has " + std::to_string(seq.n_frames()) +
                        " frames, dictionary has " + std::to_string(dict.n_frames()));
    const SimGrid grid = resolve_sim_grid(cfg);
    const SliceProfile profile = resolve_profile(cfg, grid);
    const double noise_sigma = cfg.get<double>("noise_sigma", 0.02);

    const auto [phantom, signals] =
        match::make_phantom(spec, seq, profile, grid, noise_sigma, cfg.seed(), cfg.threads());
    const match::ParameterMap map = match::match_volume(signals, dict, cfg.threads());

    match::write_map_csv(map, cfg.out_path("map_csv", "map.csv"));
    match::write_map_pgm(map.t1_map, map.width, map.height, cfg.out_path("t1_pgm", "t1.pgm"));
    match::write_map_pgm(map.t2_map, map.width, map.height, cfg.out_path("t2_pgm", "t2.pgm"));

    match::ParameterMap truth;
    truth.width = phantom.width;
    truth.height = phantom.height;
    truth.t1_map = phantom.t1_map;
    truth.t2_map = phantom.t2_map;
    truth.similarity_map.assign(phantom.size(), 0.0);
    match::write_map_csv(truth, cfg.out_path("truth_csv", "truth.csv"));

    std::cout << "matched " << map.width << "x" << map.height << " phantom against "
              << dict.n_atoms() << " atoms\n";
    return 0;
}

int cmd_report(const Config& cfg) {
    std::vector<std::pair<std::string, double>> metrics;

    const match::ParameterMap bloch_map = match::load_map_csv(cfg.require_path("bloch_map_csv"));
    const match::ParameterMap gan_map = match::load_map_csv(cfg.require_path("gan_map_csv"));
    if (bloch_map.width != gan_map.width || bloch_map.height != gan_map.height)
        throw DataError("map shapes differ between the two matchings");
    metrics.emplace_back("t1_rel_rmse_pct", match::rel_rmse(gan_map.t1_map, bloch_map.t1_map));
    metrics.emplace_back("t2_rel_rmse_pct", match::rel_rmse(gan_map.t2_map, bloch_map.t2_map));

    const double sim_s = read_timing_seconds(cfg.require_path("simulate_timing_csv"));
    const double synth_s = read_timing_seconds(cfg.require_path("synth_timing_csv"));
    metrics.emplace_back("simulate_wall_seconds", sim_s);
    metrics.emplace_back("synthesize_wall_seconds", synth_s);
    metrics.emplace_back("speedup_factor", synth_s > 0.0 ? sim_s / synth_s : 0.0);

    std::optional<gan::HistoryRow> final_row;
    if (cfg.has("history_csv")) {
        std::ifstream in(cfg.require_path("history_csv"));
        std::string line, last;
        std::getline(in, line);  // header
        while (std::getline(in, line))
            if (!line.empty()) last = line;
        if (!last.empty()) {
            gan::HistoryRow h;
            char c;
            std::istringstream ss(last);
            ss >> h.iteration >> c >> h.d_loss >> c >> h.g_loss >> c >> h.train_rmse >> c >>
                h.test_rmse;
            final_row = h;
            metrics.emplace_back("final_train_rmse_pct", h.train_rmse);
            metrics.emplace_back("final_test_rmse_pct", h.test_rmse);
        }
    }
    if (cfg.has("lambda_table_csv")) {
        std::ifstream in(cfg.require_path("lambda_table_csv"));
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            double lambda, tr, vr;
            int sel;
            char c;
            std::istringstream ss(line);
            if ((ss >> lambda >> c >> tr >> c >> vr >> c >> sel) && sel == 1)
                metrics.emplace_back("selected_lambda", lambda);
        }
    }

    const auto report_path = cfg.out_path("report_csv", "report.csv");
    std::ofstream out(report_path);
    if (!out) throw DataError("cannot write report: " + report_path);
    out << "metric,value\n";
    out.precision(12);
    for (const auto& [k, v] : metrics) out << k << "," << v << "\n";

    // Difference maps between the two matchings, scaled 10x.
    const auto d1 = match::diff_map(gan_map.t1_map, bloch_map.t1_map);
    const auto d2 = match::diff_map(gan_map.t2_map, bloch_map.t2_map);
    match::write_map_pgm(d1.values, gan_map.width, gan_map.height,
                         cfg.out_path("t1_diff_pgm", "t1_diff.pgm"));
    match::write_map_pgm(d2.values, gan_map.width, gan_map.height,
                         cfg.out_path("t2_diff_pgm", "t2_diff.pgm"));

    std::ostringstream summary;
    summary.precision(4);
    summary << "map agreement (synthesized vs simulated dictionary):\n";
    summary << "  T1 relative RMSE: " << metrics[0].second << "%\n";
    summary << "  T2 relative RMSE: " << metrics[1].second << "%\n";
    summary << "dictionary generation wall time:\n";
    summary << "  simulation: " << sim_s << " s\n";
    summary << "  synthesis:  " << synth_s << " s  (speedup " << (synth_s > 0 ? sim_s / synth_s : 0)
            << "x)\n";
    if (final_row)
        summary << "training (final evaluation): train_rmse " << final_row->train_rmse
                << "%, test_rmse " << final_row->test_rmse
                << "%  (plot curves.csv with a log iteration axis)\n";
    const auto summary_path = cfg.out_path("summary_txt", "summary.txt");
    std::ofstream sum_out(summary_path);
    sum_out << summary.str();
    std::cout << summary.str();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"MRF dictionary engine: FISP simulation, adversarial synthesis, matching"};
    app.require_subcommand(1);

    GlobalOpts opts;
    app.add_option("--config", opts.config_path, "JSON config file for the subcommand");
    std::uint64_t seed_val = 0;
    unsigned threads_val = 0;
    std::string out_val;
    auto* seed_opt = app.add_option("--seed", seed_val, "Seed for every random draw");
    auto* threads_opt = app.add_option("--threads", threads_val, "Worker threads (0 = auto)");
    auto* out_opt = app.add_option("--out", out_val, "Output directory");

    struct Cmd {
        const char* name;
        const char* help;
        std::set<std::string> keys;
        int (*run)(const Config&);
    };
    const std::vector<Cmd> commands = {
        {"grid", "Expand a tissue-parameter grid to CSV",
         {"grid_spec", "params_csv"}, cmd_grid},
        {"simulate", "Simulate a fingerprint dictionary",
         {"grid_spec", "sequence_csv", "n_frames", "sequence_seed", "te_ms", "ti_ms", "inversion",
          "profile_csv", "n_profile", "n_dephase", "dictionary", "timing_csv", "export_csv",
          "dictionary_csv"},
         cmd_simulate},
        {"train", "Train the generative model on a simulated dictionary",
         {"dictionary", "fractions", "sequence_csv", "n_frames", "sequence_seed", "te_ms", "ti_ms",
          "inversion", "lambda", "lr", "batch_size", "iterations", "z_dim", "d_steps_per_g_step",
          "descriptor_bins", "eval_interval", "checkpoint", "history_csv", "curves_csv", "quiet"},
         cmd_train},
        {"validate", "Sweep the regularization weight on the validation split",
         {"dictionary", "fractions", "sequence_csv", "n_frames", "sequence_seed", "te_ms", "ti_ms",
          "inversion", "lambda", "lr", "batch_size", "iterations", "z_dim", "d_steps_per_g_step",
          "descriptor_bins", "eval_interval", "lambda_grid", "lambda_table_csv", "quiet"},
         cmd_validate},
        {"synth", "Synthesize a dictionary from a trained checkpoint",
         {"checkpoint", "grid_spec", "sequence_csv", "n_frames", "sequence_seed", "te_ms", "ti_ms",
          "inversion", "z_policy", "z_seed", "dictionary", "timing_csv"},
         cmd_synth},
        {"match", "Match a synthetic phantom against a dictionary",
         {"dictionary", "phantom_spec", "noise_sigma", "sequence_csv", "n_frames", "sequence_seed",
          "te_ms", "ti_ms", "inversion", "n_profile", "n_dephase", "profile_csv", "map_csv",
          "t1_pgm", "t2_pgm", "truth_csv"},
         cmd_match},
        {"report", "Aggregate map errors, timing and curves into one report",
         {"bloch_map_csv", "gan_map_csv", "simulate_timing_csv", "synth_timing_csv", "history_csv",
          "lambda_table_csv", "report_csv", "summary_txt", "t1_diff_pgm", "t2_diff_pgm"},
         cmd_report},
    };
    for (const auto& cmd : commands) app.add_subcommand(cmd.name, cmd.help)->fallthrough();

    CLI11_PARSE(app, argc, argv);

    if (seed_opt->count() > 0) opts.seed = seed_val;
    if (threads_opt->count() > 0) opts.threads = threads_val;
    if (out_opt->count() > 0) opts.out = out_val;

    try {
        for (const auto& cmd : commands) {
            if (app.got_subcommand(cmd.name)) {
                const Config cfg(opts, cmd.keys);
                return cmd.run(cfg);
            }
        }
        std::cerr << "no subcommand given\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
