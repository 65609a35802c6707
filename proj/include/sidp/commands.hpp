// The five CLI commands as library functions. Each one is a pure function of
// (config, input files) apart from wall-clock columns.

#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sidp/checkpoint.hpp"
#include "sidp/config.hpp"
#include "sidp/eval.hpp"
#include "sidp/scene_io.hpp"
#include "sidp/sidp.hpp"

namespace sidp {

namespace fs = std::filesystem;

inline constexpr const char* kOutRootEnv = "SIDP_OUT_ROOT";

/// `--out` wins over the config's output_dir; relative paths hang off $SIDP_OUT_ROOT when it is set.
inline fs::path resolve_output_dir(const ExperimentConfig& cfg, const std::optional<std::string>& out_override = {}) {
    fs::path dir = out_override.value_or(cfg.output_dir);
    if (const char* root = std::getenv(kOutRootEnv); root != nullptr && *root != '\0' && dir.is_relative()) {
        dir = fs::path(root) / dir;
    }
    return dir;
}

inline void ensure_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

/// First stem `base`, `base-1`, `base-2`, ... for which none of the suffixed files exist.
inline fs::path unique_stem(const fs::path& dir, const std::string& base, const std::vector<std::string>& suffixes) {
    for (int n = 0;; ++n) {
        const std::string stem = n == 0 ? base : base + "-" + std::to_string(n);
        const bool taken = std::any_of(suffixes.begin(), suffixes.end(),
                                       [&](const std::string& s) { return fs::exists(dir / (stem + s)); });
        if (!taken) return dir / stem;
    }
}

inline std::string csv_number(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

// ── Scene pool ───────────────────────────────────────────────────────────────

inline std::vector<Scene> generate_scene_pool(const ScenePoolConfig& pool) {
    std::vector<Scene> scenes;
    for (int i = 0; i < pool.count; ++i) scenes.push_back(generate_scene(pool.base_seed + static_cast<std::uint64_t>(i), pool.scene));
    return scenes;
}

/// Scenes listed in a manifest; file entries are relative to the manifest.
inline std::vector<Scene> load_manifest(const fs::path& manifest, double esdf_max_dist) {
    if (!fs::exists(manifest)) throw ConfigError("scene manifest does not exist: " + manifest.string());
    const json j = read_json_file(manifest);
    std::vector<Scene> scenes;
    try {
        for (const auto& e : j.at("scenes")) {
            const fs::path file = manifest.parent_path() / e.at("file").get<std::string>();
            if (!fs::exists(file)) throw ConfigError("scene file listed in manifest does not exist: " + file.string());
            scenes.push_back(load_scene(file, esdf_max_dist));
        }
    } catch (const json::exception& e) {
        throw IoError("malformed manifest " + manifest.string() + ": " + e.what());
    }
    return scenes;
}

inline std::vector<Scene> scene_pool(const ExperimentConfig& cfg) {
    auto scenes = cfg.scenes.manifest ? load_manifest(*cfg.scenes.manifest, cfg.scenes.scene.esdf_max_dist)
                                      : generate_scene_pool(cfg.scenes);
    if (scenes.empty()) throw ConfigError("scene pool is empty");
    return scenes;
}

inline std::vector<Scene> eval_scenes(const ExperimentConfig& cfg) {
    auto pool = scene_pool(cfg);
    if (cfg.eval.scene_ids.empty()) return pool;
    std::vector<Scene> out;
    for (const auto& id : cfg.eval.scene_ids) {
        auto it = std::find_if(pool.begin(), pool.end(), [&](const Scene& s) { return s.id == id; });
        if (it == pool.end()) throw ConfigError("eval scene id not in pool: " + id);
        out.push_back(*it);
    }
    return out;
}

// ── gen-scenes ───────────────────────────────────────────────────────────────

struct GenScenesResult {
    fs::path manifest;
    std::vector<fs::path> files;
};

inline GenScenesResult cmd_gen_scenes(const ExperimentConfig& cfg, const fs::path& out_dir) {
    cfg.validate();
    const fs::path dir = out_dir / "scenes";
    ensure_directory(dir);
    GenScenesResult r;
    json entries = json::array();
    for (const auto& scene : generate_scene_pool(cfg.scenes)) {
        const std::string name = scene.id + ".json";
        save_scene(scene, dir / name);
        r.files.push_back(dir / name);
        entries.push_back({{"id", scene.id}, {"seed", scene.seed}, {"file", name}});
    }
    r.manifest = dir / "manifest.json";
    write_text_file(r.manifest, json{{"scenes", entries}}.dump(2) + "\n");
    return r;
}

// ── pretrain ─────────────────────────────────────────────────────────────────

struct PretrainResult {
    fs::path checkpoint;
    fs::path log;
    std::vector<PretrainLogRow> rows;
};

inline PretrainResult cmd_pretrain(const ExperimentConfig& cfg, const fs::path& out_dir) {
    cfg.validate();
    const auto scenes = scene_pool(cfg);
    ensure_directory(out_dir);
    Policy policy = Policy::create(cfg.policy, cfg.seed);
    OptimizerState opt;
    PretrainResult r;
    r.rows = bc_pretrain(policy, opt, scenes, cfg.pretrain, cfg.seed);
    r.checkpoint = out_dir / "pretrain.ckpt";
    save_checkpoint(r.checkpoint, policy, &opt);
    r.log = unique_stem(out_dir, "pretrain-" + config_hash(cfg), {".csv"}).string() + ".csv";
    std::string csv = "iteration,train_loss,val_loss\n";
    for (const auto& row : r.rows) {
        csv += std::to_string(row.iteration) + "," + csv_number(row.train_loss) + "," + csv_number(row.val_loss) + "\n";
    }
    write_text_file(r.log, csv);
    return r;
}

// ── train ────────────────────────────────────────────────────────────────────

struct TrainResult {
    fs::path checkpoint;
    fs::path log;
    std::vector<TrainLogRow> rows;
};

inline Checkpoint load_matching_checkpoint(const fs::path& path, const ExperimentConfig& cfg) {
    if (!fs::exists(path)) throw IoError("checkpoint not found: " + path.string());
    auto ck = load_checkpoint(path);
    if (json(ck.policy.config) != json(cfg.policy)) {
        throw ConfigError("checkpoint " + path.string() + " was built with a different policy config");
    }
    return ck;
}

inline std::string train_log_header() {
    return "iteration,loss,mean_reward,gated_fraction,weight_entropy,wall_ms,r_col,r_step,r_prog,r_dock\n";
}

inline std::string train_log_line(const TrainLogRow& r) {
    return std::to_string(r.iteration) + "," + csv_number(r.loss) + "," + csv_number(r.mean_reward) + "," +
           csv_number(r.gated_fraction) + "," + csv_number(r.weight_entropy) + "," + csv_number(r.wall_ms) + "," +
           csv_number(r.mean_terms.r_col) + "," + csv_number(r.mean_terms.r_step) + "," +
           csv_number(r.mean_terms.r_prog) + "," + csv_number(r.mean_terms.r_dock) + "\n";
}

inline TrainResult cmd_train(const ExperimentConfig& cfg, const fs::path& init_checkpoint, const fs::path& out_dir) {
    cfg.validate();
    const auto scenes = scene_pool(cfg);
    auto ck = load_matching_checkpoint(init_checkpoint, cfg);
    ensure_directory(out_dir);
    TrainResult r;
    r.log = unique_stem(out_dir, "train-" + config_hash(cfg), {".csv"}).string() + ".csv";
    std::ofstream log(r.log);
    if (!log) throw IoError("cannot write " + r.log.string());
    log << train_log_header();
    OptimizerState opt;
    TrainCallbacks cb;
    cb.on_iteration = [&](const TrainLogRow& row, const Policy&) { log << train_log_line(row) << std::flush; };
    r.rows = train(ck.policy, opt, scenes, cfg.sidp, cfg.reward, cfg.seed, cb);
    if (!log) throw IoError("write failed for " + r.log.string());
    r.checkpoint = out_dir / "sidp.ckpt";
    save_checkpoint(r.checkpoint, ck.policy, &opt);
    return r;
}

// ── eval ─────────────────────────────────────────────────────────────────────

struct EvalResult {
    SuiteResult suite;
    fs::path report_json;
    fs::path report_csv;
    fs::path trajectories;
};

inline json metrics_json(const MetricsReport& m) {
    json j = {{"sr", m.sr}, {"spl", m.spl}, {"cr", m.cr}, {"dtg", m.dtg}, {"episodes", m.episodes}};
    if (m.ea) j["ea"] = *m.ea;
    return j;
}

/// Runs the configured suite with an explicit sampler, no files written.
inline SuiteResult run_eval_suite(const Policy& policy, std::span<const Scene> scenes, const EvalSuiteConfig& e,
                                  SamplerSpec sampler, std::vector<std::size_t>* episode_scene = nullptr) {
    DiffusionPlanner planner{&policy, {sampler.kind, sampler.steps}};
    SuiteResult out;
    if (e.mode == EvalMode::goal_agnostic) {
        const auto starts = make_exploration_starts(scenes, e.exploration_starts, e.seed);
        out = run_exploration_suite(planner, scenes, starts, policy.config, e.seed, e.exploration_samples);
        if (episode_scene != nullptr) {
            for (const auto& s : starts) episode_scene->insert(episode_scene->end(), static_cast<std::size_t>(e.exploration_samples), s.scene_index);
        }
    } else {
        const auto episodes = make_eval_episodes(scenes, e.episodes, e.goal_range, policy.config.a_max, e.seed);
        RolloutConfig rc;
        rc.success_radius = e.success_radius;
        rc.budget = e.budget;
        rc.execute_waypoints = e.execute_waypoints;
        out = run_point_goal_suite(planner, scenes, episodes, policy.config, e.mode, rc, e.seed);
        if (episode_scene != nullptr) {
            for (const auto& ep : episodes) episode_scene->push_back(ep.scene_index);
        }
    }
    return out;
}

inline EvalResult cmd_eval(const ExperimentConfig& cfg, const fs::path& checkpoint, const fs::path& out_dir) {
    cfg.validate();
    const auto scenes = eval_scenes(cfg);
    const auto ck = load_matching_checkpoint(checkpoint, cfg);
    ensure_directory(out_dir);
    EvalResult r;
    std::vector<std::size_t> scene_of;
    r.suite = run_eval_suite(ck.policy, scenes, cfg.eval, cfg.eval.sampler, &scene_of);

    const fs::path stem = unique_stem(out_dir, "eval-" + config_hash(cfg), {".json", ".csv", "-trajectories.json"});
    r.report_json = stem.string() + ".json";
    r.report_csv = stem.string() + ".csv";
    r.trajectories = stem.string() + "-trajectories.json";

    json episodes = json::array();
    json trajectories = json::array();
    std::string csv = "episode,scene_id,success,path_length,shortest,collided,final_dist,steps_used\n";
    for (std::size_t i = 0; i < r.suite.episodes.size(); ++i) {
        const auto& e = r.suite.episodes[i];
        const std::string& sid = scenes[scene_of[i]].id;
        episodes.push_back({{"episode", i},
                            {"scene_id", sid},
                            {"success", e.success},
                            {"path_length", e.path_length},
                            {"shortest", e.shortest},
                            {"collided", e.collided},
                            {"final_dist", e.final_dist},
                            {"steps_used", e.steps_used}});
        json wps = json::array();
        for (const auto& p : e.executed) wps.push_back({p.x, p.y});
        trajectories.push_back({{"episode", i}, {"scene_id", sid}, {"waypoints", wps}});
        csv += std::to_string(i) + "," + sid + "," + (e.success ? "1" : "0") + "," + csv_number(e.path_length) + "," +
               csv_number(e.shortest) + "," + (e.collided ? "1" : "0") + "," + csv_number(e.final_dist) + "," +
               std::to_string(e.steps_used) + "\n";
    }
    const auto& m = r.suite.metrics;
    csv += "\nmetric,value\nsr," + csv_number(m.sr) + "\nspl," + csv_number(m.spl) + "\ncr," + csv_number(m.cr) +
           "\ndtg," + csv_number(m.dtg) + "\n" + (m.ea ? "ea," + csv_number(*m.ea) + "\n" : std::string{}) +
           "episodes," + std::to_string(m.episodes) + "\n";

    json report = {{"config_hash", config_hash(cfg)},
                   {"checkpoint", checkpoint.filename().string()},
                   {"mode", cfg.eval.mode},
                   {"sampler", cfg.eval.sampler},
                   {"metrics", metrics_json(m)},
                   {"episodes", episodes}};
    if (!r.suite.areas.empty()) report["areas"] = r.suite.areas;
    write_text_file(r.report_json, report.dump(2) + "\n");
    write_text_file(r.report_csv, csv);
    write_text_file(r.trajectories, trajectories.dump() + "\n");
    return r;
}

// ── bench ────────────────────────────────────────────────────────────────────

struct BenchResult {
    std::vector<LatencyRow> rows;
    fs::path table;
};

inline BenchResult cmd_bench(const ExperimentConfig& cfg, const fs::path& checkpoint, const fs::path& out_dir) {
    cfg.validate();
    const auto scenes = eval_scenes(cfg);
    const auto ck = load_matching_checkpoint(checkpoint, cfg);
    ensure_directory(out_dir);

    std::vector<Observation> fixtures;
    for (const auto& ep : make_eval_episodes(scenes, cfg.bench.fixtures, cfg.eval.goal_range, cfg.policy.a_max,
                                             cfg.eval.seed)) {
        fixtures.push_back(make_observation(scenes[ep.scene_index], ep.start, ep.goal, false, cfg.policy));
    }
    std::vector<SamplerConfig> samplers;
    for (const auto& s : cfg.bench.samplers) samplers.push_back({s.kind, s.steps});

    BenchResult r;
    r.rows = latency_bench(ck.policy, fixtures, samplers, cfg.bench.trials, cfg.bench.warmup, cfg.seed);
    if (cfg.bench.with_sr) {
        EvalSuiteConfig suite = cfg.eval;
        if (suite.mode == EvalMode::goal_agnostic) suite.mode = EvalMode::closed_loop;
        for (std::size_t i = 0; i < r.rows.size(); ++i) {
            r.rows[i].sr = run_eval_suite(ck.policy, scenes, suite, cfg.bench.samplers[i]).metrics.sr;
        }
    }
    r.table = unique_stem(out_dir, "bench-" + config_hash(cfg), {".csv"}).string() + ".csv";
    std::string csv = "scheduler,steps,denoiser_calls,mean_ms,trials,sr\n";
    for (const auto& row : r.rows) {
        csv += to_string(row.sampler.kind) + "," + std::to_string(row.sampler.steps) + "," +
               std::to_string(row.denoiser_calls) + "," + csv_number(row.mean_ms) + "," + std::to_string(row.trials) +
               "," + (row.sr ? csv_number(*row.sr) : std::string{}) + "\n";
    }
    write_text_file(r.table, csv);
    return r;
}

}  // namespace sidp
