// Experiment configuration and its JSON form. Every section is optional in the
// file; missing keys keep their defaults and unknown keys are rejected.

#pragma once

#include <boost/crc.hpp>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sidp/eval.hpp"
#include "sidp/sidp.hpp"

namespace sidp {

using nlohmann::json;

struct ScenePoolConfig {
    /// Generated pool: scene i uses seed base_seed + i.
    int count = 6;
    std::uint64_t base_seed = 1000;
    SceneConfig scene;
    /// When set, scenes are loaded from this manifest instead of generated.
    std::optional<std::string> manifest;
};

struct SamplerSpec {
    SamplerKind kind = SamplerKind::ddim;
    int steps = 5;
};

struct EvalSuiteConfig {
    EvalMode mode = EvalMode::closed_loop;
    /// Restrict evaluation to these scene ids (empty: whole pool).
    std::vector<std::string> scene_ids;
    int episodes = 100;
    DistanceRange goal_range{1.0, 2.5};
    int budget = 200;
    int execute_waypoints = 1;
    double success_radius = 0.5;
    SamplerSpec sampler;
    /// Exploration starts for the goal-agnostic suite and samples per start.
    int exploration_starts = 20;
    int exploration_samples = 16;
    std::uint64_t seed = 777;
};

struct BenchConfig {
    std::vector<SamplerSpec> samplers{{SamplerKind::ddpm, 10}, {SamplerKind::ddim, 10}, {SamplerKind::ddim, 5},
                                      {SamplerKind::ddim, 3}};
    int trials = 100;
    int warmup = 10;
    int fixtures = 32;
    bool with_sr = true;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::string output_dir = "runs";
    ScenePoolConfig scenes;
    PolicyConfig policy;
    PretrainConfig pretrain;
    SidpConfig sidp;
    RewardConfig reward;
    EvalSuiteConfig eval;
    BenchConfig bench;

    void validate() const;
};

// ── JSON ─────────────────────────────────────────────────────────────────────

namespace detail {

/// Reads keys present in an object and rejects the ones nobody asked for.
class Fields {
public:
    Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j.is_object()) throw ConfigError(where_ + ": expected an object");
    }
    Fields(const Fields&) = delete;
    Fields& operator=(const Fields&) = delete;

    template <class T>
    Fields& get(const char* key, T& out) {
        if (!j_.contains(key)) return *this;
        seen_.insert(key);
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(where_ + "." + key + ": " + e.what());
        }
        return *this;
    }

    void done() const {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.contains(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
        }
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

}  // namespace detail

inline void to_json(json& j, ScheduleKind k) { j = to_string(k); }
inline void from_json(const json& j, ScheduleKind& k) { k = schedule_kind_from_string(j.get<std::string>()); }
inline void to_json(json& j, SamplerKind k) { j = to_string(k); }
inline void from_json(const json& j, SamplerKind& k) { k = sampler_kind_from_string(j.get<std::string>()); }
inline void to_json(json& j, WeightMode m) { j = to_string(m); }
inline void from_json(const json& j, WeightMode& m) { m = weight_mode_from_string(j.get<std::string>()); }
inline void to_json(json& j, EvalMode m) { j = to_string(m); }
inline void from_json(const json& j, EvalMode& m) { m = eval_mode_from_string(j.get<std::string>()); }

inline void to_json(json& j, const DistanceRange& r) { j = {{"min", r.min}, {"max", r.max}}; }
inline void from_json(const json& j, DistanceRange& r) { detail::Fields(j, "range").get("min", r.min).get("max", r.max).done(); }

inline void to_json(json& j, const GoalAgnosticRange& r) {
    j = {{"angle_min_deg", r.angle_min_deg}, {"angle_max_deg", r.angle_max_deg}, {"distance", r.distance}};
}
inline void from_json(const json& j, GoalAgnosticRange& r) {
    detail::Fields(j, "goal_agnostic")
        .get("angle_min_deg", r.angle_min_deg)
        .get("angle_max_deg", r.angle_max_deg)
        .get("distance", r.distance).done();
}

inline void to_json(json& j, const SceneConfig& c) {
    j = {{"width", c.width},
         {"height", c.height},
         {"resolution", c.resolution},
         {"obstacle_density", c.obstacle_density},
         {"obstacle_shape_mix", c.obstacle_shape_mix},
         {"robot_radius", c.robot_radius},
         {"esdf_max_dist", c.esdf_max_dist}};
}
inline void from_json(const json& j, SceneConfig& c) {
    detail::Fields(j, "scene")
        .get("width", c.width)
        .get("height", c.height)
        .get("resolution", c.resolution)
        .get("obstacle_density", c.obstacle_density)
        .get("obstacle_shape_mix", c.obstacle_shape_mix)
        .get("robot_radius", c.robot_radius)
        .get("esdf_max_dist", c.esdf_max_dist).done();
}

inline void to_json(json& j, const ScenePoolConfig& c) {
    j = {{"count", c.count}, {"base_seed", c.base_seed}, {"scene", c.scene}};
    if (c.manifest) j["manifest"] = *c.manifest;
}
inline void from_json(const json& j, ScenePoolConfig& c) {
    detail::Fields f(j, "scenes");
    f.get("count", c.count).get("base_seed", c.base_seed).get("scene", c.scene);
    if (j.contains("manifest")) {
        std::string m;
        f.get("manifest", m);
        c.manifest = m;
    }
    f.done();
}

inline void to_json(json& j, const PolicyConfig& c) {
    j = {{"horizon", c.horizon},
         {"a_max", c.a_max},
         {"rays", c.rays},
         {"fov_deg", c.fov_deg},
         {"max_range", c.max_range},
         {"goal_scale", c.goal_scale},
         {"hidden", c.hidden},
         {"hidden_layers", c.hidden_layers},
         {"time_embed", c.time_embed},
         {"diffusion_steps", c.diffusion_steps},
         {"schedule", c.schedule},
         {"beta_start", c.beta_start},
         {"beta_end", c.beta_end}};
}
inline void from_json(const json& j, PolicyConfig& c) {
    detail::Fields(j, "policy")
        .get("horizon", c.horizon)
        .get("a_max", c.a_max)
        .get("rays", c.rays)
        .get("fov_deg", c.fov_deg)
        .get("max_range", c.max_range)
        .get("goal_scale", c.goal_scale)
        .get("hidden", c.hidden)
        .get("hidden_layers", c.hidden_layers)
        .get("time_embed", c.time_embed)
        .get("diffusion_steps", c.diffusion_steps)
        .get("schedule", c.schedule)
        .get("beta_start", c.beta_start)
        .get("beta_end", c.beta_end).done();
}

inline void to_json(json& j, const PretrainConfig& c) {
    j = {{"dataset_size", c.dataset_size},
         {"validation_size", c.validation_size},
         {"batch_size", c.batch_size},
         {"learning_rate", c.learning_rate},
         {"max_iterations", c.max_iterations},
         {"eval_every", c.eval_every},
         {"patience", c.patience},
         {"min_improvement", c.min_improvement},
         {"goal_agnostic_fraction", c.goal_agnostic_fraction},
         {"goal_range", c.goal_range},
         {"goal_agnostic", c.goal_agnostic},
         {"heading_jitter_deg", c.heading_jitter_deg}};
}
inline void from_json(const json& j, PretrainConfig& c) {
    detail::Fields(j, "pretrain")
        .get("dataset_size", c.dataset_size)
        .get("validation_size", c.validation_size)
        .get("batch_size", c.batch_size)
        .get("learning_rate", c.learning_rate)
        .get("max_iterations", c.max_iterations)
        .get("eval_every", c.eval_every)
        .get("patience", c.patience)
        .get("min_improvement", c.min_improvement)
        .get("goal_agnostic_fraction", c.goal_agnostic_fraction)
        .get("goal_range", c.goal_range)
        .get("goal_agnostic", c.goal_agnostic)
        .get("heading_jitter_deg", c.heading_jitter_deg).done();
}

inline void to_json(json& j, const SidpConfig& c) {
    j = {{"candidates", c.candidates},
         {"top_k", c.top_k},
         {"temperature", c.temperature},
         {"weight_mode", c.weight_mode},
         {"goal_agnostic_fraction", c.goal_agnostic_fraction},
         {"curriculum", c.curriculum},
         {"tau_max", c.tau_max},
         {"tau_range", c.tau_range},
         {"batch_size", c.batch_size},
         {"learning_rate", c.learning_rate},
         {"weight_decay", c.weight_decay},
         {"iterations", c.iterations},
         {"noise_draws", c.noise_draws},
         {"goal_range", c.goal_range},
         {"goal_agnostic", c.goal_agnostic},
         {"heading_jitter_deg", c.heading_jitter_deg},
         {"episode_length", c.episode_length},
         {"success_radius", c.success_radius}};
}
inline void from_json(const json& j, SidpConfig& c) {
    detail::Fields(j, "sidp")
        .get("candidates", c.candidates)
        .get("top_k", c.top_k)
        .get("temperature", c.temperature)
        .get("weight_mode", c.weight_mode)
        .get("goal_agnostic_fraction", c.goal_agnostic_fraction)
        .get("curriculum", c.curriculum)
        .get("tau_max", c.tau_max)
        .get("tau_range", c.tau_range)
        .get("batch_size", c.batch_size)
        .get("learning_rate", c.learning_rate)
        .get("weight_decay", c.weight_decay)
        .get("iterations", c.iterations)
        .get("noise_draws", c.noise_draws)
        .get("goal_range", c.goal_range)
        .get("goal_agnostic", c.goal_agnostic)
        .get("heading_jitter_deg", c.heading_jitter_deg)
        .get("episode_length", c.episode_length)
        .get("success_radius", c.success_radius).done();
}

inline void to_json(json& j, const RewardConfig& c) {
    j = {{"lambda_col", c.lambda_col},
         {"lambda_step", c.lambda_step},
         {"lambda_prog", c.lambda_prog},
         {"lambda_dock", c.lambda_dock},
         {"delta_fine", c.delta_fine},
         {"dock_sharpness", c.dock_sharpness},
         {"truncate_at_collision", c.truncate_at_collision}};
}
inline void from_json(const json& j, RewardConfig& c) {
    detail::Fields(j, "reward")
        .get("lambda_col", c.lambda_col)
        .get("lambda_step", c.lambda_step)
        .get("lambda_prog", c.lambda_prog)
        .get("lambda_dock", c.lambda_dock)
        .get("delta_fine", c.delta_fine)
        .get("dock_sharpness", c.dock_sharpness)
        .get("truncate_at_collision", c.truncate_at_collision).done();
}

inline void to_json(json& j, const SamplerSpec& s) { j = {{"kind", s.kind}, {"steps", s.steps}}; }
inline void from_json(const json& j, SamplerSpec& s) { detail::Fields(j, "sampler").get("kind", s.kind).get("steps", s.steps).done(); }

inline void to_json(json& j, const EvalSuiteConfig& c) {
    j = {{"mode", c.mode},
         {"scene_ids", c.scene_ids},
         {"episodes", c.episodes},
         {"goal_range", c.goal_range},
         {"budget", c.budget},
         {"execute_waypoints", c.execute_waypoints},
         {"success_radius", c.success_radius},
         {"sampler", c.sampler},
         {"exploration_starts", c.exploration_starts},
         {"exploration_samples", c.exploration_samples},
         {"seed", c.seed}};
}
inline void from_json(const json& j, EvalSuiteConfig& c) {
    detail::Fields(j, "eval")
        .get("mode", c.mode)
        .get("scene_ids", c.scene_ids)
        .get("episodes", c.episodes)
        .get("goal_range", c.goal_range)
        .get("budget", c.budget)
        .get("execute_waypoints", c.execute_waypoints)
        .get("success_radius", c.success_radius)
        .get("sampler", c.sampler)
        .get("exploration_starts", c.exploration_starts)
        .get("exploration_samples", c.exploration_samples)
        .get("seed", c.seed).done();
}

inline void to_json(json& j, const BenchConfig& c) {
    j = {{"samplers", c.samplers},
         {"trials", c.trials},
         {"warmup", c.warmup},
         {"fixtures", c.fixtures},
         {"with_sr", c.with_sr}};
}
inline void from_json(const json& j, BenchConfig& c) {
    detail::Fields(j, "bench")
        .get("samplers", c.samplers)
        .get("trials", c.trials)
        .get("warmup", c.warmup)
        .get("fixtures", c.fixtures)
        .get("with_sr", c.with_sr).done();
}

inline void to_json(json& j, const ExperimentConfig& c) {
    j = {{"seed", c.seed},         {"output_dir", c.output_dir}, {"scenes", c.scenes},
         {"policy", c.policy},     {"pretrain", c.pretrain},     {"sidp", c.sidp},
         {"reward", c.reward},     {"eval", c.eval},             {"bench", c.bench}};
}
inline void from_json(const json& j, ExperimentConfig& c) {
    detail::Fields(j, "config")
        .get("seed", c.seed)
        .get("output_dir", c.output_dir)
        .get("scenes", c.scenes)
        .get("policy", c.policy)
        .get("pretrain", c.pretrain)
        .get("sidp", c.sidp)
        .get("reward", c.reward)
        .get("eval", c.eval)
        .get("bench", c.bench).done();
}

inline void ExperimentConfig::validate() const {
    if (scenes.count < 0) throw ConfigError("scenes.count must be >= 0");
    scenes.scene.validate();
    policy.validate();
    schedule_new(policy);
    pretrain.validate();
    sidp.validate();
    reward.validate();
    if (eval.episodes < 1 || eval.budget < 0 || eval.execute_waypoints < 1) throw ConfigError("invalid eval sizes");
    if (eval.execute_waypoints > policy.horizon) throw ConfigError("eval.execute_waypoints exceeds the horizon");
    if (!(eval.goal_range.min > 0.0 && eval.goal_range.min <= eval.goal_range.max)) {
        throw ConfigError("eval.goal_range must satisfy 0 < min <= max");
    }
    if (eval.exploration_starts < 1 || eval.exploration_samples < 1) throw ConfigError("invalid exploration sizes");
    if (bench.trials < 100) throw ConfigError("bench.trials must be >= 100");
    if (bench.warmup < 1 || bench.fixtures < 1) throw ConfigError("invalid bench sizes");
    for (const auto& s : bench.samplers) {
        if (s.steps < 1 || s.steps > policy.diffusion_steps) throw ConfigError("bench sampler steps out of range");
    }
    if (eval.sampler.steps < 1 || eval.sampler.steps > policy.diffusion_steps) {
        throw ConfigError("eval sampler steps out of range");
    }
}

inline ExperimentConfig parse_config(const json& j) {
    ExperimentConfig c;
    try {
        from_json(j, c);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

/// Eight hex digits identifying a configuration (CRC-32 of its canonical dump).
inline std::string config_hash(const ExperimentConfig& c) {
    const std::string text = json(c).dump();
    boost::crc_32_type crc;
    crc.process_bytes(text.data(), text.size());
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", crc.checksum());
    return buf;
}

}  // namespace sidp
