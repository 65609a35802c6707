// Self-imitation training: candidate sampling, reward filtering, importance
// weighting, curriculum gating, goal-agnostic exploration, behavior-cloning
// initialization and the outer training loop.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sidp/common.hpp"
#include "sidp/expert.hpp"
#include "sidp/observation.hpp"
#include "sidp/policy.hpp"
#include "sidp/reward.hpp"
#include "sidp/sampler.hpp"
#include "sidp/scene.hpp"

namespace sidp {

enum class WeightMode { softmax, linear };

inline std::string to_string(WeightMode m) { return m == WeightMode::softmax ? "softmax" : "linear"; }

inline WeightMode weight_mode_from_string(const std::string& s) {
    if (s == "softmax") return WeightMode::softmax;
    if (s == "linear") return WeightMode::linear;
    throw ConfigError("unknown weight mode: " + s);
}

struct GoalAgnosticRange {
    double angle_min_deg = -60.0;
    double angle_max_deg = 60.0;
    DistanceRange distance{3.0, 5.0};
};

struct SidpConfig {
    int candidates = 16;
    int top_k = 4;
    double temperature = 1.0;
    WeightMode weight_mode = WeightMode::softmax;
    double goal_agnostic_fraction = 0.25;
    bool curriculum = true;
    double tau_max = 0.0;
    double tau_range = 1.0;
    /// Scenarios per optimizer step.
    int batch_size = 64;
    double learning_rate = 3e-5;
    double weight_decay = 0.0;
    int iterations = 1000;
    /// (t, ε) draws per selected trajectory.
    int noise_draws = 1;
    DistanceRange goal_range{1.0, 2.5};
    GoalAgnosticRange goal_agnostic;
    /// Start headings are the expert's first-move direction plus U(±jitter).
    double heading_jitter_deg = 45.0;
    /// Replans per training episode before a slot is reset; 0 draws fresh
    /// scenarios every iteration.
    int episode_length = 30;
    double success_radius = 0.5;

    void validate() const {
        if (candidates < 1) throw ConfigError("candidates must be >= 1");
        if (top_k < 1 || top_k > candidates) throw ConfigError("top_k must lie in [1, candidates]");
        if (weight_mode == WeightMode::softmax && !(temperature > 0.0)) throw ConfigError("temperature must be > 0");
        if (!(goal_agnostic_fraction >= 0.0 && goal_agnostic_fraction <= 1.0)) {
            throw ConfigError("goal_agnostic_fraction must lie in [0, 1]");
        }
        if (batch_size < 1 || iterations < 0 || noise_draws < 1) throw ConfigError("invalid batch/iteration counts");
        if (episode_length < 0) throw ConfigError("episode_length must be >= 0");
        if (!(success_radius > 0.0)) throw ConfigError("success_radius must be positive");
        if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    }
};

// ── Weighting and filtering ──────────────────────────────────────────────────

/// Softmax: w_i ∝ exp(r_i/τ) (max-subtracted). Linear: w_i ∝ r_i − min(r),
/// uniform when all rewards are equal.
inline std::vector<double> importance_weights(std::span<const double> rewards, double tau, WeightMode mode) {
    if (rewards.empty()) throw ContractViolation("importance_weights needs at least one reward");
    for (double r : rewards)
        if (!std::isfinite(r)) throw ContractViolation("non-finite reward");
    std::vector<double> w(rewards.size());
    const double k = static_cast<double>(rewards.size());
    if (mode == WeightMode::softmax) {
        if (!(tau > 0.0)) throw ContractViolation("temperature must be positive");
        const double top = *std::max_element(rewards.begin(), rewards.end());
        double sum = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) sum += (w[i] = std::exp((rewards[i] - top) / tau));
        for (double& v : w) v /= sum;
    } else {
        const double low = *std::min_element(rewards.begin(), rewards.end());
        double sum = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) sum += (w[i] = rewards[i] - low);
        if (!(sum > 0.0)) {
            std::fill(w.begin(), w.end(), 1.0 / k);
        } else {
            for (double& v : w) v /= sum;
        }
    }
    return w;
}

inline double weight_entropy(std::span<const double> w) {
    double h = 0.0;
    for (double v : w)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

/// Indices of the k largest rewards, descending; ties go to the lower index.
inline std::vector<std::size_t> select_topk(std::span<const double> rewards, int k) {
    if (k < 1 || static_cast<std::size_t>(k) > rewards.size()) throw ConfigError("top-k must lie in [1, N]");
    std::vector<std::size_t> idx(rewards.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return rewards[a] > rewards[b]; });
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

struct CurriculumStats {
    std::string scenario_id;
    double r_max = 0.0;
    double r_range = 0.0;
};

inline CurriculumStats curriculum_stats(std::string id, std::span<const double> rewards) {
    if (rewards.empty()) throw ContractViolation("curriculum stats need rewards");
    const auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
    return {std::move(id), *hi, *hi - *lo};
}

inline bool curriculum_gate(const CurriculumStats& s, double tau_max, double tau_range) {
    return s.r_max >= tau_max && s.r_range >= tau_range;
}

/// Auxiliary goal in the agent frame with uniform angle and distance.
inline Point2 sample_goal_agnostic(Rng& rng, const GoalAgnosticRange& range) {
    if (range.angle_max_deg < range.angle_min_deg || range.distance.max < range.distance.min ||
        range.distance.min < 0.0) {
        throw ConfigError("invalid goal-agnostic range");
    }
    const double angle = deg2rad(uniform(rng, range.angle_min_deg, range.angle_max_deg));
    const double d = uniform(rng, range.distance.min, range.distance.max);
    return {d * std::cos(angle), d * std::sin(angle)};
}

/// Scales the goal-agnostic distance range down on scenes whose shorter side is
/// under `reference_side` meters.
inline GoalAgnosticRange scaled_goal_agnostic_range(const GoalAgnosticRange& r, const Scene& scene,
                                                    double reference_side = 5.0) {
    const double side = std::min(scene.grid.extent_x(), scene.grid.extent_y());
    const double s = std::min(1.0, side / reference_side);
    GoalAgnosticRange out = r;
    out.distance = {r.distance.min * s, r.distance.max * s};
    return out;
}

// ── Scenarios ────────────────────────────────────────────────────────────────

struct Scenario {
    std::string id;
    std::size_t scene_index = 0;
    const Scene* scene = nullptr;
    Pose2 start;
    Point2 goal;
    std::shared_ptr<const GeodesicField> geo;
    bool goal_agnostic = false;
};

inline Scenario make_point_goal_scenario(const Scene& scene, std::size_t scene_index, Rng& rng, DistanceRange range,
                                         double heading_jitter_deg, double a_max) {
    const auto sg = sample_start_goal(scene, rng, range);
    const double jitter = deg2rad(heading_jitter_deg);
    const double heading = expert_heading(scene, *sg.geo, sg.start, a_max) + uniform(rng, -jitter, jitter);
    return Scenario{scene.id, scene_index, &scene, Pose2{sg.start, heading}, sg.goal, sg.geo, false};
}

/// Random safe start with a random heading and an auxiliary goal drawn in its frame.
inline Scenario make_goal_agnostic_scenario(const Scene& scene, std::size_t scene_index, Rng& rng,
                                            const GoalAgnosticRange& range, int max_attempts = 2000) {
    const auto cells = detail::safe_cells(scene);
    const auto scaled = scaled_goal_agnostic_range(range, scene);
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        const auto start = detail::sample_safe_point(scene, cells, rng);
        if (!start) continue;
        const Pose2 pose{*start, uniform(rng, -std::numbers::pi, std::numbers::pi)};
        const Point2 goal = pose.to_world(sample_goal_agnostic(rng, scaled));
        if (!scene.safe(goal) || !scene.passable(goal)) continue;
        auto geo = std::make_shared<const GeodesicField>(scene.geodesic_to(goal));
        const double d = geo->at(*start);
        if (!std::isfinite(d) || !(d > 0.0)) continue;
        return Scenario{scene.id, scene_index, &scene, pose, goal, std::move(geo), true};
    }
    throw SamplingExhausted("no goal-agnostic scenario found in scene " + scene.id);
}

/// Fresh scenario for one batch slot; slots below round(fraction·B) are goal-agnostic.
inline Scenario make_slot_scenario(std::span<const Scene> scenes, const SidpConfig& cfg, double a_max,
                                   std::uint64_t seed, std::int64_t iteration, int slot) {
    if (scenes.empty()) throw ContractViolation("scene pool is empty");
    const int n_ga = static_cast<int>(std::lround(cfg.goal_agnostic_fraction * cfg.batch_size));
    Rng rng = make_stream(seed, "scenario", iteration, slot);
    const auto si = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(scenes.size()) - 1));
    Scenario s = slot < n_ga ? make_goal_agnostic_scenario(scenes[si], si, rng, cfg.goal_agnostic)
                             : make_point_goal_scenario(scenes[si], si, rng, cfg.goal_range, cfg.heading_jitter_deg, a_max);
    s.id = scenes[si].id + "/" + std::to_string(iteration) + "/" + std::to_string(slot);
    return s;
}

/// Scenario batch for one iteration, every slot freshly drawn.
inline std::vector<Scenario> make_scenario_batch(std::span<const Scene> scenes, const SidpConfig& cfg, double a_max,
                                                 std::uint64_t seed, std::int64_t iteration) {
    std::vector<Scenario> batch;
    batch.reserve(static_cast<std::size_t>(cfg.batch_size));
    for (int slot = 0; slot < cfg.batch_size; ++slot) {
        batch.push_back(make_slot_scenario(scenes, cfg, a_max, seed, iteration, slot));
    }
    return batch;
}

/// Persistent training episodes. Each slot keeps its goal across iterations and
/// moves by the first waypoint of one on-policy sample (contact stops motion),
/// so updates also see the states the policy itself reaches. A slot resets on
/// arrival, after `episode_length` moves, or when its pose loses the goal.
class TrainingEnvironment {
public:
    TrainingEnvironment(std::span<const Scene> scenes, const SidpConfig& cfg, double a_max, std::uint64_t seed)
        : scenes_(scenes), cfg_(cfg), a_max_(a_max), seed_(seed) {
        cfg_.validate();
        for (int slot = 0; slot < cfg_.batch_size; ++slot) {
            slots_.push_back(make_slot_scenario(scenes_, cfg_, a_max_, seed_, 0, slot));
            moves_.push_back(0);
        }
    }

    [[nodiscard]] const std::vector<Scenario>& scenarios() const { return slots_; }

    /// `actions[i]` is executed from slot i's pose; `iteration` seeds any resets.
    void advance(std::span<const Trajectory> actions, std::int64_t iteration) {
        if (actions.size() != slots_.size()) throw ContractViolation("one action per training slot required");
        for (std::size_t i = 0; i < slots_.size(); ++i) {
            Scenario& s = slots_[i];
            const auto wps = actions[i].waypoints(s.start);
            const Point2 path[2] = {s.start.position, wps.empty() ? s.start.position : wps.front()};
            const auto m = execute_motion(s.scene->esdf, s.scene->robot_radius, path, s.goal, cfg_.success_radius);
            s.start.heading = heading_toward(s.start, path[1]);
            s.start.position = m.end;
            ++moves_[i];
            const double d = s.geo->at(s.start.position);
            if (m.reached || moves_[i] >= cfg_.episode_length || !std::isfinite(d) || d < cfg_.success_radius) {
                s = make_slot_scenario(scenes_, cfg_, a_max_, seed_, iteration + 1, static_cast<int>(i));
                moves_[i] = 0;
            } else {
                s.id = s.scene->id + "/" + std::to_string(iteration + 1) + "/" + std::to_string(i);
            }
        }
    }

private:
    std::span<const Scene> scenes_;
    SidpConfig cfg_;
    double a_max_;
    std::uint64_t seed_;
    std::vector<Scenario> slots_;
    std::vector<int> moves_;
};

// ── One self-imitation step ──────────────────────────────────────────────────

struct CandidateBatch {
    Observation state;
    std::vector<Trajectory> candidates;
    std::vector<double> rewards;
    std::vector<RewardBreakdown> breakdowns;
    std::vector<std::size_t> selected;
    std::vector<double> weights;
    CurriculumStats stats;
    bool admitted = false;
    bool goal_agnostic = false;
};

using RewardFn = std::function<RewardBreakdown(const Scenario&, const Trajectory&)>;

inline RewardFn table_reward(const RewardConfig& cfg) {
    return [cfg](const Scenario& s, const Trajectory& t) { return evaluate(*s.scene, s.start, s.goal, *s.geo, t, cfg); };
}

/// N on-policy DDPM candidates for the goal-conditioned observation of `s`.
inline std::vector<Trajectory> generate_candidates(const Policy& policy, const Scenario& s, int count, Rng& rng) {
    const Observation obs = make_observation(*s.scene, s.start, s.goal, false, policy.config);
    const SamplerConfig ddpm{SamplerKind::ddpm, policy.schedule.steps()};
    return sample_policy(policy, obs, count, ddpm, rng);
}

/// Scores, gates, truncates and weights one scenario's candidates. Goal-agnostic
/// scenarios keep uniform 1/k weights. Linear weighting spreads over every
/// candidate instead of the top k.
inline CandidateBatch filter_candidates(const Policy& policy, const Scenario& s, std::vector<Trajectory> candidates,
                                        const SidpConfig& cfg, const RewardFn& reward) {
    CandidateBatch b;
    b.goal_agnostic = s.goal_agnostic;
    b.state = make_observation(*s.scene, s.start, s.goal, s.goal_agnostic, policy.config);
    b.candidates = std::move(candidates);
    b.rewards.reserve(b.candidates.size());
    for (const auto& t : b.candidates) {
        b.breakdowns.push_back(reward(s, t));
        b.rewards.push_back(b.breakdowns.back().total);
    }
    b.stats = curriculum_stats(s.id, b.rewards);
    b.admitted = !cfg.curriculum || curriculum_gate(b.stats, cfg.tau_max, cfg.tau_range);
    if (!b.admitted) return b;
    const bool all = cfg.weight_mode == WeightMode::linear && !s.goal_agnostic;
    b.selected = select_topk(b.rewards, all ? static_cast<int>(b.rewards.size()) : cfg.top_k);
    if (s.goal_agnostic) {
        b.weights.assign(b.selected.size(), 1.0 / static_cast<double>(b.selected.size()));
    } else {
        std::vector<double> top;
        for (auto i : b.selected) top.push_back(b.rewards[i]);
        b.weights = importance_weights(top, cfg.temperature, cfg.weight_mode);
    }
    return b;
}

/// Weighted denoising pairs for all admitted batches; each batch's weights are
/// divided by the number of admitted batches and noise draws.
inline DenoiseBatch build_denoise_batch(const Policy& policy, std::span<const CandidateBatch> batches, int noise_draws,
                                        Rng& rng) {
    std::size_t admitted = 0;
    std::size_t pairs = 0;
    for (const auto& b : batches) {
        if (!b.admitted) continue;
        ++admitted;
        pairs += b.selected.size() * static_cast<std::size_t>(noise_draws);
    }
    const int adim = policy.config.action_dim();
    DenoiseBatch d;
    d.x_t.resize(adim, static_cast<Eigen::Index>(pairs));
    d.eps.resize(adim, static_cast<Eigen::Index>(pairs));
    d.obs.resize(policy.config.obs_dim(), static_cast<Eigen::Index>(pairs));
    Eigen::Index col = 0;
    for (const auto& b : batches) {
        if (!b.admitted) continue;
        const Eigen::VectorXd f = b.state.features(policy.config);
        for (std::size_t j = 0; j < b.selected.size(); ++j) {
            const Eigen::VectorXd& x0 = b.candidates[b.selected[j]].normalized();
            for (int r = 0; r < noise_draws; ++r) {
                const int t = uniform_int(rng, 1, policy.schedule.steps());
                const Eigen::MatrixXd eps = detail::gaussian(adim, 1, rng);
                d.x_t.col(col) = forward_noise(x0, t, eps.col(0), policy.schedule);
                d.eps.col(col) = eps.col(0);
                d.obs.col(col) = f;
                d.t.push_back(t);
                d.weight.push_back(b.weights[j] / static_cast<double>(admitted * static_cast<std::size_t>(noise_draws)));
                ++col;
            }
        }
    }
    return d;
}

struct StepReport {
    double loss = 0.0;
    double mean_reward = 0.0;
    double gated_fraction = 0.0;
    double weight_entropy = 0.0;
    /// Means of the individual reward terms over the same candidates as mean_reward.
    RewardBreakdown mean_terms;
    bool skipped = false;
    std::vector<bool> gate;
    std::vector<CurriculumStats> stats;
    /// First candidate of each scenario: an unfiltered on-policy sample.
    std::vector<Trajectory> behavior;
};

/// Sample → score → filter → one AdamW update. All candidates come from the
/// parameter snapshot held at entry.
inline StepReport sidp_step(Policy& policy, OptimizerState& opt, std::span<const Scenario> scenarios,
                            const SidpConfig& cfg, const RewardFn& reward, std::uint64_t seed,
                            std::int64_t iteration) {
    cfg.validate();
    std::vector<CandidateBatch> batches;
    batches.reserve(scenarios.size());
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        Rng rng = make_stream(seed, "candidates", iteration, i);
        auto cands = generate_candidates(policy, scenarios[i], cfg.candidates, rng);
        batches.push_back(filter_candidates(policy, scenarios[i], std::move(cands), cfg, reward));
    }

    StepReport rep;
    double reward_sum = 0.0;
    std::size_t reward_n = 0;
    std::size_t admitted = 0;
    double entropy = 0.0;
    const bool any_point_goal =
        std::any_of(scenarios.begin(), scenarios.end(), [](const Scenario& s) { return !s.goal_agnostic; });
    for (const auto& b : batches) {
        rep.gate.push_back(b.admitted);
        rep.stats.push_back(b.stats);
        rep.behavior.push_back(b.candidates.front());
        if (!any_point_goal || !b.goal_agnostic) {
            for (const auto& r : b.breakdowns) {
                reward_sum += r.total;
                rep.mean_terms.r_col += r.r_col;
                rep.mean_terms.r_step += r.r_step;
                rep.mean_terms.r_prog += r.r_prog;
                rep.mean_terms.r_dock += r.r_dock;
            }
            reward_n += b.rewards.size();
        }
        if (b.admitted) {
            ++admitted;
            entropy += weight_entropy(b.weights);
        }
    }
    if (reward_n > 0) {
        const auto n = static_cast<double>(reward_n);
        rep.mean_reward = reward_sum / n;
        rep.mean_terms.r_col /= n;
        rep.mean_terms.r_step /= n;
        rep.mean_terms.r_prog /= n;
        rep.mean_terms.r_dock /= n;
        rep.mean_terms.total = rep.mean_reward;
    }
    rep.gated_fraction =
        batches.empty() ? 1.0 : 1.0 - static_cast<double>(admitted) / static_cast<double>(batches.size());
    rep.weight_entropy = admitted > 0 ? entropy / static_cast<double>(admitted) : 0.0;
    if (admitted == 0) {
        rep.skipped = true;
        return rep;
    }

    Rng noise = make_stream(seed, "update", iteration);
    const DenoiseBatch d = build_denoise_batch(policy, batches, cfg.noise_draws, noise);
    const auto lg = denoiser_grad(policy.params, d, policy.config.time_embed);
    rep.loss = lg.loss;
    opt.learning_rate = cfg.learning_rate;
    opt.weight_decay = cfg.weight_decay;
    adamw_step(policy.params.values, lg.grads, opt);
    return rep;
}

inline StepReport sidp_step(Policy& policy, OptimizerState& opt, std::span<const Scenario> scenarios,
                            const SidpConfig& cfg, const RewardConfig& rcfg, std::uint64_t seed,
                            std::int64_t iteration) {
    return sidp_step(policy, opt, scenarios, cfg, table_reward(rcfg), seed, iteration);
}

// ── Training loop ────────────────────────────────────────────────────────────

struct TrainLogRow {
    std::int64_t iteration = 0;
    double loss = 0.0;
    double mean_reward = 0.0;
    double gated_fraction = 0.0;
    double weight_entropy = 0.0;
    double wall_ms = 0.0;
    bool skipped = false;
    RewardBreakdown mean_terms;
};

struct TrainCallbacks {
    std::function<void(const TrainLogRow&, const Policy&)> on_iteration;
};

inline std::vector<TrainLogRow> train(Policy& policy, OptimizerState& opt, std::span<const Scene> scenes,
                                      const SidpConfig& cfg, const RewardConfig& rcfg, std::uint64_t seed,
                                      const TrainCallbacks& callbacks = {}) {
    cfg.validate();
    rcfg.validate();
    const RewardFn reward = table_reward(rcfg);
    std::vector<TrainLogRow> log;
    std::optional<TrainingEnvironment> env;
    if (cfg.episode_length > 0) env.emplace(scenes, cfg, policy.config.a_max, seed);
    for (std::int64_t it = 0; it < cfg.iterations; ++it) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto batch = env ? env->scenarios() : make_scenario_batch(scenes, cfg, policy.config.a_max, seed, it);
        const auto rep = sidp_step(policy, opt, batch, cfg, reward, seed, it);
        if (env) env->advance(rep.behavior, it);
        const auto t1 = std::chrono::steady_clock::now();
        TrainLogRow row{it,
                        rep.loss,
                        rep.mean_reward,
                        rep.gated_fraction,
                        rep.weight_entropy,
                        std::chrono::duration<double, std::milli>(t1 - t0).count(),
                        rep.skipped,
                        rep.mean_terms};
        log.push_back(row);
        if (callbacks.on_iteration) callbacks.on_iteration(row, policy);
    }
    return log;
}

/// Mean table reward of `candidates` DDPM samples per scenario over a fixed set of
/// point-goal scenarios drawn from their own stream; comparable across runs.
inline double mean_candidate_reward(const Policy& policy, std::span<const Scene> scenes, const SidpConfig& cfg,
                                    const RewardConfig& rcfg, int scenarios, std::uint64_t seed) {
    if (scenes.empty() || scenarios < 1) throw ContractViolation("mean_candidate_reward needs scenes and scenarios");
    double sum = 0.0;
    std::size_t n = 0;
    for (int i = 0; i < scenarios; ++i) {
        Rng rng = make_stream(seed, "reward-eval", i);
        const auto si = static_cast<std::size_t>(i % static_cast<int>(scenes.size()));
        const Scenario s = make_point_goal_scenario(scenes[si], si, rng, cfg.goal_range, cfg.heading_jitter_deg,
                                                    policy.config.a_max);
        for (const auto& t : generate_candidates(policy, s, cfg.candidates, rng)) {
            sum += evaluate(*s.scene, s.start, s.goal, *s.geo, t, rcfg).total;
            ++n;
        }
    }
    return sum / static_cast<double>(n);
}

// ── Behavior-cloning initialization ──────────────────────────────────────────

struct PretrainConfig {
    int dataset_size = 20000;
    int validation_size = 300;
    int batch_size = 64;
    double learning_rate = 1e-3;
    int max_iterations = 20000;
    int eval_every = 100;
    /// Stop after this many evaluations without relative improvement ≥ min_improvement.
    int patience = 8;
    double min_improvement = 0.01;
    double goal_agnostic_fraction = 0.25;
    DistanceRange goal_range{1.0, 2.5};
    GoalAgnosticRange goal_agnostic;
    double heading_jitter_deg = 45.0;

    void validate() const {
        if (dataset_size < 1 || validation_size < 1 || batch_size < 1 || max_iterations < 0 || eval_every < 1) {
            throw ConfigError("invalid pretrain sizes");
        }
        if (!(learning_rate > 0.0)) throw ConfigError("pretrain learning_rate must be positive");
    }
};

struct ExpertSample {
    Eigen::VectorXd obs;
    Eigen::VectorXd action;
};

/// Expert demonstrations; a fraction are goal-agnostic (expert toward an
/// auxiliary goal, observation masked).
inline std::vector<ExpertSample> expert_dataset(std::span<const Scene> scenes, const PolicyConfig& pcfg, int count,
                                                double goal_agnostic_fraction, DistanceRange range,
                                                const GoalAgnosticRange& ga, double heading_jitter_deg,
                                                std::uint64_t seed, std::string_view stream) {
    std::vector<ExpertSample> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        Rng rng = make_stream(seed, stream, i);
        const auto si = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(scenes.size()) - 1));
        const bool masked = uniform(rng, 0.0, 1.0) < goal_agnostic_fraction;
        const Scenario s = masked ? make_goal_agnostic_scenario(scenes[si], si, rng, ga)
                                  : make_point_goal_scenario(scenes[si], si, rng, range, heading_jitter_deg, pcfg.a_max);
        const Trajectory expert = expert_trajectory(*s.scene, *s.geo, s.start, pcfg.horizon, pcfg.a_max);
        out.push_back({make_observation(*s.scene, s.start, s.goal, masked, pcfg).features(pcfg), expert.normalized()});
    }
    return out;
}

struct PretrainLogRow {
    int iteration = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

namespace detail {

inline DenoiseBatch noised_batch(const Policy& policy, std::span<const ExpertSample> data,
                                 std::span<const std::size_t> idx, Rng& rng) {
    const int adim = policy.config.action_dim();
    DenoiseBatch b;
    const auto n = static_cast<Eigen::Index>(idx.size());
    b.x_t.resize(adim, n);
    b.eps.resize(adim, n);
    b.obs.resize(policy.config.obs_dim(), n);
    for (Eigen::Index c = 0; c < n; ++c) {
        const auto& s = data[idx[static_cast<std::size_t>(c)]];
        const int t = uniform_int(rng, 1, policy.schedule.steps());
        const Eigen::MatrixXd eps = gaussian(adim, 1, rng);
        b.x_t.col(c) = forward_noise(s.action, t, eps.col(0), policy.schedule);
        b.eps.col(c) = eps.col(0);
        b.obs.col(c) = s.obs;
        b.t.push_back(t);
        b.weight.push_back(1.0 / static_cast<double>(n));
    }
    return b;
}

}  // namespace detail

/// Uniform-weight denoising on expert plans until the validation loss plateaus.
inline std::vector<PretrainLogRow> bc_pretrain(Policy& policy, OptimizerState& opt, std::span<const Scene> scenes,
                                               const PretrainConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const auto train_set = expert_dataset(scenes, policy.config, cfg.dataset_size, cfg.goal_agnostic_fraction,
                                          cfg.goal_range, cfg.goal_agnostic, cfg.heading_jitter_deg, seed, "bc-train");
    const auto val_set = expert_dataset(scenes, policy.config, cfg.validation_size, cfg.goal_agnostic_fraction,
                                        cfg.goal_range, cfg.goal_agnostic, cfg.heading_jitter_deg, seed, "bc-val");
    std::vector<std::size_t> all_val(val_set.size());
    std::iota(all_val.begin(), all_val.end(), std::size_t{0});
    Rng val_rng = make_stream(seed, "bc-val-noise");
    const DenoiseBatch val_batch = detail::noised_batch(policy, val_set, all_val, val_rng);
    auto val_loss = [&] { return denoiser_grad(policy.params, val_batch, policy.config.time_embed).loss; };

    std::vector<PretrainLogRow> log;
    log.push_back({0, std::numeric_limits<double>::quiet_NaN(), val_loss()});
    double best = log.back().val_loss;
    int stale = 0;
    opt.learning_rate = cfg.learning_rate;
    double running = 0.0;
    int running_n = 0;
    for (int it = 1; it <= cfg.max_iterations; ++it) {
        Rng rng = make_stream(seed, "bc-step", it);
        std::vector<std::size_t> idx(static_cast<std::size_t>(cfg.batch_size));
        for (auto& i : idx) i = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(train_set.size()) - 1));
        const auto batch = detail::noised_batch(policy, train_set, idx, rng);
        const auto lg = denoiser_grad(policy.params, batch, policy.config.time_embed);
        adamw_step(policy.params.values, lg.grads, opt);
        running += lg.loss;
        ++running_n;
        if (it % cfg.eval_every == 0 || it == cfg.max_iterations) {
            log.push_back({it, running / running_n, val_loss()});
            running = 0.0;
            running_n = 0;
            if (log.back().val_loss < best * (1.0 - cfg.min_improvement)) {
                best = log.back().val_loss;
                stale = 0;
            } else if (++stale >= cfg.patience) {
                break;
            }
        }
    }
    return log;
}

}  // namespace sidp
