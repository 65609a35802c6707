// Closed-loop and one-shot rollouts, SR/SPL/CR/DTG/EA metrics and the
// sampler latency benchmark.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <concepts>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sidp/common.hpp"
#include "sidp/expert.hpp"
#include "sidp/observation.hpp"
#include "sidp/policy.hpp"
#include "sidp/sampler.hpp"
#include "sidp/scene.hpp"

namespace sidp {

/// Everything a planner may look at. Learned planners only read `obs`; the
/// privileged fields let oracle planners stand in for the policy.
struct PlanRequest {
    const Scene* scene = nullptr;
    Pose2 pose;
    Point2 goal;
    const GeodesicField* geo = nullptr;
    Observation obs;
};

template <class P>
concept Planner = requires(P& p, const PlanRequest& r, Rng& rng) {
    { p.plan(r, rng) } -> std::convertible_to<Trajectory>;
};

struct DiffusionPlanner {
    const Policy* policy = nullptr;
    SamplerConfig sampler;
    int denoiser_calls = 0;

    Trajectory plan(const PlanRequest& r, Rng& rng) {
        return sample_policy(*policy, r.obs, 1, sampler, rng, &denoiser_calls).front();
    }
};

struct ExpertPlanner {
    int horizon = 8;
    double a_max = 0.3;

    Trajectory plan(const PlanRequest& r, Rng&) const {
        if (r.geo == nullptr) throw ContractViolation("expert planner needs a geodesic field");
        return expert_trajectory(*r.scene, *r.geo, r.pose, horizon, a_max);
    }
};

struct RolloutConfig {
    double success_radius = 0.5;
    int budget = 200;
    /// Waypoints executed per replan.
    int execute_waypoints = 1;
    bool goal_masked = false;
};

struct EpisodeResult {
    bool success = false;
    double path_length = 0.0;
    double shortest = 0.0;
    bool collided = false;
    double final_dist = 0.0;
    int steps_used = 0;
    std::vector<Point2> executed;
};

/// Receding horizon: observe, plan, execute the first waypoint(s), repeat.
template <Planner P>
EpisodeResult rollout_closed_loop(P& planner, const Scene& scene, const Pose2& start, Point2 goal,
                                  const GeodesicField& geo, const PolicyConfig& pcfg, const RolloutConfig& cfg,
                                  Rng& rng) {
    if (!scene.grid.contains(start.position) || !scene.grid.contains(goal)) {
        throw ContractViolation("rollout start/goal outside the scene");
    }
    EpisodeResult r;
    r.shortest = std::max(geo.at(start.position), 1e-9);
    if (!std::isfinite(r.shortest)) throw ContractViolation("rollout goal unreachable from start");
    Pose2 pose = start;
    r.executed.push_back(pose.position);
    r.success = distance(pose.position, goal) < cfg.success_radius;
    for (int step = 0; step < cfg.budget && !r.success; ++step) {
        const PlanRequest req{&scene, pose, goal, &geo,
                              make_observation(scene, pose, goal, cfg.goal_masked, pcfg)};
        const Trajectory traj = planner.plan(req, rng);
        ++r.steps_used;
        auto wps = traj.waypoints(pose);
        wps.resize(std::min<std::size_t>(wps.size(), static_cast<std::size_t>(cfg.execute_waypoints)));
        wps.insert(wps.begin(), pose.position);
        const auto m = execute_motion(scene.esdf, scene.robot_radius, wps, goal, cfg.success_radius, &r.executed);
        r.path_length += m.length;
        r.collided = r.collided || m.hit;
        pose.heading = heading_toward(pose, wps.back());
        pose.position = m.end;
        r.success = distance(pose.position, goal) < cfg.success_radius;
    }
    r.final_dist = distance(pose.position, goal);
    return r;
}

/// Single inference; the whole waypoint chain is followed.
template <Planner P>
EpisodeResult rollout_one_shot(P& planner, const Scene& scene, const Pose2& start, Point2 goal,
                               const GeodesicField& geo, const PolicyConfig& pcfg, const RolloutConfig& cfg, Rng& rng) {
    if (!scene.grid.contains(start.position) || !scene.grid.contains(goal)) {
        throw ContractViolation("rollout start/goal outside the scene");
    }
    EpisodeResult r;
    r.shortest = std::max(geo.at(start.position), 1e-9);
    if (!std::isfinite(r.shortest)) throw ContractViolation("rollout goal unreachable from start");
    r.executed.push_back(start.position);
    if (distance(start.position, goal) < cfg.success_radius) {
        r.success = true;
        r.final_dist = distance(start.position, goal);
        return r;
    }
    const PlanRequest req{&scene, start, goal, &geo, make_observation(scene, start, goal, cfg.goal_masked, pcfg)};
    const Trajectory traj = planner.plan(req, rng);
    r.steps_used = 1;
    const auto chain = traj.chain(start);
    const auto m = execute_motion(scene.esdf, scene.robot_radius, chain, goal, cfg.success_radius, &r.executed);
    r.path_length = m.length;
    r.collided = m.hit;
    r.success = m.reached;
    r.final_dist = distance(m.end, goal);
    return r;
}

// ── Metrics ──────────────────────────────────────────────────────────────────

struct MetricsReport {
    double sr = 0.0;
    double spl = 0.0;
    double cr = 0.0;
    double dtg = 0.0;
    std::optional<double> ea;
    std::size_t episodes = 0;
};

inline double spl_term(const EpisodeResult& e) {
    if (!e.success) return 0.0;
    return e.shortest / std::max(e.path_length, e.shortest);
}

inline MetricsReport compute_metrics(std::span<const EpisodeResult> results) {
    if (results.empty()) throw ContractViolation("compute_metrics needs at least one episode");
    MetricsReport m;
    m.episodes = results.size();
    for (const auto& e : results) {
        m.sr += e.success ? 1.0 : 0.0;
        m.spl += spl_term(e);
        m.cr += e.collided ? 1.0 : 0.0;
        m.dtg += e.final_dist;
    }
    const double n = static_cast<double>(results.size());
    m.sr = 100.0 * m.sr / n;
    m.spl = 100.0 * m.spl / n;
    m.cr = 100.0 * m.cr / n;
    m.dtg /= n;
    return m;
}

// ── Exploration area ─────────────────────────────────────────────────────────

/// Area of the union of capsules (radius width/2) around every segment of
/// every chain, rasterized at `cell` meters.
inline double swept_area(std::span<const std::vector<Point2>> chains, double width = 0.2, double cell = 0.02) {
    if (!(cell > 0.0) || !(width > 0.0)) throw ContractViolation("swept_area needs positive width and cell");
    const double radius = width / 2.0;
    double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
    double x1 = -x0, y1 = -x0;
    for (const auto& c : chains)
        for (const auto& p : c) {
            x0 = std::min(x0, p.x);
            y0 = std::min(y0, p.y);
            x1 = std::max(x1, p.x);
            y1 = std::max(y1, p.y);
        }
    if (!std::isfinite(x0)) return 0.0;
    // cells sit on a global lattice so unions of different chain sets rasterize consistently
    const double kx = std::floor((x0 - radius) / cell) - 1.0;
    const double ky = std::floor((y0 - radius) / cell) - 1.0;
    x0 = kx * cell;
    y0 = ky * cell;
    const int nx = static_cast<int>(std::ceil((x1 + radius + cell - x0) / cell));
    const int ny = static_cast<int>(std::ceil((y1 + radius + cell - y0) / cell));
    std::vector<std::uint8_t> mark(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny), 0);
    auto stamp = [&](Point2 a, Point2 b) {
        const Point2 ab = b - a;
        const double len2 = ab.x * ab.x + ab.y * ab.y;
        const int ix0 = std::max(0, static_cast<int>(std::floor((std::min(a.x, b.x) - radius - x0) / cell)));
        const int ix1 = std::min(nx - 1, static_cast<int>(std::ceil((std::max(a.x, b.x) + radius - x0) / cell)));
        const int iy0 = std::max(0, static_cast<int>(std::floor((std::min(a.y, b.y) - radius - y0) / cell)));
        const int iy1 = std::min(ny - 1, static_cast<int>(std::ceil((std::max(a.y, b.y) + radius - y0) / cell)));
        for (int iy = iy0; iy <= iy1; ++iy) {
            for (int ix = ix0; ix <= ix1; ++ix) {
                const Point2 c{(kx + ix + 0.5) * cell, (ky + iy + 0.5) * cell};
                const Point2 ac = c - a;
                const double t = len2 > 0.0 ? std::clamp((ac.x * ab.x + ac.y * ab.y) / len2, 0.0, 1.0) : 0.0;
                if (distance(c, a + t * ab) <= radius) {
                    mark[static_cast<std::size_t>(iy) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(ix)] = 1;
                }
            }
        }
    };
    for (const auto& c : chains) {
        if (c.size() == 1) stamp(c[0], c[0]);
        for (std::size_t i = 0; i + 1 < c.size(); ++i) stamp(c[i], c[i + 1]);
    }
    const auto covered = static_cast<double>(std::count(mark.begin(), mark.end(), std::uint8_t{1}));
    return covered * cell * cell;
}

/// Goal-masked sampling from `start`; returns the union swept area and the chains.
template <Planner P>
double exploration_area(P& planner, const Scene& scene, const Pose2& start, const PolicyConfig& pcfg, Rng& rng,
                        int count = 16, double width = 0.2, double cell = 0.02,
                        std::vector<std::vector<Point2>>* chains_out = nullptr) {
    std::vector<std::vector<Point2>> chains;
    const PlanRequest req{&scene, start, start.position, nullptr, make_observation(scene, start, {}, true, pcfg)};
    for (int i = 0; i < count; ++i) chains.push_back(planner.plan(req, rng).chain(start));
    const double area = swept_area(chains, width, cell);
    if (chains_out != nullptr) *chains_out = std::move(chains);
    return area;
}

// ── Evaluation suites ────────────────────────────────────────────────────────

struct EvalEpisode {
    std::size_t scene_index = 0;
    Pose2 start;
    Point2 goal;
    std::shared_ptr<const GeodesicField> geo;
};

/// Held-out point-goal episodes (own random stream), heading along the planned path.
inline std::vector<EvalEpisode> make_eval_episodes(std::span<const Scene> scenes, int count, DistanceRange range,
                                                   double a_max, std::uint64_t seed) {
    std::vector<EvalEpisode> out;
    for (int i = 0; i < count; ++i) {
        Rng rng = make_stream(seed, "eval-episode", i);
        const auto si = static_cast<std::size_t>(i % static_cast<int>(scenes.size()));
        const auto sg = sample_start_goal(scenes[si], rng, range);
        out.push_back({si, Pose2{sg.start, expert_heading(scenes[si], *sg.geo, sg.start, a_max)}, sg.goal, sg.geo});
    }
    return out;
}

/// Safe starts facing at least `min_forward_clearance` meters of free space.
inline std::vector<EvalEpisode> make_exploration_starts(std::span<const Scene> scenes, int count, std::uint64_t seed,
                                                        double min_forward_clearance = 1.0) {
    std::vector<EvalEpisode> out;
    for (int i = 0; i < count; ++i) {
        Rng rng = make_stream(seed, "explore-start", i);
        const auto si = static_cast<std::size_t>(i % static_cast<int>(scenes.size()));
        const auto cells = detail::safe_cells(scenes[si]);
        for (int attempt = 0;; ++attempt) {
            if (attempt > 1000) throw SamplingExhausted("no exploration start in scene " + scenes[si].id);
            const auto p = detail::sample_safe_point(scenes[si], cells, rng);
            if (!p) continue;
            const double heading = uniform(rng, -std::numbers::pi, std::numbers::pi);
            if (raycast(scenes[si].esdf, *p, heading, min_forward_clearance) < min_forward_clearance) continue;
            out.push_back({si, Pose2{*p, heading}, *p, nullptr});
            break;
        }
    }
    return out;
}

enum class EvalMode { closed_loop, one_shot, goal_agnostic };

inline std::string to_string(EvalMode m) {
    switch (m) {
        case EvalMode::closed_loop: return "closed_loop";
        case EvalMode::one_shot: return "one_shot";
        case EvalMode::goal_agnostic: return "goal_agnostic";
    }
    return "closed_loop";
}

inline EvalMode eval_mode_from_string(const std::string& s) {
    if (s == "closed_loop") return EvalMode::closed_loop;
    if (s == "one_shot") return EvalMode::one_shot;
    if (s == "goal_agnostic") return EvalMode::goal_agnostic;
    throw ConfigError("unknown eval mode: " + s);
}

struct SuiteResult {
    MetricsReport metrics;
    std::vector<EpisodeResult> episodes;
    /// Goal-agnostic suites: per-start swept areas.
    std::vector<double> areas;
};

template <Planner P>
SuiteResult run_point_goal_suite(P& planner, std::span<const Scene> scenes, std::span<const EvalEpisode> episodes,
                                 const PolicyConfig& pcfg, EvalMode mode, const RolloutConfig& rcfg,
                                 std::uint64_t seed) {
    SuiteResult out;
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        const auto& ep = episodes[i];
        Rng rng = make_stream(seed, "rollout", i);
        const Scene& scene = scenes[ep.scene_index];
        out.episodes.push_back(mode == EvalMode::one_shot
                                   ? rollout_one_shot(planner, scene, ep.start, ep.goal, *ep.geo, pcfg, rcfg, rng)
                                   : rollout_closed_loop(planner, scene, ep.start, ep.goal, *ep.geo, pcfg, rcfg, rng));
    }
    out.metrics = compute_metrics(out.episodes);
    return out;
}

/// Each start gets `count` goal-masked samples. Every sample is one episode for
/// CR (collision along its chain); EA is the mean union area per start.
template <Planner P>
SuiteResult run_exploration_suite(P& planner, std::span<const Scene> scenes, std::span<const EvalEpisode> starts,
                                  const PolicyConfig& pcfg, std::uint64_t seed, int count = 16) {
    SuiteResult out;
    double area_sum = 0.0;
    for (std::size_t i = 0; i < starts.size(); ++i) {
        Rng rng = make_stream(seed, "explore", i);
        const Scene& scene = scenes[starts[i].scene_index];
        std::vector<std::vector<Point2>> chains;
        const double area = exploration_area(planner, scene, starts[i].start, pcfg, rng, count, 0.2, 0.02, &chains);
        out.areas.push_back(area);
        area_sum += area;
        for (auto& c : chains) {
            EpisodeResult e;
            const auto cc = collision_check(scene.esdf, c, scene.robot_radius);
            e.collided = cc.hit;
            e.shortest = 1.0;
            for (std::size_t k = 0; k + 1 < c.size(); ++k) e.path_length += distance(c[k], c[k + 1]);
            e.executed = std::move(c);
            out.episodes.push_back(std::move(e));
        }
    }
    out.metrics = compute_metrics(out.episodes);
    out.metrics.sr = 0.0;
    out.metrics.spl = 0.0;
    out.metrics.dtg = 0.0;
    out.metrics.ea = area_sum / static_cast<double>(starts.size());
    return out;
}

// ── Latency ──────────────────────────────────────────────────────────────────

struct LatencyRow {
    SamplerConfig sampler;
    double mean_ms = 0.0;
    int denoiser_calls = 0;
    int trials = 0;
    std::optional<double> sr;
};

/// Mean wall-clock per single-trajectory inference after `warmup` untimed runs.
inline std::vector<LatencyRow> latency_bench(const Policy& policy, std::span<const Observation> fixtures,
                                             std::span<const SamplerConfig> samplers, int trials = 100,
                                             int warmup = 10, std::uint64_t seed = 0) {
    if (fixtures.empty()) throw ContractViolation("latency_bench needs observation fixtures");
    if (trials < 100) throw ConfigError("latency_bench needs at least 100 trials");
    std::vector<LatencyRow> rows;
    for (const auto& sc : samplers) {
        Rng rng = make_stream(seed, "latency", static_cast<int>(sc.kind), sc.steps);
        LatencyRow row{sc, 0.0, 0, trials, std::nullopt};
        for (int i = 0; i < warmup; ++i) sample_policy(policy, fixtures[static_cast<std::size_t>(i) % fixtures.size()], 1, sc, rng);
        double total_ms = 0.0;
        for (int i = 0; i < trials; ++i) {
            int calls = 0;
            const auto& obs = fixtures[static_cast<std::size_t>(i) % fixtures.size()];
            const auto t0 = std::chrono::steady_clock::now();
            const auto traj = sample_policy(policy, obs, 1, sc, rng, &calls);
            const auto t1 = std::chrono::steady_clock::now();
            total_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
            row.denoiser_calls = calls;
            if (traj.empty()) throw std::logic_error("sampler returned nothing");
        }
        row.mean_ms = total_ms / trials;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace sidp
