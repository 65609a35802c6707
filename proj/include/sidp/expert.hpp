// Geodesic-descent expert used for behavior-cloning initialization and as an
// oracle planner in rollout tests.

#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "sidp/policy.hpp"
#include "sidp/scene.hpp"

namespace sidp {

struct ExpertConfig {
    /// Extra clearance on top of the robot radius when testing line of sight.
    double margin = 0.02;
    /// Number of descent-chain cells examined for string pulling.
    int lookahead = 80;
    /// Directions tried when nothing on the chain is visible.
    int fallback_headings = 48;
    /// Step length as a fraction of a_max; below 1 keeps demonstrations off
    /// the sampler's clipping boundary.
    double step_fraction = 0.8;
};

namespace detail {

inline bool segment_safe(const Scene& scene, Point2 a, Point2 b, double clearance) {
    const Point2 seg[2] = {a, b};
    return !collision_check(scene.esdf, seg, clearance).hit;
}

inline std::optional<CellIndex> chain_entry(const Scene& scene, const GeodesicField& geo, Point2 p) {
    const CellIndex c = scene.grid.cell_of(p);
    std::optional<CellIndex> best;
    double best_val = GeodesicField::kUnreachable;
    for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
            const CellIndex n{c.ix + dx, c.iy + dy};
            const double g = geo.at(n.ix, n.iy);
            if (!std::isfinite(g)) continue;
            if (std::isfinite(geo.at(c.ix, c.iy)) && !geo.step_allowed(c, dx, dy)) continue;
            const double v = g + distance(p, scene.grid.cell_center(n.ix, n.iy));
            if (v < best_val) {
                best_val = v;
                best = n;
            }
        }
    }
    return best;
}

/// Farthest visible point along the steepest-descent chain toward the goal,
/// tested first with the safety margin and then with the bare robot radius.
inline std::optional<Point2> expert_target(const Scene& scene, const GeodesicField& geo, Point2 p,
                                           const ExpertConfig& cfg) {
    for (const double clearance : {scene.robot_radius + cfg.margin, scene.robot_radius}) {
        if (segment_safe(scene, p, geo.goal(), clearance)) return geo.goal();
        auto cell = chain_entry(scene, geo, p);
        std::optional<Point2> target;
        for (int i = 0; cell && i < cfg.lookahead; ++i) {
            const Point2 c = scene.grid.cell_center(cell->ix, cell->iy);
            if (distance(p, c) > 1e-6 && segment_safe(scene, p, c, clearance)) {
                target = c;
            } else if (target) {
                break;
            }
            cell = geo.descend(*cell);
        }
        if (target) return target;
    }
    return std::nullopt;
}

}  // namespace detail

/// H-step expert plan in the agent frame: string-pulled descent of the geodesic
/// field with steps of at most step_fraction·a_max, stopping at the goal. Every executed
/// segment keeps at least robot_radius clearance.
inline Trajectory expert_trajectory(const Scene& scene, const GeodesicField& geo, const Pose2& start, int horizon,
                                    double a_max, const ExpertConfig& cfg = {}) {
    if (!(cfg.step_fraction > 0.0 && cfg.step_fraction <= 1.0)) throw ConfigError("step_fraction must lie in (0, 1]");
    const double step_max = a_max * cfg.step_fraction;
    std::vector<Point2> deltas;
    Point2 p = start.position;
    const Point2 goal = geo.goal();
    for (int h = 0; h < horizon; ++h) {
        Point2 next = p;
        if (distance(p, goal) > 1e-9) {
            if (const auto target = detail::expert_target(scene, geo, p, cfg)) {
                const Point2 d = *target - p;
                const double len = d.norm();
                next = len <= step_max ? *target : p + (step_max / len) * d;
            } else {
                double best = geo.at(p);
                for (const double step : {step_max, step_max / 2.0, step_max / 4.0}) {
                    for (int k = 0; k < cfg.fallback_headings; ++k) {
                        const double ang = 2.0 * std::numbers::pi * k / cfg.fallback_headings;
                        const Point2 q = p + step * Point2{std::cos(ang), std::sin(ang)};
                        const double g = geo.at(q);
                        if (g < best && detail::segment_safe(scene, p, q, scene.robot_radius)) {
                            best = g;
                            next = q;
                        }
                    }
                    if (next != p) break;
                }
            }
            if (!detail::segment_safe(scene, p, next, scene.robot_radius)) next = p;
        }
        deltas.push_back(start.to_local(next) - start.to_local(p));
        p = next;
    }
    return Trajectory::from_deltas(deltas, a_max);
}

/// Heading of the expert's first move from `position` (toward the goal if it does not move).
inline double expert_heading(const Scene& scene, const GeodesicField& geo, Point2 position, double a_max,
                             const ExpertConfig& cfg = {}) {
    const Pose2 pose{position, 0.0};
    const Trajectory t = expert_trajectory(scene, geo, pose, 1, a_max, cfg);
    Point2 d = t.delta(0);
    if (d.norm() < 1e-9) d = geo.goal() - position;
    return std::atan2(d.y, d.x);
}

}  // namespace sidp
