// Trajectory quality r(s, a) = r_col + r_step + r_prog + r_dock.

#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sidp/policy.hpp"
#include "sidp/scene.hpp"

namespace sidp {

struct RewardConfig {
    double lambda_col = 10.0;
    double lambda_step = 0.5;
    double lambda_prog = 5.0;
    double lambda_dock = 10.0;
    /// Docking region radius, meters.
    double delta_fine = 0.5;
    /// ψ(d) = exp(−k (d / d_init)²)
    double dock_sharpness = 5.0;
    /// Score a colliding trajectory on the prefix that would actually be
    /// driven (up to the contact point) instead of the full plan.
    bool truncate_at_collision = true;

    void validate() const {
        if (!(lambda_col > 0 && lambda_step > 0 && lambda_prog > 0 && lambda_dock > 0)) {
            throw ConfigError("reward weights must be positive");
        }
        if (!(delta_fine > 0.0)) throw ConfigError("delta_fine must be positive");
        if (!(dock_sharpness > 0.0)) throw ConfigError("dock_sharpness must be positive");
    }
};

struct RewardBreakdown {
    double r_col = 0.0;
    double r_step = 0.0;
    double r_prog = 0.0;
    double r_dock = 0.0;
    double total = 0.0;

    // diagnostics
    bool collided = false;
    double path_length = 0.0;
    double d_init = 0.0;
    double d_final = 0.0;
    double progress = 0.0;

    friend bool operator==(const RewardBreakdown&, const RewardBreakdown&) = default;
};

inline double docking_shape(double d, double d_init, double sharpness) {
    const double r = d / d_init;
    return std::exp(-sharpness * r * r);
}

/// d_init is the geodesic start distance; d_t is the Euclidean distance from the
/// final scored point to the goal. With truncate_at_collision the scored chain
/// ends at the contact point, otherwise it is the whole plan.
inline RewardBreakdown evaluate(const Scene& scene, const Pose2& start, Point2 goal, const GeodesicField& geo,
                                const Trajectory& traj, const RewardConfig& cfg) {
    const double d_init = geo.at(start.position);
    if (!std::isfinite(d_init)) throw ContractViolation("start is not reachable from the goal");
    if (!(d_init > 0.0)) throw DegenerateEpisode("start coincides with the goal");

    auto chain = traj.chain(start);
    RewardBreakdown r;
    r.d_init = d_init;
    const auto cc = collision_check(scene.esdf, chain, scene.robot_radius);
    r.collided = cc.hit;
    if (cc.hit && cfg.truncate_at_collision) {
        const std::size_t keep = cc.first_hit_index.value_or(0) + 1;
        chain.resize(keep);
        if (distance(chain.back(), cc.last_safe) > 0.0) chain.push_back(cc.last_safe);
    }

    for (std::size_t i = 0; i + 1 < chain.size(); ++i) r.path_length += distance(chain[i], chain[i + 1]);

    const Point2 final_pt = chain.back();
    r.d_final = distance(final_pt, goal);

    const CellIndex fc = scene.grid.cell_of(final_pt);
    const bool final_blocked = !scene.grid.contains(final_pt) || !scene.grid.in_bounds(fc.ix, fc.iy) ||
                               scene.grid.occupied(fc.ix, fc.iy);
    const double geo_final = final_blocked ? GeodesicField::kUnreachable : geo.at(final_pt);
    r.progress = std::isfinite(geo_final) ? d_init - geo_final
                                          : distance(start.position, goal) - r.d_final;

    r.r_col = r.collided ? -cfg.lambda_col : 0.0;
    r.r_step = -cfg.lambda_step * (r.path_length / d_init);
    r.r_prog = cfg.lambda_prog * r.progress;
    r.r_dock = r.d_final < cfg.delta_fine ? cfg.lambda_dock * docking_shape(r.d_final, d_init, cfg.dock_sharpness)
                                          : 0.0;
    r.total = r.r_col + r.r_step + r.r_prog + r.r_dock;
    return r;
}

struct RewardResult {
    std::optional<RewardBreakdown> value;
    std::string error;

    [[nodiscard]] bool ok() const { return value.has_value(); }
};

inline std::vector<RewardResult> batch_evaluate(const Scene& scene, const Pose2& start, Point2 goal,
                                                const GeodesicField& geo, std::span<const Trajectory> trajs,
                                                const RewardConfig& cfg) {
    std::vector<RewardResult> out;
    out.reserve(trajs.size());
    for (const auto& t : trajs) {
        try {
            out.push_back({evaluate(scene, start, goal, geo, t, cfg), {}});
        } catch (const std::exception& e) {
            out.push_back({std::nullopt, e.what()});
        }
    }
    return out;
}

}  // namespace sidp
