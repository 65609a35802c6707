#pragma once

#include <vector>

#include "sidp/policy.hpp"
#include "sidp/scene.hpp"

namespace sidp {

/// Egocentric raycasts evenly spread over the field of view plus the relative goal.
/// With `goal_masked`, the goal vector is zeroed and the mask flag set.
inline Observation make_observation(const Scene& scene, const Pose2& pose, Point2 goal, bool goal_masked,
                                    const PolicyConfig& cfg) {
    Observation obs;
    obs.rays.resize(static_cast<std::size_t>(cfg.rays));
    const double fov = deg2rad(cfg.fov_deg);
    for (int i = 0; i < cfg.rays; ++i) {
        const double rel = cfg.rays == 1 ? 0.0 : -fov / 2.0 + fov * i / (cfg.rays - 1);
        obs.rays[static_cast<std::size_t>(i)] = raycast(scene.esdf, pose.position, pose.heading + rel, cfg.max_range);
    }
    obs.goal_mask = goal_masked;
    obs.goal_vec = goal_masked ? Point2{} : pose.to_local(goal);
    return obs;
}

}  // namespace sidp
