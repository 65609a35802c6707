#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "sidp/eval.hpp"

using namespace sidp;

namespace {

struct FixedPlanner {
    Trajectory traj;
    int calls = 0;
    Trajectory plan(const PlanRequest&, Rng&) {
        ++calls;
        return traj;
    }
};

Scene open_scene() { return Scene("open", 0, 0.15, OccupancyGrid(64, 64, 0.05)); }

Trajectory straight(int steps, double dx) {
    return Trajectory::from_deltas(std::vector<Point2>(static_cast<std::size_t>(steps), Point2{dx, 0.0}), 0.3);
}

/// Cells of side `cell` whose centers lie within `radius` of any segment, counted on a
/// lattice anchored at the origin.
double raster_oracle(const std::vector<std::vector<Point2>>& chains, double radius, double cell) {
    double lo_x = 1e9, lo_y = 1e9, hi_x = -1e9, hi_y = -1e9;
    for (const auto& c : chains)
        for (const auto& p : c) {
            lo_x = std::min(lo_x, p.x);
            lo_y = std::min(lo_y, p.y);
            hi_x = std::max(hi_x, p.x);
            hi_y = std::max(hi_y, p.y);
        }
    const long ix0 = std::lround(std::floor((lo_x - radius) / cell)) - 2;
    const long ix1 = std::lround(std::ceil((hi_x + radius) / cell)) + 2;
    const long iy0 = std::lround(std::floor((lo_y - radius) / cell)) - 2;
    const long iy1 = std::lround(std::ceil((hi_y + radius) / cell)) + 2;
    long count = 0;
    for (long iy = iy0; iy <= iy1; ++iy) {
        for (long ix = ix0; ix <= ix1; ++ix) {
            const double cx = (ix + 0.5) * cell;
            const double cy = (iy + 0.5) * cell;
            bool hit = false;
            for (const auto& c : chains) {
                for (std::size_t k = 0; k < c.size() && !hit; ++k) {
                    const Point2 a = c[k];
                    const Point2 b = k + 1 < c.size() ? c[k + 1] : c[k];
                    const double dx = b.x - a.x, dy = b.y - a.y;
                    const double l2 = dx * dx + dy * dy;
                    const double t = l2 > 0 ? std::clamp(((cx - a.x) * dx + (cy - a.y) * dy) / l2, 0.0, 1.0) : 0.0;
                    hit = std::hypot(cx - a.x - t * dx, cy - a.y - t * dy) <= radius;
                }
                if (hit) break;
            }
            count += hit ? 1 : 0;
        }
    }
    return static_cast<double>(count) * cell * cell;
}

}  // namespace

TEST(ClosedLoop, StartNearGoalSucceedsImmediately) {
    const auto scene = open_scene();
    const Point2 goal{1.6, 1.6};
    const auto geo = scene.geodesic_to(goal);
    FixedPlanner planner{straight(8, 0.3)};
    Rng rng(1);
    const auto r = rollout_closed_loop(planner, scene, Pose2{{1.3, 1.6}, 0.0}, goal, geo, PolicyConfig{},
                                       RolloutConfig{}, rng);
    EXPECT_TRUE(r.success);
    EXPECT_EQ(r.path_length, 0.0);
    EXPECT_EQ(planner.calls, 0);
    EXPECT_EQ(spl_term(r), 1.0);
}

TEST(ClosedLoop, ZeroBudgetFails) {
    const auto scene = open_scene();
    const Point2 goal{2.6, 1.6};
    const Point2 start{0.6, 1.6};
    const auto geo = scene.geodesic_to(goal);
    FixedPlanner planner{straight(8, 0.3)};
    RolloutConfig cfg;
    cfg.budget = 0;
    Rng rng(1);
    const auto r = rollout_closed_loop(planner, scene, Pose2{start, 0.0}, goal, geo, PolicyConfig{}, cfg, rng);
    EXPECT_FALSE(r.success);
    EXPECT_EQ(r.final_dist, distance(start, goal));
}

TEST(ClosedLoop, ExpertReachesGoalNearShortestPath) {
    const auto scene = open_scene();
    Rng rng(4);
    for (int i = 0; i < 10; ++i) {
        const auto sg = sample_start_goal(scene, rng, {1.5, 2.5});
        ExpertPlanner planner;
        const auto r = rollout_closed_loop(planner, scene, Pose2{sg.start, uniform(rng, -3.0, 3.0)}, sg.goal, *sg.geo,
                                           PolicyConfig{}, RolloutConfig{}, rng);
        EXPECT_TRUE(r.success);
        EXPECT_FALSE(r.collided);
        EXPECT_LE(r.path_length, 1.1 * r.shortest);
    }
}

TEST(ClosedLoop, ContactStopsMotionAndEpisodeContinues) {
    OccupancyGrid g(64, 64, 0.05);
    for (int y = 1; y < 63; ++y) g.set(40, y, true);
    const Scene scene("wall", 0, 0.15, g);
    const Point2 goal{1.0, 2.8};
    const auto geo = scene.geodesic_to(goal);
    FixedPlanner planner{straight(8, 0.3)};
    RolloutConfig cfg;
    cfg.budget = 12;
    Rng rng(2);
    const auto r = rollout_closed_loop(planner, scene, Pose2{{1.2, 1.0}, 0.0}, goal, geo, PolicyConfig{}, cfg, rng);
    EXPECT_TRUE(r.collided);
    EXPECT_EQ(r.steps_used, 12);
    for (const auto& p : r.executed) EXPECT_GE(scene.clearance(p), scene.robot_radius - 1e-9);
}

TEST(ClosedLoop, SuccessMonotoneInBudget) {
    std::vector<Scene> scenes{generate_scene(3, SceneConfig{}), generate_scene(4, SceneConfig{})};
    PolicyConfig pc;
    pc.hidden = 16;
    pc.time_embed = 8;
    const auto policy = Policy::create(pc, 9);
    const auto episodes = make_eval_episodes(scenes, 10, {0.5, 1.0}, pc.a_max, 5);
    for (const auto& ep : episodes) {
        bool prev_success = false;
        double prev_length = 0.0;
        for (int budget : {5, 20, 60}) {
            DiffusionPlanner planner{&policy, {SamplerKind::ddim, 5}};
            RolloutConfig cfg;
            cfg.budget = budget;
            Rng rng(17);
            const auto r = rollout_closed_loop(planner, scenes[ep.scene_index], ep.start, ep.goal, *ep.geo, pc, cfg, rng);
            if (prev_success) EXPECT_TRUE(r.success);
            EXPECT_GE(r.path_length, prev_length);
            prev_success = r.success;
            prev_length = r.path_length;
        }
    }
}

TEST(OneShot, CollisionSuccessAndStandstill) {
    OccupancyGrid g(64, 64, 0.05);
    for (int y = 1; y < 44; ++y) g.set(40, y, true);
    const Scene scene("wall", 0, 0.15, g);
    RolloutConfig cfg;
    Rng rng(1);

    const Point2 far_goal{2.6, 1.0};
    const auto geo_far = scene.geodesic_to(far_goal);
    FixedPlanner crash{straight(8, 0.25)};
    const auto c = rollout_one_shot(crash, scene, Pose2{{1.2, 1.0}, 0.0}, far_goal, geo_far, PolicyConfig{}, cfg, rng);
    EXPECT_TRUE(c.collided);
    EXPECT_FALSE(c.success);

    const Point2 goal{1.8, 2.6};
    const auto geo = scene.geodesic_to(goal);
    FixedPlanner arrive{straight(4, 0.2)};
    const auto s = rollout_one_shot(arrive, scene, Pose2{{1.0, 2.6}, 0.0}, goal, geo, PolicyConfig{}, cfg, rng);
    EXPECT_TRUE(s.success);
    EXPECT_FALSE(s.collided);
    EXPECT_LT(s.final_dist, 0.5);

    FixedPlanner idle{straight(8, 0.0)};
    const auto z = rollout_one_shot(idle, scene, Pose2{{1.0, 2.6}, 0.0}, goal, geo, PolicyConfig{}, cfg, rng);
    EXPECT_FALSE(z.success);
    EXPECT_NEAR(z.final_dist, 0.8, 1e-12);
}

TEST(Metrics, SplExampleAndIdentities) {
    EpisodeResult ok;
    ok.success = true;
    ok.shortest = 4.0;
    ok.path_length = 5.0;
    EpisodeResult fail;
    fail.shortest = 3.0;
    fail.path_length = 1.0;
    fail.final_dist = 2.0;
    const std::vector<EpisodeResult> two{ok, fail};
    const auto m = compute_metrics(two);
    EXPECT_DOUBLE_EQ(m.sr, 50.0);
    EXPECT_NEAR(m.spl, 40.0, 1e-12);
    EXPECT_DOUBLE_EQ(m.dtg, 1.0);

    const std::vector<EpisodeResult> fails{fail, fail};
    EXPECT_EQ(compute_metrics(fails).sr, 0.0);
    EXPECT_EQ(compute_metrics(fails).spl, 0.0);

    EpisodeResult exact = ok;
    exact.path_length = 4.0;
    const std::vector<EpisodeResult> perfect{exact, exact, exact};
    EXPECT_EQ(compute_metrics(perfect).spl, 100.0);
    EXPECT_EQ(compute_metrics(perfect).sr, 100.0);

    EXPECT_THROW(compute_metrics(std::vector<EpisodeResult>{}), ContractViolation);
}

TEST(Metrics, SplNeverExceedsSr) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> len(0.0, 5.0);
    std::bernoulli_distribution coin(0.6);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<EpisodeResult> eps(1 + trial % 17);
        for (auto& e : eps) {
            e.success = coin(rng);
            e.collided = coin(rng);
            e.shortest = 0.05 + len(rng);
            e.path_length = len(rng);
            e.final_dist = len(rng);
            const double term = spl_term(e);
            ASSERT_GE(term, 0.0);
            ASSERT_LE(term, 1.0);
        }
        const auto m = compute_metrics(eps);
        EXPECT_LE(m.spl, m.sr + 1e-12);
        EXPECT_GE(m.cr, 0.0);
        EXPECT_LE(m.cr, 100.0);
        EXPECT_GE(m.dtg, 0.0);
    }
}

TEST(SweptArea, StraightCorridorCollapses) {
    std::vector<Point2> line;
    for (int i = 0; i <= 8; ++i) line.push_back({0.3 + 0.125 * i, 0.7});
    const std::vector<std::vector<Point2>> chains(16, line);
    const double capsule = 0.2 * 1.0 + std::numbers::pi * 0.1 * 0.1;
    const double ea = swept_area(chains);
    EXPECT_NEAR(ea, raster_oracle(chains, 0.1, 0.01), 0.1 * capsule);
    EXPECT_NEAR(ea, capsule, 0.1 * capsule);
    EXPECT_EQ(ea, swept_area(std::vector<std::vector<Point2>>{line}));
}

TEST(SweptArea, ZeroLengthIsOneDisc) {
    const std::vector<std::vector<Point2>> chains(16, std::vector<Point2>(9, Point2{1.0, 1.0}));
    const double disc = std::numbers::pi * 0.01;
    const double ea = swept_area(chains);
    EXPECT_NEAR(ea, disc, 0.1 * disc);
    EXPECT_NEAR(ea, raster_oracle(chains, 0.1, 0.01), 0.1 * disc);
}

TEST(SweptArea, UnionIsMonotone) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> step(-0.25, 0.3);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::vector<Point2>> chains(16);
        for (auto& c : chains) {
            Point2 p{1.0, 1.0};
            c.push_back(p);
            for (int h = 0; h < 8; ++h) c.push_back(p = p + Point2{step(rng), step(rng)});
        }
        const double all = swept_area(chains);
        EXPECT_NEAR(all, raster_oracle(chains, 0.1, 0.01), 0.05 * all);
        for (int s = 0; s < 10; ++s) {
            std::vector<std::size_t> idx(16);
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            std::shuffle(idx.begin(), idx.end(), rng);
            std::vector<std::vector<Point2>> half;
            for (int k = 0; k < 8; ++k) half.push_back(chains[idx[static_cast<std::size_t>(k)]]);
            EXPECT_LE(swept_area(half), all);
        }
    }
}

TEST(ExplorationArea, MaskedSamplesFromStart) {
    const auto scene = open_scene();
    FixedPlanner planner{straight(8, 0.125)};
    PolicyConfig pc;
    Rng rng(1);
    std::vector<std::vector<Point2>> chains;
    const double ea = exploration_area(planner, scene, Pose2{{0.5, 1.6}, 0.0}, pc, rng, 16, 0.2, 0.02, &chains);
    EXPECT_EQ(planner.calls, 16);
    EXPECT_EQ(chains.size(), 16u);
    EXPECT_NEAR(ea, 0.2 + std::numbers::pi * 0.01, 0.02);
}

TEST(Latency, CallCountsAndTrialFloor) {
    PolicyConfig pc;
    pc.hidden = 16;
    pc.time_embed = 8;
    const auto policy = Policy::create(pc, 1);
    const std::vector<Observation> fixtures{{std::vector<double>(16, 2.0), {1.0, 0.0}, false}};
    const std::vector<SamplerConfig> samplers{{SamplerKind::ddpm, 10}, {SamplerKind::ddim, 5}, {SamplerKind::ddim, 3}};
    const auto rows = latency_bench(policy, fixtures, samplers, 100, 2);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0].denoiser_calls, 10);
    EXPECT_EQ(rows[1].denoiser_calls, 5);
    EXPECT_EQ(rows[2].denoiser_calls, 3);
    EXPECT_EQ(static_cast<double>(rows[0].denoiser_calls) / rows[1].denoiser_calls, 2.0);
    for (const auto& r : rows) {
        EXPECT_EQ(r.trials, 100);
        EXPECT_GT(r.mean_ms, 0.0);
    }
    EXPECT_THROW(latency_bench(policy, fixtures, samplers, 99), ConfigError);
    EXPECT_THROW(latency_bench(policy, std::vector<Observation>{}, samplers), ContractViolation);
}
