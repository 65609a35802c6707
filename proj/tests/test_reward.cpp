#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "sidp/reward.hpp"

using namespace sidp;

namespace {

Scene open_scene() { return Scene("open", 0, 0.15, OccupancyGrid(64, 64, 0.05)); }

Point2 center(const Scene& s, int ix, int iy) { return s.grid.cell_center(ix, iy); }

Trajectory straight(int steps, double dx, double a_max = 0.3) {
    return Trajectory::from_deltas(std::vector<Point2>(static_cast<std::size_t>(steps), Point2{dx, 0.0}), a_max);
}

}  // namespace

TEST(Reward, CollisionCostsLambdaCol) {
    OccupancyGrid g(64, 64, 0.05);
    for (int y = 1; y < 63; ++y) g.set(40, y, true);
    const Scene scene("wall", 0, 0.15, g);
    const Pose2 start{center(scene, 20, 32), 0.0};
    const Point2 goal = center(scene, 30, 32);
    const auto geo = scene.geodesic_to(goal);
    const auto r = evaluate(scene, start, goal, geo, straight(8, 0.2), RewardConfig{});
    EXPECT_TRUE(r.collided);
    EXPECT_EQ(r.r_col, -10.0);
    EXPECT_EQ(r.total, r.r_col + r.r_step + r.r_prog + r.r_dock);
    EXPECT_LE(r.total, (r.total - r.r_col) - 10.0);
}

TEST(Reward, EndingAtGoalDocksFully) {
    const auto scene = open_scene();
    const Pose2 start{center(scene, 20, 32), 0.0};
    const Point2 goal = center(scene, 52, 32);
    const auto geo = scene.geodesic_to(goal);
    const auto r = evaluate(scene, start, goal, geo, straight(8, 0.2), RewardConfig{});
    EXPECT_FALSE(r.collided);
    EXPECT_NEAR(r.d_final, 0.0, 1e-12);
    EXPECT_NEAR(r.r_dock, 10.0, 1e-9);
    EXPECT_NEAR(r.d_init, 1.6, 1e-12);
    EXPECT_NEAR(r.path_length, r.d_init, 1e-12);
    EXPECT_NEAR(r.r_step, -0.5, 1e-12);
}

TEST(Reward, ProgressOfOneMetre) {
    const auto scene = open_scene();
    const Pose2 start{center(scene, 10, 32), 0.0};
    const Point2 goal = center(scene, 50, 32);
    const auto geo = scene.geodesic_to(goal);
    ASSERT_NEAR(geo.at(start.position), 2.0, 1e-12);
    const auto r = evaluate(scene, start, goal, geo, straight(5, 0.2), RewardConfig{});
    EXPECT_NEAR(geo.at(center(scene, 30, 32)), 1.0, 1e-12);
    EXPECT_NEAR(r.progress, 1.0, 1e-12);
    EXPECT_NEAR(r.r_prog, 5.0, 1e-11);
    EXPECT_EQ(r.r_dock, 0.0);
}

TEST(Reward, DockingShapeAtHalfInitialDistance) {
    const auto scene = open_scene();
    const Pose2 start{center(scene, 20, 32), 0.0};
    const Point2 goal = center(scene, 36, 32);
    const auto geo = scene.geodesic_to(goal);
    const auto r = evaluate(scene, start, goal, geo, straight(2, 0.2), RewardConfig{});
    ASSERT_NEAR(r.d_init, 0.8, 1e-12);
    ASSERT_NEAR(r.d_final, 0.4, 1e-12);
    EXPECT_NEAR(r.r_dock, 10.0 * std::exp(-1.25), 1e-10);
    EXPECT_NEAR(docking_shape(0.5, 1.0, 5.0), 0.28650479686019, 1e-12);
}

TEST(Reward, TruncationOnlyChangesColliders) {
    OccupancyGrid g(64, 64, 0.05);
    for (int y = 1; y < 63; ++y) g.set(40, y, true);
    const Scene scene("wall", 0, 0.15, g);
    const Pose2 start{center(scene, 20, 32), 0.0};
    const Point2 goal = center(scene, 30, 32);
    const auto geo = scene.geodesic_to(goal);
    RewardConfig full;
    full.truncate_at_collision = false;
    const auto a = evaluate(scene, start, goal, geo, straight(8, 0.2), RewardConfig{});
    const auto b = evaluate(scene, start, goal, geo, straight(8, 0.2), full);
    EXPECT_EQ(a.r_col, b.r_col);
    EXPECT_NEAR(b.path_length, 1.6, 1e-12);
    EXPECT_LT(a.path_length, b.path_length);

    const auto free_a = evaluate(scene, start, goal, geo, straight(2, 0.2), RewardConfig{});
    const auto free_b = evaluate(scene, start, goal, geo, straight(2, 0.2), full);
    EXPECT_EQ(free_a, free_b);
}

TEST(Reward, LeavingTheMapCountsAsCollision) {
    const auto scene = open_scene();
    const Pose2 start{center(scene, 58, 32), 0.0};
    const Point2 goal = center(scene, 40, 32);
    const auto geo = scene.geodesic_to(goal);
    RewardConfig cfg;
    cfg.truncate_at_collision = false;
    const auto r = evaluate(scene, start, goal, geo, straight(8, 0.3), cfg);
    EXPECT_TRUE(r.collided);
    EXPECT_TRUE(std::isfinite(r.r_prog));
}

TEST(Reward, StartAtGoalIsDegenerate) {
    const auto scene = open_scene();
    const Point2 goal = center(scene, 30, 30);
    const auto geo = scene.geodesic_to(goal);
    EXPECT_THROW(evaluate(scene, Pose2{goal, 0.0}, goal, geo, straight(2, 0.1), RewardConfig{}), DegenerateEpisode);
}

TEST(Reward, PropertiesOnRandomTrajectories) {
    std::mt19937_64 rng(21);
    Scene scene("rand", 0, 0.15, oracle::random_grid(rng, 64, 64, 0.05, 0.04));
    Rng srng(3);
    const RewardConfig cfg;
    int checked = 0;
    for (int ep = 0; ep < 20; ++ep) {
        const auto sg = sample_start_goal(scene, srng, {0.5, 2.5});
        for (int i = 0; i < 50; ++i) {
            Eigen::VectorXd v(16);
            for (int k = 0; k < 16; ++k) v[k] = uniform(srng, -1.0, 1.0);
            const Pose2 start{sg.start, uniform(srng, -3.0, 3.0)};
            const auto t = Trajectory::from_normalized(v, 0.3);
            const auto r = evaluate(scene, start, sg.goal, *sg.geo, t, cfg);
            ASSERT_EQ(r, evaluate(scene, start, sg.goal, *sg.geo, t, cfg));
            EXPECT_EQ(r.total, r.r_col + r.r_step + r.r_prog + r.r_dock);
            EXPECT_TRUE(r.r_col == 0.0 || r.r_col == -cfg.lambda_col);
            EXPECT_LE(r.r_step, 0.0);
            EXPECT_LE(r.progress, r.d_init + 1e-12);
            EXPECT_LE(r.r_prog, cfg.lambda_prog * r.d_init + 1e-12);
            if (r.d_final >= cfg.delta_fine) {
                EXPECT_EQ(r.r_dock, 0.0);
            } else {
                EXPECT_GT(r.r_dock, 0.0);
                EXPECT_LE(r.r_dock, cfg.lambda_dock);
            }
            ++checked;
        }
    }
    EXPECT_EQ(checked, 1000);
}

TEST(BatchEvaluate, OrderPreservingWithFailureMarkers) {
    const auto scene = open_scene();
    const Pose2 start{center(scene, 20, 32), 0.0};
    const Point2 goal = center(scene, 40, 32);
    const auto geo = scene.geodesic_to(goal);
    const RewardConfig cfg;
    EXPECT_TRUE(batch_evaluate(scene, start, goal, geo, std::vector<Trajectory>{}, cfg).empty());

    const std::vector<Trajectory> trajs{straight(3, 0.1), straight(3, 0.25), straight(3, 0.1), straight(3, -0.2)};
    const auto out = batch_evaluate(scene, start, goal, geo, trajs, cfg);
    ASSERT_EQ(out.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
        ASSERT_TRUE(out[i].ok());
        EXPECT_EQ(*out[i].value, evaluate(scene, start, goal, geo, trajs[i], cfg));
    }
    EXPECT_EQ(*out[0].value, *out[2].value);

    std::vector<Trajectory> rev(trajs.rbegin(), trajs.rend());
    const auto back = batch_evaluate(scene, start, goal, geo, rev, cfg);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(*back[i].value, *out[3 - i].value);

    const auto bad = batch_evaluate(scene, Pose2{goal, 0.0}, goal, geo, trajs, cfg);
    for (const auto& r : bad) {
        EXPECT_FALSE(r.ok());
        EXPECT_FALSE(r.error.empty());
    }
}
