#include <gtest/gtest.h>

#include <random>

#include "sidp/checkpoint.hpp"
#include "sidp/policy.hpp"
#include "sidp/sampler.hpp"

using namespace sidp;

namespace {

PolicyConfig small_config(int hidden = 8, int horizon = 2, int rays = 3) {
    PolicyConfig c;
    c.hidden = hidden;
    c.horizon = horizon;
    c.rays = rays;
    c.time_embed = 4;
    return c;
}

DenoiseBatch random_batch(const PolicyConfig& cfg, int n, Rng& rng) {
    DenoiseBatch b;
    b.x_t = detail::gaussian(cfg.action_dim(), n, rng);
    b.eps = detail::gaussian(cfg.action_dim(), n, rng);
    b.obs = detail::gaussian(cfg.obs_dim(), n, rng);
    for (int i = 0; i < n; ++i) {
        b.t.push_back(uniform_int(rng, 1, cfg.diffusion_steps));
        b.weight.push_back(uniform(rng, 0.0, 1.0));
    }
    return b;
}

}  // namespace

TEST(Schedule, CosineInvariants) {
    const auto s = schedule_new(10, ScheduleKind::squared_cosine);
    ASSERT_EQ(s.alpha_bar.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_GT(s.beta[i], 0.0);
        EXPECT_LT(s.beta[i], 1.0);
        if (i > 0) {
            EXPECT_LT(s.alpha_bar[i], s.alpha_bar[i - 1]);
        }
    }
    EXPECT_GT(s.alpha_bar.front(), 0.99);
    EXPECT_LT(s.alpha_bar.back(), 0.05);
}

TEST(Schedule, LinearProductAndErrors) {
    const auto s = schedule_new(10, ScheduleKind::linear, 1e-4, 0.5);
    double prod = 1.0;
    for (int t = 1; t <= 10; ++t) prod *= 1.0 - (1e-4 + (0.5 - 1e-4) * (t - 1) / 9.0);
    EXPECT_NEAR(s.alpha_bar.back(), prod, 1e-15);
    EXPECT_THROW(schedule_new(1, ScheduleKind::squared_cosine), ConfigError);
}

TEST(ForwardNoise, ClosedFormAndMonteCarlo) {
    const auto s = schedule_new(10, ScheduleKind::squared_cosine);
    Eigen::VectorXd x0(4);
    x0 << 0.5, -0.3, 0.9, 0.0;
    EXPECT_TRUE(forward_noise(x0, 3, Eigen::VectorXd::Zero(4), s).isApprox(std::sqrt(s.abar(3)) * x0));
    EXPECT_LT((forward_noise(x0, 1, Eigen::VectorXd::Ones(4), s) - x0).norm(), 0.2);

    Rng rng(17);
    const int n = 10000;
    for (int t : {1, 5, 10}) {
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(4), sq = Eigen::VectorXd::Zero(4);
        for (int i = 0; i < n; ++i) {
            Eigen::VectorXd eps(4);
            for (int k = 0; k < 4; ++k) eps[k] = standard_normal(rng);
            const auto x = forward_noise(x0, t, eps, s);
            sum += x;
            sq += x.cwiseProduct(x);
        }
        const Eigen::VectorXd mean = sum / n;
        const double var_true = 1.0 - s.abar(t);
        for (int k = 0; k < 4; ++k) {
            const double var = sq[k] / n - mean[k] * mean[k];
            EXPECT_LE(std::abs(mean[k] - std::sqrt(s.abar(t)) * x0[k]), 3.0 * std::sqrt(var_true / n));
            EXPECT_NEAR(var, var_true, 0.05 * var_true);
        }
    }
    EXPECT_THROW(forward_noise(x0, 0, x0, s), ContractViolation);
}

TEST(Trajectory, NormalizationRoundTrip) {
    const std::vector<Point2> deltas{{0.1, -0.2}, {0.3, 0.0}, {-0.15, 0.25}};
    const auto t = Trajectory::from_deltas(deltas, 0.3);
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(t.delta(i).x, deltas[static_cast<std::size_t>(i)].x, 1e-15);
        EXPECT_NEAR(t.delta(i).y, deltas[static_cast<std::size_t>(i)].y, 1e-15);
    }
    const auto w = t.waypoints(Pose2{{1.0, 1.0}, std::numbers::pi / 2});
    EXPECT_NEAR(w[0].x, 1.2, 1e-12);
    EXPECT_NEAR(w[0].y, 1.1, 1e-12);
}

TEST(Denoiser, ZeroOutputLayerAndDeterminism) {
    const auto cfg = small_config();
    Rng rng(2);
    auto p = init_denoiser(cfg, rng);
    const auto b = random_batch(cfg, 5, rng);
    const auto out1 = denoiser_forward(p, b.x_t, b.t, b.obs, cfg.time_embed);
    EXPECT_EQ(out1, denoiser_forward(p, b.x_t, b.t, b.obs, cfg.time_embed));
    EXPECT_TRUE(out1.allFinite());

    const std::size_t last = p.offset(p.layers.size() - 1);
    std::fill(p.values.begin() + static_cast<std::ptrdiff_t>(last), p.values.end(), 0.0);
    EXPECT_TRUE(denoiser_forward(p, b.x_t, b.t, b.obs, cfg.time_embed).isZero(0.0));
}

TEST(Denoiser, OutputBoundedByLayerNorms) {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const auto cfg = small_config(6 + trial % 5);
        const auto p = init_denoiser(cfg, rng, 1.0);
        const auto b = random_batch(cfg, 1, rng);
        const Eigen::MatrixXd in = detail::assemble_input(b.x_t, b.t, b.obs, cfg.time_embed);
        // |silu(z)| <= |z|, so ||h_{l+1}|| <= ||W_l|| ||h_l|| + ||b_l|| with the spectral norm
        // bounded by the Frobenius norm.
        double bound = in.norm();
        for (std::size_t l = 0; l < p.layers.size(); ++l) bound = p.weight(l).norm() * bound + p.bias(l).norm();
        EXPECT_LE(denoiser_forward(p, b.x_t, b.t, b.obs, cfg.time_embed).norm(), bound + 1e-12);
    }
}

TEST(DenoiserGrad, MatchesCentralDifferences) {
    Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        const auto cfg = small_config(4 + trial % 4, 1 + trial % 2, 2);
        auto p = init_denoiser(cfg, rng, 1.0);
        for (auto& v : p.values) v += uniform(rng, -0.1, 0.1);
        ASSERT_LE(p.size(), 500u);
        const auto b = random_batch(cfg, 4, rng);
        const auto g = denoiser_grad(p, b, cfg.time_embed);
        std::vector<double> fd(p.size());
        const double h = 1e-4;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double keep = p.values[i];
            p.values[i] = keep + h;
            const double up = denoiser_grad(p, b, cfg.time_embed).loss;
            p.values[i] = keep - h;
            const double down = denoiser_grad(p, b, cfg.time_embed).loss;
            p.values[i] = keep;
            fd[i] = (up - down) / (2 * h);
        }
        const Eigen::Map<const Eigen::VectorXd> a(g.grads.data(), static_cast<Eigen::Index>(g.grads.size()));
        const Eigen::Map<const Eigen::VectorXd> n(fd.data(), static_cast<Eigen::Index>(fd.size()));
        EXPECT_LT((a - n).norm() / std::max(n.norm(), 1e-12), 1e-4) << "trial " << trial;
    }
}

TEST(DenoiserGrad, ZeroWeightsAndUniformMean) {
    const auto cfg = small_config();
    Rng rng(4);
    const auto p = init_denoiser(cfg, rng);
    auto b = random_batch(cfg, 6, rng);
    std::fill(b.weight.begin(), b.weight.end(), 0.0);
    const auto z = denoiser_grad(p, b, cfg.time_embed);
    EXPECT_EQ(z.loss, 0.0);
    EXPECT_TRUE(std::all_of(z.grads.begin(), z.grads.end(), [](double g) { return g == 0.0; }));

    std::fill(b.weight.begin(), b.weight.end(), 1.0 / 6.0);
    const auto out = denoiser_forward(p, b.x_t, b.t, b.obs, cfg.time_embed);
    double mse = 0.0;
    for (int i = 0; i < 6; ++i) mse += (out.col(i) - b.eps.col(i)).squaredNorm();
    EXPECT_NEAR(denoiser_grad(p, b, cfg.time_embed).loss, mse / 6.0, 1e-12);
}

TEST(AdamW, Examples) {
    std::vector<double> p{1.0, -2.0};
    OptimizerState s;
    s.learning_rate = 0.1;
    const std::vector<double> zero{0.0, 0.0};
    adamw_step(p, zero, s);
    EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));

    std::vector<double> q{1.0};
    OptimizerState s1;
    s1.learning_rate = 0.1;
    const std::vector<double> one{1.0};
    adamw_step(q, one, s1);
    EXPECT_LT(q[0], 1.0);

    std::vector<double> x{1.0};
    OptimizerState s2;
    s2.learning_rate = 0.05;
    for (int i = 0; i < 200; ++i) {
        const std::vector<double> g{2.0 * x[0]};
        adamw_step(x, g, s2);
    }
    EXPECT_LT(std::abs(x[0]), 0.01);
}

TEST(Samplers, CallCountsAndDeterminism) {
    const auto cfg = small_config(16, 4, 5);
    const auto policy = Policy::create(cfg, 3);
    Observation obs{std::vector<double>(5, 1.0), {1.0, 0.5}, false};
    for (int steps : {10, 5, 3}) {
        int calls = 0;
        Rng rng(1);
        sample_policy(policy, obs, 2, {SamplerKind::ddim, steps}, rng, &calls);
        EXPECT_EQ(calls, steps);
    }
    int calls = 0;
    Rng r1(5), r2(5), r3(6);
    const auto a = sample_policy(policy, obs, 3, {SamplerKind::ddpm, 10}, r1, &calls);
    EXPECT_EQ(calls, 10);
    EXPECT_EQ(a, sample_policy(policy, obs, 3, {SamplerKind::ddpm, 10}, r2));
    EXPECT_NE(a, sample_policy(policy, obs, 3, {SamplerKind::ddpm, 10}, r3));

    const Eigen::MatrixXd f = obs.features(cfg).replicate(1, 2);
    Rng nr(9);
    const Eigen::MatrixXd noise = detail::gaussian(cfg.action_dim(), 2, nr);
    EXPECT_EQ(sample_ddim(policy.denoiser(), f, policy.schedule, 5, noise).x0,
              sample_ddim(policy.denoiser(), f, policy.schedule, 5, noise).x0);
    EXPECT_THROW(sample_ddpm(policy.denoiser(), f, policy.schedule, 5, cfg.action_dim(), nr), ConfigError);
}

TEST(Samplers, DdpmIsDeterministicGivenSeed) {
    const auto sched = schedule_new(10, ScheduleKind::squared_cosine);
    auto zero = [](const Eigen::MatrixXd& x, int, const Eigen::MatrixXd&) {
        return Eigen::MatrixXd::Zero(x.rows(), x.cols()).eval();
    };
    const Eigen::MatrixXd obs = Eigen::MatrixXd::Zero(3, 1);
    Rng a(11), b(11);
    EXPECT_EQ(sample_ddpm(zero, obs, sched, 10, 4, a).x0, sample_ddpm(zero, obs, sched, 10, 4, b).x0);
}

TEST(Samplers, DdimStrideAndRobustness) {
    EXPECT_EQ(ddim_timesteps(10, 5), (std::vector<int>{10, 8, 6, 4, 2}));
    EXPECT_EQ(ddim_timesteps(10, 3), (std::vector<int>{10, 7, 3}));
    EXPECT_EQ(ddim_timesteps(10, 10).size(), 10u);

    // Toy policy that has learned a fixed action: ε̂ is the exact noise for x0 = c,
    // so any stride recovers c.
    const auto sched = schedule_new(10, ScheduleKind::squared_cosine);
    Eigen::VectorXd c(4);
    c << 0.3, -0.2, 0.5, 0.1;
    auto oracle = [&](const Eigen::MatrixXd& x, int t, const Eigen::MatrixXd&) {
        const double ab = sched.abar(t);
        return ((x.colwise() - std::sqrt(ab) * c) / std::sqrt(1.0 - ab)).eval();
    };
    Rng rng(2);
    const Eigen::MatrixXd noise = detail::gaussian(4, 1, rng);
    const Eigen::MatrixXd obs = Eigen::MatrixXd::Zero(1, 1);
    const auto full = sample_ddim(oracle, obs, sched, 10, noise).x0;
    const auto perturbed = sample_ddim(oracle, obs, sched, std::vector<int>{10, 9, 7, 6, 5, 4, 2, 1}, noise).x0;
    EXPECT_LE((full - perturbed).norm(), 0.05);
    EXPECT_LE((full.col(0) - c).norm(), 1e-9);
}

TEST(Checkpoint, RoundTripsBitExactly) {
    auto cfg = small_config(12);
    auto policy = Policy::create(cfg, 99);
    OptimizerState opt;
    opt.learning_rate = 3e-5;
    std::vector<double> g(policy.params.size(), 0.25);
    g[0] = -1.0 / 3.0;
    adamw_step(policy.params.values, g, opt);

    const std::string bytes = serialize_checkpoint(policy, &opt);
    const auto back = deserialize_checkpoint(bytes);
    EXPECT_EQ(back.policy.params, policy.params);
    EXPECT_EQ(back.policy.schedule.alpha_bar, policy.schedule.alpha_bar);
    ASSERT_TRUE(back.optimizer.has_value());
    EXPECT_EQ(back.optimizer->m, opt.m);
    EXPECT_EQ(back.optimizer->v, opt.v);
    EXPECT_EQ(back.optimizer->step, opt.step);
    EXPECT_EQ(serialize_checkpoint(back.policy, &*back.optimizer), bytes);

    const auto plain = deserialize_checkpoint(serialize_checkpoint(policy));
    EXPECT_FALSE(plain.optimizer.has_value());
    EXPECT_EQ(plain.policy.params, policy.params);
}

TEST(Checkpoint, RejectsCorruption) {
    const auto policy = Policy::create(small_config(), 1);
    std::string bytes = serialize_checkpoint(policy);
    EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), IoError);
    EXPECT_THROW(deserialize_checkpoint(bytes + "x"), IoError);
    std::string bad = bytes;
    bad[0] = 'X';
    EXPECT_THROW(deserialize_checkpoint(bad), IoError);
    bad = bytes;
    bad[8] = 9;
    EXPECT_THROW(deserialize_checkpoint(bad), IoError);
}
