// Reverse-diffusion samplers. Both are templated on the denoiser so tests can
// inject analytic or counting stand-ins for the network.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <string>
#include <vector>

#include "sidp/common.hpp"
#include "sidp/policy.hpp"

namespace sidp {

/// ε̂ = d(x_t, t, obs) for a batch of column samples.
template <class D>
concept Denoiser = requires(const D& d, const Eigen::MatrixXd& x, int t, const Eigen::MatrixXd& obs) {
    { d(x, t, obs) } -> std::convertible_to<Eigen::MatrixXd>;
};

enum class SamplerKind { ddpm, ddim };

inline std::string to_string(SamplerKind k) { return k == SamplerKind::ddpm ? "ddpm" : "ddim"; }

inline SamplerKind sampler_kind_from_string(const std::string& s) {
    if (s == "ddpm") return SamplerKind::ddpm;
    if (s == "ddim") return SamplerKind::ddim;
    throw ConfigError("unknown sampler: " + s);
}

struct SamplerConfig {
    SamplerKind kind = SamplerKind::ddim;
    int steps = 5;
};

struct SampleResult {
    /// Normalized actions, one column per sample, clamped to [−1, 1].
    Eigen::MatrixXd x0;
    int denoiser_calls = 0;
};

namespace detail {

inline Eigen::MatrixXd predict_x0(const Eigen::MatrixXd& x_t, const Eigen::MatrixXd& eps_hat, double abar) {
    return ((x_t - std::sqrt(1.0 - abar) * eps_hat) / std::sqrt(abar)).cwiseMax(-1.0).cwiseMin(1.0);
}

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = standard_normal(rng);
    return m;
}

}  // namespace detail

/// Evenly strided descending timesteps t_j = round(j·T/steps), j = steps..1.
inline std::vector<int> ddim_timesteps(int T, int steps) {
    if (steps < 1 || steps > T) throw ConfigError("ddim steps must lie in [1, T]");
    std::vector<int> ts;
    for (int j = steps; j >= 1; --j) ts.push_back(static_cast<int>(std::lround(static_cast<double>(j) * T / steps)));
    return ts;
}

/// Ancestral sampling over all T steps. Noise enters at initialization and at
/// every step except the last; the x0 estimate is clipped to [−1, 1].
template <Denoiser D>
SampleResult sample_ddpm(const D& denoiser, const Eigen::MatrixXd& obs, const DiffusionSchedule& sched, int steps,
                         int action_dim, Rng& rng) {
    if (steps != sched.steps()) throw ConfigError("ddpm steps must equal the schedule length");
    SampleResult r;
    Eigen::MatrixXd x = detail::gaussian(action_dim, obs.cols(), rng);
    for (int t = sched.steps(); t >= 1; --t) {
        const Eigen::MatrixXd eps_hat = denoiser(x, t, obs);
        ++r.denoiser_calls;
        const double abar = sched.abar(t);
        const double abar_prev = sched.abar(t - 1);
        const double beta = sched.beta[static_cast<std::size_t>(t - 1)];
        const Eigen::MatrixXd x0 = detail::predict_x0(x, eps_hat, abar);
        const double c0 = std::sqrt(abar_prev) * beta / (1.0 - abar);
        const double ct = std::sqrt(sched.alpha[static_cast<std::size_t>(t - 1)]) * (1.0 - abar_prev) / (1.0 - abar);
        x = c0 * x0 + ct * x;
        if (t > 1) {
            const double sigma = std::sqrt((1.0 - abar_prev) / (1.0 - abar) * beta);
            x += sigma * detail::gaussian(action_dim, obs.cols(), rng);
        }
    }
    r.x0 = x.cwiseMax(-1.0).cwiseMin(1.0);
    return r;
}

/// DDIM over an explicit descending timestep sequence.
template <Denoiser D>
SampleResult sample_ddim(const D& denoiser, const Eigen::MatrixXd& obs, const DiffusionSchedule& sched,
                         const std::vector<int>& timesteps, const Eigen::MatrixXd& init_noise) {
    if (init_noise.cols() != obs.cols()) throw ContractViolation("ddim: noise/obs batch mismatch");
    for (std::size_t i = 0; i < timesteps.size(); ++i) {
        if (timesteps[i] < 1 || timesteps[i] > sched.steps() || (i > 0 && timesteps[i] >= timesteps[i - 1])) {
            throw ConfigError("ddim timesteps must be strictly descending within [1, T]");
        }
    }
    SampleResult r;
    Eigen::MatrixXd x = init_noise;
    for (std::size_t i = 0; i < timesteps.size(); ++i) {
        const int t = timesteps[i];
        const int t_prev = i + 1 < timesteps.size() ? timesteps[i + 1] : 0;
        const Eigen::MatrixXd eps_hat = denoiser(x, t, obs);
        ++r.denoiser_calls;
        const double abar = sched.abar(t);
        const double abar_prev = sched.abar(t_prev);
        const Eigen::MatrixXd x0 = detail::predict_x0(x, eps_hat, abar);
        x = std::sqrt(abar_prev) * x0 + std::sqrt(1.0 - abar_prev) * eps_hat;
    }
    r.x0 = x.cwiseMax(-1.0).cwiseMin(1.0);
    return r;
}

/// Deterministic strided sampling (η = 0) starting from the given noise.
template <Denoiser D>
SampleResult sample_ddim(const D& denoiser, const Eigen::MatrixXd& obs, const DiffusionSchedule& sched, int steps,
                         const Eigen::MatrixXd& init_noise) {
    return sample_ddim(denoiser, obs, sched, ddim_timesteps(sched.steps(), steps), init_noise);
}

/// Samples `count` trajectories for one observation with the configured sampler.
template <Denoiser D>
SampleResult sample_batch(const D& denoiser, const Eigen::MatrixXd& obs, const DiffusionSchedule& sched,
                          const SamplerConfig& cfg, int action_dim, Rng& rng) {
    if (cfg.kind == SamplerKind::ddpm) return sample_ddpm(denoiser, obs, sched, cfg.steps, action_dim, rng);
    return sample_ddim(denoiser, obs, sched, cfg.steps, detail::gaussian(action_dim, obs.cols(), rng));
}

inline std::vector<Trajectory> to_trajectories(const Eigen::MatrixXd& x0, double a_max) {
    std::vector<Trajectory> out;
    out.reserve(static_cast<std::size_t>(x0.cols()));
    for (Eigen::Index c = 0; c < x0.cols(); ++c) out.push_back(Trajectory::from_normalized(x0.col(c), a_max));
    return out;
}

/// Convenience: trajectories from a policy for `count` copies of one observation.
inline std::vector<Trajectory> sample_policy(const Policy& policy, const Observation& obs, int count,
                                             const SamplerConfig& cfg, Rng& rng, int* calls = nullptr) {
    const Eigen::VectorXd f = obs.features(policy.config);
    const Eigen::MatrixXd batch = f.replicate(1, count);
    const auto r = sample_batch(policy.denoiser(), batch, policy.schedule, cfg, policy.config.action_dim(), rng);
    if (calls != nullptr) *calls += r.denoiser_calls;
    return to_trajectories(r.x0, policy.config.a_max);
}

}  // namespace sidp
