// The diffusion trajectory policy: noise schedule, action/observation types,
// the fully connected ε-prediction network with its analytic gradient, and AdamW.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "sidp/common.hpp"

namespace sidp {

enum class ScheduleKind { linear, squared_cosine };

inline std::string to_string(ScheduleKind k) { return k == ScheduleKind::linear ? "linear" : "squared_cosine"; }

inline ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "linear") return ScheduleKind::linear;
    if (s == "squared_cosine") return ScheduleKind::squared_cosine;
    throw ConfigError("unknown schedule kind: " + s);
}

struct PolicyConfig {
    int horizon = 8;
    double a_max = 0.3;
    int rays = 16;
    double fov_deg = 240.0;
    double max_range = 3.0;
    /// Goal vectors are divided by this before entering the network.
    double goal_scale = 3.0;
    int hidden = 128;
    int hidden_layers = 2;
    int time_embed = 32;
    int diffusion_steps = 10;
    ScheduleKind schedule = ScheduleKind::squared_cosine;
    double beta_start = 1e-4;
    double beta_end = 0.5;

    [[nodiscard]] int action_dim() const { return 2 * horizon; }
    [[nodiscard]] int obs_dim() const { return rays + 3; }
    [[nodiscard]] int input_dim() const { return action_dim() + time_embed + obs_dim(); }

    void validate() const {
        if (horizon < 1) throw ConfigError("horizon must be >= 1");
        if (!(a_max > 0.0)) throw ConfigError("a_max must be positive");
        if (rays < 1) throw ConfigError("rays must be >= 1");
        if (!(max_range > 0.0) || !(goal_scale > 0.0)) throw ConfigError("ranges must be positive");
        if (hidden < 1 || hidden_layers < 1) throw ConfigError("network must have hidden units");
        if (time_embed < 2 || time_embed % 2 != 0) throw ConfigError("time_embed must be even and >= 2");
    }
};

// ── Schedule ─────────────────────────────────────────────────────────────────

/// Timesteps are 1-based: beta[t-1] is β_t.
struct DiffusionSchedule {
    ScheduleKind kind = ScheduleKind::squared_cosine;
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;

    [[nodiscard]] int steps() const { return static_cast<int>(beta.size()); }
    [[nodiscard]] double abar(int t) const { return t == 0 ? 1.0 : alpha_bar[static_cast<std::size_t>(t - 1)]; }
};

namespace detail {

inline void check_schedule(const DiffusionSchedule& s) {
    for (std::size_t i = 0; i < s.beta.size(); ++i) {
        if (!(s.beta[i] > 0.0 && s.beta[i] < 1.0)) throw ConfigError("schedule beta outside (0, 1)");
        if (i > 0 && !(s.alpha_bar[i] < s.alpha_bar[i - 1])) throw ConfigError("alpha_bar not strictly decreasing");
    }
    if (!(s.alpha_bar.front() > 0.99)) throw ConfigError("schedule: alpha_bar_1 must exceed 0.99");
    if (!(s.alpha_bar.back() < 0.05)) throw ConfigError("schedule: alpha_bar_T must be below 0.05");
}

}  // namespace detail

/// Builds a T-step schedule. The squared-cosine curve is evaluated on the time
/// grid (t/T)^p, with p ≥ 1 picked so that alpha_bar_1 = 0.995 for small T.
inline DiffusionSchedule schedule_new(int T, ScheduleKind kind, double beta_start = 1e-4, double beta_end = 0.5) {
    if (T < 2 || T > 1000) throw ConfigError("diffusion steps must lie in [2, 1000]");
    DiffusionSchedule s;
    s.kind = kind;
    s.beta.resize(static_cast<std::size_t>(T));
    if (kind == ScheduleKind::linear) {
        if (!(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end)) {
            throw ConfigError("linear schedule needs 0 < beta_start <= beta_end < 1");
        }
        for (int t = 1; t <= T; ++t) {
            s.beta[static_cast<std::size_t>(t - 1)] = beta_start + (beta_end - beta_start) * (t - 1) / (T - 1.0);
        }
    } else {
        constexpr double kOffset = 0.008;
        constexpr double kMaxBeta = 0.999;
        auto curve = [](double u) {
            const double c = std::cos((u + kOffset) / (1.0 + kOffset) * std::numbers::pi / 2.0);
            return c * c;
        };
        const double f0 = curve(0.0);
        // first grid point where the curve reaches 0.995
        const double angle = std::acos(std::sqrt(0.995 * f0));
        const double u1 = angle / (std::numbers::pi / 2.0) * (1.0 + kOffset) - kOffset;
        const double p = std::max(1.0, std::log(u1) / std::log(1.0 / T));
        double prev = 1.0;
        for (int t = 1; t <= T; ++t) {
            const double ab = curve(std::pow(static_cast<double>(t) / T, p)) / f0;
            s.beta[static_cast<std::size_t>(t - 1)] = std::clamp(1.0 - ab / prev, 1e-8, kMaxBeta);
            prev = ab;
        }
    }
    s.alpha.resize(s.beta.size());
    s.alpha_bar.resize(s.beta.size());
    double prod = 1.0;
    for (std::size_t i = 0; i < s.beta.size(); ++i) {
        s.alpha[i] = 1.0 - s.beta[i];
        prod *= s.alpha[i];
        s.alpha_bar[i] = prod;
    }
    detail::check_schedule(s);
    return s;
}

inline DiffusionSchedule schedule_new(const PolicyConfig& cfg) {
    return schedule_new(cfg.diffusion_steps, cfg.schedule, cfg.beta_start, cfg.beta_end);
}

/// x_t = sqrt(abar_t) x0 + sqrt(1 − abar_t) ε
inline Eigen::VectorXd forward_noise(const Eigen::VectorXd& x0, int t, const Eigen::VectorXd& eps,
                                     const DiffusionSchedule& sched) {
    if (t < 1 || t > sched.steps()) throw ContractViolation("timestep outside [1, T]");
    if (x0.size() != eps.size()) throw ContractViolation("forward_noise: shape mismatch");
    const double ab = sched.abar(t);
    return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

// ── Actions and observations ────────────────────────────────────────────────

/// H relative waypoint displacements in the agent frame. Stored in normalized
/// units (multiples of a_max, each component in [−1, 1]); diffusion operates
/// directly on this representation.
class Trajectory {
public:
    Trajectory() = default;

    static Trajectory from_normalized(const Eigen::VectorXd& v, double a_max) {
        if (v.size() % 2 != 0) throw ContractViolation("trajectory vector must have even length");
        Trajectory t;
        t.a_max_ = a_max;
        t.normalized_ = v.unaryExpr([](double x) { return std::isfinite(x) ? std::clamp(x, -1.0, 1.0) : 0.0; });
        return t;
    }

    static Trajectory from_deltas(std::span<const Point2> deltas, double a_max) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(2 * deltas.size()));
        for (std::size_t i = 0; i < deltas.size(); ++i) {
            v[static_cast<Eigen::Index>(2 * i)] = deltas[i].x / a_max;
            v[static_cast<Eigen::Index>(2 * i + 1)] = deltas[i].y / a_max;
        }
        return from_normalized(v, a_max);
    }

    [[nodiscard]] int horizon() const { return static_cast<int>(normalized_.size() / 2); }
    [[nodiscard]] double a_max() const { return a_max_; }
    [[nodiscard]] const Eigen::VectorXd& normalized() const { return normalized_; }

    [[nodiscard]] Point2 delta(int i) const {
        return {normalized_[2 * i] * a_max_, normalized_[2 * i + 1] * a_max_};
    }

    /// Absolute waypoints (start excluded) by cumulative sum from `pose`.
    [[nodiscard]] std::vector<Point2> waypoints(const Pose2& pose) const {
        std::vector<Point2> out;
        out.reserve(static_cast<std::size_t>(horizon()));
        Point2 local{};
        for (int i = 0; i < horizon(); ++i) {
            local = local + delta(i);
            out.push_back(pose.to_world(local));
        }
        return out;
    }

    /// Start pose position followed by every waypoint.
    [[nodiscard]] std::vector<Point2> chain(const Pose2& pose) const {
        auto w = waypoints(pose);
        w.insert(w.begin(), pose.position);
        return w;
    }

    friend bool operator==(const Trajectory& a, const Trajectory& b) {
        return a.a_max_ == b.a_max_ && a.normalized_.size() == b.normalized_.size() && a.normalized_ == b.normalized_;
    }

private:
    double a_max_ = 1.0;
    Eigen::VectorXd normalized_;
};

struct Observation {
    std::vector<double> rays;
    /// Goal in the agent frame, meters. Zero when goal_mask is set.
    Point2 goal_vec;
    bool goal_mask = false;

    /// Network-ready features: rays/max_range, goal/goal_scale, mask flag.
    [[nodiscard]] Eigen::VectorXd features(const PolicyConfig& cfg) const {
        if (static_cast<int>(rays.size()) != cfg.rays) throw ContractViolation("observation ray count mismatch");
        Eigen::VectorXd f(cfg.obs_dim());
        for (int i = 0; i < cfg.rays; ++i) f[i] = rays[static_cast<std::size_t>(i)] / cfg.max_range;
        f[cfg.rays] = goal_mask ? 0.0 : goal_vec.x / cfg.goal_scale;
        f[cfg.rays + 1] = goal_mask ? 0.0 : goal_vec.y / cfg.goal_scale;
        f[cfg.rays + 2] = goal_mask ? 1.0 : 0.0;
        return f;
    }
};

// ── Denoiser network ─────────────────────────────────────────────────────────

struct LayerShape {
    int in = 0;
    int out = 0;
    [[nodiscard]] std::size_t count() const { return static_cast<std::size_t>(in + 1) * static_cast<std::size_t>(out); }
};

/// Flat parameter vector of an MLP: per layer, an out×in column-major weight
/// block followed by `out` biases. Hidden layers use SiLU, the output is linear.
struct DenoiserParams {
    std::vector<LayerShape> layers;
    std::vector<double> values;

    [[nodiscard]] std::size_t size() const { return values.size(); }

    [[nodiscard]] std::size_t offset(std::size_t layer) const {
        std::size_t off = 0;
        for (std::size_t i = 0; i < layer; ++i) off += layers[i].count();
        return off;
    }
    [[nodiscard]] Eigen::Map<const Eigen::MatrixXd> weight(std::size_t l) const {
        return {values.data() + offset(l), layers[l].out, layers[l].in};
    }
    [[nodiscard]] Eigen::Map<const Eigen::VectorXd> bias(std::size_t l) const {
        return {values.data() + offset(l) + static_cast<std::size_t>(layers[l].out) * layers[l].in, layers[l].out};
    }
    [[nodiscard]] bool finite() const {
        return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
    }
    friend bool operator==(const DenoiserParams& a, const DenoiserParams& b) {
        if (a.layers.size() != b.layers.size() || a.values != b.values) return false;
        for (std::size_t i = 0; i < a.layers.size(); ++i)
            if (a.layers[i].in != b.layers[i].in || a.layers[i].out != b.layers[i].out) return false;
        return true;
    }
};

inline std::vector<LayerShape> denoiser_layout(const PolicyConfig& cfg) {
    std::vector<LayerShape> layers;
    int in = cfg.input_dim();
    for (int i = 0; i < cfg.hidden_layers; ++i) {
        layers.push_back({in, cfg.hidden});
        in = cfg.hidden;
    }
    layers.push_back({in, cfg.action_dim()});
    return layers;
}

/// He-style uniform init; the output layer is scaled down by `output_scale`.
inline DenoiserParams init_denoiser(const PolicyConfig& cfg, Rng& rng, double output_scale = 0.1) {
    cfg.validate();
    DenoiserParams p;
    p.layers = denoiser_layout(cfg);
    std::size_t total = 0;
    for (const auto& l : p.layers) total += l.count();
    p.values.assign(total, 0.0);
    std::size_t off = 0;
    for (std::size_t li = 0; li < p.layers.size(); ++li) {
        const auto& l = p.layers[li];
        const double bound = std::sqrt(6.0 / l.in) * (li + 1 == p.layers.size() ? output_scale : 1.0);
        const std::size_t nw = static_cast<std::size_t>(l.in) * l.out;
        for (std::size_t i = 0; i < nw; ++i) p.values[off + i] = uniform(rng, -bound, bound);
        off += l.count();
    }
    return p;
}

inline Eigen::VectorXd time_embedding(int t, int dim) {
    Eigen::VectorXd e(dim);
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::pow(10000.0, -static_cast<double>(i) / half);
        e[i] = std::sin(t * freq);
        e[half + i] = std::cos(t * freq);
    }
    return e;
}

namespace detail {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
inline double silu(double z) { return z * sigmoid(z); }
inline double silu_grad(double z) {
    const double s = sigmoid(z);
    return s * (1.0 + z * (1.0 - s));
}

/// Stacks [x_t; time embedding; observation features] column-wise.
inline Eigen::MatrixXd assemble_input(const Eigen::MatrixXd& x_t, std::span<const int> t, const Eigen::MatrixXd& obs,
                                      int time_embed) {
    const Eigen::Index batch = x_t.cols();
    if (obs.cols() != batch || static_cast<Eigen::Index>(t.size()) != batch) {
        throw ContractViolation("denoiser input batch mismatch");
    }
    Eigen::MatrixXd in(x_t.rows() + time_embed + obs.rows(), batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
        in.block(0, b, x_t.rows(), 1) = x_t.col(b);
        in.block(x_t.rows(), b, time_embed, 1) = time_embedding(t[static_cast<std::size_t>(b)], time_embed);
        in.block(x_t.rows() + time_embed, b, obs.rows(), 1) = obs.col(b);
    }
    return in;
}

struct ForwardCache {
    std::vector<Eigen::MatrixXd> pre;   // pre-activations of hidden layers
    std::vector<Eigen::MatrixXd> act;   // act[0] = input, act[i+1] = silu(pre[i])
    Eigen::MatrixXd out;
};

inline ForwardCache forward(const DenoiserParams& p, Eigen::MatrixXd input) {
    if (p.layers.empty() || input.rows() != p.layers.front().in) throw ContractViolation("denoiser input size mismatch");
    ForwardCache c;
    c.act.push_back(std::move(input));
    for (std::size_t l = 0; l + 1 < p.layers.size(); ++l) {
        Eigen::MatrixXd z = p.weight(l) * c.act.back();
        z.colwise() += p.bias(l);
        c.act.push_back(z.unaryExpr([](double v) { return silu(v); }));
        c.pre.push_back(std::move(z));
    }
    const std::size_t last = p.layers.size() - 1;
    c.out = p.weight(last) * c.act.back();
    c.out.colwise() += p.bias(last);
    return c;
}

}  // namespace detail

/// Batched ε̂ prediction. Columns of x_t / obs are samples.
inline Eigen::MatrixXd denoiser_forward(const DenoiserParams& p, const Eigen::MatrixXd& x_t, std::span<const int> t,
                                        const Eigen::MatrixXd& obs, int time_embed) {
    if (x_t.rows() != p.layers.back().out) throw ContractViolation("denoiser action size mismatch");
    return detail::forward(p, detail::assemble_input(x_t, t, obs, time_embed)).out;
}

inline Eigen::VectorXd denoiser_forward(const DenoiserParams& p, const Eigen::VectorXd& x_t, int t,
                                        const Eigen::VectorXd& obs, int time_embed) {
    const int ts[1] = {t};
    return denoiser_forward(p, Eigen::MatrixXd(x_t), ts, Eigen::MatrixXd(obs), time_embed).col(0);
}

/// One minibatch for the weighted denoising loss Σ_i w_i ‖ε_i − ε̂_i‖².
struct DenoiseBatch {
    Eigen::MatrixXd x_t;
    std::vector<int> t;
    Eigen::MatrixXd obs;
    Eigen::MatrixXd eps;
    std::vector<double> weight;

    [[nodiscard]] Eigen::Index size() const { return x_t.cols(); }
};

struct LossAndGrad {
    double loss = 0.0;
    std::vector<double> grads;
};

inline LossAndGrad denoiser_grad(const DenoiserParams& p, const DenoiseBatch& batch, int time_embed) {
    const Eigen::Index n = batch.size();
    if (batch.eps.cols() != n || batch.eps.rows() != batch.x_t.rows() ||
        static_cast<Eigen::Index>(batch.weight.size()) != n) {
        throw ContractViolation("denoise batch shape mismatch");
    }
    for (double w : batch.weight)
        if (!(w >= 0.0)) throw ContractViolation("loss weights must be non-negative");

    LossAndGrad out;
    out.grads.assign(p.size(), 0.0);
    if (n == 0) return out;

    auto cache = detail::forward(p, detail::assemble_input(batch.x_t, batch.t, batch.obs, time_embed));
    Eigen::MatrixXd diff = cache.out - batch.eps;
    Eigen::Map<const Eigen::VectorXd> w(batch.weight.data(), n);
    out.loss = (diff.colwise().squaredNorm().transpose().array() * w.array()).sum();

    // dL/d(out) = 2 w_i (ε̂_i − ε_i)
    Eigen::MatrixXd delta = 2.0 * diff * w.asDiagonal();
    for (std::size_t l = p.layers.size(); l-- > 0;) {
        const std::size_t off = p.offset(l);
        const auto& shape = p.layers[l];
        Eigen::Map<Eigen::MatrixXd> gw(out.grads.data() + off, shape.out, shape.in);
        Eigen::Map<Eigen::VectorXd> gb(out.grads.data() + off + static_cast<std::size_t>(shape.out) * shape.in,
                                       shape.out);
        gw.noalias() = delta * cache.act[l].transpose();
        gb = delta.rowwise().sum();
        if (l == 0) break;
        Eigen::MatrixXd back = p.weight(l).transpose() * delta;
        delta = back.array() * cache.pre[l - 1].unaryExpr([](double z) { return detail::silu_grad(z); }).array();
    }
    return out;
}

// ── Optimizer ────────────────────────────────────────────────────────────────

struct OptimizerState {
    double learning_rate = 1e-3;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t step = 0;
    std::vector<double> m;
    std::vector<double> v;
};

/// Adam moments with decoupled weight decay.
inline void adamw_step(std::span<double> params, std::span<const double> grads, OptimizerState& s) {
    if (grads.size() != params.size()) throw ContractViolation("adamw: gradient shape mismatch");
    if (s.m.empty()) {
        s.m.assign(params.size(), 0.0);
        s.v.assign(params.size(), 0.0);
    }
    if (s.m.size() != params.size() || s.v.size() != params.size()) {
        throw ContractViolation("adamw: moment shape mismatch");
    }
    ++s.step;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * grads[i];
        s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * grads[i] * grads[i];
        const double mhat = s.m[i] / c1;
        const double vhat = s.v[i] / c2;
        params[i] -= s.learning_rate * (s.weight_decay * params[i] + mhat / (std::sqrt(vhat) + s.epsilon));
    }
}

// ── Policy bundle ────────────────────────────────────────────────────────────

struct Policy {
    PolicyConfig config;
    DiffusionSchedule schedule;
    DenoiserParams params;

    static Policy create(const PolicyConfig& cfg, std::uint64_t seed) {
        cfg.validate();
        Rng rng = make_stream(seed, "policy-init");
        return Policy{cfg, schedule_new(cfg), init_denoiser(cfg, rng)};
    }

    /// Callable view used by the samplers.
    [[nodiscard]] auto denoiser() const {
        return [this](const Eigen::MatrixXd& x, int t, const Eigen::MatrixXd& obs) {
            std::vector<int> ts(static_cast<std::size_t>(x.cols()), t);
            return denoiser_forward(params, x, ts, obs, config.time_embed);
        };
    }
};

}  // namespace sidp
