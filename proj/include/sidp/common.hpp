// Shared primitives: error types, planar geometry, seeded random streams.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sidp {

// ── Errors ───────────────────────────────────────────────────────────────────

/// Invalid configuration value (bad sizes, out-of-range knobs, ...).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File system or serialization failure.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Goal lies in occupied (or inflated) space.
class InvalidGoal : public ContractViolation {
public:
    using ContractViolation::ContractViolation;
};

/// Start coincides with the goal, so reward normalisation by d_init is undefined.
class DegenerateEpisode : public ContractViolation {
public:
    using ContractViolation::ContractViolation;
};

/// Rejection sampling gave up.
class SamplingExhausted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ── Geometry ─────────────────────────────────────────────────────────────────

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
    friend bool operator==(Point2 a, Point2 b) = default;

    [[nodiscard]] double norm() const { return std::hypot(x, y); }
    [[nodiscard]] bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline double distance(Point2 a, Point2 b) { return (a - b).norm(); }

inline Point2 rotate(Point2 v, double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

/// Planar pose. The agent frame has +x along `heading`.
struct Pose2 {
    Point2 position;
    double heading = 0.0;

    [[nodiscard]] Point2 to_world(Point2 local) const { return position + rotate(local, heading); }
    [[nodiscard]] Point2 to_local(Point2 world) const { return rotate(world - position, -heading); }
};

/// The robot turns toward its commanded waypoint before driving, even if the
/// drive is then blocked; the heading is kept when the command is a no-op.
inline double heading_toward(const Pose2& pose, Point2 target) {
    const Point2 d = target - pose.position;
    return d.norm() > 1e-9 ? std::atan2(d.y, d.x) : pose.heading;
}

inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

// ── Random streams ───────────────────────────────────────────────────────────

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Seed of a named sub-stream, e.g. stream_seed(seed, "batch", iteration, slot).
/// Every random draw in the project flows from one of these.
template <class... Tags>
std::uint64_t stream_seed(std::uint64_t base, std::string_view name, Tags... tags) {
    std::uint64_t h = splitmix64(base ^ fnv1a(name));
    ((h = splitmix64(h ^ static_cast<std::uint64_t>(tags))), ...);
    return h;
}

template <class... Tags>
Rng make_stream(std::uint64_t base, std::string_view name, Tags... tags) {
    return Rng(stream_seed(base, name, tags...));
}

inline double uniform(Rng& rng, double lo, double hi) {
    if (lo == hi) return lo;
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

}  // namespace sidp
