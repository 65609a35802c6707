// Occupancy-grid worlds, Euclidean signed distance fields and geodesic
// distance fields, plus the collision and distance queries built on them.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sidp/common.hpp"

namespace sidp {

struct CellIndex {
    int ix = 0;
    int iy = 0;
    friend bool operator==(CellIndex, CellIndex) = default;
};

/// Row-major binary occupancy. The outermost ring is always occupied.
class OccupancyGrid {
public:
    OccupancyGrid(int width, int height, double resolution)
        : width_(width), height_(height), resolution_(resolution) {
        if (width < 3 || height < 3) throw ConfigError("occupancy grid must be at least 3x3 cells");
        if (!(resolution > 0.0) || !std::isfinite(resolution)) {
            throw ConfigError("occupancy grid resolution must be positive");
        }
        cells_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
        for (int x = 0; x < width; ++x) {
            cells_[index(x, 0)] = 1;
            cells_[index(x, height - 1)] = 1;
        }
        for (int y = 0; y < height; ++y) {
            cells_[index(0, y)] = 1;
            cells_[index(width - 1, y)] = 1;
        }
    }

    [[nodiscard]] int width() const { return width_; }
    [[nodiscard]] int height() const { return height_; }
    [[nodiscard]] double resolution() const { return resolution_; }
    [[nodiscard]] double extent_x() const { return width_ * resolution_; }
    [[nodiscard]] double extent_y() const { return height_ * resolution_; }
    [[nodiscard]] std::size_t size() const { return cells_.size(); }

    [[nodiscard]] std::size_t index(int ix, int iy) const {
        return static_cast<std::size_t>(iy) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(ix);
    }
    [[nodiscard]] bool in_bounds(int ix, int iy) const {
        return ix >= 0 && iy >= 0 && ix < width_ && iy < height_;
    }
    [[nodiscard]] bool is_boundary(int ix, int iy) const {
        return ix == 0 || iy == 0 || ix == width_ - 1 || iy == height_ - 1;
    }
    [[nodiscard]] bool occupied(int ix, int iy) const { return cells_[index(ix, iy)] != 0; }

    /// Boundary cells cannot be freed.
    void set(int ix, int iy, bool occupied) {
        if (!in_bounds(ix, iy)) throw ContractViolation("cell out of bounds");
        if (is_boundary(ix, iy) && !occupied) throw ContractViolation("boundary ring must stay occupied");
        cells_[index(ix, iy)] = occupied ? 1 : 0;
    }

    [[nodiscard]] Point2 cell_center(int ix, int iy) const {
        return {(ix + 0.5) * resolution_, (iy + 0.5) * resolution_};
    }
    [[nodiscard]] CellIndex cell_of(Point2 p) const {
        return {static_cast<int>(std::floor(p.x / resolution_)), static_cast<int>(std::floor(p.y / resolution_))};
    }
    [[nodiscard]] bool contains(Point2 p) const {
        return p.x >= 0.0 && p.y >= 0.0 && p.x <= extent_x() && p.y <= extent_y();
    }

    [[nodiscard]] const std::vector<std::uint8_t>& cells() const { return cells_; }

    [[nodiscard]] std::size_t interior_occupied() const {
        std::size_t n = 0;
        for (int y = 1; y < height_ - 1; ++y)
            for (int x = 1; x < width_ - 1; ++x) n += occupied(x, y) ? 1 : 0;
        return n;
    }

    friend bool operator==(const OccupancyGrid&, const OccupancyGrid&) = default;

private:
    int width_;
    int height_;
    double resolution_;
    std::vector<std::uint8_t> cells_;
};

/// Signed distance in meters between cell centers: positive in free space
/// (distance to the nearest occupied center), negative on occupied cells
/// (minus the distance to the nearest free center), clamped to ±max_dist.
struct Esdf {
    int width = 0;
    int height = 0;
    double resolution = 0.0;
    double max_dist = 0.0;
    std::vector<double> dist;

    [[nodiscard]] double at(int ix, int iy) const {
        return dist[static_cast<std::size_t>(iy) * static_cast<std::size_t>(width) + static_cast<std::size_t>(ix)];
    }
    [[nodiscard]] bool contains(Point2 p) const {
        return p.x >= 0.0 && p.y >= 0.0 && p.x <= width * resolution && p.y <= height * resolution;
    }
};

namespace detail {

// Exact 1D squared Euclidean distance transform (lower envelope of parabolas).
inline void edt_1d(std::span<const double> f, std::span<double> d) {
    const auto n = f.size();
    std::vector<std::size_t> v(n);
    std::vector<double> z(n + 1);
    auto parabola = [&](std::size_t q) { return f[q] + static_cast<double>(q * q); };
    std::size_t k = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (std::size_t q = 1; q < n; ++q) {
        double s = (parabola(q) - parabola(v[k])) / (2.0 * static_cast<double>(q - v[k]));
        while (s <= z[k]) {
            --k;
            s = (parabola(q) - parabola(v[k])) / (2.0 * static_cast<double>(q - v[k]));
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (std::size_t q = 0; q < n; ++q) {
        while (z[k + 1] < static_cast<double>(q)) ++k;
        const double dq = static_cast<double>(q) - static_cast<double>(v[k]);
        d[q] = dq * dq + f[v[k]];
    }
}

// Squared distance (in cells²) from every cell to the nearest site.
// Returns +inf everywhere when there are no sites.
inline std::vector<double> squared_edt(int width, int height, const std::vector<std::uint8_t>& site) {
    constexpr double kFar = 1e20;
    const auto w = static_cast<std::size_t>(width);
    const auto h = static_cast<std::size_t>(height);
    std::vector<double> grid(w * h);
    bool any = false;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid[i] = site[i] ? 0.0 : kFar;
        any = any || site[i];
    }
    if (!any) return std::vector<double>(w * h, std::numeric_limits<double>::infinity());

    std::vector<double> f(std::max(w, h));
    std::vector<double> d(std::max(w, h));
    for (std::size_t x = 0; x < w; ++x) {
        for (std::size_t y = 0; y < h; ++y) f[y] = grid[y * w + x];
        edt_1d(std::span<const double>(f.data(), h), std::span<double>(d.data(), h));
        for (std::size_t y = 0; y < h; ++y) grid[y * w + x] = d[y];
    }
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) f[x] = grid[y * w + x];
        edt_1d(std::span<const double>(f.data(), w), std::span<double>(d.data(), w));
        for (std::size_t x = 0; x < w; ++x) grid[y * w + x] = d[x];
    }
    return grid;
}

}  // namespace detail

inline Esdf build_esdf(const OccupancyGrid& grid, double max_dist) {
    if (!(max_dist > 0.0)) throw ConfigError("esdf max_dist must be positive");
    const auto& occ = grid.cells();
    std::vector<std::uint8_t> free_sites(occ.size());
    for (std::size_t i = 0; i < occ.size(); ++i) free_sites[i] = occ[i] ? 0 : 1;

    const auto to_occupied = detail::squared_edt(grid.width(), grid.height(), occ);
    const auto to_free = detail::squared_edt(grid.width(), grid.height(), free_sites);

    Esdf esdf{grid.width(), grid.height(), grid.resolution(), max_dist, std::vector<double>(occ.size())};
    for (std::size_t i = 0; i < occ.size(); ++i) {
        const double d = occ[i] ? -std::sqrt(to_free[i]) * grid.resolution()
                                : std::sqrt(to_occupied[i]) * grid.resolution();
        esdf.dist[i] = std::clamp(d, -max_dist, max_dist);
    }
    return esdf;
}

/// Bilinear interpolation over the four surrounding cell centers.
/// Points outside the grid read as occupied.
inline double query_esdf(const Esdf& esdf, Point2 p) {
    if (!p.finite() || !esdf.contains(p)) return -esdf.resolution;
    const double u = std::clamp(p.x / esdf.resolution - 0.5, 0.0, esdf.width - 1.0);
    const double v = std::clamp(p.y / esdf.resolution - 0.5, 0.0, esdf.height - 1.0);
    const int i0 = std::min(static_cast<int>(u), esdf.width - 2);
    const int j0 = std::min(static_cast<int>(v), esdf.height - 2);
    const double fu = u - i0;
    const double fv = v - j0;
    const double a = esdf.at(i0, j0) * (1.0 - fu) + esdf.at(i0 + 1, j0) * fu;
    const double b = esdf.at(i0, j0 + 1) * (1.0 - fu) + esdf.at(i0 + 1, j0 + 1) * fu;
    return a * (1.0 - fv) + b * fv;
}

struct CollisionResult {
    bool hit = false;
    /// Segment index (waypoint i → i+1) containing the first colliding sample;
    /// 0 when the very first waypoint collides.
    std::optional<std::size_t> first_hit_index;
    /// Last collision-free sample before the first hit (or the final waypoint).
    Point2 last_safe;
};

/// Samples every segment at spacing ≤ resolution/4, endpoints included.
inline CollisionResult collision_check(const Esdf& esdf, std::span<const Point2> waypoints, double robot_radius) {
    if (waypoints.empty()) throw ContractViolation("collision_check needs at least one waypoint");
    CollisionResult out;
    out.last_safe = waypoints.front();
    if (query_esdf(esdf, waypoints.front()) < robot_radius) {
        out.hit = true;
        out.first_hit_index = 0;
        return out;
    }
    const double spacing = esdf.resolution / 4.0;
    for (std::size_t s = 0; s + 1 < waypoints.size(); ++s) {
        const Point2 a = waypoints[s];
        const Point2 b = waypoints[s + 1];
        const double len = distance(a, b);
        const int n = std::max(1, static_cast<int>(std::ceil(len / spacing)));
        for (int i = 1; i <= n; ++i) {
            const double t = static_cast<double>(i) / n;
            const Point2 q = a + t * (b - a);
            if (query_esdf(esdf, q) < robot_radius) {
                out.hit = true;
                out.first_hit_index = s;
                return out;
            }
            out.last_safe = q;
        }
    }
    return out;
}

struct MotionResult {
    Point2 end;
    double length = 0.0;
    bool hit = false;
    bool reached = false;
};

/// Moves along `path` (path[0] = current position) until contact or until a
/// waypoint lands within `success_radius` of `goal`. Contact stops the agent on
/// the segment at the last sample with clearance ≥ robot_radius + standoff
/// (or where it was), so it does not rest exactly on the contact boundary.
/// Visited points are appended to `trace`.
inline MotionResult execute_motion(const Esdf& esdf, double robot_radius, std::span<const Point2> path, Point2 goal,
                                   double success_radius, std::vector<Point2>* trace = nullptr,
                                   std::optional<double> standoff = std::nullopt) {
    if (path.empty()) throw ContractViolation("execute_motion needs a start point");
    const double margin = standoff.value_or(esdf.resolution / 4.0);
    MotionResult m;
    m.end = path.front();
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        const Point2 seg[2] = {path[i], path[i + 1]};
        const auto cc = collision_check(esdf, seg, robot_radius);
        if (cc.hit) {
            m.hit = true;
            const Point2 a = path[i];
            const Point2 b = cc.last_safe;
            const double len = distance(a, b);
            const int n = std::max(1, static_cast<int>(std::ceil(len / (esdf.resolution / 4.0))));
            Point2 stop = a;
            for (int k = n; k >= 1; --k) {
                const Point2 q = a + (static_cast<double>(k) / n) * (b - a);
                if (query_esdf(esdf, q) >= robot_radius + margin) {
                    stop = q;
                    break;
                }
            }
            m.length += distance(a, stop);
            m.end = stop;
            if (trace != nullptr) trace->push_back(m.end);
            return m;
        }
        m.length += distance(path[i], path[i + 1]);
        m.end = path[i + 1];
        if (trace != nullptr) trace->push_back(m.end);
        if (distance(m.end, goal) < success_radius) {
            m.reached = true;
            return m;
        }
    }
    return m;
}

/// Sphere-traced ray length to the zero level set, capped at max_range.
inline double raycast(const Esdf& esdf, Point2 origin, double angle, double max_range) {
    const Point2 dir{std::cos(angle), std::sin(angle)};
    const double min_step = esdf.resolution / 4.0;
    double s = 0.0;
    while (s < max_range) {
        const double d = query_esdf(esdf, origin + s * dir);
        if (d <= 0.0) return s;
        s += std::max(d, min_step);
    }
    return max_range;
}

// ── Geodesic distance ────────────────────────────────────────────────────────

/// Shortest 8-connected obstacle-avoiding path length from every cell to the goal.
class GeodesicField {
public:
    static constexpr double kUnreachable = std::numeric_limits<double>::infinity();

    GeodesicField(int width, int height, double resolution, Point2 goal, std::vector<double> dist)
        : width_(width), height_(height), resolution_(resolution), goal_(goal), dist_(std::move(dist)) {}

    [[nodiscard]] int width() const { return width_; }
    [[nodiscard]] int height() const { return height_; }
    [[nodiscard]] double resolution() const { return resolution_; }
    [[nodiscard]] Point2 goal() const { return goal_; }
    [[nodiscard]] const std::vector<double>& values() const { return dist_; }

    [[nodiscard]] double at(int ix, int iy) const {
        if (ix < 0 || iy < 0 || ix >= width_ || iy >= height_) return kUnreachable;
        return dist_[static_cast<std::size_t>(iy) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(ix)];
    }
    [[nodiscard]] CellIndex goal_cell() const {
        return {static_cast<int>(std::floor(goal_.x / resolution_)), static_cast<int>(std::floor(goal_.y / resolution_))};
    }

    /// Continuous distance at p: min over the four surrounding cell centers c of
    /// dist(c) + |p − c|, plus a direct |p − goal| term when the goal cell is among them.
    [[nodiscard]] double at(Point2 p) const {
        const double u = p.x / resolution_ - 0.5;
        const double v = p.y / resolution_ - 0.5;
        const int i0 = static_cast<int>(std::floor(u));
        const int j0 = static_cast<int>(std::floor(v));
        const CellIndex gc = goal_cell();
        double best = kUnreachable;
        for (int dj = 0; dj <= 1; ++dj) {
            for (int di = 0; di <= 1; ++di) {
                const int ix = i0 + di;
                const int iy = j0 + dj;
                const double g = at(ix, iy);
                if (!std::isfinite(g)) continue;
                const Point2 c{(ix + 0.5) * resolution_, (iy + 0.5) * resolution_};
                best = std::min(best, g + distance(p, c));
                if (gc == CellIndex{ix, iy}) best = std::min(best, distance(p, goal_));
            }
        }
        return best;
    }

    /// Neighbor cell with the steepest decrease, or nullopt at the goal / a dead end.
    [[nodiscard]] std::optional<CellIndex> descend(CellIndex c) const {
        const double here = at(c.ix, c.iy);
        if (!std::isfinite(here) || here == 0.0) return std::nullopt;
        std::optional<CellIndex> best;
        double best_val = here;
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                if (!step_allowed(c, dx, dy)) continue;
                const double g = at(c.ix + dx, c.iy + dy);
                if (g < best_val) {
                    best_val = g;
                    best = CellIndex{c.ix + dx, c.iy + dy};
                }
            }
        }
        return best;
    }

    /// Diagonal moves may not cut a corner through an unreachable cell.
    [[nodiscard]] bool step_allowed(CellIndex c, int dx, int dy) const {
        if (dx == 0 || dy == 0) return true;
        return std::isfinite(at(c.ix + dx, c.iy)) && std::isfinite(at(c.ix, c.iy + dy));
    }

private:
    int width_;
    int height_;
    double resolution_;
    Point2 goal_;
    std::vector<double> dist_;
};

namespace detail {

template <class Passable>
GeodesicField dijkstra(int width, int height, double resolution, Point2 goal, Passable&& passable) {
    const auto w = static_cast<std::size_t>(width);
    const int gx = static_cast<int>(std::floor(goal.x / resolution));
    const int gy = static_cast<int>(std::floor(goal.y / resolution));
    if (!goal.finite() || gx < 0 || gy < 0 || gx >= width || gy >= height) {
        throw InvalidGoal("goal outside the grid");
    }
    if (!passable(gx, gy)) throw InvalidGoal("goal cell is not free");

    std::vector<double> dist(w * static_cast<std::size_t>(height), GeodesicField::kUnreachable);
    using Entry = std::pair<double, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    const std::size_t start = static_cast<std::size_t>(gy) * w + static_cast<std::size_t>(gx);
    dist[start] = 0.0;
    open.emplace(0.0, start);

    const double diag = std::sqrt(2.0) * resolution;
    while (!open.empty()) {
        const auto [d, idx] = open.top();
        open.pop();
        if (d > dist[idx]) continue;
        const int x = static_cast<int>(idx % w);
        const int y = static_cast<int>(idx / w);
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                const int nx = x + dx;
                const int ny = y + dy;
                if (nx < 0 || ny < 0 || nx >= width || ny >= height || !passable(nx, ny)) continue;
                // no corner cutting
                if (dx != 0 && dy != 0 && (!passable(x + dx, y) || !passable(x, y + dy))) continue;
                const double nd = d + ((dx != 0 && dy != 0) ? diag : resolution);
                const std::size_t nidx = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
                if (nd < dist[nidx]) {
                    dist[nidx] = nd;
                    open.emplace(nd, nidx);
                }
            }
        }
    }
    return GeodesicField(width, height, resolution, goal, std::move(dist));
}

}  // namespace detail

/// Geodesic field over the free cells of `grid`.
inline GeodesicField geodesic_field(const OccupancyGrid& grid, Point2 goal) {
    return detail::dijkstra(grid.width(), grid.height(), grid.resolution(), goal,
                            [&](int x, int y) { return !grid.occupied(x, y); });
}

/// Geodesic field over cells whose ESDF value is at least `clearance`
/// (configuration space of a disc robot of that radius).
inline GeodesicField geodesic_field(const Esdf& esdf, Point2 goal, double clearance) {
    return detail::dijkstra(esdf.width, esdf.height, esdf.resolution, goal,
                            [&](int x, int y) { return esdf.at(x, y) >= clearance; });
}

// ── Scenes ───────────────────────────────────────────────────────────────────

struct SceneConfig {
    int width = 64;
    int height = 64;
    double resolution = 0.05;
    double obstacle_density = 0.12;
    /// Probability that an obstacle is a disc (otherwise an axis-aligned box).
    double obstacle_shape_mix = 0.5;
    double robot_radius = 0.15;
    double esdf_max_dist = 2.0;

    void validate() const {
        if (width < 3 || height < 3) throw ConfigError("scene must be at least 3x3 cells");
        if (!(resolution > 0.0)) throw ConfigError("scene resolution must be positive");
        if (!(obstacle_density >= 0.0 && obstacle_density <= 0.4)) {
            throw ConfigError("obstacle_density must lie in [0, 0.4]");
        }
        if (!(obstacle_shape_mix >= 0.0 && obstacle_shape_mix <= 1.0)) {
            throw ConfigError("obstacle_shape_mix must lie in [0, 1]");
        }
        if (!(robot_radius > 0.0)) throw ConfigError("robot_radius must be positive");
        if (!(esdf_max_dist > 0.0)) throw ConfigError("esdf_max_dist must be positive");
    }

    static SceneConfig large() {
        SceneConfig c;
        c.width = 128;
        c.height = 128;
        return c;
    }
};

struct Scene {
    std::string id;
    std::uint64_t seed = 0;
    double robot_radius = 0.15;
    OccupancyGrid grid;
    Esdf esdf;

    Scene(std::string id_, std::uint64_t seed_, double robot_radius_, OccupancyGrid grid_, double esdf_max_dist = 2.0)
        : id(std::move(id_)), seed(seed_), robot_radius(robot_radius_), grid(std::move(grid_)),
          esdf(build_esdf(grid, esdf_max_dist)) {}

    [[nodiscard]] double clearance(Point2 p) const { return query_esdf(esdf, p); }
    [[nodiscard]] bool safe(Point2 p) const { return clearance(p) >= robot_radius; }

    /// Goal-rooted geodesic field over the robot's configuration space.
    /// Cell usable by the robot's center: clearance at least the radius (plus slack).
    [[nodiscard]] bool passable(int ix, int iy) const {
        return grid.in_bounds(ix, iy) && esdf.at(ix, iy) >= robot_radius + kClearanceSlack;
    }
    [[nodiscard]] bool passable(Point2 p) const {
        const CellIndex c = grid.cell_of(p);
        return grid.contains(p) && passable(c.ix, c.iy);
    }

    /// The small excess keeps interpolated clearance between passable cells at or above the radius.
    [[nodiscard]] GeodesicField geodesic_to(Point2 goal) const {
        return geodesic_field(esdf, goal, robot_radius + kClearanceSlack);
    }

    static constexpr double kClearanceSlack = 1e-9;
};

/// Random boxes and discs until the interior occupied fraction reaches the target density.
inline Scene generate_scene(std::uint64_t seed, const SceneConfig& cfg) {
    cfg.validate();
    OccupancyGrid grid(cfg.width, cfg.height, cfg.resolution);
    Rng rng = make_stream(seed, "scene");
    const auto interior = static_cast<std::size_t>(cfg.width - 2) * static_cast<std::size_t>(cfg.height - 2);
    const auto target = static_cast<std::size_t>(std::llround(cfg.obstacle_density * static_cast<double>(interior)));
    std::size_t filled = 0;
    auto mark = [&](int x, int y) {
        if (x < 1 || y < 1 || x > cfg.width - 2 || y > cfg.height - 2) return;
        if (!grid.occupied(x, y)) {
            grid.set(x, y, true);
            ++filled;
        }
    };
    const int max_extent = std::max(2, std::min(cfg.width, cfg.height) / 8);
    while (filled < target) {
        const int cx = uniform_int(rng, 1, cfg.width - 2);
        const int cy = uniform_int(rng, 1, cfg.height - 2);
        if (uniform(rng, 0.0, 1.0) < cfg.obstacle_shape_mix) {
            const double r = uniform(rng, 1.0, max_extent / 2.0 + 1.0);
            const int ri = static_cast<int>(std::ceil(r));
            for (int dy = -ri; dy <= ri; ++dy)
                for (int dx = -ri; dx <= ri; ++dx)
                    if (dx * dx + dy * dy <= r * r) mark(cx + dx, cy + dy);
        } else {
            const int w = uniform_int(rng, 1, max_extent);
            const int h = uniform_int(rng, 1, max_extent);
            for (int dy = 0; dy < h; ++dy)
                for (int dx = 0; dx < w; ++dx) mark(cx + dx, cy + dy);
        }
    }
    return Scene("scene-" + std::to_string(seed), seed, cfg.robot_radius, std::move(grid), cfg.esdf_max_dist);
}

struct DistanceRange {
    double min = 1.0;
    double max = 2.5;
};

struct StartGoal {
    Point2 start;
    Point2 goal;
    std::shared_ptr<const GeodesicField> geo;
    /// Geodesic start→goal length.
    double geodesic = 0.0;
};

namespace detail {

inline std::vector<CellIndex> safe_cells(const Scene& scene) {
    std::vector<CellIndex> out;
    for (int y = 1; y < scene.grid.height() - 1; ++y)
        for (int x = 1; x < scene.grid.width() - 1; ++x)
            if (scene.passable(x, y)) out.push_back({x, y});
    return out;
}

inline std::optional<Point2> sample_safe_point(const Scene& scene, const std::vector<CellIndex>& cells, Rng& rng) {
    if (cells.empty()) return std::nullopt;
    const double res = scene.grid.resolution();
    for (int attempt = 0; attempt < 8; ++attempt) {
        const CellIndex c = cells[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(cells.size()) - 1))];
        const Point2 p = scene.grid.cell_center(c.ix, c.iy) + Point2{uniform(rng, -0.5, 0.5) * res,
                                                                     uniform(rng, -0.5, 0.5) * res};
        if (scene.safe(p) && scene.passable(p)) return p;
    }
    return std::nullopt;
}

}  // namespace detail

/// Start/goal pair with both ends at least robot_radius from obstacles and a
/// geodesic separation inside `range`.
inline StartGoal sample_start_goal(const Scene& scene, Rng& rng, DistanceRange range, int max_goals = 64,
                                   int starts_per_goal = 16) {
    if (!(range.min >= 0.0 && range.max >= range.min)) throw ConfigError("invalid distance range");
    const auto cells = detail::safe_cells(scene);
    if (cells.empty()) throw SamplingExhausted("scene " + scene.id + " has no free space for the robot");
    for (int g = 0; g < max_goals; ++g) {
        const auto goal = detail::sample_safe_point(scene, cells, rng);
        if (!goal) continue;
        auto geo = std::make_shared<const GeodesicField>(scene.geodesic_to(*goal));
        for (int s = 0; s < starts_per_goal; ++s) {
            const auto start = detail::sample_safe_point(scene, cells, rng);
            if (!start) continue;
            const double d = geo->at(*start);
            if (std::isfinite(d) && d >= range.min && d <= range.max && d > 0.0) {
                return StartGoal{*start, *goal, geo, d};
            }
        }
    }
    throw SamplingExhausted("no start/goal pair in range for scene " + scene.id);
}

}  // namespace sidp
