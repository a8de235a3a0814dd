#include "mfd/synthcfd/synthcfd.hpp"

#include "mfd/error.hpp"
#include "mfd/util/io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <string>

namespace mfd {

namespace {

struct Circle {
    Vec2 center;
    double r2 = 0.0;
};

Circle circumcircle(Vec2 a, Vec2 b, Vec2 c) {
    const double d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
    const double a2 = dot(a, a), b2 = dot(b, b), c2 = dot(c, c);
    const Vec2 o{(a2 * (b.y - c.y) + b2 * (c.y - a.y) + c2 * (a.y - b.y)) / d,
                 (a2 * (c.x - b.x) + b2 * (a.x - c.x) + c2 * (b.x - a.x)) / d};
    const Vec2 r = a - o;
    return {o, dot(r, r)};
}

/// Uniform spatial hash for the Poisson-disk distance test.
class PointGrid {
public:
    PointGrid(double half_width, double cell) : lo_(-half_width), cell_(cell) {
        dim_ = std::max(1, static_cast<int>(std::ceil(2.0 * half_width / cell)) + 1);
        cells_.assign(static_cast<std::size_t>(dim_) * dim_, {});
    }

    void insert(Vec2 p, int id) { cells_[index(p)].push_back(id); }

    bool has_neighbor_within(Vec2 p, double r, const std::vector<Vec2>& pts) const {
        const int cx = coord(p.x), cy = coord(p.y);
        const int span = static_cast<int>(std::ceil(r / cell_));
        const double r2 = r * r;
        for (int j = std::max(0, cy - span); j <= std::min(dim_ - 1, cy + span); ++j) {
            for (int i = std::max(0, cx - span); i <= std::min(dim_ - 1, cx + span); ++i) {
                for (int id : cells_[static_cast<std::size_t>(j) * dim_ + i]) {
                    const Vec2 d = pts[static_cast<std::size_t>(id)] - p;
                    if (dot(d, d) < r2) return true;
                }
            }
        }
        return false;
    }

private:
    int coord(double v) const { return std::clamp(static_cast<int>((v - lo_) / cell_), 0, dim_ - 1); }
    std::size_t index(Vec2 p) const { return static_cast<std::size_t>(coord(p.y)) * dim_ + coord(p.x); }

    double lo_, cell_;
    int dim_ = 1;
    std::vector<std::vector<int>> cells_;
};

/// Local target spacing: h at the wall times `wall_ratio`, growing linearly
/// to h over `grading_radii` disk radii from the surface.
struct Spacing {
    const ObstacleSet* obs;
    double h;
    MeshGrading grading;

    double at(Vec2 p) const {
        double f = 1.0;
        for (const Disk& d : obs->disks) {
            const double dist = std::max(0.0, norm(p - d.center) - d.radius);
            const double reach = grading.grading_radii * d.radius;
            const double g = reach > 0.0 ? grading.wall_ratio + (1.0 - grading.wall_ratio) * dist / reach : 1.0;
            f = std::min(f, g);
        }
        return h * std::clamp(f, grading.wall_ratio, 1.0);
    }
    double min() const { return obs->disks.empty() ? h : h * grading.wall_ratio; }
};

/// Fixed nodes: wall rings and the outer perimeter at the local spacing.
void add_fixed_nodes(const ObstacleSet& obs, const Spacing& sp, std::mt19937_64& rng, std::vector<Vec2>& pts,
                     std::vector<NodeType>& types) {
    const double h = sp.h;
    const double L = obs.half_width;
    const int per_side = std::max(2, static_cast<int>(std::lround(2.0 * L / h)));
    const double step = 2.0 * L / per_side;
    // Tangential jitter on non-corner perimeter nodes breaks the exact
    // cocircularity of a regular square lattice.
    std::uniform_real_distribution<double> jitter(-0.02 * step, 0.02 * step);
    for (int side = 0; side < 4; ++side) {
        for (int i = 0; i < per_side; ++i) {
            const double t = -L + i * step + (i == 0 ? 0.0 : jitter(rng));
            Vec2 p;
            switch (side) {
                case 0: p = {t, -L}; break;
                case 1: p = {L, t}; break;
                case 2: p = {-t, L}; break;
                default: p = {-L, -t}; break;
            }
            pts.push_back(p);
            types.push_back(NodeType::Boundary);
        }
    }
    for (const Disk& d : obs.disks) {
        const double hw = sp.at({d.center.x + d.radius, d.center.y});
        const int n = std::max(8, static_cast<int>(std::lround(2.0 * std::numbers::pi * d.radius / hw)));
        const double offset = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi / n)(rng);
        for (int i = 0; i < n; ++i) {
            const double a = offset + 2.0 * std::numbers::pi * i / n;
            pts.push_back({d.center.x + d.radius * std::cos(a), d.center.y + d.radius * std::sin(a)});
            types.push_back(NodeType::Wall);
        }
    }
}

/// Bridson sampling of the fluid region with a spatially varying minimum
/// spacing, grown from the fixed nodes.
void poisson_fill(const ObstacleSet& obs, const Spacing& sp, std::mt19937_64& rng, std::vector<Vec2>& pts,
                  std::vector<NodeType>& types) {
    const double L = obs.half_width;
    PointGrid grid(L, sp.min() / std::sqrt(2.0));
    for (std::size_t i = 0; i < pts.size(); ++i) grid.insert(pts[i], static_cast<int>(i));
    auto admissible = [&](Vec2 p, double h) {
        if (std::abs(p.x) > L - 0.5 * sp.h || std::abs(p.y) > L - 0.5 * sp.h) return false;
        for (const Disk& d : obs.disks) {
            if (norm(p - d.center) < d.radius + 0.5 * h) return false;
        }
        return !grid.has_neighbor_within(p, h, pts);
    };
    std::vector<int> active(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) active[i] = static_cast<int>(i);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    constexpr int kAttempts = 30;
    while (!active.empty()) {
        const std::size_t slot = std::min(active.size() - 1, static_cast<std::size_t>(unit(rng) * active.size()));
        const Vec2 base = pts[static_cast<std::size_t>(active[slot])];
        const double hb = sp.at(base);
        bool placed = false;
        for (int k = 0; k < kAttempts; ++k) {
            const double r = hb * (1.0 + unit(rng));
            const double a = 2.0 * std::numbers::pi * unit(rng);
            const Vec2 p{base.x + r * std::cos(a), base.y + r * std::sin(a)};
            if (!admissible(p, sp.at(p))) continue;
            pts.push_back(p);
            types.push_back(NodeType::Fluid);
            grid.insert(p, static_cast<int>(pts.size() - 1));
            active.push_back(static_cast<int>(pts.size() - 1));
            placed = true;
            break;
        }
        if (!placed) {
            active[slot] = active.back();
            active.pop_back();
        }
    }
}

Mesh build_mesh(const ObstacleSet& obs, double h, const MeshGrading& grading, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Spacing sp{&obs, h, grading};
    Mesh m;
    add_fixed_nodes(obs, sp, rng, m.coords, m.types);
    poisson_fill(obs, sp, rng, m.coords, m.types);
    std::vector<std::array<int, 3>> tris;
    for (const auto& t : delaunay_triangulate(m.coords)) {
        const Vec2 c = (1.0 / 3.0) * (m.coords[t[0]] + m.coords[t[1]] + m.coords[t[2]]);
        if (obs.disk_containing(c, 0.0) < 0) tris.push_back(t);
    }
    // Drop nodes that no remaining triangle references.
    std::vector<int> remap(m.coords.size(), -1);
    for (const auto& t : tris) {
        for (int v : t) remap[static_cast<std::size_t>(v)] = 0;
    }
    Mesh out;
    for (std::size_t i = 0; i < remap.size(); ++i) {
        if (remap[i] < 0) continue;
        remap[i] = static_cast<int>(out.coords.size());
        out.coords.push_back(m.coords[i]);
        out.types.push_back(m.types[i]);
    }
    for (const auto& t : tris) out.triangles.push_back({remap[t[0]], remap[t[1]], remap[t[2]]});
    return out;
}

}  // namespace

std::vector<std::array<int, 3>> delaunay_triangulate(std::span<const Vec2> points) {
    const std::size_t n = points.size();
    if (n < 3) throw ValidationError("delaunay: need at least 3 points");
    double xmin = points[0].x, xmax = xmin, ymin = points[0].y, ymax = ymin;
    for (const Vec2& p : points) {
        xmin = std::min(xmin, p.x), xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y), ymax = std::max(ymax, p.y);
    }
    const double span = std::max({xmax - xmin, ymax - ymin, 1e-12});
    const Vec2 mid{0.5 * (xmin + xmax), 0.5 * (ymin + ymax)};
    std::vector<Vec2> pts(points.begin(), points.end());
    pts.push_back({mid.x - 100.0 * span, mid.y - 100.0 * span});
    pts.push_back({mid.x + 100.0 * span, mid.y - 100.0 * span});
    pts.push_back({mid.x, mid.y + 100.0 * span});

    struct Tri {
        std::array<int, 3> v;
        Circle cc;
    };
    std::vector<Tri> tris;
    auto make = [&](int a, int b, int c) {
        if (cross(pts[b] - pts[a], pts[c] - pts[a]) < 0.0) std::swap(b, c);
        tris.push_back({{a, b, c}, circumcircle(pts[a], pts[b], pts[c])});
    };
    make(static_cast<int>(n), static_cast<int>(n + 1), static_cast<int>(n + 2));

    // Insertion in x-sorted order keeps the cavity search local enough.
    std::vector<int> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return pts[a].x < pts[b].x || (pts[a].x == pts[b].x && pts[a].y < pts[b].y);
    });

    std::map<std::pair<int, int>, int> edge_count;
    std::vector<Tri> kept;
    for (int pi : order) {
        const Vec2 p = pts[static_cast<std::size_t>(pi)];
        edge_count.clear();
        kept.clear();
        for (const Tri& t : tris) {
            const Vec2 d = p - t.cc.center;
            if (dot(d, d) < t.cc.r2) {
                for (int e = 0; e < 3; ++e) {
                    int a = t.v[e], b = t.v[(e + 1) % 3];
                    if (a > b) std::swap(a, b);
                    ++edge_count[{a, b}];
                }
            } else {
                kept.push_back(t);
            }
        }
        tris.swap(kept);
        for (const auto& [edge, count] : edge_count) {
            if (count == 1) make(edge.first, edge.second, pi);
        }
    }
    std::vector<std::array<int, 3>> out;
    out.reserve(tris.size());
    for (const Tri& t : tris) {
        if (t.v[0] >= static_cast<int>(n) || t.v[1] >= static_cast<int>(n) || t.v[2] >= static_cast<int>(n)) continue;
        out.push_back(t.v);
    }
    return out;
}

Mesh generate_mesh(const ObstacleSet& obstacles, int target_nodes, std::uint64_t seed, const MeshGrading& grading) {
    if (target_nodes < 50) throw ConfigError("generate_mesh: target_nodes must be >= 50");
    if (!(grading.wall_ratio > 0.0 && grading.wall_ratio <= 1.0) || !(grading.grading_radii >= 0.0)) {
        throw ConfigError("generate_mesh: need 0 < wall_ratio <= 1 and grading_radii >= 0");
    }
    obstacles.validate();
    if (obstacles.covered_fraction() > 0.5) {
        throw ValidationError("generate_mesh: obstacles cover " + format_double(obstacles.covered_fraction()) +
                              " of the domain (limit 0.5)");
    }
    const double L = obstacles.half_width;
    const double fluid_area = 4.0 * L * L * (1.0 - obstacles.covered_fraction());
    // Bridson samples pack at roughly 0.7 / h^2; refine h from the achieved count.
    double h = std::sqrt(0.7 * fluid_area / target_nodes);
    Mesh best;
    double best_err = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 8; ++iter) {
        Mesh m = build_mesh(obstacles, h, grading, seed);
        const double ratio = static_cast<double>(m.num_nodes()) / target_nodes;
        const double err = std::abs(ratio - 1.0);
        if (err < best_err) {
            best_err = err;
            best = std::move(m);
        }
        if (err < 0.03) break;
        h *= std::sqrt(ratio);
    }
    validate_mesh(best);
    return best;
}

}  // namespace mfd
