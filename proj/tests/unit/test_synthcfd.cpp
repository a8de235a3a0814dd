#include "test_helpers.hpp"

#include "mfd/error.hpp"
#include "mfd/synthcfd/dataset.hpp"
#include "mfd/util/io.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace mfd;

namespace {

ObstacleSet single(double a) {
    ObstacleSet s;
    s.disks = {{{0.0, 0.0}, a}};
    return s;
}

/// Normal velocity relative to u_inf at every wall node, against the disk it
/// touches.
double max_wall_normal(const Mesh& m, const ObstacleSet& obs, const std::vector<Vec2>& u) {
    double worst = 0.0;
    for (std::size_t i = 0; i < m.num_nodes(); ++i) {
        if (m.types[i] != NodeType::Wall) continue;
        std::size_t k = 0;
        for (std::size_t j = 1; j < obs.disks.size(); ++j) {
            if (norm(m.coords[i] - obs.disks[j].center) - obs.disks[j].radius <
                norm(m.coords[i] - obs.disks[k].center) - obs.disks[k].radius) {
                k = j;
            }
        }
        REQUIRE(std::abs(norm(m.coords[i] - obs.disks[k].center) - obs.disks[k].radius) < 1e-9);
        const Vec2 d = m.coords[i] - obs.disks[k].center;
        worst = std::max(worst, std::abs(dot(u[i], (1.0 / norm(d)) * d)));
    }
    return worst;
}

}  // namespace

TEST_CASE("uniform flow without obstacles") {
    const ObstacleSet none;
    const std::vector<Vec2> pts = {{0.1, 0.2}, {-0.7, 0.9}};
    for (const Vec2& u : potential_flow(none, 0.0, 1.0, pts)) {
        CHECK(u.x == 1.0);
        CHECK(u.y == 0.0);
    }
}

TEST_CASE("single disk hand-checked value") {
    const double a = 0.2;
    const std::vector<Vec2> pts = {{2 * a, 0.0}, {0.0, 2 * a}};
    const auto u = potential_flow(single(a), 0.0, 1.0, pts);
    CHECK(u[0].x == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(std::abs(u[0].y) < 1e-15);
    CHECK(u[1].x == doctest::Approx(1.25).epsilon(1e-14));
}

TEST_CASE("single centred disk is rotationally symmetric") {
    const double a = 0.15, phi = 0.7;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> r(0.2, 0.9), t(0.0, 2 * std::numbers::pi);
    std::vector<Vec2> pts, rotated;
    for (int i = 0; i < 50; ++i) {
        const double rad = r(rng), th = t(rng);
        pts.push_back({rad * std::cos(th), rad * std::sin(th)});
        rotated.push_back({rad * std::cos(th + phi), rad * std::sin(th + phi)});
    }
    const auto u0 = potential_flow(single(a), 0.0, 1.0, pts);
    const auto up = potential_flow(single(a), phi, 1.0, rotated);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Vec2 rot{std::cos(phi) * u0[i].x - std::sin(phi) * u0[i].y, std::sin(phi) * u0[i].x + std::cos(phi) * u0[i].y};
        CHECK(up[i].x == doctest::Approx(rot.x).epsilon(1e-12));
        CHECK(up[i].y == doctest::Approx(rot.y).epsilon(1e-12));
    }
}

TEST_CASE("points inside a disk are rejected") {
    const std::vector<Vec2> pts = {{0.01, 0.0}};
    CHECK_THROWS_AS(potential_flow(single(0.2), 0.0, 1.0, pts), ValidationError);
}

TEST_CASE("overlapping or escaping disks fail validation") {
    ObstacleSet s;
    s.disks = {{{0.0, 0.0}, 0.2}, {{0.25, 0.0}, 0.2}};
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s.disks = {{{0.9, 0.0}, 0.2}};
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s.disks = {{{0.0, 0.0}, 0.2}};
    CHECK_NOTHROW(s.validate());
}

TEST_CASE("meshes without obstacles have fluid interiors and boundary perimeters") {
    const Mesh m = generate_mesh({}, 300, 1);
    for (std::size_t i = 0; i < m.num_nodes(); ++i) {
        const Vec2 p = m.coords[i];
        const bool on_edge = std::abs(std::abs(p.x) - 1.0) < 1e-12 || std::abs(std::abs(p.y) - 1.0) < 1e-12;
        CHECK(m.types[i] == (on_edge ? NodeType::Boundary : NodeType::Fluid));
    }
    CHECK_NOTHROW(validate_mesh(m));
}

TEST_CASE("disk rings are wall nodes and wall flow is tangent") {
    const ObstacleSet obs = single(0.3);
    const Mesh m = generate_mesh(obs, 600, 4);
    int walls = 0;
    for (std::size_t i = 0; i < m.num_nodes(); ++i) {
        const double r = norm(m.coords[i]);
        if (std::abs(r - 0.3) < 1e-9) {
            CHECK(m.types[i] == NodeType::Wall);
            ++walls;
        }
        CHECK(r > 0.3 - 1e-9);
    }
    CHECK(walls >= 8);
    for (double phi : {0.0, 0.9, 2.5}) CHECK(max_wall_normal(m, obs, potential_flow(obs, phi, 1.0, m.coords)) < 1e-8);
}

TEST_CASE("node counts stay within 15 percent of the target") {
    ObstacleSampling sampling;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        const ObstacleSet obs = sample_obstacles(sampling, 1.0, rng);
        const Mesh m = generate_mesh(obs, 800, seed);
        CHECK(std::abs(static_cast<double>(m.num_nodes()) - 800.0) <= 0.15 * 800.0);
    }
}

TEST_CASE("mesh generation preconditions") {
    CHECK_THROWS_AS(generate_mesh({}, 20, 1), ConfigError);
    ObstacleSet big;
    big.disks = {{{0.0, 0.0}, 0.85}};
    CHECK_THROWS_AS(generate_mesh(big, 500, 1), ValidationError);
}

TEST_CASE("multi-disk flow is nearly tangent and recovers the far field") {
    ObstacleSet obs;
    obs.disks = {{{-0.3, 0.1}, 0.12}, {{0.25, -0.2}, 0.1}, {{0.2, 0.35}, 0.08}};
    REQUIRE(obs.covered_fraction() < 0.1);
    const Mesh m = generate_mesh(obs, 800, 9);
    for (double phi : {0.0, 1.3}) {
        const auto u = potential_flow(obs, phi, 1.0, m.coords);
        CHECK(max_wall_normal(m, obs, u) < 1e-2);
        for (std::size_t i = 0; i < m.num_nodes(); ++i) {
            if (m.types[i] != NodeType::Boundary) continue;
            CHECK(norm(u[i] - Vec2{std::cos(phi), std::sin(phi)}) < 0.1);
        }
    }
}

TEST_CASE("delaunay triangles have empty circumcircles") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Vec2> pts;
    for (int i = 0; i < 150; ++i) pts.push_back({u(rng), u(rng)});
    const auto tris = delaunay_triangulate(pts);
    CHECK(tris.size() > 150);
    for (const auto& t : tris) {
        const Vec2 a = pts[static_cast<std::size_t>(t[0])], b = pts[static_cast<std::size_t>(t[1])],
                   c = pts[static_cast<std::size_t>(t[2])];
        CHECK(cross(b - a, c - a) > 0.0);
        for (std::size_t k = 0; k < pts.size(); ++k) {
            if (static_cast<int>(k) == t[0] || static_cast<int>(k) == t[1] || static_cast<int>(k) == t[2]) continue;
            const Vec2 ad = a - pts[k], bd = b - pts[k], cd = c - pts[k];
            const double det = (ad.x * ad.x + ad.y * ad.y) * cross(bd, cd) - (bd.x * bd.x + bd.y * bd.y) * cross(ad, cd) +
                               (cd.x * cd.x + cd.y * cd.y) * cross(ad, bd);
            CHECK(det <= 1e-12);
        }
    }
}

TEST_CASE("dataset layout, scaling and determinism") {
    DatasetConfig cfg;
    cfg.seed = 5;
    cfg.train_meshes = 2;
    cfg.test_meshes = 1;
    cfg.angles = 6;
    cfg.target_nodes = 200;
    const auto a = mfd::testing::temp_dir("ds_a"), b = mfd::testing::temp_dir("ds_b");
    const DatasetManifest m = generate_dataset(cfg, a);
    generate_dataset(cfg, b);
    CHECK(m.entries.size() == 18);
    CHECK(m.split("train").size() == 12);
    CHECK(m.split("test").size() == 6);
    CHECK(read_file(a / kManifestName) == read_file(b / kManifestName));
    double peak = 0.0;
    for (const auto& e : m.entries) {
        CHECK(read_file(a / e.field_path) == read_file(b / e.field_path));
        if (e.split != "train") continue;
        for (const Vec2& v : load_field(a / e.field_path).velocity) peak = std::max({peak, std::abs(v.x), std::abs(v.y)});
    }
    CHECK(peak == doctest::Approx(1.0).epsilon(1e-15));
    const DatasetManifest back = load_manifest(a);
    CHECK(back.velocity_scale == m.velocity_scale);
    CHECK(back.seed == 5);
    CHECK(format_manifest(back) == format_manifest(m));
}

TEST_CASE("an invalid fixed layout fails before anything is written") {
    DatasetConfig cfg;
    cfg.train_meshes = 2;
    cfg.test_meshes = 1;
    ObstacleSet bad;
    bad.disks = {{{0.0, 0.0}, 0.2}, {{0.1, 0.0}, 0.2}};
    cfg.fixed_obstacles[2] = bad;
    const auto dir = mfd::testing::temp_dir("ds_bad") / "out";
    CHECK_THROWS_AS(generate_dataset(cfg, dir), ValidationError);
    CHECK_FALSE(std::filesystem::exists(dir));
}

TEST_CASE("dataset config needs three meshes") {
    DatasetConfig cfg;
    cfg.train_meshes = 1;
    cfg.test_meshes = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("angle grid") {
    const auto g = angle_grid(36);
    REQUIRE(g.size() == 36);
    CHECK(g[1] == 10.0);
    CHECK(g.back() == 350.0);
}
