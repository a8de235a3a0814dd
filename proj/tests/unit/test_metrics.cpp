#include "test_helpers.hpp"

#include "mfd/error.hpp"
#include "mfd/metrics/report.hpp"
#include "mfd/synthcfd/dataset.hpp"
#include "mfd/util/io.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>

using namespace mfd;
using mfd::testing::grid_mesh;
using mfd::testing::transport_lp;

namespace {

RasterField full_raster(int n, const std::function<double(int, int)>& f) {
    RasterField r;
    r.resolution = n;
    r.dx = r.dy = 1.0;
    r.values.resize(static_cast<std::size_t>(n) * n);
    r.mask.assign(static_cast<std::size_t>(n) * n, 1);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) r.values[static_cast<std::size_t>(i) * n + j] = f(i, j);
    }
    return r;
}

std::vector<Vec2> smooth_field(const Mesh& m, double phase) {
    std::vector<Vec2> u;
    for (const auto& p : m.coords) u.push_back({std::cos(2 * p.x + phase) + 1.5, std::sin(3 * p.y - phase)});
    return u;
}

}  // namespace

TEST_CASE("pointwise metric examples") {
    const std::vector<Vec2> g = {{1.0, 0.5}, {-0.3, 2.0}, {0.7, -0.1}};
    const auto same = pointwise_metrics(g, g);
    CHECK(same.rel_l2_u == 0.0);
    CHECK(same.mae == 0.0);
    CHECK(same.cosine == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<Vec2> twice, neg;
    for (const auto& v : g) {
        twice.push_back(2.0 * v);
        neg.push_back(-1.0 * v);
    }
    const auto t = pointwise_metrics(twice, g);
    CHECK(t.rel_l2_u == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(t.cosine == doctest::Approx(1.0).epsilon(1e-12));
    const auto n = pointwise_metrics(neg, g);
    CHECK(n.rel_l2_u == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(n.cosine == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(n.mae == doctest::Approx((2 * std::hypot(1.0, 0.5) + 2 * std::hypot(0.3, 2.0) + 2 * std::hypot(0.7, 0.1)) / 3).epsilon(1e-12));
    CHECK_THROWS(pointwise_metrics(std::span(g).first(2), g));

    const std::vector<Vec2> with_zero = {{0.0, 0.0}, {1.0, 1.0}};
    const std::vector<Vec2> other = {{0.5, 0.0}, {1.0, 1.0}};
    CHECK(pointwise_metrics(with_zero, with_zero).cosine == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(pointwise_metrics(with_zero, other).cosine == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("W1 matches a transport LP on small inputs") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 1 + trial % 20, m = 1 + (trial * 7) % 20;
        std::vector<double> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(m));
        for (auto& v : a) v = nd(rng);
        for (auto& v : b) v = 0.5 + 2.0 * nd(rng);
        CHECK(std::abs(wasserstein1(a, b) - transport_lp(a, b)) < 1e-9);
    }
}

TEST_CASE("W1 identities") {
    const std::vector<double> a = {0.1, 0.5, -0.2, 0.9, 1.3, 0.0, 0.4, 0.2, -0.6, 0.8};
    std::vector<double> shifted;
    for (double v : a) shifted.push_back(v + 0.37);
    CHECK(wasserstein1(a, a) == 0.0);
    CHECK(wasserstein1(a, shifted) == doctest::Approx(0.37).epsilon(1e-12));
    const auto pdf = pdf_wasserstein(a, shifted, 64);
    CHECK(pdf.w1 == doctest::Approx(0.37).epsilon(1e-12));
    CHECK(pdf_wasserstein(a, a).w1 == 0.0);
    CHECK_THROWS(pdf_wasserstein(std::span(a).first(5), a));
}

TEST_CASE("kde and silverman bandwidth") {
    const std::vector<double> s = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    double mean = 5.5, var = 0.0;
    for (double v : s) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / 9.0);
    const double iqr = 7.75 - 3.25;
    CHECK(silverman_bandwidth(s) == doctest::Approx(0.9 * std::min(sd, iqr / 1.34) * std::pow(10.0, -0.2)).epsilon(1e-12));
    const std::vector<double> flat(12, 3.0);
    CHECK(silverman_bandwidth(flat) == 1e-6);

    std::vector<double> grid;
    for (int i = 0; i <= 2000; ++i) grid.push_back(-5.0 + 20.0 * i / 2000.0);
    const auto pdf = gaussian_kde(s, 1.2, grid);
    double integral = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i) integral += 0.5 * (pdf[i] + pdf[i - 1]) * (grid[i] - grid[i - 1]);
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("SSIM of a constant shift against a scalar luminance oracle") {
    const int n = 32;
    const auto gt = full_raster(n, [](int i, int j) { return 0.5 + 0.3 * std::sin(0.3 * i) * std::cos(0.2 * j); });
    const double c = 0.2;
    const auto pred = full_raster(n, [&](int i, int j) { return gt.at(i, j) + c; });
    const double range = 1.1;
    SsimSettings s;

    // Window-weighted local means with weights renormalized at the edges;
    // a constant shift leaves the contrast-structure factor at exactly 1.
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double sw = 0.0, mu = 0.0;
            for (int di = -3; di <= 3; ++di) {
                for (int dj = -3; dj <= 3; ++dj) {
                    if (i + di < 0 || i + di >= n || j + dj < 0 || j + dj >= n) continue;
                    const double w = std::exp(-(di * di + dj * dj) / (2 * 1.5 * 1.5));
                    sw += w;
                    mu += w * gt.at(i + di, j + dj);
                }
            }
            mu /= sw;
            const double c1 = (0.01 * range) * (0.01 * range);
            total += (2 * mu * (mu + c) + c1) / (mu * mu + (mu + c) * (mu + c) + c1);
        }
    }
    const double expected = total / (n * n);
    CHECK(ssim_grid(pred, gt, range, s) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(ssim_grid(gt, gt, range, s) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(expected < 1.0);
}

TEST_CASE("SSIM of noise is near zero and an all-masked grid is an error") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd(0.0, 1.0);
    const auto gt = full_raster(64, [](int i, int j) { return std::sin(0.2 * i) + std::cos(0.15 * j); });
    const auto noisy = full_raster(64, [&](int, int) { return 1000.0 * nd(rng); });
    CHECK(std::abs(ssim_grid(noisy, gt, 1000.0)) < 0.05);
    auto masked = gt;
    std::fill(masked.mask.begin(), masked.mask.end(), 0);
    CHECK_THROWS_AS(ssim_grid(masked, masked, 1.0), ValidationError);
}

TEST_CASE("SSIM on a mesh raster") {
    const Mesh m = grid_mesh(12, 12);
    const auto u = smooth_field(m, 0.2);
    CHECK(ssim_raster(u, u, m, 32) == doctest::Approx(1.0).epsilon(1e-14));
    const double other = ssim_raster(smooth_field(m, 1.4), u, m, 32);
    CHECK(other < 1.0);
    CHECK(other >= -1.0);
    CHECK_THROWS(ssim_raster(u, u, m, 16));
}

TEST_CASE("rasterization reproduces linear fields inside the mesh") {
    const Mesh m = grid_mesh(5, 5, 2.0, 2.0);
    std::vector<double> v;
    for (const auto& p : m.coords) v.push_back(3.0 * p.x - p.y);
    const RasterField r = rasterize(m, v, 32);
    for (int i = 0; i < 32; ++i) {
        for (int j = 0; j < 32; ++j) {
            REQUIRE(r.valid(i, j));
            const double x = r.x0 + (j + 0.5) * r.dx, y = r.y0 + (i + 0.5) * r.dy;
            CHECK(r.at(i, j) == doctest::Approx(3.0 * x - y).epsilon(1e-12));
        }
    }
}

TEST_CASE("structure function examples") {
    const std::vector<Vec2> two = {{0.0, 0.0}, {1.0, 0.0}};
    const std::vector<double> mag = {0.0, 1.0};
    const auto s = structure_function(mag, mag, two, 4, 10, 1);
    REQUIRE(s.r.size() == 1);
    CHECK(s.r[0] == 1.0);
    CHECK(s.s2_true[0] == 1.0);
    CHECK(s.eps_s2 == 0.0);

    const Mesh m = grid_mesh(10, 10);
    const std::vector<double> flat(100, 0.7);
    const auto c = structure_function(flat, flat, m.coords, 8, 1000, 2);
    for (double v : c.s2_true) CHECK(v == 0.0);
    CHECK(c.eps_s2 == 0.0);

    std::vector<double> a(100), b(100);
    for (int i = 0; i < 100; ++i) {
        a[static_cast<std::size_t>(i)] = std::sin(0.3 * i);
        b[static_cast<std::size_t>(i)] = 0.5 * std::sin(0.3 * i);
    }
    CHECK(structure_function(a, a, m.coords, 12, 3000, 3).eps_s2 == 0.0);
    const auto d = structure_function(b, a, m.coords, 12, 3000, 3);
    CHECK(d.eps_s2 == doctest::Approx(0.75).epsilon(1e-6));
}

TEST_CASE("POD energy") {
    const Mesh m = grid_mesh(6, 6);
    const auto u = smooth_field(m, 0.1);
    const auto one = pod_energy({u, u});
    CHECK(one.degenerate);

    std::vector<Vec2> e1(36, {0.0, 0.0}), e2(36, {0.0, 0.0}), n1(36), n2(36);
    e1[3] = {2.0, 0.0};
    e2[10] = {0.0, 2.0};
    for (std::size_t i = 0; i < 36; ++i) {
        n1[i] = -1.0 * e1[i];
        n2[i] = -1.0 * e2[i];
    }
    // Zero-mean set whose deviations are two orthogonal equal-norm snapshots.
    const auto pair = pod_energy({e1, e2, n1, n2});
    REQUIRE(pair.energy.size() >= 2);
    CHECK(pair.energy[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(pair.energy[1] == doctest::Approx(0.5).epsilon(1e-12));

    std::vector<std::vector<Vec2>> snaps;
    for (int k = 0; k < 8; ++k) snaps.push_back(smooth_field(m, 0.4 * k));
    const auto p = pod_energy(snaps);
    CHECK_FALSE(p.degenerate);
    CHECK(std::accumulate(p.energy.begin(), p.energy.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-10));
    for (std::size_t i = 1; i < p.energy.size(); ++i) CHECK(p.energy[i] <= p.energy[i - 1]);
    snaps.push_back(std::vector<Vec2>(5));
    CHECK_THROWS(pod_energy(snaps));
}

TEST_CASE("vorticity of analytic fields") {
    Mesh m = grid_mesh(9, 9);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> jit(-0.02, 0.02);
    for (std::size_t i = 0; i < m.num_nodes(); ++i) {
        if (m.types[i] == NodeType::Fluid) m.coords[i] = m.coords[i] + Vec2{jit(rng), jit(rng)};
    }
    std::vector<Vec2> rot, shear, uni;
    for (const auto& p : m.coords) {
        rot.push_back({-p.y, p.x});
        shear.push_back({p.y, 0.0});
        uni.push_back({0.8, -0.3});
    }
    const auto wr = vorticity(m, rot), ws = vorticity(m, shear), wu = vorticity(m, uni);
    for (std::size_t i = 0; i < m.num_nodes(); ++i) {
        CHECK(std::abs(wu.omega[i]) < 1e-8);
        if (m.types[i] != NodeType::Fluid) continue;
        CHECK(std::abs(wr.omega[i] - 2.0) < 1e-6);
        CHECK(std::abs(ws.omega[i] + 1.0) < 1e-6);
    }
}

TEST_CASE("moments") {
    const std::vector<double> v = {0.0, 2.0};
    CHECK(moments(v).mean == 1.0);
    CHECK(moments(v).std == 1.0);
    const std::vector<Vec2> c(5, {0.3, -0.4});
    const FlowMoments f = flow_moments(c);
    CHECK(f.ux.mean == doctest::Approx(0.3));
    CHECK(f.ux.std == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(f.mag.mean == doctest::Approx(0.5));
}

TEST_CASE("aggregate equals a hand recomputation and ignores record order") {
    std::vector<AngleRecord> recs(5);
    for (std::size_t k = 0; k < recs.size(); ++k) {
        recs[k].pointwise.rel_l2_u = 0.1 * (k + 1);
        recs[k].ssim = 1.0 - 0.05 * k * k;
        recs[k].eps_s2 = 0.3 + 0.01 * k;
        if (k % 2 == 0) recs[k].seconds = 1.0 + k;
    }
    const Aggregate a = aggregate("m", recs);
    const std::size_t c = metric_index("rel_l2_u");
    double mean = 0.0, var = 0.0;
    for (const auto& r : recs) mean += metric_values(r)[c];
    mean /= 5.0;
    for (const auto& r : recs) var += std::pow(metric_values(r)[c] - mean, 2);
    CHECK(a.mean[c] == doctest::Approx(mean).epsilon(1e-14));
    CHECK(a.std[c] == doctest::Approx(std::sqrt(var / 5.0)).epsilon(1e-14));
    CHECK(a.mean[metric_index("time_s")] == doctest::Approx(3.0));
    std::reverse(recs.begin(), recs.end());
    const Aggregate b = aggregate("m", recs);
    for (std::size_t k = 0; k < a.mean.size(); ++k) {
        if (std::isnan(a.mean[k])) continue;
        CHECK(b.mean[k] == doctest::Approx(a.mean[k]).epsilon(1e-14));
        CHECK(b.std[k] == doctest::Approx(a.std[k]).epsilon(1e-12));
    }
    CHECK_THROWS_AS(metric_index("nope"), ConfigError);
}

TEST_CASE("evaluating a dataset against itself and with a missing angle") {
    DatasetConfig cfg;
    cfg.seed = 2;
    cfg.train_meshes = 1;
    cfg.test_meshes = 2;
    cfg.angles = 4;
    cfg.target_nodes = 150;
    const auto root = mfd::testing::temp_dir("eval");
    generate_dataset(cfg, root / "data");
    EvalSettings s;
    s.raster_resolution = 32;
    s.s2_pairs = 2000;
    s.s2_bins = 6;
    s.kde_points = 32;
    const MetricsReport self = evaluate_dirs(root / "data", root / "data", root / "self", s);
    CHECK(self.records.size() == 8);
    CHECK(self.missing.empty());
    for (const auto& r : self.records) {
        CHECK(r.pointwise.rel_l2_u == 0.0);
        CHECK(r.pointwise.mae == 0.0);
        CHECK(r.pointwise.cosine == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(r.ssim == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(r.eps_s2 == 0.0);
        CHECK(r.w1_ux == 0.0);
    }
    CHECK(std::filesystem::exists(root / "self" / "metrics.csv"));
    CHECK(std::filesystem::exists(root / "self" / "report.txt"));

    DatasetManifest m = load_manifest(root / "data");
    std::erase_if(m.entries, [](const ManifestEntry& e) { return e.split == "test" && e.angle_deg == 90.0 && e.mesh_path.find("mesh_01") != std::string::npos; });
    std::filesystem::create_directories(root / "partial");
    for (const auto& e : m.entries) {
        std::filesystem::create_directories((root / "partial" / e.field_path).parent_path());
        std::filesystem::create_directories((root / "partial" / e.mesh_path).parent_path());
        std::filesystem::copy_file(root / "data" / e.field_path, root / "partial" / e.field_path,
                                   std::filesystem::copy_options::overwrite_existing);
        std::filesystem::copy_file(root / "data" / e.mesh_path, root / "partial" / e.mesh_path,
                                   std::filesystem::copy_options::overwrite_existing);
    }
    save_manifest(root / "partial", m);
    const MetricsReport part = evaluate_dirs(root / "partial", root / "data", root / "part", s);
    CHECK(part.records.size() == 7);
    REQUIRE(part.missing.size() == 1);
    CHECK(part.missing[0] == "mesh_01.mesh@90");
    CHECK(read_file(root / "part" / "report.txt").find("mesh_01.mesh@90") != std::string::npos);
    const MetricsReport rerun = evaluate_dirs(root / "partial", root / "data", root / "part2", s);
    CHECK(read_file(root / "part" / "metrics.csv") == read_file(root / "part2" / "metrics.csv"));
}
