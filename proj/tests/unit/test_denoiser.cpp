#include "test_helpers.hpp"

#include "mfd/denoiser/denoiser.hpp"
#include "mfd/diffusion/train.hpp"
#include "mfd/error.hpp"
#include "mfd/features/features.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

using namespace mfd;
using mfd::testing::grid_mesh;
using mfd::testing::permute_graph;
using mfd::testing::random_matrix;
using mfd::testing::random_perm;
using mfd::testing::randomize;

namespace {

DenoiserConfig small_config(DenoiserMode mode) {
    DenoiserConfig c;
    c.hidden = 8;
    c.fourier_bands = 2;
    c.harmonic_orders = 2;
    c.layers_o2o = 1;
    c.layers_o2r = 1;
    c.layers_r2r = 2;
    c.layers_r2o = 1;
    c.single_scale_layers = 2;
    c.mode = mode;
    c.init_std = 0.3;
    return c;
}

Matrix<double> forward_value(const Denoiser<double>& model, ParamStore<double>& store, const MultiscaleGraph& g,
                             const Matrix<double>& x, double sigma, double phi) {
    const GraphContext<double> ctx(g, phi);
    Tape<double> tape(&store);
    return tape.value(model.denoise(tape, ctx, x, sigma, 0.5));
}

}  // namespace

TEST_CASE("edge features of an axis-aligned edge") {
    const auto a = edge_feature_row({0, 0}, {1, 0}, 0.0);
    CHECK(a == std::array<double, 5>{1, 0, 1, 1, 0});
    const auto b = edge_feature_row({0, 0}, {1, 0}, std::numbers::pi / 2);
    CHECK(b[0] == 1.0);
    CHECK(b[1] == 0.0);
    CHECK(b[2] == 1.0);
    CHECK(b[3] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(b[4] == doctest::Approx(-1.0));
    CHECK(edge_feature_row({0.2, 0.2}, {0.2, 0.2}, 1.0) == std::array<double, 5>{0, 0, 0, 0, 0});
}

TEST_CASE("edge feature properties") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const Vec2 a{u(rng), u(rng)}, b{u(rng), u(rng)};
        const double phi = 3.0 * u(rng), delta = 3.0 * u(rng);
        const auto f = edge_feature_row(a, b, phi);
        const auto r = edge_feature_row(b, a, phi);
        CHECK(r[0] == -f[0]);
        CHECK(r[1] == -f[1]);
        CHECK(r[2] == f[2]);
        CHECK(r[3] == doctest::Approx(-f[3]).epsilon(1e-12));
        CHECK(r[4] == doctest::Approx(-f[4]).epsilon(1e-12));
        CHECK(f[3] * f[3] + f[4] * f[4] == doctest::Approx(1.0).epsilon(1e-12));
        auto rot = [&](Vec2 p) {
            return Vec2{std::cos(delta) * p.x - std::sin(delta) * p.y, std::sin(delta) * p.x + std::cos(delta) * p.y};
        };
        const auto g = edge_feature_row(rot(a), rot(b), phi + delta);
        CHECK(g[2] == doctest::Approx(f[2]).epsilon(1e-10));
        CHECK(g[3] == doctest::Approx(f[3]).epsilon(1e-10));
        CHECK(g[4] == doctest::Approx(f[4]).epsilon(1e-10));
    }
}

TEST_CASE("node feature layout") {
    Mesh m = grid_mesh(4, 4);
    m.types[5] = NodeType::Wall;
    std::mt19937_64 rng(1);
    const Matrix<double> noisy = random_matrix(16, 2, rng);
    const Matrix<double> f = node_features(m, noisy, 0.0);
    REQUIRE(f.cols() == 9);
    CHECK(node_col::kCount == 2 + 3 + 2 + 2);
    for (Eigen::Index i = 0; i < 16; ++i) {
        CHECK(f(i, node_col::kCosPhi) == 1.0);
        CHECK(f(i, node_col::kSinPhi) == 0.0);
        CHECK(f(i, node_col::kUx) == noisy(i, 0));
        CHECK(f(i, node_col::kUy) == noisy(i, 1));
    }
    CHECK(f(5, node_col::kWall) == 1.0);
    CHECK(f(5, node_col::kBoundary) == 0.0);
    CHECK(f(5, node_col::kFluid) == 0.0);
    CHECK(f(0, node_col::kBoundary) == 1.0);
    CHECK(f == node_features(m, noisy, 0.0));
    CHECK_THROWS_AS(node_features(m, random_matrix(15, 2, rng), 0.0), ConfigError);
}

TEST_CASE("harmonic and fourier embeddings") {
    const RowVector<double> h = harmonic_features(0.0, 4);
    REQUIRE(h.size() == 8);
    for (int k = 0; k < 4; ++k) {
        CHECK(h(2 * k) == 1.0);
        CHECK(h(2 * k + 1) == 0.0);
    }
    const RowVector<double> f = fourier_features(0.3, 16);
    CHECK(f.size() == 32);
    CHECK(f(0) == doctest::Approx(std::cos(0.3)));
}

TEST_CASE("conditioning vector determinism, periodicity and sigma check") {
    ParamStore<double> store;
    const Denoiser<double> model(small_config(DenoiserMode::Multiscale), store, 3);
    randomize(store, 4, 0.5);
    auto g = [&](double sigma, double phi) {
        Tape<double> t(&store);
        return Matrix<double>(t.value(model.conditioning(t, sigma, phi)));
    };
    CHECK(g(0.7, 1.1) == g(0.7, 1.1));
    CHECK(g(0.7, 1.1).isApprox(g(0.7, 1.1 + 2 * std::numbers::pi), 1e-12));
    CHECK_FALSE(g(0.7, 1.1).isApprox(g(0.7, 1.6), 1e-6));
    Tape<double> t(&store);
    CHECK_THROWS_AS(model.conditioning(t, 0.0, 0.0), ConfigError);
}

TEST_CASE("zero readout gives a zero raw output in both modes") {
    const MultiscaleGraph g = build_multiscale_graph(grid_mesh(6, 5), 3.0);
    for (auto mode : {DenoiserMode::Multiscale, DenoiserMode::SingleScale}) {
        ParamStore<double> store;
        const Denoiser<double> model(small_config(mode), store, 1);
        const GraphContext<double> ctx(g, 0.4);
        std::mt19937_64 rng(2);
        Tape<double> tape(&store);
        const Var feats = tape.constant(ctx.nodes.build(random_matrix(30, 2, rng), 0.4));
        const auto& out = tape.value(model.forward(tape, ctx, feats, model.conditioning(tape, 1.0, 0.4)));
        CHECK(out.rows() == 30);
        CHECK(out.cols() == 2);
        CHECK(out.isZero(0.0));
    }
}

TEST_CASE("full denoiser loss gradient matches finite differences") {
    const MultiscaleGraph g = build_multiscale_graph(grid_mesh(4, 3), 3.0);
    REQUIRE(g.num_original() == 12);
    REQUIRE(g.num_reduced() == 4);
    ParamStore<double> store;
    const Denoiser<double> model(small_config(DenoiserMode::Multiscale), store, 5);
    randomize(store, 6, 0.4);
    std::mt19937_64 rng(7);
    const Matrix<double> x0 = random_matrix(12, 2, rng, 0.5), eps = random_matrix(12, 2, rng);
    const GraphContext<double> ctx(g, 0.8);
    auto loss = [&]() {
        Tape<double> t(&store);
        return t.value(edm_loss(t, model, ctx, x0, eps, 0.9, 0.5))(0, 0);
    };
    auto analytic = [&]() {
        Tape<double> t(&store);
        t.backward(edm_loss(t, model, ctx, x0, eps, 0.9, 0.5));
    };
    CHECK(mfd::testing::max_fd_rel_error(store, loss, analytic, 1e-5, 1e-7) < 1e-3);
}

TEST_CASE("denoiser output permutes with the nodes") {
    const MultiscaleGraph g = build_multiscale_graph(grid_mesh(8, 6), 4.0);
    for (auto mode : {DenoiserMode::Multiscale, DenoiserMode::SingleScale}) {
        ParamStore<double> store;
        const Denoiser<double> model(small_config(mode), store, 8);
        randomize(store, 9, 0.3);
        std::mt19937_64 rng(10);
        const Matrix<double> x = random_matrix(48, 2, rng);
        const Matrix<double> y = forward_value(model, store, g, x, 0.6, 0.3);
        for (int trial = 0; trial < 3; ++trial) {
            const auto p = random_perm(g.num_original(), rng);
            const auto q = random_perm(g.num_reduced(), rng);
            const MultiscaleGraph gp = permute_graph(g, p, q, rng);
            Matrix<double> xp(48, 2);
            for (int i = 0; i < 48; ++i) xp.row(p[static_cast<std::size_t>(i)]) = x.row(i);
            const Matrix<double> yp = forward_value(model, store, gp, xp, 0.6, 0.3);
            double dev = 0.0;
            for (int i = 0; i < 48; ++i) dev = std::max(dev, (yp.row(p[static_cast<std::size_t>(i)]) - y.row(i)).cwiseAbs().maxCoeff());
            CHECK(dev < 1e-10);
        }
    }
}

TEST_CASE("float precision agrees with double to single-precision accuracy") {
    const MultiscaleGraph g = build_multiscale_graph(grid_mesh(6, 6), 4.0);
    ParamStore<double> store;
    const Denoiser<double> model(small_config(DenoiserMode::Multiscale), store, 8);
    randomize(store, 9, 0.3);
    ParamStore<float> fstore;
    const Denoiser<float> fmodel(small_config(DenoiserMode::Multiscale), fstore, 8);
    fstore.assign_from(store);
    std::mt19937_64 rng(3);
    const Matrix<double> x = random_matrix(36, 2, rng);
    const GraphContext<double> ctx(g, 0.2);
    const GraphContext<float> fctx(g, 0.2);
    const Matrix<double> a = model.denoise_value(ctx, x, 0.8, 0.5);
    const Matrix<double> b = fmodel.denoise_value(fctx, x, 0.8, 0.5);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("receptive field: multiscale reaches far nodes, shallow single-scale does not") {
    const MultiscaleGraph g = build_multiscale_graph(grid_mesh(100, 2, 99.0, 1.0), 5.0);
    REQUIRE(g.num_original() == 200);
    const int far = 20;
    auto probe = [&](DenoiserMode mode) {
        DenoiserConfig cfg = small_config(mode);
        cfg.layers_r2r = 10;
        ParamStore<double> store;
        const Denoiser<double> model(cfg, store, 11);
        randomize(store, 12, 0.3);
        const GraphContext<double> ctx(g, 0.0);
        std::mt19937_64 rng(13);
        Tape<double> tape(&store);
        const Var feats = tape.constant(ctx.nodes.build(random_matrix(200, 2, rng), 0.0));
        const Var out = model.forward(tape, ctx, feats, model.conditioning(tape, 1.0, 0.0));
        const Var first = tape.slice_rows(out, 0, 1);
        tape.backward(tape.sum(first));
        return tape.grad(feats).row(far).cwiseAbs().maxCoeff();
    };
    CHECK(probe(DenoiserMode::Multiscale) > 0.0);
    CHECK(probe(DenoiserMode::SingleScale) == 0.0);
}

TEST_CASE("message passing without edges is purely node-local") {
    MultiscaleGraph g = build_multiscale_graph(grid_mesh(5, 4), 1.0);
    g.o2o.src.clear();
    g.o2o.dst.clear();
    auto cfg = small_config(DenoiserMode::SingleScale);
    ParamStore<double> store;
    const Denoiser<double> model(cfg, store, 14);
    randomize(store, 15, 0.3);
    const GraphContext<double> ctx(g, 0.5);
    std::mt19937_64 rng(16);
    Tape<double> tape(&store);
    const Var feats = tape.constant(ctx.nodes.build(random_matrix(20, 2, rng), 0.5));
    const Var out = model.forward(tape, ctx, feats, model.conditioning(tape, 1.0, 0.5));
    tape.backward(tape.sum(tape.slice_rows(out, 7, 1)));
    const Matrix<double> grad = tape.grad(feats);
    for (Eigen::Index i = 0; i < 20; ++i) {
        if (i == 7) {
            CHECK(grad.row(i).cwiseAbs().maxCoeff() > 0.0);
        } else {
            CHECK(grad.row(i).isZero(0.0));
        }
    }
}

TEST_CASE("a duplicated edge only changes its destination after one layer") {
    MultiscaleGraph g = build_multiscale_graph(grid_mesh(5, 4), 1.0);
    auto cfg = small_config(DenoiserMode::SingleScale);
    cfg.single_scale_layers = 1;
    ParamStore<double> store;
    const Denoiser<double> model(cfg, store, 17);
    randomize(store, 18, 0.3);
    std::mt19937_64 rng(19);
    const Matrix<double> x = random_matrix(20, 2, rng);
    const Matrix<double> base = forward_value(model, store, g, x, 0.7, 0.1);
    const int src = g.o2o.src[0], dst = g.o2o.dst[0];
    g.o2o.src.push_back(src);
    g.o2o.dst.push_back(dst);
    const Matrix<double> dup = forward_value(model, store, g, x, 0.7, 0.1);
    for (int i = 0; i < 20; ++i) {
        const double d = (dup.row(i) - base.row(i)).cwiseAbs().maxCoeff();
        if (i == dst) {
            CHECK(d > 0.0);
        } else {
            CHECK(d == 0.0);
        }
    }
}

TEST_CASE("multiscale mode requires the reduced edge sets") {
    MultiscaleGraph g = build_multiscale_graph(grid_mesh(5, 4), 2.0);
    g.r2o.src.clear();
    g.r2o.dst.clear();
    ParamStore<double> store;
    const Denoiser<double> model(small_config(DenoiserMode::Multiscale), store, 1);
    const GraphContext<double> ctx(g, 0.0);
    Tape<double> tape(&store);
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(model.denoise(tape, ctx, random_matrix(20, 2, rng), 1.0, 0.5), ConfigError);
}

TEST_CASE("preconditioning around a zero network scales the input by c_skip") {
    std::mt19937_64 rng(20);
    const Matrix<double> x = random_matrix(5, 2, rng);
    Tape<double> tape;
    const double sigma = 1.3, sd = 0.5;
    const Var d = precondition_apply<double>(tape, x, sigma, sd, [](Tape<double>& t, const Matrix<double>& xin, double) {
        return t.constant(Matrix<double>::Zero(xin.rows(), xin.cols()));
    });
    CHECK(tape.value(d).isApprox(x * (sd * sd / (sigma * sigma + sd * sd)), 1e-14));
    Tape<double> tape2;
    const Var d0 = precondition_apply<double>(tape2, x, 1e-9, sd, [](Tape<double>& t, const Matrix<double>& xin, double) {
        return t.constant(Matrix<double>::Ones(xin.rows(), xin.cols()));
    });
    CHECK(tape2.value(d0).isApprox(x, 1e-8));
}
