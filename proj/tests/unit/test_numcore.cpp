#include "test_helpers.hpp"

#include "mfd/error.hpp"
#include "mfd/numcore/adamw.hpp"
#include "mfd/numcore/checkpoint.hpp"
#include "mfd/numcore/layers.hpp"

#include <doctest.h>

#include <cmath>

using namespace mfd;
using mfd::testing::max_fd_rel_error;
using mfd::testing::random_matrix;

TEST_CASE("mlp with identity weights and linear activation is the identity") {
    ParamStore<double> store;
    std::mt19937_64 rng(1);
    Mlp mlp = make_mlp(store, "m", {2, 2}, Activation::Linear, rng);
    store.value(mlp.weight[0]) = Matrix<double>::Identity(2, 2);
    store.value(mlp.bias[0]).setZero();
    Tape<double> tape(&store);
    Matrix<double> x(1, 2);
    x << 1.5, -2.0;
    const auto& y = tape.value(mlp_apply(tape, mlp, tape.constant(x)));
    CHECK(y(0, 0) == 1.5);
    CHECK(y(0, 1) == -2.0);
}

TEST_CASE("mlp with zero weights returns its bias") {
    ParamStore<double> store;
    std::mt19937_64 rng(1);
    Mlp mlp = make_mlp(store, "m", {3, 1}, Activation::Linear, rng);
    store.value(mlp.weight[0]).setZero();
    store.value(mlp.bias[0]).setConstant(0.3);
    Tape<double> tape(&store);
    const auto& y = tape.value(mlp_apply(tape, mlp, tape.constant(random_matrix(4, 3, rng))));
    for (Eigen::Index i = 0; i < 4; ++i) CHECK(y(i, 0) == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("mlp rejects an input of the wrong width naming the layer") {
    ParamStore<double> store;
    std::mt19937_64 rng(1);
    Mlp mlp = make_mlp(store, "m", {3, 4, 2}, Activation::SiLU, rng);
    Tape<double> tape(&store);
    CHECK_THROWS_WITH_AS(mlp_apply(tape, mlp, tape.constant(random_matrix(2, 5, rng))), doctest::Contains("layer 0"),
                         ConfigError);
}

TEST_CASE("mlp gradients match central finite differences") {
    ParamStore<double> store;
    std::mt19937_64 rng(7);
    Mlp mlp = make_mlp(store, "m", {2, 4, 2}, Activation::SiLU, rng, 0.5);
    for (std::size_t i = 0; i < store.size(); ++i) store.value(i) = random_matrix(
        static_cast<int>(store.value(i).rows()), static_cast<int>(store.value(i).cols()), rng, 0.7);
    const Matrix<double> x = random_matrix(3, 2, rng);
    auto loss = [&]() {
        Tape<double> t(&store);
        return t.value(t.sum(mlp_apply(t, mlp, t.constant(x))))(0, 0);
    };
    auto analytic = [&]() {
        Tape<double> t(&store);
        t.backward(t.sum(mlp_apply(t, mlp, t.constant(x))));
    };
    CHECK(max_fd_rel_error(store, loss, analytic) < 1e-4);
}

TEST_CASE("every tape operation differentiates correctly") {
    std::mt19937_64 rng(11);
    ParamStore<double> store;
    const auto a = store.add("a", random_matrix(5, 3, rng));
    const auto w = store.add("w", random_matrix(3, 4, rng));
    const auto b = store.add("b", random_matrix(1, 4, rng));
    const auto gamma = store.add("gamma", random_matrix(1, 4, rng));
    const auto beta = store.add("beta", random_matrix(1, 4, rng));
    const auto other = store.add("other", random_matrix(5, 4, rng));
    const std::vector<int> gather = {4, 0, 0, 2, 3, 1};
    const std::vector<int> scatter = {1, 1, 0, 2, 2, 2};
    const Matrix<double> target = random_matrix(3, 8, rng);

    auto build = [&](Tape<double>& t) {
        Var h = t.linear(t.param(a), t.param(w), t.param(b));
        h = t.silu(h);
        h = t.add(h, t.param(other));
        h = t.layer_norm(h, t.param(gamma), t.param(beta), 1e-5);
        h = t.gather_rows(h, gather);
        h = t.scatter_add_rows(h, scatter, 3);
        h = t.concat_cols({h, t.scale(h, 0.5)});
        h = t.add_row(h, t.slice_rows(t.matmul(t.param(a), t.concat_cols({t.param(w), t.param(w)})), 1, 1));
        h = t.slice_rows(h, 0, 3);
        return t.weighted_mse(h, t.constant(target), 1.7);
    };
    auto loss = [&]() {
        Tape<double> t(&store);
        return t.value(build(t))(0, 0);
    };
    auto analytic = [&]() {
        Tape<double> t(&store);
        t.backward(build(t));
    };
    CHECK(max_fd_rel_error(store, loss, analytic) < 1e-4);
}

TEST_CASE("cond_layer_norm examples") {
    ParamStore<double> store;
    std::mt19937_64 rng(3);
    CondNorm n = make_cond_norm(store, "n", 2, 3, rng);
    store.value(n.gamma_w).setZero();
    store.value(n.beta_w).setZero();
    Tape<double> tape(&store);
    const Var g = tape.constant(random_matrix(1, 3, rng));

    SUBCASE("a symmetric row is already normalized") {
        Matrix<double> x(1, 2);
        x << 1.0, -1.0;
        const auto& y = tape.value(cond_layer_norm(tape, n, tape.constant(x), g));
        CHECK(y(0, 0) == doctest::Approx(1.0).epsilon(1e-5));
        CHECK(y(0, 1) == doctest::Approx(-1.0).epsilon(1e-5));
    }
    SUBCASE("gamma 2 and beta 0.5") {
        store.value(n.gamma_b).setConstant(2.0);
        store.value(n.beta_b).setConstant(0.5);
        Matrix<double> x(1, 2);
        x << 0.0, 2.0;
        const auto& y = tape.value(cond_layer_norm(tape, n, tape.constant(x), g));
        CHECK(y(0, 0) == doctest::Approx(-1.5).epsilon(1e-5));
        CHECK(y(0, 1) == doctest::Approx(2.5).epsilon(1e-5));
    }
    SUBCASE("a constant row maps to beta") {
        store.value(n.beta_b) << 0.25, -0.75;
        Matrix<double> x = Matrix<double>::Constant(1, 2, 3.0);
        const auto& y = tape.value(cond_layer_norm(tape, n, tape.constant(x), g));
        CHECK(y(0, 0) == doctest::Approx(0.25));
        CHECK(y(0, 1) == doctest::Approx(-0.75));
    }
}

TEST_CASE("layer norm with unit scale yields zero mean and unit variance rows") {
    std::mt19937_64 rng(5);
    Tape<double> tape;
    const Matrix<double> x = random_matrix(20, 16, rng, 3.0);
    const auto& y = tape.value(tape.layer_norm(tape.constant(x), tape.constant(Matrix<double>::Ones(1, 16)),
                                              tape.constant(Matrix<double>::Zero(1, 16)), 1e-5));
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
        const double mean = y.row(r).mean();
        const double var = (y.row(r).array() - mean).square().mean();
        CHECK(std::abs(mean) < 1e-10);
        CHECK(std::abs(var - 1.0) < 1e-4);
    }
}

TEST_CASE("layer norm rejects an empty feature dimension") {
    Tape<double> tape;
    CHECK_THROWS(tape.layer_norm(tape.constant(Matrix<double>(2, 0)), tape.constant(Matrix<double>(1, 0)),
                                 tape.constant(Matrix<double>(1, 0)), 1e-5));
}

TEST_CASE("backward of w squared") {
    ParamStore<double> store;
    const auto w = store.add("w", Matrix<double>::Constant(1, 1, 3.0));
    const auto unused = store.add("unused", Matrix<double>::Constant(2, 2, 1.0));
    Tape<double> tape(&store);
    const Var p = tape.param(w);
    tape.backward(tape.sum(tape.matmul(p, p)));
    CHECK(store.grad(w)(0, 0) == 6.0);
    CHECK(store.grad(unused).isZero());
}

TEST_CASE("backward refuses a non-finite loss before writing gradients") {
    ParamStore<double> store;
    const auto w = store.add("w", Matrix<double>::Constant(1, 1, std::numeric_limits<double>::infinity()));
    Tape<double> tape(&store);
    CHECK_THROWS_AS(tape.backward(tape.sum(tape.param(w))), NumericError);
    CHECK(store.grad(w).isZero());
}

TEST_CASE("forward values and gradients are deterministic") {
    auto run = []() {
        ParamStore<double> store;
        std::mt19937_64 rng(9);
        Mlp mlp = make_mlp(store, "m", {3, 8, 2}, Activation::SiLU, rng);
        Tape<double> t(&store);
        const Matrix<double> x = random_matrix(4, 3, rng);
        t.backward(t.sum(mlp_apply(t, mlp, t.constant(x))));
        std::vector<double> out;
        for (std::size_t i = 0; i < store.size(); ++i) {
            for (Eigen::Index k = 0; k < store.grad(i).size(); ++k) out.push_back(store.grad(i).data()[k]);
        }
        return out;
    };
    CHECK(run() == run());
}

TEST_CASE("adamw leaves parameters alone for zero gradients without decay") {
    ParamStore<double> store;
    const auto w = store.add("w", Matrix<double>::Constant(2, 2, 0.7));
    AdamWConfig cfg;
    cfg.weight_decay = 0.0;
    AdamW<double> opt(cfg);
    opt.step(store, 1e-3);
    CHECK(store.value(w).isApproxToConstant(0.7, 0.0));
    CHECK(opt.steps_taken() == 1);
}

TEST_CASE("adamw first step matches the hand-evaluated recurrence") {
    ParamStore<double> store;
    const auto w = store.add("w", Matrix<double>::Constant(1, 1, 1.0));
    store.grad(w)(0, 0) = 0.5;
    AdamW<double> opt;
    opt.step(store, 1e-4);
    const double m_hat = 0.5, v_hat = 0.25;
    const double expected = 1.0 * (1.0 - 1e-4 * 1e-2) - 1e-4 * m_hat / (std::sqrt(v_hat) + 1e-8);
    CHECK(store.value(w)(0, 0) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(store.value(w)(0, 0) == doctest::Approx(1.0 - 1.01e-4).epsilon(1e-10));
}

TEST_CASE("adamw clips the global norm before the moment update") {
    ParamStore<double> store;
    const auto a = store.add("a", Matrix<double>::Zero(1, 1));
    const auto b = store.add("b", Matrix<double>::Zero(1, 1));
    store.grad(a)(0, 0) = 6.0;
    store.grad(b)(0, 0) = 8.0;
    AdamW<double> opt;
    const double norm = opt.step(store, 1e-4);
    CHECK(norm == doctest::Approx(10.0));
    CHECK(opt.first_moment(a)(0, 0) == doctest::Approx(0.1 * 3.0));
    CHECK(opt.first_moment(b)(0, 0) == doctest::Approx(0.1 * 4.0));
    CHECK(opt.second_moment(b)(0, 0) == doctest::Approx(0.001 * 16.0));
}

TEST_CASE("adamw names the parameter holding a non-finite gradient") {
    ParamStore<double> store;
    const auto a = store.add("ok", Matrix<double>::Constant(1, 1, 2.0));
    const auto b = store.add("bad", Matrix<double>::Zero(1, 1));
    store.grad(b)(0, 0) = std::nan("");
    AdamW<double> opt;
    CHECK_THROWS_WITH_AS(opt.step(store, 1e-3), doctest::Contains("bad"), NumericError);
    CHECK(store.value(a)(0, 0) == 2.0);
}

TEST_CASE("cosine learning rate endpoints and monotonicity") {
    CHECK(cosine_lr(1e-4, 0.0, 0, 1000) == 1e-4);
    CHECK(cosine_lr(1e-4, 0.0, 1000, 1000) == 0.0);
    CHECK(cosine_lr(1e-4, 1e-6, 1000, 1000) == 1e-6);
    CHECK(cosine_lr(1e-4, 0.0, 500, 1000) == doctest::Approx(5e-5));
    double prev = cosine_lr(1e-4, 0.0, 0, 1000);
    for (int s = 1; s <= 1000; ++s) {
        const double lr = cosine_lr(1e-4, 0.0, s, 1000);
        CHECK(lr <= prev);
        prev = lr;
    }
}

TEST_CASE("checkpoint round trip preserves values and metadata") {
    const auto dir = mfd::testing::temp_dir("ckpt");
    std::mt19937_64 rng(2);
    ParamStore<double> store;
    store.add("layer.w", random_matrix(3, 5, rng));
    store.add("layer.b", random_matrix(1, 5, rng));
    const CheckpointMeta meta = {{"sigma_data", "0.5"}, {"mode", "multiscale"}};
    save_checkpoint(dir / "a.ckpt", store, meta);
    CheckpointMeta back_meta;
    const ParamStore<double> back = load_checkpoint<double>(dir / "a.ckpt", &back_meta);
    CHECK(back_meta == meta);
    REQUIRE(back.size() == 2);
    CHECK(back.name(0) == "layer.w");
    CHECK(back.value(0) == store.value(0));
    CHECK(back.value(1) == store.value(1));

    const ParamStore<float> f = store.cast<float>();
    save_checkpoint(dir / "f.ckpt", f, meta);
    const ParamStore<double> widened = load_checkpoint<double>(dir / "f.ckpt");
    CHECK(widened.value(0) == f.value(0).cast<double>());
    CHECK(load_checkpoint_meta(dir / "f.ckpt").at("mode") == "multiscale");
}

TEST_CASE("parameter store rejects duplicate names") {
    ParamStore<double> store;
    store.add("x", Matrix<double>::Zero(1, 1));
    CHECK_THROWS(store.add("x", Matrix<double>::Zero(1, 1)));
    CHECK(store.grad(0).rows() == 1);
}
