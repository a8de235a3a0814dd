#include "mfd/numcore/layers.hpp"

#include "mfd/error.hpp"

#include <cmath>

namespace mfd {

template <typename T>
Matrix<T> truncated_normal(int rows, int cols, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix<T> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        double z = normal(rng);
        while (std::abs(z) > 2.0) z = normal(rng);
        m.data()[i] = static_cast<T>(z * stddev);
    }
    return m;
}

template <typename T>
Mlp make_mlp(ParamStore<T>& store, const std::string& prefix, std::vector<int> widths, Activation act,
             std::mt19937_64& rng, double init_std) {
    if (widths.size() < 2) throw ConfigError(prefix + ": an MLP needs at least input and output widths");
    Mlp mlp;
    mlp.widths = std::move(widths);
    mlp.activation = act;
    for (std::size_t l = 0; l + 1 < mlp.widths.size(); ++l) {
        const int in = mlp.widths[l], out = mlp.widths[l + 1];
        if (in <= 0 || out <= 0) throw ConfigError(prefix + ": nonpositive width at layer " + std::to_string(l));
        const std::string base = prefix + ".l" + std::to_string(l);
        const double std = init_std > 0.0 ? init_std : 1.0 / std::sqrt(static_cast<double>(in));
        mlp.weight.push_back(store.add(base + ".w", truncated_normal<T>(in, out, std, rng)));
        mlp.bias.push_back(store.add(base + ".b", Matrix<T>::Zero(1, out)));
    }
    return mlp;
}

template <typename T>
CondNorm make_cond_norm(ParamStore<T>& store, const std::string& prefix, int width, int cond_width,
                        std::mt19937_64& rng, double init_std) {
    CondNorm n;
    n.width = width;
    const double std = init_std > 0.0 ? init_std : 1.0 / std::sqrt(static_cast<double>(cond_width));
    n.gamma_w = store.add(prefix + ".gamma.w", truncated_normal<T>(cond_width, width, std, rng));
    n.gamma_b = store.add(prefix + ".gamma.b", Matrix<T>::Ones(1, width));
    n.beta_w = store.add(prefix + ".beta.w", truncated_normal<T>(cond_width, width, std, rng));
    n.beta_b = store.add(prefix + ".beta.b", Matrix<T>::Zero(1, width));
    return n;
}

template <typename T>
Var mlp_apply(Tape<T>& tape, const Mlp& mlp, Var x) {
    Var h = x;
    const std::size_t n_layers = mlp.weight.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        const auto in_cols = tape.value(h).cols();
        if (in_cols != mlp.widths[l]) {
            throw ConfigError("mlp layer " + std::to_string(l) + ": expected input width " +
                              std::to_string(mlp.widths[l]) + ", got " + std::to_string(in_cols));
        }
        h = tape.linear(h, tape.param(mlp.weight[l]), tape.param(mlp.bias[l]));
        if (l + 1 < n_layers && mlp.activation == Activation::SiLU) h = tape.silu(h);
    }
    return h;
}

template <typename T>
Var mlp_first_weight_block(Tape<T>& tape, const Mlp& mlp, int start, int count) {
    if (mlp.weight.empty()) throw ConfigError("mlp: no layers");
    return tape.slice_rows(tape.param(mlp.weight[0]), start, count);
}

template <typename T>
Var mlp_apply_after_first(Tape<T>& tape, const Mlp& mlp, Var pre_activation) {
    const std::size_t n_layers = mlp.weight.size();
    if (n_layers == 0) throw ConfigError("mlp: no layers");
    if (tape.value(pre_activation).cols() != mlp.widths[1]) {
        throw ConfigError("mlp layer 0: expected output width " + std::to_string(mlp.widths[1]));
    }
    Var h = pre_activation;
    for (std::size_t l = 1; l < n_layers; ++l) {
        if (mlp.activation == Activation::SiLU) h = tape.silu(h);
        h = tape.linear(h, tape.param(mlp.weight[l]), tape.param(mlp.bias[l]));
    }
    return h;
}

template <typename T>
Var cond_layer_norm(Tape<T>& tape, const CondNorm& norm, Var x, Var g) {
    Var gamma = tape.linear(g, tape.param(norm.gamma_w), tape.param(norm.gamma_b));
    Var beta = tape.linear(g, tape.param(norm.beta_w), tape.param(norm.beta_b));
    return tape.layer_norm(x, gamma, beta, static_cast<T>(kLayerNormEps));
}

#define MFD_INSTANTIATE(T)                                                                                       \
    template Matrix<T> truncated_normal<T>(int, int, double, std::mt19937_64&);                                 \
    template Mlp make_mlp<T>(ParamStore<T>&, const std::string&, std::vector<int>, Activation, std::mt19937_64&, \
                             double);                                                                            \
    template CondNorm make_cond_norm<T>(ParamStore<T>&, const std::string&, int, int, std::mt19937_64&, double); \
    template Var mlp_apply<T>(Tape<T>&, const Mlp&, Var);                                                       \
    template Var mlp_first_weight_block<T>(Tape<T>&, const Mlp&, int, int);                                     \
    template Var mlp_apply_after_first<T>(Tape<T>&, const Mlp&, Var);                                           \
    template Var cond_layer_norm<T>(Tape<T>&, const CondNorm&, Var, Var);

MFD_INSTANTIATE(float)
MFD_INSTANTIATE(double)

#undef MFD_INSTANTIATE

}  // namespace mfd
