#pragma once

#include "mfd/numcore/tape.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace mfd {

enum class Activation { Linear, SiLU };

/// Stack of affine layers with a hidden activation; the last layer is linear.
struct Mlp {
    std::vector<int> widths;  // input, hidden..., output
    std::vector<std::size_t> weight;
    std::vector<std::size_t> bias;
    Activation activation = Activation::SiLU;

    int in_width() const { return widths.front(); }
    int out_width() const { return widths.back(); }
};

/// Normalization whose scale and shift are affine functions of a global
/// conditioning row g: gamma = g*Wg + bg, beta = g*Wb + bb (bg starts at 1).
struct CondNorm {
    int width = 0;
    std::size_t gamma_w = 0, gamma_b = 0, beta_w = 0, beta_b = 0;
};

inline constexpr double kLayerNormEps = 1e-5;

/// Truncated normal (+-2 std) initializer shared by every weight matrix.
template <typename T>
Matrix<T> truncated_normal(int rows, int cols, double stddev, std::mt19937_64& rng);

/// init_std <= 0 selects 1/sqrt(fan_in) per layer.
template <typename T>
Mlp make_mlp(ParamStore<T>& store, const std::string& prefix, std::vector<int> widths, Activation act,
             std::mt19937_64& rng, double init_std = 0.02);

template <typename T>
CondNorm make_cond_norm(ParamStore<T>& store, const std::string& prefix, int width, int cond_width,
                        std::mt19937_64& rng, double init_std = 0.02);

/// Applies the MLP row-wise. Throws ConfigError naming the layer whose input
/// width disagrees with x.
template <typename T>
Var mlp_apply(Tape<T>& tape, const Mlp& mlp, Var x);

/// Rows [start, start + count) of the first weight matrix, for callers that
/// evaluate the first layer on column blocks of a concatenated input.
template <typename T>
Var mlp_first_weight_block(Tape<T>& tape, const Mlp& mlp, int start, int count);

/// Finishes an MLP given the first layer's pre-activation (bias included).
template <typename T>
Var mlp_apply_after_first(Tape<T>& tape, const Mlp& mlp, Var pre_activation);

template <typename T>
Var cond_layer_norm(Tape<T>& tape, const CondNorm& norm, Var x, Var g);

}  // namespace mfd
