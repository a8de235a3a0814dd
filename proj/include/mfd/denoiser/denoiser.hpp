#pragma once

#include "mfd/features/features.hpp"
#include "mfd/mesh/multiscale.hpp"
#include "mfd/numcore/layers.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mfd {

enum class DenoiserMode { Multiscale, SingleScale };

const char* mode_name(DenoiserMode m);
DenoiserMode parse_mode(const std::string& s);

struct DenoiserConfig {
    int hidden = 64;
    int layers_o2o = 2;
    int layers_o2r = 1;
    int layers_r2r = 6;
    int layers_r2o = 1;
    int single_scale_layers = 3;
    int fourier_bands = 16;
    int harmonic_orders = 4;
    DenoiserMode mode = DenoiserMode::Multiscale;
    // Weight init: truncated normal with this std; 0 selects 1/sqrt(fan_in).
    double init_std = 0.0;

    void validate() const;
};

/// Sinusoidal embedding of c_noise at geometrically spaced frequencies in
/// [1, 32]: (cos w_0 c, sin w_0 c, cos w_1 c, ...), 2 * bands values.
RowVector<double> fourier_features(double c_noise, int bands);

/// (cos phi, sin phi, cos 2 phi, sin 2 phi, ...), 2 * orders values.
RowVector<double> harmonic_features(double phi, int orders);

/// Per-(graph, angle) inputs that do not depend on the noisy field.
template <typename T>
struct GraphContext {
    GraphContext(const MultiscaleGraph& graph, double phi);

    const MultiscaleGraph* graph;
    double phi;
    NodeFeatureBuilder<T> nodes;
    EdgeFeatures<T> edges;
};

/// The raw network F_theta plus the preconditioned denoiser D_theta.
///
/// Four encode-process-decode subnetworks run in the order o2o -> o2r ->
/// r2r -> r2o; single-scale mode keeps only o2o. Every processor layer
/// computes edge messages from (source state, destination state, edge
/// state), sums them at destinations and applies a residual node update,
/// with both MLP outputs passed through a layer norm modulated by the
/// global conditioning vector g.
template <typename T>
class Denoiser {
public:
    /// Registers all parameters in `store` under "<subnet>.<part>" names.
    Denoiser(const DenoiserConfig& cfg, ParamStore<T>& store, std::uint64_t seed);

    const DenoiserConfig& config() const { return cfg_; }

    /// 1 x hidden global conditioning vector for (sigma, phi). Throws for sigma <= 0.
    Var conditioning(Tape<T>& tape, double sigma, double phi) const;

    /// Raw output F_theta on the original nodes, N x 2.
    Var forward(Tape<T>& tape, const GraphContext<T>& ctx, Var node_feats, Var g) const;

    /// D_theta(x, sigma) = c_skip x + c_out F_theta(c_in x, c_noise(sigma)).
    Var denoise(Tape<T>& tape, const GraphContext<T>& ctx, const Matrix<T>& x_noisy, double sigma,
                double sigma_data) const;

    /// Tape-free evaluation in double for the sampler.
    Matrix<double> denoise_value(const GraphContext<T>& ctx, const Matrix<double>& x_noisy, double sigma,
                                 double sigma_data) const;

private:
    struct ProcessorLayer {
        Mlp edge_mlp;
        CondNorm edge_norm;
        Mlp node_mlp;
        CondNorm node_norm;
    };

    struct Subnetwork {
        EdgeKind kind;
        Mlp node_encoder;
        Mlp edge_encoder;
        std::vector<ProcessorLayer> layers;
        Mlp decoder;
    };

    Subnetwork make_subnetwork(EdgeKind kind, const std::string& name, int node_in, int layers,
                               std::mt19937_64& rng);
    Var run_subnetwork(Tape<T>& tape, const Subnetwork& net, const EdgeSet& edges, const Matrix<T>& edge_feats,
                       Var src_state, Var dst_input, bool same_level, Var g) const;

    DenoiserConfig cfg_;
    ParamStore<T>* store_;
    Mlp noise_embed_;
    Mlp angle_embed_;
    Mlp cond_fuse_;
    std::vector<Subnetwork> subnets_;
    std::size_t readout_w_ = 0, readout_b_ = 0;
};

/// Generic D = c_skip x + c_out F(c_in x, c_noise) around any raw network.
template <typename T>
Var precondition_apply(Tape<T>& tape, const Matrix<T>& x_noisy, double sigma, double sigma_data,
                       const std::function<Var(Tape<T>&, const Matrix<T>& x_in, double c_noise)>& forward_fn);

extern template class Denoiser<float>;
extern template class Denoiser<double>;

}  // namespace mfd
