#include "mfd/denoiser/denoiser.hpp"

#include "mfd/diffusion/edm.hpp"
#include "mfd/error.hpp"

#include <cmath>

namespace mfd {

const char* mode_name(DenoiserMode m) { return m == DenoiserMode::Multiscale ? "multiscale" : "single_scale"; }

DenoiserMode parse_mode(const std::string& s) {
    if (s == "multiscale") return DenoiserMode::Multiscale;
    if (s == "single_scale") return DenoiserMode::SingleScale;
    throw ConfigError("unknown denoiser mode '" + s + "' (expected multiscale or single_scale)");
}

void DenoiserConfig::validate() const {
    if (hidden < 1) throw ConfigError("model: hidden must be >= 1");
    if (layers_o2o < 1 || layers_o2r < 1 || layers_r2r < 1 || layers_r2o < 1 || single_scale_layers < 1) {
        throw ConfigError("model: layer counts must be >= 1");
    }
    if (fourier_bands < 1 || harmonic_orders < 1) throw ConfigError("model: embedding sizes must be >= 1");
    if (!(init_std >= 0.0)) throw ConfigError("model: init_std must be >= 0");
}

RowVector<double> fourier_features(double c, int bands) {
    RowVector<double> f(2 * bands);
    for (int k = 0; k < bands; ++k) {
        const double w = bands == 1 ? 1.0 : std::exp(std::log(32.0) * k / (bands - 1));
        f(2 * k) = std::cos(w * c);
        f(2 * k + 1) = std::sin(w * c);
    }
    return f;
}

RowVector<double> harmonic_features(double phi, int orders) {
    RowVector<double> f(2 * orders);
    for (int k = 1; k <= orders; ++k) {
        f(2 * (k - 1)) = std::cos(k * phi);
        f(2 * (k - 1) + 1) = std::sin(k * phi);
    }
    return f;
}

template <typename T>
GraphContext<T>::GraphContext(const MultiscaleGraph& g, double angle)
    : graph(&g), phi(angle), nodes(g.original), edges(edge_features<T>(g, angle)) {}

template <typename T>
typename Denoiser<T>::Subnetwork Denoiser<T>::make_subnetwork(EdgeKind kind, const std::string& name, int node_in,
                                                              int layers, std::mt19937_64& rng) {
    const int h = cfg_.hidden;
    const double s = cfg_.init_std;
    ParamStore<T>& st = *store_;
    Subnetwork net;
    net.kind = kind;
    net.node_encoder = make_mlp<T>(st, name + ".enc_node", {node_in, h, h, h}, Activation::SiLU, rng, s);
    net.edge_encoder = make_mlp<T>(st, name + ".enc_edge", {kEdgeFeatureCount, h, h, h}, Activation::SiLU, rng, s);
    for (int l = 0; l < layers; ++l) {
        const std::string p = name + ".proc" + std::to_string(l);
        ProcessorLayer layer;
        layer.edge_mlp = make_mlp<T>(st, p + ".edge", {3 * h, h, h}, Activation::SiLU, rng, s);
        layer.edge_norm = make_cond_norm<T>(st, p + ".edge_norm", h, h, rng, s);
        layer.node_mlp = make_mlp<T>(st, p + ".node", {2 * h, h, h}, Activation::SiLU, rng, s);
        layer.node_norm = make_cond_norm<T>(st, p + ".node_norm", h, h, rng, s);
        net.layers.push_back(std::move(layer));
    }
    net.decoder = make_mlp<T>(st, name + ".dec", {h, h, h, h}, Activation::SiLU, rng, s);
    return net;
}

template <typename T>
Denoiser<T>::Denoiser(const DenoiserConfig& cfg, ParamStore<T>& store, std::uint64_t seed) : cfg_(cfg), store_(&store) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    const int h = cfg_.hidden;
    const double s = cfg_.init_std;
    noise_embed_ = make_mlp<T>(store, "cond.noise", {2 * cfg_.fourier_bands, h, h}, Activation::SiLU, rng, s);
    angle_embed_ = make_mlp<T>(store, "cond.angle", {2 * cfg_.harmonic_orders, h, h}, Activation::SiLU, rng, s);
    cond_fuse_ = make_mlp<T>(store, "cond.fuse", {2 * h, h}, Activation::Linear, rng, s);
    if (cfg_.mode == DenoiserMode::Multiscale) {
        subnets_.push_back(make_subnetwork(EdgeKind::O2O, "o2o", node_col::kCount, cfg_.layers_o2o, rng));
        subnets_.push_back(make_subnetwork(EdgeKind::O2R, "o2r", node_col::kCount, cfg_.layers_o2r, rng));
        subnets_.push_back(make_subnetwork(EdgeKind::R2R, "r2r", h, cfg_.layers_r2r, rng));
        subnets_.push_back(make_subnetwork(EdgeKind::R2O, "r2o", h, cfg_.layers_r2o, rng));
    } else {
        subnets_.push_back(make_subnetwork(EdgeKind::O2O, "o2o", node_col::kCount, cfg_.single_scale_layers, rng));
    }
    readout_w_ = store.add("readout.w", Matrix<T>::Zero(h, 2));
    readout_b_ = store.add("readout.b", Matrix<T>::Zero(1, 2));
}

template <typename T>
Var Denoiser<T>::conditioning(Tape<T>& tape, double sigma, double phi) const {
    if (!(sigma > 0.0)) throw ConfigError("conditioning: sigma must be > 0");
    const Matrix<T> ff = fourier_features(c_noise(sigma), cfg_.fourier_bands).template cast<T>();
    const Matrix<T> hf = harmonic_features(phi, cfg_.harmonic_orders).template cast<T>();
    Var e_sigma = mlp_apply(tape, noise_embed_, tape.constant(ff));
    Var e_phi = mlp_apply(tape, angle_embed_, tape.constant(hf));
    return mlp_apply(tape, cond_fuse_, tape.concat_cols({e_sigma, e_phi}));
}

template <typename T>
Var Denoiser<T>::run_subnetwork(Tape<T>& tape, const Subnetwork& net, const EdgeSet& edges,
                                const Matrix<T>& edge_feats, Var src_state, Var dst_input, bool same_level,
                                Var g) const {
    const int n_dst = static_cast<int>(tape.value(dst_input).rows());
    const std::span<const int> src_idx(edges.src), dst_idx(edges.dst);
    Var h = mlp_apply(tape, net.node_encoder, dst_input);
    Var e = mlp_apply(tape, net.edge_encoder, tape.constant(edge_feats));
    for (const auto& layer : net.layers) {
        Var src = same_level ? h : src_state;
        // First edge layer on [h_src, h_dst, e], with node blocks projected before gathering.
        const int hw = cfg_.hidden;
        Var p_src = tape.matmul(src, mlp_first_weight_block(tape, layer.edge_mlp, 0, hw));
        Var p_dst = tape.matmul(h, mlp_first_weight_block(tape, layer.edge_mlp, hw, hw));
        Var p_edge = tape.linear(e, mlp_first_weight_block(tape, layer.edge_mlp, 2 * hw, hw),
                                 tape.param(layer.edge_mlp.bias[0]));
        Var pre = tape.add(tape.add(tape.gather_rows(p_src, src_idx), tape.gather_rows(p_dst, dst_idx)), p_edge);
        Var m = cond_layer_norm(tape, layer.edge_norm, mlp_apply_after_first(tape, layer.edge_mlp, pre), g);
        e = tape.add(e, m);
        Var agg = tape.scatter_add_rows(m, dst_idx, n_dst);
        Var upd = cond_layer_norm(tape, layer.node_norm, mlp_apply(tape, layer.node_mlp, tape.concat_cols({h, agg})), g);
        h = tape.add(h, upd);
    }
    return tape.add(h, mlp_apply(tape, net.decoder, h));
}

template <typename T>
Var Denoiser<T>::forward(Tape<T>& tape, const GraphContext<T>& ctx, Var node_feats, Var g) const {
    const MultiscaleGraph& graph = *ctx.graph;
    if (static_cast<std::size_t>(tape.value(node_feats).rows()) != graph.num_original()) {
        throw ConfigError("denoiser: node feature rows do not match the mesh");
    }
    if (cfg_.mode == DenoiserMode::SingleScale) {
        Var h = run_subnetwork(tape, subnets_[0], graph.o2o, ctx.edges.o2o, Var{}, node_feats, true, g);
        return tape.linear(h, tape.param(readout_w_), tape.param(readout_b_));
    }
    if (graph.num_reduced() == 0) throw ConfigError("denoiser: multiscale mode requires a reduced mesh");
    for (EdgeKind k : kAllEdgeKinds) {
        const EdgeSet& es = graph.edges(k);
        if ((k == EdgeKind::O2R || k == EdgeKind::R2O) && es.size() == 0) {
            throw ConfigError(std::string("denoiser: multiscale mode requires the ") + edge_kind_name(k) + " edge set");
        }
        if (static_cast<std::size_t>(ctx.edges.get(k).rows()) != es.size()) {
            throw ConfigError(std::string("denoiser: edge features out of sync with ") + edge_kind_name(k));
        }
    }
    Var h_o = run_subnetwork(tape, subnets_[0], graph.o2o, ctx.edges.o2o, Var{}, node_feats, true, g);
    Var x_r = tape.gather_rows(node_feats, std::span<const int>(graph.reduced.source_node));
    Var h_r = run_subnetwork(tape, subnets_[1], graph.o2r, ctx.edges.o2r, h_o, x_r, false, g);
    h_r = run_subnetwork(tape, subnets_[2], graph.r2r, ctx.edges.r2r, Var{}, h_r, true, g);
    Var out = run_subnetwork(tape, subnets_[3], graph.r2o, ctx.edges.r2o, h_r, h_o, false, g);
    return tape.linear(out, tape.param(readout_w_), tape.param(readout_b_));
}

template <typename T>
Var precondition_apply(Tape<T>& tape, const Matrix<T>& x_noisy, double sigma, double sigma_data,
                       const std::function<Var(Tape<T>&, const Matrix<T>&, double)>& forward_fn) {
    if (!(sigma > 0.0)) throw ConfigError("precondition: sigma must be > 0");
    const Matrix<T> x_in = x_noisy * static_cast<T>(c_in(sigma, sigma_data));
    Var f = forward_fn(tape, x_in, c_noise(sigma));
    Var skip = tape.scale(tape.constant(x_noisy), static_cast<T>(c_skip(sigma, sigma_data)));
    return tape.add(skip, tape.scale(f, static_cast<T>(c_out(sigma, sigma_data))));
}

template <typename T>
Var Denoiser<T>::denoise(Tape<T>& tape, const GraphContext<T>& ctx, const Matrix<T>& x_noisy, double sigma,
                         double sigma_data) const {
    return precondition_apply<T>(tape, x_noisy, sigma, sigma_data,
                                 [&](Tape<T>& tp, const Matrix<T>& x_in, double) {
                                     Var feats = tp.constant(ctx.nodes.build(x_in, ctx.phi));
                                     return forward(tp, ctx, feats, conditioning(tp, sigma, ctx.phi));
                                 });
}

template <typename T>
Matrix<double> Denoiser<T>::denoise_value(const GraphContext<T>& ctx, const Matrix<double>& x_noisy, double sigma,
                                          double sigma_data) const {
    Tape<T> tape(store_);
    Var d = denoise(tape, ctx, x_noisy.template cast<T>(), sigma, sigma_data);
    return tape.value(d).template cast<double>();
}

template struct GraphContext<float>;
template struct GraphContext<double>;
template class Denoiser<float>;
template class Denoiser<double>;
template Var precondition_apply<float>(Tape<float>&, const Matrix<float>&, double, double,
                                       const std::function<Var(Tape<float>&, const Matrix<float>&, double)>&);
template Var precondition_apply<double>(Tape<double>&, const Matrix<double>&, double, double,
                                        const std::function<Var(Tape<double>&, const Matrix<double>&, double)>&);

}  // namespace mfd
