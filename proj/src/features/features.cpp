#include "mfd/features/features.hpp"

#include "mfd/error.hpp"

#include <algorithm>
#include <cmath>

namespace mfd {

DomainFrame domain_frame(const Mesh& mesh) {
    DomainFrame f;
    if (mesh.coords.empty()) return f;
    double xmin = mesh.coords[0].x, xmax = xmin, ymin = mesh.coords[0].y, ymax = ymin;
    for (const auto& p : mesh.coords) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    f.center = {0.5 * (xmin + xmax), 0.5 * (ymin + ymax)};
    const double hw = 0.5 * std::max(xmax - xmin, ymax - ymin);
    f.half_width = hw > 0.0 ? hw : 1.0;
    return f;
}

std::vector<Vec2> normalized_coords(const Mesh& mesh) {
    const DomainFrame f = domain_frame(mesh);
    std::vector<Vec2> out;
    out.reserve(mesh.num_nodes());
    for (const auto& p : mesh.coords) out.push_back(f.normalize(p));
    return out;
}

std::array<double, 5> edge_feature_row(Vec2 from, Vec2 to, double phi) {
    const Vec2 d = to - from;
    const double len = norm(d);
    if (len == 0.0) return {0.0, 0.0, 0.0, 0.0, 0.0};
    const Vec2 wind{std::cos(phi), std::sin(phi)};
    const Vec2 wind_perp{-std::sin(phi), std::cos(phi)};
    return {d.x, d.y, len, dot(d, wind) / len, dot(d, wind_perp) / len};
}

template <typename T>
NodeFeatureBuilder<T>::NodeFeatureBuilder(const Mesh& mesh) {
    const auto xy = normalized_coords(mesh);
    static_ = Matrix<T>::Zero(static_cast<Eigen::Index>(mesh.num_nodes()), node_col::kCount);
    for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        switch (mesh.types[i]) {
            case NodeType::Wall: static_(r, node_col::kWall) = T(1); break;
            case NodeType::Boundary: static_(r, node_col::kBoundary) = T(1); break;
            case NodeType::Fluid: static_(r, node_col::kFluid) = T(1); break;
        }
        static_(r, node_col::kX) = static_cast<T>(xy[i].x);
        static_(r, node_col::kY) = static_cast<T>(xy[i].y);
    }
}

template <typename T>
Matrix<T> NodeFeatureBuilder<T>::build(const Matrix<T>& noisy, double phi) const {
    if (noisy.rows() != static_.rows() || noisy.cols() != 2) {
        throw ConfigError("node_features: field has " + std::to_string(noisy.rows()) + "x" +
                          std::to_string(noisy.cols()) + " values for " + std::to_string(static_.rows()) +
                          " nodes (expected Nx2)");
    }
    Matrix<T> x = static_;
    x.col(node_col::kUx) = noisy.col(0);
    x.col(node_col::kUy) = noisy.col(1);
    x.col(node_col::kCosPhi).setConstant(static_cast<T>(std::cos(phi)));
    x.col(node_col::kSinPhi).setConstant(static_cast<T>(std::sin(phi)));
    return x;
}

template <typename T>
Matrix<T> node_features(const Mesh& mesh, const Matrix<T>& noisy, double phi) {
    return NodeFeatureBuilder<T>(mesh).build(noisy, phi);
}

template <typename T>
const Matrix<T>& EdgeFeatures<T>::get(EdgeKind k) const {
    switch (k) {
        case EdgeKind::O2O: return o2o;
        case EdgeKind::O2R: return o2r;
        case EdgeKind::R2R: return r2r;
        case EdgeKind::R2O: return r2o;
    }
    return o2o;
}

template <typename T>
Matrix<T> edge_features(const std::vector<Vec2>& src_coords, const std::vector<Vec2>& dst_coords,
                        const EdgeSet& edges, double phi) {
    Matrix<T> out(static_cast<Eigen::Index>(edges.size()), kEdgeFeatureCount);
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const auto row = edge_feature_row(src_coords.at(edges.src[e]), dst_coords.at(edges.dst[e]), phi);
        for (int k = 0; k < kEdgeFeatureCount; ++k) out(static_cast<Eigen::Index>(e), k) = static_cast<T>(row[k]);
    }
    return out;
}

template <typename T>
EdgeFeatures<T> edge_features(const MultiscaleGraph& graph, double phi) {
    const DomainFrame frame = domain_frame(graph.original);
    std::vector<Vec2> orig, red;
    for (const auto& p : graph.original.coords) orig.push_back(frame.normalize(p));
    for (int s : graph.reduced.source_node) red.push_back(orig[s]);
    EdgeFeatures<T> f;
    f.o2o = edge_features<T>(orig, orig, graph.o2o, phi);
    f.o2r = edge_features<T>(orig, red, graph.o2r, phi);
    f.r2r = edge_features<T>(red, red, graph.r2r, phi);
    f.r2o = edge_features<T>(red, orig, graph.r2o, phi);
    return f;
}

template class NodeFeatureBuilder<float>;
template class NodeFeatureBuilder<double>;
template struct EdgeFeatures<float>;
template struct EdgeFeatures<double>;
template Matrix<float> node_features<float>(const Mesh&, const Matrix<float>&, double);
template Matrix<double> node_features<double>(const Mesh&, const Matrix<double>&, double);
template EdgeFeatures<float> edge_features<float>(const MultiscaleGraph&, double);
template EdgeFeatures<double> edge_features<double>(const MultiscaleGraph&, double);
template Matrix<float> edge_features<float>(const std::vector<Vec2>&, const std::vector<Vec2>&, const EdgeSet&, double);
template Matrix<double> edge_features<double>(const std::vector<Vec2>&, const std::vector<Vec2>&, const EdgeSet&,
                                              double);

}  // namespace mfd
