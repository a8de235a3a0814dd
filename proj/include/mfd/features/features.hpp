#pragma once

#include "mfd/mesh/multiscale.hpp"
#include "mfd/numcore/tensor.hpp"

#include <array>
#include <vector>

namespace mfd {

/// Node input layout. One-hot order is (wall, boundary, fluid).
namespace node_col {
inline constexpr int kUx = 0;
inline constexpr int kUy = 1;
inline constexpr int kWall = 2;
inline constexpr int kBoundary = 3;
inline constexpr int kFluid = 4;
inline constexpr int kX = 5;
inline constexpr int kY = 6;
inline constexpr int kCosPhi = 7;
inline constexpr int kSinPhi = 8;
inline constexpr int kCount = 9;
}  // namespace node_col

/// Edge input layout: displacement, length, projections on the wind
/// direction and its left normal.
inline constexpr int kEdgeFeatureCount = 5;

/// Maps the mesh bounding box onto [-1, 1] using its larger half-extent.
struct DomainFrame {
    Vec2 center;
    double half_width = 1.0;

    Vec2 normalize(Vec2 p) const { return (1.0 / half_width) * (p - center); }
};

DomainFrame domain_frame(const Mesh& mesh);
std::vector<Vec2> normalized_coords(const Mesh& mesh);

/// (dx, dy, d, p_par, p_perp) for the edge from -> to; all zero when from == to.
std::array<double, 5> edge_feature_row(Vec2 from, Vec2 to, double phi);

/// N x 9 node inputs from a noisy N x 2 field. Throws ConfigError on a node
/// count mismatch.
template <typename T>
Matrix<T> node_features(const Mesh& mesh, const Matrix<T>& noisy, double phi);

/// Same as node_features with the geometry columns precomputed.
template <typename T>
class NodeFeatureBuilder {
public:
    explicit NodeFeatureBuilder(const Mesh& mesh);
    Matrix<T> build(const Matrix<T>& noisy, double phi) const;
    std::size_t num_nodes() const { return static_cast<std::size_t>(static_.rows()); }

private:
    Matrix<T> static_;
};

template <typename T>
struct EdgeFeatures {
    Matrix<T> o2o, o2r, r2r, r2o;
    const Matrix<T>& get(EdgeKind k) const;
};

/// Edge inputs for every edge set, computed on normalized coordinates.
template <typename T>
EdgeFeatures<T> edge_features(const MultiscaleGraph& graph, double phi);

template <typename T>
Matrix<T> edge_features(const std::vector<Vec2>& src_coords, const std::vector<Vec2>& dst_coords,
                        const EdgeSet& edges, double phi);

}  // namespace mfd
