#pragma once

#include "mfd/mesh/mesh.hpp"

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace mfd {

enum class EdgeKind { O2O, O2R, R2R, R2O };

inline constexpr std::array<EdgeKind, 4> kAllEdgeKinds = {EdgeKind::O2O, EdgeKind::O2R, EdgeKind::R2R,
                                                         EdgeKind::R2O};

const char* edge_kind_name(EdgeKind k);

/// Directed edges. For O2R, src indexes original nodes and dst reduced nodes;
/// R2O is the reverse.
struct EdgeSet {
    EdgeKind kind = EdgeKind::O2O;
    std::vector<int> src;
    std::vector<int> dst;

    std::size_t size() const { return src.size(); }
};

/// A subset of the original nodes plus the original -> reduced assignment.
struct ReducedMesh {
    Mesh mesh;                       // coordinates/types copied from the selected nodes, no triangles
    std::vector<int> source_node;    // reduced index -> original index
    std::vector<int> assignment;     // original index -> reduced index (nearest selected node)
};

/// Farthest-point sampling seeded at the node nearest the centroid, keeping
/// round(n / target_ratio) nodes. target_ratio == 1 keeps every node.
/// Throws ConfigError for target_ratio < 1 or when fewer than 4 nodes would
/// remain from a genuine reduction.
ReducedMesh build_reduced_mesh(const Mesh& mesh, double target_ratio);

struct MultiscaleGraph {
    Mesh original;
    ReducedMesh reduced;
    EdgeSet o2o, o2r, r2r, r2o;
    double target_ratio = 0.0;

    const EdgeSet& edges(EdgeKind k) const;
    std::size_t num_original() const { return original.num_nodes(); }
    std::size_t num_reduced() const { return reduced.mesh.num_nodes(); }
};

/// Assembles the four edge sets:
///  - o2o: both directions of every unique triangle edge;
///  - r2r: both directions of every pair of reduced nodes whose clusters
///    share an original-mesh edge;
///  - o2r: i -> assignment(i), plus i -> assignment(j) for each 1-ring
///    neighbour j of i in a different cluster;
///  - r2o: the exact reversal of o2r.
/// Throws ValidationError listing original nodes with no incident triangle.
MultiscaleGraph build_edge_sets(const Mesh& mesh, const ReducedMesh& reduced);

MultiscaleGraph build_multiscale_graph(const Mesh& mesh, double target_ratio);

/// Hop diameter of a directed edge set restricted to its non-isolated nodes
/// (BFS from every node); -1 if disconnected.
int graph_diameter(std::size_t num_nodes, const EdgeSet& edges);
bool is_connected(std::size_t num_nodes, const EdgeSet& edges);

/// GRAPH v1 text format: header, reduced source indices, then each edge set.
void save_graph(const std::filesystem::path& path, const MultiscaleGraph& graph);
std::string format_graph(const MultiscaleGraph& graph);

}  // namespace mfd
