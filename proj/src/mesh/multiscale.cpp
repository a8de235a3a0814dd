#include "mfd/mesh/multiscale.hpp"

#include "mfd/error.hpp"
#include "mfd/util/io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>

namespace mfd {

const char* edge_kind_name(EdgeKind k) {
    switch (k) {
        case EdgeKind::O2O: return "o2o";
        case EdgeKind::O2R: return "o2r";
        case EdgeKind::R2R: return "r2r";
        case EdgeKind::R2O: return "r2o";
    }
    return "?";
}

const EdgeSet& MultiscaleGraph::edges(EdgeKind k) const {
    switch (k) {
        case EdgeKind::O2O: return o2o;
        case EdgeKind::O2R: return o2r;
        case EdgeKind::R2R: return r2r;
        case EdgeKind::R2O: return r2o;
    }
    return o2o;
}

ReducedMesh build_reduced_mesh(const Mesh& mesh, double target_ratio) {
    const std::size_t n = mesh.num_nodes();
    if (n == 0) throw ConfigError("build_reduced_mesh: empty mesh");
    if (!(target_ratio >= 1.0) || !std::isfinite(target_ratio)) {
        throw ConfigError("build_reduced_mesh: target_ratio must be >= 1");
    }
    std::size_t keep = n;
    if (target_ratio > 1.0) {
        keep = static_cast<std::size_t>(std::llround(static_cast<double>(n) / target_ratio));
        if (keep < 4) {
            throw ConfigError("build_reduced_mesh: ratio " + format_double(target_ratio) + " leaves " +
                              std::to_string(keep) + " of " + std::to_string(n) + " nodes (need >= 4)");
        }
    }

    Vec2 centroid{};
    for (const auto& p : mesh.coords) centroid = centroid + p;
    centroid = (1.0 / static_cast<double>(n)) * centroid;

    std::size_t first = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 d = mesh.coords[i] - centroid;
        const double d2 = dot(d, d);
        if (d2 < best) {
            best = d2;
            first = i;
        }
    }

    ReducedMesh out;
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::vector<int> nearest(n, 0);
    std::size_t center = first;
    for (std::size_t k = 0; k < keep; ++k) {
        out.source_node.push_back(static_cast<int>(center));
        const Vec2 c = mesh.coords[center];
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2 d = mesh.coords[i] - c;
            const double d2 = dot(d, d);
            if (d2 < dist[i]) {
                dist[i] = d2;
                nearest[i] = static_cast<int>(k);
            }
        }
        if (k + 1 == keep) break;
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (dist[i] > far_d) {
                far_d = dist[i];
                far = i;
            }
        }
        center = far;
    }
    out.assignment = std::move(nearest);
    for (int s : out.source_node) {
        out.mesh.coords.push_back(mesh.coords[s]);
        out.mesh.types.push_back(mesh.types[s]);
    }
    return out;
}

MultiscaleGraph build_edge_sets(const Mesh& mesh, const ReducedMesh& reduced) {
    const std::size_t n = mesh.num_nodes();
    const std::size_t nr = reduced.mesh.num_nodes();
    if (reduced.assignment.size() != n) throw ConfigError("build_edge_sets: assignment does not cover the mesh");
    for (int a : reduced.assignment) {
        if (a < 0 || static_cast<std::size_t>(a) >= nr) throw ConfigError("build_edge_sets: assignment out of range");
    }

    std::vector<char> touched(n, 0);
    for (const auto& t : mesh.triangles) {
        for (int v : t) touched[v] = 1;
    }
    std::vector<int> isolated;
    for (std::size_t i = 0; i < n; ++i) {
        if (!touched[i]) isolated.push_back(static_cast<int>(i));
    }
    if (!isolated.empty()) {
        std::string ids;
        for (std::size_t k = 0; k < isolated.size() && k < 20; ++k) ids += (k ? "," : "") + std::to_string(isolated[k]);
        if (isolated.size() > 20) ids += ",...";
        throw ValidationError("build_edge_sets: " + std::to_string(isolated.size()) +
                              " isolated node(s) with no incident triangle: " + ids);
    }

    MultiscaleGraph g;
    g.original = mesh;
    g.reduced = reduced;
    g.o2o.kind = EdgeKind::O2O;
    g.o2r.kind = EdgeKind::O2R;
    g.r2r.kind = EdgeKind::R2R;
    g.r2o.kind = EdgeKind::R2O;

    const auto edges = unique_edges(mesh);
    for (const auto& e : edges) {
        g.o2o.src.push_back(e[0]);
        g.o2o.dst.push_back(e[1]);
        g.o2o.src.push_back(e[1]);
        g.o2o.dst.push_back(e[0]);
    }

    std::set<std::pair<int, int>> coarse;
    for (const auto& e : edges) {
        const int a = reduced.assignment[e[0]], b = reduced.assignment[e[1]];
        if (a == b) continue;
        coarse.insert({a, b});
        coarse.insert({b, a});
    }
    for (const auto& [a, b] : coarse) {
        g.r2r.src.push_back(a);
        g.r2r.dst.push_back(b);
    }

    const auto nb = node_neighbors(mesh);
    std::vector<int> targets;
    for (std::size_t i = 0; i < n; ++i) {
        targets.clear();
        targets.push_back(reduced.assignment[i]);
        for (int j : nb[i]) targets.push_back(reduced.assignment[j]);
        std::sort(targets.begin(), targets.end());
        targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
        for (int r : targets) {
            g.o2r.src.push_back(static_cast<int>(i));
            g.o2r.dst.push_back(r);
        }
    }
    g.r2o.src = g.o2r.dst;
    g.r2o.dst = g.o2r.src;
    return g;
}

MultiscaleGraph build_multiscale_graph(const Mesh& mesh, double target_ratio) {
    MultiscaleGraph g = build_edge_sets(mesh, build_reduced_mesh(mesh, target_ratio));
    g.target_ratio = target_ratio;
    return g;
}

namespace {

std::vector<std::vector<int>> adjacency(std::size_t num_nodes, const EdgeSet& edges) {
    std::vector<std::vector<int>> adj(num_nodes);
    for (std::size_t e = 0; e < edges.size(); ++e) adj[edges.src[e]].push_back(edges.dst[e]);
    return adj;
}

std::vector<int> bfs(const std::vector<std::vector<int>>& adj, int start) {
    std::vector<int> depth(adj.size(), -1);
    std::queue<int> q;
    depth[start] = 0;
    q.push(start);
    while (!q.empty()) {
        const int u = q.front();
        q.pop();
        for (int v : adj[u]) {
            if (depth[v] < 0) {
                depth[v] = depth[u] + 1;
                q.push(v);
            }
        }
    }
    return depth;
}

std::vector<int> active_nodes(std::size_t num_nodes, const EdgeSet& edges) {
    std::vector<char> used(num_nodes, 0);
    for (std::size_t e = 0; e < edges.size(); ++e) used[edges.src[e]] = used[edges.dst[e]] = 1;
    std::vector<int> active;
    for (std::size_t i = 0; i < num_nodes; ++i) {
        if (used[i]) active.push_back(static_cast<int>(i));
    }
    return active;
}

}  // namespace

int graph_diameter(std::size_t num_nodes, const EdgeSet& edges) {
    const auto adj = adjacency(num_nodes, edges);
    const auto active = active_nodes(num_nodes, edges);
    int diameter = 0;
    for (int s : active) {
        const auto depth = bfs(adj, s);
        for (int v : active) {
            if (depth[v] < 0) return -1;
            diameter = std::max(diameter, depth[v]);
        }
    }
    return diameter;
}

bool is_connected(std::size_t num_nodes, const EdgeSet& edges) {
    const auto active = active_nodes(num_nodes, edges);
    if (active.empty()) return true;
    const auto depth = bfs(adjacency(num_nodes, edges), active.front());
    return std::all_of(active.begin(), active.end(), [&](int v) { return depth[v] >= 0; });
}

std::string format_graph(const MultiscaleGraph& g) {
    std::string out = "GRAPH v1 " + std::to_string(g.num_original()) + " " + std::to_string(g.num_reduced()) + " " +
                      format_double(g.target_ratio) + "\n";
    out += "reduced_source";
    for (int s : g.reduced.source_node) out += " " + std::to_string(s);
    out += "\n";
    for (EdgeKind k : kAllEdgeKinds) {
        const EdgeSet& e = g.edges(k);
        out += std::string("edges ") + edge_kind_name(k) + " " + std::to_string(e.size()) + "\n";
        for (std::size_t i = 0; i < e.size(); ++i) out += std::to_string(e.src[i]) + " " + std::to_string(e.dst[i]) + "\n";
    }
    return out;
}

void save_graph(const std::filesystem::path& path, const MultiscaleGraph& graph) {
    write_file_atomic(path, format_graph(graph));
}

}  // namespace mfd
