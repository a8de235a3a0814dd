#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mfd {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
double norm(Vec2 a);

enum class NodeType : std::uint8_t { Fluid, Wall, Boundary };

char node_type_code(NodeType t);

/// Node coordinates (meters), node labels and triangle connectivity.
struct Mesh {
    std::vector<Vec2> coords;
    std::vector<NodeType> types;
    std::vector<std::array<int, 3>> triangles;

    std::size_t num_nodes() const { return coords.size(); }
};

inline constexpr double kDuplicateNodeTolerance = 1e-9;

/// Throws ValidationError on non-finite coordinates, size mismatch,
/// out-of-range or repeated triangle indices, zero-area triangles, or two
/// nodes closer than kDuplicateNodeTolerance.
void validate_mesh(const Mesh& mesh);

Mesh load_mesh(const std::filesystem::path& path);
void save_mesh(const std::filesystem::path& path, const Mesh& mesh);
std::string format_mesh(const Mesh& mesh);
Mesh parse_mesh(const std::string& text, const std::string& source);

/// Per-node velocity on a mesh plus the inflow angle it was computed for.
struct FieldData {
    double angle_deg = 0.0;
    std::vector<Vec2> velocity;
};

FieldData load_field(const std::filesystem::path& path);
void save_field(const std::filesystem::path& path, const FieldData& field);
std::string format_field(const FieldData& field);
FieldData parse_field(const std::string& text, const std::string& source);

/// Sorted, deduplicated 1-ring neighbours from triangle edges.
std::vector<std::vector<int>> node_neighbors(const Mesh& mesh);

/// Unique undirected triangle edges (i < j), sorted.
std::vector<std::array<int, 2>> unique_edges(const Mesh& mesh);

/// Per-node least-squares gradient of a scalar sampled at the nodes, using
/// inverse-square-distance weights over the 1-ring. Nodes whose ring does not
/// span two directions get a zero gradient and are listed in `degenerate`.
struct GradientResult {
    std::vector<Vec2> grad;
    std::vector<int> degenerate;
};
GradientResult lsq_gradient(const Mesh& mesh, const std::vector<std::vector<int>>& neighbors,
                            const std::vector<double>& values);

/// Second-order variant: a quadratic fit over the 2-ring (row weights
/// 1/|d|^2) whose linear coefficients are returned. Nodes whose 2-ring cannot
/// support the fit use the linear 1-ring estimate instead.
GradientResult lsq_gradient_quadratic(const Mesh& mesh, const std::vector<std::vector<int>>& neighbors,
                                      const std::vector<double>& values);

}  // namespace mfd
