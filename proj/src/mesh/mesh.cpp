#include "mfd/mesh/mesh.hpp"

#include "mfd/error.hpp"
#include "mfd/util/io.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mfd {

double norm(Vec2 a) { return std::hypot(a.x, a.y); }

char node_type_code(NodeType t) {
    switch (t) {
        case NodeType::Fluid: return 'F';
        case NodeType::Wall: return 'W';
        case NodeType::Boundary: return 'B';
    }
    return '?';
}

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

/// Line reader that skips blank lines and tracks 1-based line numbers.
class LineReader {
public:
    LineReader(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {}

    bool next(std::vector<std::string_view>& tokens) {
        while (pos_ < text_.size()) {
            std::size_t end = text_.find('\n', pos_);
            if (end == std::string::npos) end = text_.size();
            std::string_view line(text_.data() + pos_, end - pos_);
            pos_ = end + 1;
            ++line_;
            tokens = split_ws(line);
            if (!tokens.empty()) return true;
        }
        return false;
    }

    std::string where() const { return source_ + ":" + std::to_string(line_); }

private:
    const std::string& text_;
    std::string source_;
    std::size_t pos_ = 0;
    int line_ = 0;
};

}  // namespace

void validate_mesh(const Mesh& mesh) {
    const std::size_t n = mesh.coords.size();
    if (mesh.types.size() != n) throw ValidationError("mesh: node type count does not match node count");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(mesh.coords[i].x) || !std::isfinite(mesh.coords[i].y)) {
            throw ValidationError("mesh: node " + std::to_string(i) + " has non-finite coordinates");
        }
    }
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        for (int v : tri) {
            if (v < 0 || static_cast<std::size_t>(v) >= n) {
                throw ValidationError("mesh: triangle " + std::to_string(t) + " index " + std::to_string(v) +
                                      " out of range");
            }
        }
        if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
            throw ValidationError("mesh: triangle " + std::to_string(t) + " repeats a vertex");
        }
        const Vec2 a = mesh.coords[tri[0]], b = mesh.coords[tri[1]], c = mesh.coords[tri[2]];
        const double area2 = cross(b - a, c - a);
        const double scale = std::max({norm(b - a), norm(c - a), norm(c - b)});
        if (std::abs(area2) <= 1e-14 * scale * scale) {
            throw ValidationError("mesh: triangle " + std::to_string(t) + " has zero area");
        }
    }
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return mesh.coords[a].x < mesh.coords[b].x; });
    for (std::size_t k = 0; k < n; ++k) {
        const Vec2 p = mesh.coords[order[k]];
        for (std::size_t m = k + 1; m < n && mesh.coords[order[m]].x - p.x <= kDuplicateNodeTolerance; ++m) {
            if (norm(mesh.coords[order[m]] - p) <= kDuplicateNodeTolerance) {
                throw ValidationError("mesh: nodes " + std::to_string(std::min(order[k], order[m])) + " and " +
                                      std::to_string(std::max(order[k], order[m])) + " coincide");
            }
        }
    }
}

Mesh parse_mesh(const std::string& text, const std::string& source) {
    LineReader reader(text, source);
    std::vector<std::string_view> tok;
    if (!reader.next(tok) || tok.size() != 4 || tok[0] != "MESH" || tok[1] != "v1") {
        throw ParseError(reader.where() + ": expected header 'MESH v1 <n_nodes> <n_tris>'");
    }
    const long long n_nodes = parse_int(tok[2], reader.where());
    const long long n_tris = parse_int(tok[3], reader.where());
    if (n_nodes < 0 || n_tris < 0) throw ParseError(reader.where() + ": negative count in header");

    Mesh mesh;
    mesh.coords.reserve(static_cast<std::size_t>(n_nodes));
    mesh.types.reserve(static_cast<std::size_t>(n_nodes));
    for (long long i = 0; i < n_nodes; ++i) {
        if (!reader.next(tok)) throw ParseError(source + ": unexpected end of file in node " + std::to_string(i));
        if (tok.size() != 3) throw ParseError(reader.where() + ": node " + std::to_string(i) + " needs 'x y type'");
        const double x = parse_double(tok[0], reader.where());
        const double y = parse_double(tok[1], reader.where());
        NodeType type;
        if (tok[2] == "F") {
            type = NodeType::Fluid;
        } else if (tok[2] == "W") {
            type = NodeType::Wall;
        } else if (tok[2] == "B") {
            type = NodeType::Boundary;
        } else {
            throw ParseError(reader.where() + ": node " + std::to_string(i) + " has unknown type '" +
                             std::string(tok[2]) + "'");
        }
        mesh.coords.push_back({x, y});
        mesh.types.push_back(type);
    }
    mesh.triangles.reserve(static_cast<std::size_t>(n_tris));
    for (long long t = 0; t < n_tris; ++t) {
        if (!reader.next(tok)) throw ParseError(source + ": unexpected end of file in triangle " + std::to_string(t));
        if (tok.size() != 3) throw ParseError(reader.where() + ": triangle " + std::to_string(t) + " needs 'i j k'");
        std::array<int, 3> tri{};
        for (int k = 0; k < 3; ++k) {
            const long long v = parse_int(tok[k], reader.where());
            if (v < 0 || v >= n_nodes) {
                throw ParseError(reader.where() + ": triangle " + std::to_string(t) + " index " + std::to_string(v) +
                                 " out of range");
            }
            tri[k] = static_cast<int>(v);
        }
        mesh.triangles.push_back(tri);
    }
    if (reader.next(tok)) throw ParseError(reader.where() + ": trailing content after triangles");
    try {
        validate_mesh(mesh);
    } catch (const ValidationError& e) {
        throw ParseError(source + ": " + e.what());
    }
    return mesh;
}

std::string format_mesh(const Mesh& mesh) {
    std::string out = "MESH v1 " + std::to_string(mesh.num_nodes()) + " " + std::to_string(mesh.triangles.size()) + "\n";
    for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
        out += format_double(mesh.coords[i].x);
        out += ' ';
        out += format_double(mesh.coords[i].y);
        out += ' ';
        out += node_type_code(mesh.types[i]);
        out += '\n';
    }
    for (const auto& t : mesh.triangles) {
        out += std::to_string(t[0]) + " " + std::to_string(t[1]) + " " + std::to_string(t[2]) + "\n";
    }
    return out;
}

Mesh load_mesh(const std::filesystem::path& path) { return parse_mesh(read_file(path), path.string()); }

void save_mesh(const std::filesystem::path& path, const Mesh& mesh) { write_file_atomic(path, format_mesh(mesh)); }

FieldData parse_field(const std::string& text, const std::string& source) {
    LineReader reader(text, source);
    std::vector<std::string_view> tok;
    if (!reader.next(tok) || tok.size() != 4 || tok[0] != "FIELD" || tok[1] != "v1") {
        throw ParseError(reader.where() + ": expected header 'FIELD v1 <n_nodes> <angle_deg>'");
    }
    const long long n = parse_int(tok[2], reader.where());
    if (n < 0) throw ParseError(reader.where() + ": negative node count");
    FieldData f;
    f.angle_deg = parse_double(tok[3], reader.where());
    f.velocity.reserve(static_cast<std::size_t>(n));
    for (long long i = 0; i < n; ++i) {
        if (!reader.next(tok)) throw ParseError(source + ": unexpected end of file at node " + std::to_string(i));
        if (tok.size() != 2) throw ParseError(reader.where() + ": node " + std::to_string(i) + " needs 'ux uy'");
        const double ux = parse_double(tok[0], reader.where());
        const double uy = parse_double(tok[1], reader.where());
        if (!std::isfinite(ux) || !std::isfinite(uy)) {
            throw ParseError(reader.where() + ": non-finite velocity at node " + std::to_string(i));
        }
        f.velocity.push_back({ux, uy});
    }
    if (reader.next(tok)) throw ParseError(reader.where() + ": trailing content after field values");
    return f;
}

std::string format_field(const FieldData& field) {
    std::string out =
        "FIELD v1 " + std::to_string(field.velocity.size()) + " " + format_double(field.angle_deg) + "\n";
    for (const auto& v : field.velocity) {
        out += format_double(v.x);
        out += ' ';
        out += format_double(v.y);
        out += '\n';
    }
    return out;
}

FieldData load_field(const std::filesystem::path& path) { return parse_field(read_file(path), path.string()); }

void save_field(const std::filesystem::path& path, const FieldData& field) {
    write_file_atomic(path, format_field(field));
}

std::vector<std::array<int, 2>> unique_edges(const Mesh& mesh) {
    std::vector<std::array<int, 2>> edges;
    edges.reserve(mesh.triangles.size() * 3);
    for (const auto& t : mesh.triangles) {
        for (int k = 0; k < 3; ++k) {
            const int a = t[k], b = t[(k + 1) % 3];
            edges.push_back({std::min(a, b), std::max(a, b)});
        }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

std::vector<std::vector<int>> node_neighbors(const Mesh& mesh) {
    std::vector<std::vector<int>> nb(mesh.num_nodes());
    for (const auto& e : unique_edges(mesh)) {
        nb[e[0]].push_back(e[1]);
        nb[e[1]].push_back(e[0]);
    }
    for (auto& v : nb) std::sort(v.begin(), v.end());
    return nb;
}

GradientResult lsq_gradient(const Mesh& mesh, const std::vector<std::vector<int>>& neighbors,
                            const std::vector<double>& values) {
    GradientResult out;
    out.grad.assign(mesh.num_nodes(), Vec2{});
    for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
        double axx = 0, axy = 0, ayy = 0, bx = 0, by = 0, scale = 0;
        for (int j : neighbors[i]) {
            const Vec2 d = mesh.coords[j] - mesh.coords[i];
            const double d2 = dot(d, d);
            if (d2 <= 0.0) continue;
            const double w = 1.0 / d2;
            const double dv = values[j] - values[i];
            axx += w * d.x * d.x;
            axy += w * d.x * d.y;
            ayy += w * d.y * d.y;
            bx += w * d.x * dv;
            by += w * d.y * dv;
            scale += w * d2;
        }
        const double det = axx * ayy - axy * axy;
        // Weighted directions are unit vectors, so det/scale^2 measures their spread.
        if (neighbors[i].size() < 2 || scale <= 0.0 || det <= 1e-10 * scale * scale) {
            out.degenerate.push_back(static_cast<int>(i));
            continue;
        }
        out.grad[i] = {(ayy * bx - axy * by) / det, (axx * by - axy * bx) / det};
    }
    return out;
}

GradientResult lsq_gradient_quadratic(const Mesh& mesh, const std::vector<std::vector<int>>& neighbors,
                                      const std::vector<double>& values) {
    GradientResult linear = lsq_gradient(mesh, neighbors, values);
    GradientResult out;
    out.grad = linear.grad;
    std::vector<char> degenerate(mesh.num_nodes(), 0);
    for (int i : linear.degenerate) degenerate[static_cast<std::size_t>(i)] = 1;
    std::vector<int> ring;
    for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
        ring.clear();
        for (int j : neighbors[i]) {
            ring.push_back(j);
            for (int k : neighbors[static_cast<std::size_t>(j)]) ring.push_back(k);
        }
        std::sort(ring.begin(), ring.end());
        ring.erase(std::unique(ring.begin(), ring.end()), ring.end());
        ring.erase(std::remove(ring.begin(), ring.end(), static_cast<int>(i)), ring.end());
        if (ring.size() < 6) {
            if (degenerate[i]) out.degenerate.push_back(static_cast<int>(i));
            continue;
        }
        Eigen::MatrixXd a(static_cast<Eigen::Index>(ring.size()), 5);
        Eigen::VectorXd b(static_cast<Eigen::Index>(ring.size()));
        for (std::size_t r = 0; r < ring.size(); ++r) {
            const Vec2 d = mesh.coords[static_cast<std::size_t>(ring[r])] - mesh.coords[i];
            const double w = 1.0 / dot(d, d);
            const auto row = static_cast<Eigen::Index>(r);
            a.row(row) << w * d.x, w * d.y, 0.5 * w * d.x * d.x, w * d.x * d.y, 0.5 * w * d.y * d.y;
            b(row) = w * (values[static_cast<std::size_t>(ring[r])] - values[i]);
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
        if (qr.rank() < 5) {
            if (degenerate[i]) out.degenerate.push_back(static_cast<int>(i));
            continue;
        }
        const Eigen::VectorXd x = qr.solve(b);
        out.grad[i] = {x(0), x(1)};
    }
    return out;
}

}  // namespace mfd
