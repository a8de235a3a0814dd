#include "mfd/synthcfd/dataset.hpp"

#include "mfd/error.hpp"
#include "mfd/util/io.hpp"
#include "mfd/util/parallel.hpp"
#include "mfd/util/seed.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>
#include <sstream>

namespace mfd {

void DatasetConfig::validate() const {
    if (train_meshes < 1 || test_meshes < 1 || train_meshes + test_meshes < 3) {
        throw ConfigError("data: need at least one train mesh, one test mesh and three meshes in total");
    }
    if (angles < 1) throw ConfigError("data: angles must be >= 1");
    if (target_nodes < 50) throw ConfigError("data: target_nodes must be >= 50");
    if (!(half_width > 0.0)) throw ConfigError("data: half_width must be positive");
    if (!(u_inf > 0.0)) throw ConfigError("data: u_inf must be positive");
    if (image_rounds < 0) throw ConfigError("data: image_rounds must be >= 0");
    for (const auto& [idx, set] : fixed_obstacles) {
        if (idx < 0 || idx >= train_meshes + test_meshes) {
            throw ConfigError("data: fixed obstacle layout for mesh " + std::to_string(idx) + " is out of range");
        }
    }
}

std::vector<ManifestEntry> DatasetManifest::split(const std::string& name) const {
    std::vector<ManifestEntry> out;
    for (const auto& e : entries) {
        if (e.split == name) out.push_back(e);
    }
    return out;
}

std::vector<std::string> DatasetManifest::meshes(const std::string& split_name) const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& e : entries) {
        if (!split_name.empty() && e.split != split_name) continue;
        if (seen.insert(e.mesh_path).second) out.push_back(e.mesh_path);
    }
    return out;
}

std::string format_manifest(const DatasetManifest& m) {
    std::ostringstream os;
    os << "# mfd manifest v1\n";
    os << "# seed " << m.seed << "\n";
    os << "# velocity_scale " << format_double(m.velocity_scale) << "\n";
    for (const auto& e : m.entries) {
        os << e.split << ' ' << e.mesh_path << ' ' << format_double(e.angle_deg) << ' ' << e.field_path << '\n';
    }
    return os.str();
}

DatasetManifest parse_manifest(const std::string& text, const std::string& source) {
    DatasetManifest m;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const std::string where = source + ":" + std::to_string(line_no);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::istringstream ls(line);
        if (line[0] == '#') {
            std::string hash, key, value;
            ls >> hash >> key >> value;
            if (key == "seed") m.seed = static_cast<std::uint64_t>(parse_int(value, where));
            if (key == "velocity_scale") m.velocity_scale = parse_double(value, where);
            continue;
        }
        ManifestEntry e;
        std::string angle, extra;
        if (!(ls >> e.split >> e.mesh_path >> angle >> e.field_path) || (ls >> extra)) {
            throw ParseError(where + ": expected 'SPLIT mesh_path angle_deg field_path'");
        }
        e.angle_deg = parse_double(angle, where);
        m.entries.push_back(std::move(e));
    }
    return m;
}

DatasetManifest load_manifest(const std::filesystem::path& dir) {
    const auto path = dir / kManifestName;
    return parse_manifest(read_file(path), path.string());
}

void save_manifest(const std::filesystem::path& dir, const DatasetManifest& m) {
    write_file_atomic(dir / kManifestName, format_manifest(m));
}

std::vector<double> angle_grid(int n) {
    if (n < 1) throw ConfigError("angle_grid: need at least one angle");
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = 360.0 * k / n;
    return out;
}

std::vector<ObstacleSet> dataset_obstacles(const DatasetConfig& cfg) {
    cfg.validate();
    const int total = cfg.train_meshes + cfg.test_meshes;
    std::vector<ObstacleSet> out;
    for (int k = 0; k < total; ++k) {
        auto it = cfg.fixed_obstacles.find(k);
        if (it != cfg.fixed_obstacles.end()) {
            try {
                it->second.validate();
            } catch (const ValidationError& e) {
                throw ValidationError("mesh " + std::to_string(k) + ": " + e.what());
            }
            out.push_back(it->second);
            continue;
        }
        std::mt19937_64 rng(derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(k)));
        out.push_back(sample_obstacles(cfg.obstacles, cfg.half_width, rng));
    }
    return out;
}

namespace {

std::string mesh_name(int k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "meshes/mesh_%02d.mesh", k);
    return buf;
}

std::string field_name(int k, int a) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "fields/mesh_%02d_%03d.field", k, a);
    return buf;
}

}  // namespace

DatasetManifest generate_dataset(const DatasetConfig& cfg, const std::filesystem::path& dir) {
    const std::vector<ObstacleSet> layouts = dataset_obstacles(cfg);
    const int total = static_cast<int>(layouts.size());
    const std::vector<double> angles = angle_grid(cfg.angles);

    std::vector<Mesh> meshes(static_cast<std::size_t>(total));
    parallel_for(meshes.size(), cfg.workers, [&](std::size_t k) {
        meshes[k] = generate_mesh(layouts[k], cfg.target_nodes, derive_seed(cfg.seed, k), cfg.grading);
    });

    const std::size_t n_angles = angles.size();
    std::vector<std::vector<Vec2>> raw(meshes.size() * n_angles);
    parallel_for(raw.size(), cfg.workers, [&](std::size_t i) {
        const std::size_t k = i / n_angles, a = i % n_angles;
        const double phi = angles[a] * std::numbers::pi / 180.0;
        raw[i] = potential_flow(layouts[k], phi, cfg.u_inf, meshes[k].coords, cfg.image_rounds);
    });

    double peak = 0.0;
    for (std::size_t i = 0; i < static_cast<std::size_t>(cfg.train_meshes) * n_angles; ++i) {
        for (const Vec2& v : raw[i]) peak = std::max({peak, std::abs(v.x), std::abs(v.y)});
    }
    if (!(peak > 0.0)) throw NumericError("generate_dataset: training fields are identically zero");

    DatasetManifest manifest;
    manifest.seed = cfg.seed;
    manifest.velocity_scale = 1.0 / peak;
    std::filesystem::create_directories(dir / "meshes");
    std::filesystem::create_directories(dir / "fields");
    for (int k = 0; k < total; ++k) save_mesh(dir / mesh_name(k), meshes[static_cast<std::size_t>(k)]);
    parallel_for(raw.size(), cfg.workers, [&](std::size_t i) {
        const int k = static_cast<int>(i / n_angles), a = static_cast<int>(i % n_angles);
        FieldData f;
        f.angle_deg = angles[static_cast<std::size_t>(a)];
        f.velocity.reserve(raw[i].size());
        for (const Vec2& v : raw[i]) f.velocity.push_back(manifest.velocity_scale * v);
        save_field(dir / field_name(k, a), f);
    });
    for (int k = 0; k < total; ++k) {
        for (std::size_t a = 0; a < n_angles; ++a) {
            manifest.entries.push_back({k < cfg.train_meshes ? "train" : "test", mesh_name(k), angles[a],
                                        field_name(k, static_cast<int>(a))});
        }
    }
    save_manifest(dir, manifest);
    return manifest;
}

}  // namespace mfd
