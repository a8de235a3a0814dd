#pragma once

#include "mfd/synthcfd/synthcfd.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mfd {

struct DatasetConfig {
    std::uint64_t seed = 0;
    int train_meshes = 4;
    int test_meshes = 2;
    int angles = 36;  // evenly spaced over [0, 360)
    int target_nodes = 800;
    double half_width = 1.0;
    double u_inf = 1.0;
    int image_rounds = 3;
    ObstacleSampling obstacles;
    MeshGrading grading;
    /// Fixed layouts for specific mesh indices (train meshes first).
    std::map<int, ObstacleSet> fixed_obstacles;
    int workers = 1;

    void validate() const;
};

struct ManifestEntry {
    std::string split;  // "train", "test", or a free tag for generated fields
    std::string mesh_path;
    double angle_deg = 0.0;
    std::string field_path;
};

/// Line-oriented index of a field directory. Paths are relative to the
/// directory holding the manifest. Header comments carry the generation seed
/// and the factor that was applied to the raw velocities.
struct DatasetManifest {
    std::uint64_t seed = 0;
    double velocity_scale = 1.0;
    std::vector<ManifestEntry> entries;

    std::vector<ManifestEntry> split(const std::string& name) const;
    /// Distinct mesh paths in first-appearance order, optionally for one split.
    std::vector<std::string> meshes(const std::string& split_name = "") const;
};

inline constexpr const char* kManifestName = "manifest.txt";

std::string format_manifest(const DatasetManifest& m);
DatasetManifest parse_manifest(const std::string& text, const std::string& source);
DatasetManifest load_manifest(const std::filesystem::path& dir);
void save_manifest(const std::filesystem::path& dir, const DatasetManifest& m);

/// Angle list k * 360 / n for k in [0, n).
std::vector<double> angle_grid(int n);

/// Builds every obstacle layout and validates it before any output exists.
std::vector<ObstacleSet> dataset_obstacles(const DatasetConfig& cfg);

/// Writes meshes/, fields/ and the manifest under `dir`. Velocities are
/// multiplied by 1 / max |component| over the training fields so the training
/// set spans [-1, 1]; the factor is recorded in the manifest.
DatasetManifest generate_dataset(const DatasetConfig& cfg, const std::filesystem::path& dir);

}  // namespace mfd
