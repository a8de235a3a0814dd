#pragma once

#include "mfd/mesh/mesh.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace mfd {

struct Disk {
    Vec2 center;
    double radius = 0.0;
};

/// Disk obstacles inside the square [-L, L]^2.
struct ObstacleSet {
    std::vector<Disk> disks;
    double half_width = 1.0;

    /// Minimum gap between two disk boundaries, as a fraction of L.
    static constexpr double kClearance = 0.05;

    /// Throws ValidationError for nonpositive radii, disks leaving the domain
    /// or pairs closer than kClearance * L.
    void validate() const;

    /// Fraction of the square's area covered by disks.
    double covered_fraction() const;

    /// Index of the disk containing p (with relative slack `tol` on the
    /// radius), or -1.
    int disk_containing(Vec2 p, double tol = 1e-12) const;
};

/// Random obstacle layout knobs, in units of the half-width L.
struct ObstacleSampling {
    int disks_min = 1;
    int disks_max = 3;
    double radius_min = 0.06;
    double radius_max = 0.14;
    /// Disk centers are drawn from [-center_extent, center_extent]^2.
    double center_extent = 0.5;
    /// Upper bound on sum_k a_k^2 / dist(c_k, outer boundary)^2, the leading
    /// order disturbance of the free stream at the outer boundary.
    double max_boundary_disturbance = 0.08;
};

/// Rejection-samples a valid ObstacleSet. Throws ValidationError if no
/// layout is found within a fixed number of attempts.
ObstacleSet sample_obstacles(const ObstacleSampling& cfg, double half_width, std::mt19937_64& rng);

/// Node spacing near obstacles: wall_ratio times the far-field spacing at a
/// disk surface, relaxing linearly to the far-field spacing over
/// grading_radii disk radii. wall_ratio = 1 gives a uniform mesh.
struct MeshGrading {
    double wall_ratio = 0.1;
    double grading_radii = 3.0;
};

/// Fluid-region mesh: Poisson-disk interior nodes, a ring of wall nodes on
/// every disk, boundary nodes along the square, Delaunay-triangulated with
/// triangles inside disks removed. The Poisson radius is calibrated so the
/// node count lands near `target_nodes`.
///
/// Throws ConfigError for target_nodes < 50 and ValidationError if the
/// obstacles are invalid or cover more than half the domain.
Mesh generate_mesh(const ObstacleSet& obstacles, int target_nodes, std::uint64_t seed,
                   const MeshGrading& grading = {});

/// Bowyer-Watson Delaunay triangulation (counter-clockwise triangles).
std::vector<std::array<int, 3>> delaunay_triangulate(std::span<const Vec2> points);

/// Analytic potential flow around the disks for inflow U (cos phi, sin phi).
///
/// Each disk reflects the uniform stream as a doublet at its center; each
/// further round reflects the previous round's doublets of every other disk
/// into the disk, which cancels their normal velocity on it to leading
/// order. Throws ValidationError if a point lies inside a disk.
std::vector<Vec2> potential_flow(const ObstacleSet& obstacles, double phi, double u_inf,
                                 std::span<const Vec2> points, int image_rounds = 3);

}  // namespace mfd
