#pragma once

#include "mfd/mesh/mesh.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace mfd {

/// Small constant in the structure-function denominator.
inline constexpr double kMetricEps = 1e-8;

struct PointwiseMetrics {
    double rel_l2_u = 0.0;
    double rel_l2_ux = 0.0;
    double rel_l2_uy = 0.0;
    double rel_l2_mag = 0.0;
    double mae = 0.0;     // mean end-point error
    double cosine = 0.0;  // mean cosine of the angle; a zero vector matches only zero
};

/// Relative RMS differences, end-point error and mean cosine over all nodes.
/// Throws ConfigError on a size mismatch and NumericError when the reference
/// norm is zero but the prediction differs.
PointwiseMetrics pointwise_metrics(std::span<const Vec2> pred, std::span<const Vec2> gt);

std::vector<double> magnitudes(std::span<const Vec2> field);

/// |u| sampled at cell centers of an R x R grid over the mesh bounding box by
/// linear interpolation inside triangles. Cells outside every triangle
/// (obstacles) are masked.
struct RasterField {
    int resolution = 0;
    double x0 = 0.0, y0 = 0.0, dx = 0.0, dy = 0.0;
    std::vector<double> values;  // row-major, row 0 at y0
    std::vector<char> mask;      // 1 = covered by the mesh

    double at(int row, int col) const { return values[static_cast<std::size_t>(row) * resolution + col]; }
    bool valid(int row, int col) const { return mask[static_cast<std::size_t>(row) * resolution + col] != 0; }
};

RasterField rasterize(const Mesh& mesh, std::span<const double> nodal, int resolution);

struct SsimSettings {
    int window = 7;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
};

/// Mean SSIM over valid cells with a Gaussian window. Window weights on masked
/// or out-of-grid cells are dropped and the rest renormalized. Throws
/// ValidationError if no cell is valid.
double ssim_grid(const RasterField& a, const RasterField& b, double dynamic_range, const SsimSettings& s = {});

/// Rasterizes |u| of both fields at resolution R (>= 32) and compares them
/// with the dynamic range set to the largest nodal |u| in either field.
double ssim_raster(std::span<const Vec2> pred, std::span<const Vec2> gt, const Mesh& mesh, int resolution,
                   const SsimSettings& s = {});

struct StructureFunction {
    std::vector<double> r;       // mean separation of the pairs in each kept bin
    std::vector<double> s2_pred;
    std::vector<double> s2_true;
    std::vector<std::size_t> count;
    int dropped_bins = 0;
    std::size_t pairs_used = 0;
    double eps_s2 = 0.0;
};

/// Second-order structure function of two scalar fields on the same nodes,
/// estimated over one shared set of node pairs in log-spaced separation bins.
/// All pairs are used when n_pairs reaches the number available; otherwise
/// n_pairs pairs are drawn with replacement from a generator seeded by
/// `seed`. Empty bins are dropped and the weights renormalized.
StructureFunction structure_function(std::span<const double> pred, std::span<const double> gt,
                                     std::span<const Vec2> coords, int n_bins, std::size_t n_pairs,
                                     std::uint64_t seed);

/// Exact 1-Wasserstein distance between two empirical distributions:
/// integral of |F^-1 - G^-1| over quantile levels. Throws on empty input.
double wasserstein1(std::span<const double> a, std::span<const double> b);

/// Silverman's rule 0.9 min(std, IQR / 1.34) n^(-1/5), floored at 1e-6.
double silverman_bandwidth(std::span<const double> samples);

std::vector<double> gaussian_kde(std::span<const double> samples, double bandwidth, std::span<const double> grid);

struct PdfComparison {
    std::vector<double> grid;
    std::vector<double> pdf_pred;
    std::vector<double> pdf_true;
    double bandwidth_pred = 0.0;
    double bandwidth_true = 0.0;
    double w1 = 0.0;
};

/// KDE curves on a shared grid plus the exact W1 distance. Needs at least
/// 10 samples per set.
PdfComparison pdf_wasserstein(std::span<const double> pred, std::span<const double> gt, int grid_points = 256);

struct PodEnergy {
    std::vector<double> energy;  // descending, sums to 1 unless degenerate
    bool degenerate = false;     // snapshots identical after mean removal
};

/// Energy fractions of the mean-subtracted snapshot matrix whose columns
/// stack (U_x, U_y) of each field.
PodEnergy pod_energy(const std::vector<std::vector<Vec2>>& snapshots);

struct Vorticity {
    std::vector<double> omega;
    std::vector<int> flagged;  // nodes whose gradient stencil is degenerate (omega = 0)
};

Vorticity vorticity(const Mesh& mesh, std::span<const Vec2> field);

struct Moments {
    double mean = 0.0;
    double std = 0.0;  // population
};

struct FlowMoments {
    Moments ux, uy, mag;
};

Moments moments(std::span<const double> v);
FlowMoments flow_moments(std::span<const Vec2> field);

}  // namespace mfd
