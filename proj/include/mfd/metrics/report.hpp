#pragma once

#include "mfd/metrics/metrics.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mfd {

struct EvalSettings {
    int raster_resolution = 128;
    SsimSettings ssim;
    int s2_bins = 24;
    std::size_t s2_pairs = 200000;
    std::uint64_t seed = 0;
    int kde_points = 256;
    /// Ground-truth split whose (mesh, angle) pairs are expected in the
    /// prediction directory.
    std::string split = "test";
    int workers = 1;
};

/// Metrics of one (mesh, angle) pair.
struct AngleRecord {
    std::string mesh;  // mesh file name
    double angle_deg = 0.0;
    PointwiseMetrics pointwise;
    double ssim = 0.0;
    double eps_s2 = 0.0;
    int s2_dropped_bins = 0;
    FlowMoments pred_moments;
    FlowMoments true_moments;
    double w1_ux = 0.0, w1_uy = 0.0, w1_mag = 0.0;
    std::optional<double> seconds;  // sampling wall-clock, when known
};

struct MeshSummary {
    std::string mesh;
    std::size_t angles = 0;
    PodEnergy pod_pred;
    PodEnergy pod_true;
};

/// Column-wise mean and population std over a set of records.
struct Aggregate {
    std::string label;
    std::size_t count = 0;
    std::vector<double> mean;
    std::vector<double> std;
};

struct MetricsReport {
    EvalSettings settings;
    std::vector<AngleRecord> records;  // sorted by (mesh, angle)
    std::vector<std::string> missing;  // expected pairs without a prediction
    std::vector<std::string> unmatched;  // predictions without ground truth
    std::vector<MeshSummary> meshes;
    std::vector<Aggregate> aggregates;  // per mesh, then "ALL"
};

/// Names of the numeric metric columns, in CSV order (timing last).
const std::vector<std::string>& metric_columns();
std::vector<double> metric_values(const AngleRecord& r);

/// Index of a column in metric_columns(); throws ConfigError if unknown.
std::size_t metric_index(const std::string& name);

AngleRecord evaluate_pair(const Mesh& mesh, std::span<const Vec2> pred, std::span<const Vec2> gt,
                          const EvalSettings& s);

/// Mean and population std of every metric column. The timing column
/// averages only the records that carry a time.
Aggregate aggregate(const std::string& label, const std::vector<AngleRecord>& records);

std::string format_metrics_csv(const MetricsReport& report);
std::string format_metrics_text(const MetricsReport& report);

/// Pairs the prediction directory's manifest with the ground-truth manifest
/// by (mesh file name, angle), evaluates every pair, and writes
/// metrics.csv, report.txt and plots/ under out_dir. Missing pairs are listed
/// in the report. Throws ValidationError if no pair can be evaluated.
MetricsReport evaluate_dirs(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                            const std::filesystem::path& out_dir, const EvalSettings& s);

/// Parses "mesh,angle_deg,seconds" rows written by the sampler.
struct TimingRow {
    std::string mesh;
    double angle_deg = 0.0;
    double seconds = 0.0;
};
std::vector<TimingRow> load_timing(const std::filesystem::path& csv);

/// Grayscale P5 image of a raster, scaled by `vmax`; masked cells are black.
std::string format_pgm(const RasterField& r, double vmax);

}  // namespace mfd
