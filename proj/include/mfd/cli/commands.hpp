#pragma once

#include "mfd/cli/config.hpp"
#include "mfd/mesh/multiscale.hpp"
#include "mfd/numcore/checkpoint.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mfd {

inline constexpr const char* kCheckpointName = "checkpoint.ckpt";

/// Generates meshes, fields and the manifest, then persists the multiscale
/// graph of every mesh under `out/graphs`.
DatasetManifest cmd_gen_data(const RunConfig& cfg, const std::filesystem::path& out);

/// Node and edge counts of one multiscale graph.
struct GraphStats {
    std::string mesh;
    std::size_t original_nodes = 0;
    std::size_t reduced_nodes = 0;
    std::size_t o2o = 0, o2r = 0, r2r = 0, r2o = 0;
    int o2o_diameter = 0;
    int r2r_diameter = 0;
};

GraphStats graph_stats(const std::string& mesh, const MultiscaleGraph& g);
std::string format_graph_stats(const std::vector<GraphStats>& stats);

/// Writes `<mesh stem>.graph` for every mesh of a dataset plus graphs.csv.
std::vector<GraphStats> cmd_build_graphs(const RunConfig& cfg, const std::filesystem::path& dataset,
                                         const std::filesystem::path& out);

/// Population standard deviation of every component of the training targets.
double measure_sigma_data(const std::vector<FieldData>& fields);

struct TrainOutcome {
    TrainResult result;
    double sigma_data = 0.0;
    std::filesystem::path checkpoint;
};

/// Trains on the dataset's "train" split and writes checkpoint.ckpt and
/// loss.csv under `out`. On divergence the rolled-back parameters are still
/// saved and NumericError is thrown afterwards.
TrainOutcome cmd_train(const RunConfig& cfg, const std::filesystem::path& dataset, const std::filesystem::path& out);

/// A loaded checkpoint with the settings needed to rebuild its graphs.
struct LoadedModel {
    DenoiserConfig model;
    double sigma_data = 0.0;
    double velocity_scale = 1.0;
    double target_ratio = 0.0;
    CheckpointMeta meta;
    ParamStore<double> params;
};

/// Rebuilds the architecture recorded in the checkpoint and loads its
/// weights in double precision. Throws ConfigError naming the key when the
/// checkpoint disagrees with the configuration's graph construction.
LoadedModel load_model(const std::filesystem::path& checkpoint, const RunConfig& cfg);

struct SampleRequest {
    std::filesystem::path checkpoint;
    /// Either a dataset directory (meshes of `split`) or explicit mesh files.
    std::optional<std::filesystem::path> dataset;
    std::string split = "test";
    std::vector<std::filesystem::path> meshes;
    std::vector<double> angles;  // empty: config angles, else the dataset grid
    std::optional<int> steps;    // default: config sample.steps
};

struct SampleTiming {
    std::string mesh;
    double angle_deg = 0.0;
    double seconds = 0.0;
};

/// Seed of one generated sample, independent of work order.
std::uint64_t sample_seed(std::uint64_t seed, const std::string& mesh_name, double angle_deg);

/// Writes meshes/, fields/, manifest.txt and timing.csv under `out`.
std::vector<SampleTiming> cmd_sample(const RunConfig& cfg, const SampleRequest& req,
                                     const std::filesystem::path& out);

/// Writes the angle-only reference U_inf (cos phi, sin phi), scaled like the
/// dataset, for every (mesh, angle) of `split` in the layout of a sample dir.
void write_uniform_baseline(const std::filesystem::path& dataset, const std::string& split,
                            const std::filesystem::path& out);

MetricsReport cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& pred,
                           const std::filesystem::path& gt, const std::filesystem::path& out);

/// One metric row per column of metric_columns() (timing included) holding
/// the "ALL" mean of each model.
struct AblationTable {
    std::vector<std::string> labels;  // one per model
    std::vector<std::string> metrics;
    std::vector<std::vector<double>> values;  // [metric][model]
};

AblationTable make_ablation_table(const std::vector<std::string>& labels, const std::vector<MetricsReport>& reports);
std::string format_ablation_csv(const AblationTable& t);
std::string format_ablation_text(const AblationTable& t);

/// Samples and evaluates both checkpoints on the same split with the same
/// seeds; writes `a/`, `b/` and ablation.{csv,txt} under `out`.
AblationTable cmd_ablate(const RunConfig& cfg, const std::filesystem::path& checkpoint_a,
                         const std::filesystem::path& checkpoint_b, const std::filesystem::path& dataset,
                         const std::filesystem::path& out);

struct SweepRow {
    int steps = 0;
    double rel_l2_u = 0.0;
    double cosine = 0.0;
    double ssim = 0.0;
    double eps_s2 = 0.0;
    double mae = 0.0;
    double time_s = 0.0;  // mean wall-clock per sample
};

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

/// Least-squares line y = a x + b and its coefficient of determination.
/// Throws ValidationError for fewer than two points or constant x.
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

std::string format_sweep_csv(const std::vector<SweepRow>& rows);
std::string format_sweep_text(const std::vector<SweepRow>& rows);

/// Samples the split at every step count of cfg.sweep_steps (or `steps` if
/// given) and writes sweep.{csv,txt} plus one sample dir per count.
std::vector<SweepRow> cmd_sweep_steps(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                                      const std::filesystem::path& dataset, const std::filesystem::path& out,
                                      const std::vector<int>& steps = {});

}  // namespace mfd
