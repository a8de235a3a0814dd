#pragma once

#include "mfd/denoiser/denoiser.hpp"
#include "mfd/diffusion/edm.hpp"
#include "mfd/diffusion/train.hpp"
#include "mfd/metrics/report.hpp"
#include "mfd/synthcfd/dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mfd {

/// Noise bounds as multiples of sigma_data / 0.5 plus the sampler constants.
struct DiffusionSettings {
    double rho = 7.0;
    double sigma_min_factor = 0.02;
    double sigma_max_train_factor = 88.0;
    double sigma_max_sample_factor = 80.0;
    std::optional<double> sigma_data;  // measured from the training targets when unset
    double s_churn = 2.5;
    double s_min = 0.75;
    double s_max = std::numeric_limits<double>::infinity();
    double s_noise = 1.05;

    EdmConfig edm(double sigma_data, int steps) const;
};

struct SampleSettings {
    int steps = 20;
    std::vector<double> angles;  // empty: the dataset's angle grid
};

/// Every section of an INI run configuration. Unknown keys are rejected;
/// `seed` at the root is mandatory and the MFD_SEED environment variable
/// overrides it.
struct RunConfig {
    std::uint64_t seed = 0;
    DatasetConfig data;
    double target_ratio = 5.0;
    DenoiserConfig model;
    bool double_precision = false;
    DiffusionSettings diffusion;
    TrainConfig train;
    SampleSettings sample;
    EvalSettings eval;
    std::vector<int> sweep_steps = {5, 10, 20, 40, 80};
    int workers = 0;  // 0: all available cores

    std::string text;  // verbatim source
    std::uint64_t hash = 0;
};

/// `seed_override` is the raw MFD_SEED value, if any. Each override is
/// "section.key=value" (or "seed=..."/"workers=..."), applied after the file
/// and appended to the stored text as a comment so the stamp records it.
RunConfig parse_run_config(const std::string& text, const std::string& source,
                           const std::optional<std::string>& seed_override = std::nullopt,
                           const std::vector<std::string>& overrides = {});

/// Reads the file and applies MFD_SEED from the environment.
RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Reference training scale: 200k steps at batch 2.
void apply_full_scale_preset(RunConfig& cfg);

/// Sets the worker count (0: all cores) without touching the config text or
/// hash; outputs do not depend on it.
void set_workers(RunConfig& cfg, int workers);

/// Writes config.ini (verbatim) and config.hash ("fnv1a64 <hex>" and the
/// effective seed) into dir.
void stamp_config(const std::filesystem::path& dir, const RunConfig& cfg);

/// Parses "0,10,20" or "0:350:10" (start:stop:step inclusive) into degrees.
std::vector<double> parse_angle_list(const std::string& spec);
std::vector<int> parse_int_list(const std::string& spec, const std::string& context);

}  // namespace mfd
