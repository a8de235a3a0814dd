#pragma once

#include "mfd/denoiser/denoiser.hpp"
#include "mfd/diffusion/edm.hpp"
#include "mfd/numcore/adamw.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace mfd {

/// One (geometry, inflow angle, clean field) training datum.
struct TrainExample {
    const MultiscaleGraph* graph = nullptr;
    double phi = 0.0;
    Matrix<double> target;  // N x 2, already scaled
};

struct TrainConfig {
    std::int64_t steps = 20000;
    int batch = 2;
    AdamWConfig optimizer;
    double lr_floor = 0.0;
    int log_every = 100;
    std::int64_t checkpoint_every = 0;  // 0 disables intermediate checkpoints
    std::uint64_t seed = 0;
    double divergence_threshold = 1e6;
};

struct LossRecord {
    std::int64_t step = 0;  // number of optimizer steps completed
    double loss = 0.0;      // mean batch loss over the logging window
    double sigma_mean = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    std::vector<LossRecord> trace;
    std::int64_t steps_done = 0;
    bool diverged = false;
    std::string message;
};

/// EDM loss of one example on a fresh tape:
/// lambda(sigma) * mean((D(x0 + sigma eps, sigma) - x0)^2), times `weight`.
template <typename T>
Var edm_loss(Tape<T>& tape, const Denoiser<T>& model, const GraphContext<T>& ctx, const Matrix<T>& x0,
             const Matrix<T>& eps, double sigma, double sigma_data, double weight = 1.0);

template <typename T>
using CheckpointFn = std::function<void(std::int64_t step, const ParamStore<T>& params)>;

/// Minimizes the EDM objective with AdamW and cosine decay. Each step draws
/// `batch` examples, one training sigma and one noise field per example, and
/// averages their losses. On divergence (batch loss non-finite or above the
/// threshold) the parameters are rolled back to the last state that produced
/// a finite loss and the result is flagged.
template <typename T>
TrainResult train(const Denoiser<T>& model, ParamStore<T>& params, std::span<const TrainExample> data,
                  const EdmConfig& edm, const TrainConfig& cfg, const CheckpointFn<T>& on_checkpoint = {});

std::string format_loss_csv(const std::vector<LossRecord>& trace);

}  // namespace mfd
