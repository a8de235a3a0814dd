#include "mfd/diffusion/train.hpp"

#include "mfd/diffusion/sampler.hpp"
#include "mfd/error.hpp"
#include "mfd/util/io.hpp"

#include <cmath>
#include <memory>
#include <random>

namespace mfd {

template <typename T>
Var edm_loss(Tape<T>& tape, const Denoiser<T>& model, const GraphContext<T>& ctx, const Matrix<T>& x0,
             const Matrix<T>& eps, double sigma, double sigma_data, double weight) {
    if (x0.rows() != eps.rows() || x0.cols() != eps.cols()) throw ConfigError("edm_loss: noise shape mismatch");
    const Matrix<T> noisy = x0 + static_cast<T>(sigma) * eps;
    Var d = model.denoise(tape, ctx, noisy, sigma, sigma_data);
    Var target = tape.constant(x0);
    Var loss = tape.weighted_mse(d, target, static_cast<T>(weight * lambda_weight(sigma, sigma_data)));
    if (!std::isfinite(static_cast<double>(tape.value(loss)(0, 0)))) throw NumericError("edm_loss: non-finite loss");
    return loss;
}

template <typename T>
TrainResult train(const Denoiser<T>& model, ParamStore<T>& params, std::span<const TrainExample> data,
                  const EdmConfig& edm, const TrainConfig& cfg, const CheckpointFn<T>& on_checkpoint) {
    edm.validate();
    TrainResult result;
    if (cfg.steps <= 0) return result;
    if (data.empty()) throw ConfigError("train: empty dataset");
    if (cfg.batch < 1) throw ConfigError("train: batch must be >= 1");
    if (cfg.log_every < 1) throw ConfigError("train: log_every must be >= 1");

    std::vector<std::unique_ptr<GraphContext<T>>> contexts(data.size());
    std::vector<Matrix<T>> targets(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!data[i].graph) throw ConfigError("train: example without a graph");
        targets[i] = data[i].target.template cast<T>();
    }

    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    AdamW<T> opt(cfg.optimizer);

    ParamStore<T> last_good = params.template cast<T>();
    double window_loss = 0.0, window_sigma = 0.0;
    int window_count = 0;

    for (std::int64_t step = 0; step < cfg.steps; ++step) {
        params.zero_grad();
        double batch_loss = 0.0, batch_sigma = 0.0;
        bool bad = false;
        for (int b = 0; b < cfg.batch && !bad; ++b) {
            const std::size_t k = pick(rng);
            const double sigma = sample_train_sigma(unit(rng), edm);
            const Matrix<T> eps = standard_normal(targets[k].rows(), 2, rng).template cast<T>();
            if (!contexts[k]) contexts[k] = std::make_unique<GraphContext<T>>(*data[k].graph, data[k].phi);
            Tape<T> tape(&params);
            Var loss;
            try {
                loss = edm_loss(tape, model, *contexts[k], targets[k], eps, sigma, edm.sigma_data, 1.0 / cfg.batch);
            } catch (const NumericError&) {
                bad = true;
                break;
            }
            const double value = static_cast<double>(tape.value(loss)(0, 0));
            if (value * cfg.batch > cfg.divergence_threshold) {
                bad = true;
                break;
            }
            tape.backward(loss);
            batch_loss += value;
            batch_sigma += sigma / cfg.batch;
        }
        if (bad) {
            params.assign_from(last_good);
            result.diverged = true;
            result.message = "training diverged at step " + std::to_string(step);
            break;
        }
        const double lr = cosine_lr(cfg.optimizer.lr, cfg.lr_floor, step, cfg.steps);
        last_good.assign_from(params);
        try {
            opt.step(params, lr);
        } catch (const NumericError& e) {
            params.assign_from(last_good);
            result.diverged = true;
            result.message = std::string(e.what()) + " at step " + std::to_string(step);
            break;
        }
        result.steps_done = step + 1;
        window_loss += batch_loss;
        window_sigma += batch_sigma;
        ++window_count;
        if (result.steps_done % cfg.log_every == 0 || result.steps_done == cfg.steps) {
            result.trace.push_back({result.steps_done, window_loss / window_count, window_sigma / window_count, lr});
            window_loss = window_sigma = 0.0;
            window_count = 0;
        }
        if (on_checkpoint && cfg.checkpoint_every > 0 && result.steps_done % cfg.checkpoint_every == 0 &&
            result.steps_done != cfg.steps) {
            on_checkpoint(result.steps_done, params);
        }
    }
    return result;
}

std::string format_loss_csv(const std::vector<LossRecord>& trace) {
    std::string out = "step,loss,sigma_mean,lr\n";
    for (const auto& r : trace) {
        out += std::to_string(r.step) + "," + format_double(r.loss) + "," + format_double(r.sigma_mean) + "," +
               format_double(r.lr) + "\n";
    }
    return out;
}

template Var edm_loss<float>(Tape<float>&, const Denoiser<float>&, const GraphContext<float>&, const Matrix<float>&,
                             const Matrix<float>&, double, double, double);
template Var edm_loss<double>(Tape<double>&, const Denoiser<double>&, const GraphContext<double>&,
                              const Matrix<double>&, const Matrix<double>&, double, double, double);
template TrainResult train<float>(const Denoiser<float>&, ParamStore<float>&, std::span<const TrainExample>,
                                  const EdmConfig&, const TrainConfig&, const CheckpointFn<float>&);
template TrainResult train<double>(const Denoiser<double>&, ParamStore<double>&, std::span<const TrainExample>,
                                   const EdmConfig&, const TrainConfig&, const CheckpointFn<double>&);

}  // namespace mfd
