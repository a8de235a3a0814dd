#include "mfd/diffusion/sampler.hpp"

#include "mfd/error.hpp"

#include <algorithm>
#include <cmath>

namespace mfd {

Matrix<double> standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix<double> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    return m;
}

Matrix<double> edm_sample(const DenoiseFn& denoise, Eigen::Index rows, Eigen::Index cols, const EdmConfig& cfg,
                          int steps, std::mt19937_64& rng, SampleTrace* trace) {
    cfg.validate();
    const std::vector<double> sigmas = sampler_sigma_schedule(steps, cfg);
    const double gamma_max = std::min(cfg.s_churn / static_cast<double>(steps), std::sqrt(2.0) - 1.0);
    int calls = 0;

    Matrix<double> x = standard_normal(rows, cols, rng) * sigmas[0];
    for (int i = 0; i < steps; ++i) {
        const double sigma = sigmas[static_cast<std::size_t>(i)];
        const double sigma_next = sigmas[static_cast<std::size_t>(i) + 1];
        const double gamma = (sigma >= cfg.s_min && sigma <= cfg.s_max) ? gamma_max : 0.0;
        const double sigma_hat = sigma * (1.0 + gamma);
        Matrix<double> x_hat = x;
        if (gamma > 0.0) {
            const double extra = std::sqrt(sigma_hat * sigma_hat - sigma * sigma);
            x_hat += standard_normal(rows, cols, rng) * (extra * cfg.s_noise);
        }
        const Matrix<double> d = (x_hat - denoise(x_hat, sigma_hat)) / sigma_hat;
        ++calls;
        Matrix<double> x_next = x_hat + (sigma_next - sigma_hat) * d;
        if (sigma_next != 0.0) {
            const Matrix<double> d_next = (x_next - denoise(x_next, sigma_next)) / sigma_next;
            ++calls;
            x_next = x_hat + (sigma_next - sigma_hat) * 0.5 * (d + d_next);
        }
        if (!x_next.allFinite()) {
            throw NumericError("sampler: non-finite state at step " + std::to_string(i) + " of " + std::to_string(steps));
        }
        x = std::move(x_next);
    }
    if (trace) {
        trace->denoiser_calls = calls;
        trace->sigmas = sigmas;
    }
    return x;
}

double edm_loss_value(const Matrix<double>& x0, const Matrix<double>& eps, double sigma, const DenoiseFn& denoise,
                      double sigma_data) {
    const Matrix<double> noisy = x0 + sigma * eps;
    const Matrix<double> d = denoise(noisy, sigma);
    const double loss = lambda_weight(sigma, sigma_data) * (d - x0).squaredNorm() / static_cast<double>(x0.size());
    if (!std::isfinite(loss)) throw NumericError("edm_loss: non-finite loss");
    return loss;
}

}  // namespace mfd
