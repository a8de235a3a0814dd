#pragma once

#include "mfd/diffusion/edm.hpp"
#include "mfd/numcore/tensor.hpp"

#include <functional>
#include <random>

namespace mfd {

/// D(x, sigma): denoised estimate of the clean field given a noisy one.
using DenoiseFn = std::function<Matrix<double>(const Matrix<double>& x, double sigma)>;

struct SampleTrace {
    int denoiser_calls = 0;
    std::vector<double> sigmas;  // schedule actually used, length steps + 1
};

/// Stochastic second-order sampler. Starting from sigma_0 * noise, each step
/// optionally raises sigma by gamma = min(s_churn / N, sqrt(2) - 1) when
/// sigma lies in [s_min, s_max], adds s_noise-scaled fresh noise to match,
/// takes an Euler step of dx/dsigma = (x - D(x, sigma)) / sigma and, unless
/// the next level is 0, corrects it with the trapezoidal (Heun) average.
/// Throws NumericError naming the step if the state becomes non-finite.
Matrix<double> edm_sample(const DenoiseFn& denoise, Eigen::Index rows, Eigen::Index cols, const EdmConfig& cfg,
                          int steps, std::mt19937_64& rng, SampleTrace* trace = nullptr);

/// Fills a matrix with i.i.d. standard normal draws in row-major order.
Matrix<double> standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

/// lambda(sigma) * mean((D(x0 + sigma eps, sigma) - x0)^2) for a plain
/// callable denoiser. Throws NumericError if the result is not finite.
double edm_loss_value(const Matrix<double>& x0, const Matrix<double>& eps, double sigma, const DenoiseFn& denoise,
                      double sigma_data);

}  // namespace mfd
