#pragma once

#include <limits>
#include <vector>

namespace mfd {

/// Noise bounds, schedule curvature and sampler churn constants.
///
/// `scaled(sigma_data)` reproduces the reference bounds rescaled to the
/// measured data scale: train sigma in [0.02, 88] * sigma_data / 0.5 and
/// sampling starts at 80 * sigma_data / 0.5.
struct EdmConfig {
    double sigma_data = 0.5;
    double rho = 7.0;
    double sigma_min_train = 0.02;
    double sigma_max_train = 88.0;
    double sigma_min_sample = 0.02;
    double sigma_max_sample = 80.0;
    int steps = 20;
    double s_churn = 2.5;
    double s_min = 0.75;
    double s_max = std::numeric_limits<double>::infinity();
    double s_noise = 1.05;

    static EdmConfig scaled(double sigma_data, double min_factor = 0.02, double max_train_factor = 88.0,
                            double max_sample_factor = 80.0);

    /// Throws ConfigError unless 0 < sigma_min < sigma_max, steps >= 1 and
    /// the churn constants are finite (s_max may be +inf).
    void validate() const;
};

double c_in(double sigma, double sigma_data);
double c_out(double sigma, double sigma_data);
double c_skip(double sigma, double sigma_data);
/// Scalar fed to the noise-level Fourier embedding: log(sigma) / 4.
double c_noise(double sigma);

/// (sigma^2 + sigma_data^2) / (sigma * sigma_data)^2. Throws for nonpositive inputs.
double lambda_weight(double sigma, double sigma_data);

/// Bounded power law: (smin^(1/rho) + t (smax^(1/rho) - smin^(1/rho)))^rho,
/// t in [0, 1], with exact endpoints.
double power_law_sigma(double t, double sigma_min, double sigma_max, double rho);

/// N + 1 levels from sigma_max_sample down to sigma_min_sample, then 0.
std::vector<double> sampler_sigma_schedule(int steps, const EdmConfig& cfg);

/// Training noise level for u in [0, 1]: sigma_max_train at u = 0,
/// sigma_min_train at u = 1, decreasing in between.
double sample_train_sigma(double u, const EdmConfig& cfg);

/// Checks lambda * c_out^2 == 1 and c_skip + sigma^2 c_in^2 == 1 across a
/// log-spaced sweep; throws NumericError on violation.
void edm_self_test(double sigma_data);

}  // namespace mfd
