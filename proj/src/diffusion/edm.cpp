#include "mfd/diffusion/edm.hpp"

#include "mfd/error.hpp"
#include "mfd/util/io.hpp"

#include <cmath>
#include <string>

namespace mfd {

EdmConfig EdmConfig::scaled(double sigma_data, double min_factor, double max_train_factor, double max_sample_factor) {
    EdmConfig c;
    const double s = sigma_data / 0.5;
    c.sigma_data = sigma_data;
    c.sigma_min_train = min_factor * s;
    c.sigma_max_train = max_train_factor * s;
    c.sigma_min_sample = min_factor * s;
    c.sigma_max_sample = max_sample_factor * s;
    return c;
}

void EdmConfig::validate() const {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(sigma_data)) throw ConfigError("diffusion: sigma_data must be positive");
    if (!positive(rho)) throw ConfigError("diffusion: rho must be positive");
    if (!positive(sigma_min_train) || !positive(sigma_max_train) || sigma_min_train >= sigma_max_train) {
        throw ConfigError("diffusion: need 0 < sigma_min_train < sigma_max_train");
    }
    if (!positive(sigma_min_sample) || !positive(sigma_max_sample) || sigma_min_sample >= sigma_max_sample) {
        throw ConfigError("diffusion: need 0 < sigma_min_sample < sigma_max_sample");
    }
    if (steps < 1) throw ConfigError("diffusion: steps must be >= 1");
    if (!std::isfinite(s_churn) || s_churn < 0.0) throw ConfigError("diffusion: s_churn must be finite and >= 0");
    if (!std::isfinite(s_min) || std::isnan(s_max) || s_max < s_min) {
        throw ConfigError("diffusion: need finite s_min <= s_max");
    }
    if (!std::isfinite(s_noise) || s_noise < 0.0) throw ConfigError("diffusion: s_noise must be finite and >= 0");
}

double c_in(double sigma, double sigma_data) { return 1.0 / std::sqrt(sigma * sigma + sigma_data * sigma_data); }

double c_out(double sigma, double sigma_data) {
    return sigma * sigma_data / std::sqrt(sigma * sigma + sigma_data * sigma_data);
}

double c_skip(double sigma, double sigma_data) {
    const double sd2 = sigma_data * sigma_data;
    return sd2 / (sigma * sigma + sd2);
}

double c_noise(double sigma) { return std::log(sigma) / 4.0; }

double lambda_weight(double sigma, double sigma_data) {
    if (!(sigma > 0.0) || !(sigma_data > 0.0)) throw ConfigError("lambda_weight: sigma and sigma_data must be > 0");
    const double p = sigma * sigma_data;
    return (sigma * sigma + sigma_data * sigma_data) / (p * p);
}

double power_law_sigma(double t, double sigma_min, double sigma_max, double rho) {
    if (t <= 0.0) return sigma_min;
    if (t >= 1.0) return sigma_max;
    const double lo = std::pow(sigma_min, 1.0 / rho);
    const double hi = std::pow(sigma_max, 1.0 / rho);
    return std::pow(lo + t * (hi - lo), rho);
}

std::vector<double> sampler_sigma_schedule(int steps, const EdmConfig& cfg) {
    if (steps < 1) throw ConfigError("sampler_sigma_schedule: steps must be >= 1");
    std::vector<double> sigmas;
    sigmas.reserve(static_cast<std::size_t>(steps) + 1);
    for (int i = 0; i < steps; ++i) {
        const double t = steps == 1 ? 1.0 : 1.0 - static_cast<double>(i) / static_cast<double>(steps - 1);
        sigmas.push_back(power_law_sigma(t, cfg.sigma_min_sample, cfg.sigma_max_sample, cfg.rho));
    }
    sigmas.push_back(0.0);
    return sigmas;
}

double sample_train_sigma(double u, const EdmConfig& cfg) {
    if (!(u >= 0.0 && u <= 1.0)) throw ConfigError("sample_train_sigma: u must lie in [0, 1]");
    if (u == 0.0) return cfg.sigma_max_train;
    if (u == 1.0) return cfg.sigma_min_train;
    const double hi = std::pow(cfg.sigma_max_train, 1.0 / cfg.rho);
    const double lo = std::pow(cfg.sigma_min_train, 1.0 / cfg.rho);
    return std::pow(hi + u * (lo - hi), cfg.rho);
}

void edm_self_test(double sigma_data) {
    for (int k = 0; k <= 60; ++k) {
        const double sigma = std::pow(10.0, -3.0 + 6.0 * k / 60.0);
        const double a = lambda_weight(sigma, sigma_data) * std::pow(c_out(sigma, sigma_data), 2);
        const double b = c_skip(sigma, sigma_data) + sigma * sigma * std::pow(c_in(sigma, sigma_data), 2);
        if (std::abs(a - 1.0) > 1e-12 || std::abs(b - 1.0) > 1e-12) {
            throw NumericError("edm self-test failed at sigma=" + format_double(sigma));
        }
    }
}

}  // namespace mfd
