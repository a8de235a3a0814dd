#include "mfd/numcore/adamw.hpp"

#include "mfd/error.hpp"

#include <cmath>
#include <numbers>

namespace mfd {

double cosine_lr(double base, double floor, std::int64_t step, std::int64_t total) {
    if (total <= 0 || step >= total) return total <= 0 ? base : floor;
    if (step <= 0) return base;
    const double progress = static_cast<double>(step) / static_cast<double>(total);
    return floor + (base - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

template <typename T>
double AdamW<T>::step(ParamStore<T>& params, double lr) {
    if (m_.size() != params.size()) {
        m_.clear();
        v_.clear();
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_.push_back(Matrix<T>::Zero(params.value(i).rows(), params.value(i).cols()));
            v_.push_back(Matrix<T>::Zero(params.value(i).rows(), params.value(i).cols()));
        }
    }
    double sq = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& g = params.grad(i);
        if (!g.allFinite()) throw NumericError("adamw: non-finite gradient in parameter " + params.name(i));
        sq += g.template cast<double>().squaredNorm();
    }
    const double norm = std::sqrt(sq);
    const double clip = (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;

    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    const T c = static_cast<T>(clip);
    const T decay = static_cast<T>(1.0 - lr * cfg_.weight_decay);
    const T step_size = static_cast<T>(lr / bc1);
    const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
    const T eps = static_cast<T>(cfg_.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& w = params.value(i);
        const auto g = (params.grad(i) * c).eval();
        m_[i] = b1 * m_[i] + (T(1) - b1) * g;
        v_[i] = b2 * v_[i] + (T(1) - b2) * g.cwiseProduct(g);
        w *= decay;
        w.array() -= step_size * m_[i].array() / (v_[i].array().sqrt() * inv_sqrt_bc2 + eps);
    }
    return norm;
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace mfd
