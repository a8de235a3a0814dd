#pragma once

#include "mfd/numcore/tensor.hpp"

#include <cstdint>
#include <vector>

namespace mfd {

struct AdamWConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-2;
    double clip_norm = 5.0;  // <= 0 disables clipping
};

/// Cosine decay from `base` at step 0 to `floor` at `total`, constant after.
double cosine_lr(double base, double floor, std::int64_t step, std::int64_t total);

/// Decoupled-weight-decay Adam. The global gradient norm is taken over all
/// parameters jointly and clipped before the moment updates.
template <typename T>
class AdamW {
public:
    explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

    /// One update with learning rate `lr`. Returns the pre-clip global norm.
    /// Throws NumericError naming the first parameter with a non-finite
    /// gradient; parameters are untouched in that case.
    double step(ParamStore<T>& params, double lr);

    std::int64_t steps_taken() const { return t_; }
    const AdamWConfig& config() const { return cfg_; }
    const Matrix<T>& first_moment(std::size_t i) const { return m_[i]; }
    const Matrix<T>& second_moment(std::size_t i) const { return v_[i]; }

private:
    AdamWConfig cfg_;
    std::int64_t t_ = 0;
    std::vector<Matrix<T>> m_, v_;
};

extern template class AdamW<float>;
extern template class AdamW<double>;

}  // namespace mfd
