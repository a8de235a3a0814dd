#pragma once

#include "mfd/numcore/tensor.hpp"

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace mfd {

/// Handle to a value recorded on a Tape.
struct Var {
    std::int32_t id = -1;
    bool valid() const { return id >= 0; }
};

/// Records matrix operations during a forward pass and replays them in
/// reverse to accumulate gradients.
///
/// Nodes are appended in evaluation order, so reverse creation order is a
/// valid topological order for the backward sweep. Parameter leaves refer to
/// the ParamStore values without copying; after backward() their gradients are
/// added into the store's accumulators. A tape is single-use and
/// single-threaded.
template <typename T>
class Tape {
public:
    explicit Tape(ParamStore<T>* params = nullptr);

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Matrix<T> value);
    Var param(std::size_t index);

    const Matrix<T>& value(Var v) const;
    /// Gradient of the last backward() target with respect to v (zeros if v
    /// did not influence it).
    Matrix<T> grad(Var v) const;

    std::size_t size() const { return nodes_.size(); }

    // y = x * w + b, b is a 1 x out row (pass an invalid Var to skip it)
    Var linear(Var x, Var w, Var b);
    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var add_row(Var x, Var row);
    Var scale(Var x, T s);
    Var silu(Var x);
    Var concat_cols(std::initializer_list<Var> parts);
    /// Rows [start, start + count) of x.
    Var slice_rows(Var x, Eigen::Index start, Eigen::Index count);
    // The index storage behind `rows` must outlive the tape.
    Var gather_rows(Var x, std::span<const int> rows);
    Var scatter_add_rows(Var x, std::span<const int> rows, int out_rows);
    /// Row-wise normalization over the feature dimension followed by a
    /// 1 x C scale and shift: gamma * (x - mean) / sqrt(var + eps) + beta.
    Var layer_norm(Var x, Var gamma, Var beta, T eps);
    Var sum(Var x);
    /// weight * mean((a - b)^2) over all entries; returns a 1 x 1 scalar.
    Var weighted_mse(Var a, Var b, T weight);

    /// Seeds d(loss)/d(loss) = 1 and sweeps backward. Throws NumericError
    /// before writing anything if the loss is not finite.
    void backward(Var loss);

private:
    struct Node {
        Matrix<T> value;
        const Matrix<T>* ref = nullptr;
        Matrix<T> grad;
        std::int64_t param = -1;
        std::function<void()> backward;
        const Matrix<T>& val() const { return ref ? *ref : value; }
    };

    Var push(Matrix<T> value, std::function<void()> backward = {});
    Node& node(Var v);
    const Node& node(Var v) const;
    Matrix<T>& grad_slot(std::int32_t id);

    ParamStore<T>* params_;
    std::vector<Node> nodes_;
    std::vector<std::int32_t> param_leaf_;
    bool done_ = false;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace mfd
