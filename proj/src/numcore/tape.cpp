#include "mfd/numcore/tape.hpp"

#include "mfd/error.hpp"

#include <cmath>
#include <string>

namespace mfd {

namespace {

std::string shape_str(Eigen::Index r, Eigen::Index c) {
    return "[" + std::to_string(r) + "x" + std::to_string(c) + "]";
}

}  // namespace

template <typename T>
Tape<T>::Tape(ParamStore<T>* params) : params_(params) {
    if (params_) param_leaf_.assign(params_->size(), -1);
}

template <typename T>
Var Tape<T>::push(Matrix<T> value, std::function<void()> backward) {
    Node n;
    n.value = std::move(value);
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

template <typename T>
typename Tape<T>::Node& Tape<T>::node(Var v) {
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
        throw ConfigError("tape: invalid variable handle");
    }
    return nodes_[static_cast<std::size_t>(v.id)];
}

template <typename T>
const typename Tape<T>::Node& Tape<T>::node(Var v) const {
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
        throw ConfigError("tape: invalid variable handle");
    }
    return nodes_[static_cast<std::size_t>(v.id)];
}

template <typename T>
Matrix<T>& Tape<T>::grad_slot(std::int32_t id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0 && n.val().size() != 0) {
        n.grad = Matrix<T>::Zero(n.val().rows(), n.val().cols());
    } else if (n.grad.rows() != n.val().rows() || n.grad.cols() != n.val().cols()) {
        n.grad = Matrix<T>::Zero(n.val().rows(), n.val().cols());
    }
    return n.grad;
}

template <typename T>
Var Tape<T>::constant(Matrix<T> value) {
    return push(std::move(value));
}

template <typename T>
Var Tape<T>::param(std::size_t index) {
    if (!params_ || index >= params_->size()) throw ConfigError("tape: parameter index out of range");
    if (param_leaf_.size() < params_->size()) param_leaf_.resize(params_->size(), -1);
    if (param_leaf_[index] >= 0) return Var{param_leaf_[index]};
    Node n;
    n.ref = &params_->value(index);
    n.param = static_cast<std::int64_t>(index);
    nodes_.push_back(std::move(n));
    const auto id = static_cast<std::int32_t>(nodes_.size() - 1);
    param_leaf_[index] = id;
    return Var{id};
}

template <typename T>
const Matrix<T>& Tape<T>::value(Var v) const {
    return node(v).val();
}

template <typename T>
Matrix<T> Tape<T>::grad(Var v) const {
    const Node& n = node(v);
    if (n.grad.size() == 0) return Matrix<T>::Zero(n.val().rows(), n.val().cols());
    return n.grad;
}

template <typename T>
Var Tape<T>::linear(Var x, Var w, Var b) {
    const Matrix<T>& X = value(x);
    const Matrix<T>& W = value(w);
    if (X.cols() != W.rows()) {
        throw ConfigError("linear: input " + shape_str(X.rows(), X.cols()) + " vs weight " +
                          shape_str(W.rows(), W.cols()));
    }
    Matrix<T> Y(X.rows(), W.cols());
    Y.noalias() = X * W;
    if (b.valid()) {
        const Matrix<T>& B = value(b);
        if (B.rows() != 1 || B.cols() != W.cols()) throw ConfigError("linear: bias shape mismatch");
        Y.rowwise() += B.row(0);
    }
    const std::int32_t xi = x.id, wi = w.id, bi = b.id;
    Var out{static_cast<std::int32_t>(nodes_.size())};
    return push(std::move(Y), [this, xi, wi, bi, out]() {
        const Matrix<T>& dY = nodes_[out.id].grad;
        const Matrix<T>& Xv = nodes_[xi].val();
        const Matrix<T>& Wv = nodes_[wi].val();
        grad_slot(xi).noalias() += dY * Wv.transpose();
        grad_slot(wi).noalias() += Xv.transpose() * dY;
        if (bi >= 0) grad_slot(bi).row(0) += dY.colwise().sum();
    });
}

template <typename T>
Var Tape<T>::matmul(Var a, Var b) {
    return linear(a, b, Var{});
}

template <typename T>
Var Tape<T>::add(Var a, Var b) {
    const Matrix<T>& A = value(a);
    const Matrix<T>& B = value(b);
    if (A.rows() != B.rows() || A.cols() != B.cols()) {
        throw ConfigError("add: shape mismatch " + shape_str(A.rows(), A.cols()) + " vs " +
                          shape_str(B.rows(), B.cols()));
    }
    Matrix<T> Y = A + B;
    const std::int32_t ai = a.id, bi = b.id;
    Var out{static_cast<std::int32_t>(nodes_.size())};
    return push(std::move(Y), [this, ai, bi, out]() {
        const Matrix<T>& dY = nodes_[out.id].grad;
        grad_slot(ai) += dY;
        grad_slot(bi) += dY;
    });
}

template <typename T>
Var Tape<T>::add_row(Var x, Var row) {
    const Matrix<T>& X = value(x);
    const Matrix<T>& R = value(row);
    if (R.rows() != 1 || R.cols() != X.cols()) throw ConfigError("add_row: shape mismatch");
    Matrix<T> Y = X;
    Y.rowwise() += R.row(0);
    const std::int32_t xi = x.id, ri = row.id;
    Var out{static_cast<std::int32_t>(nodes_.size())};
    return push(std::move(Y), [this, xi, ri, out]() {
        const Matrix<T>& dY = nodes_[out.id].grad;
        grad_slot(xi) += dY;
        grad_slot(ri).row(0) += dY.colwise().sum();
    });
}

template <typename T>
Var Tape<T>::scale(Var x, T s) {
    Matrix<T> Y = value(x) * s;
    const std::int32_t xi = x.id;
    Var out{static_cast<std::int32_t>(nodes_.size())};
    return push(std::move(Y), [this, xi, s, out]() { grad_slot(xi) += nodes_[out.id].grad * s; });
}

template <typename T>
Var Tape<T>::silu(Var x) {
    const Matrix<T>& X = value(x);
    Matrix<T> Y(X.rows(), X.cols());
    Y.array() = X.array() / (T(1) + (-X.array()).exp());
    const std::int32_t xi = x.id;
    Var out{static_cast<std::int32_t>(nodes_.size())};
    return push(std::move(Y), [this, xi, out]() {
        const Matrix<T>& dY = nodes_[out.id].grad;
        const auto xa = nodes_[xi].val().array();
        const auto s = (T(1) + (-xa).exp()).inverse().eval();
        grad_slot(xi).array() += dY.array() * (s + xa * s * (T(1) - s));
    });
}

template <typename T>
Var Tape<T>::concat_cols(std::initializer_list<Var> parts) {
    if (parts.size() == 0) throw ConfigError("concat_cols: no inputs");
    const Eigen::Index rows = value(*parts.begin()).rows();
    Eigen::Index cols = 0;
    std::vector<std::int32_t> ids;
    std::vector<Eigen::Index> offsets;
    for (Var p : parts) {
        const Matrix<T>& P = value(p);
        if (P.rows() != rows) throw ConfigError("concat_cols: row count mismatch");
        ids.push_back(p.id);
        offsets.push_back(cols);
        cols += P.cols();
    }
    Matrix<T> Y(rows, cols);
    for (std::size_t k = 0; k < ids.size(); ++k) {
        const Matrix<T>& P = nodes_[ids[k]].val();
        Y.middleCols(offsets[k], P.cols()) = P;
    }
    Var out{static_cast<std::int32_t>(nodes_.size())};
    return push(std::move(Y), [this, ids = std::move(ids), offsets = std::move(offsets), out]() {
        const Matrix<T>& dY = nodes_[out.id].grad;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            Matrix<T>& dP = grad_slot(ids[k]);
            dP += dY.middleCols(offsets[k], dP.cols());
        }
    });
}

template <typename T>
Var Tape<T>::slice_rows(Var x, Eigen::Index start, Eigen::Index count) {
    const Matrix<T>& X = value(x);
    if (start < 0 || count < 0 || start + count > X.rows()) {
        throw ConfigError("slice_rows: rows [" + std::to_string(start) + ", " + std::to_string(start + count) +
                          ") outside " + shape_str(X.rows(), X.cols()));
    }
    Matrix<T> Y = X.middleRows(start, count);
    const std::int32_t xi = x.id;
    Var out{static_cast<std::int32_t>(nodes_.size())};
    return push(std::move(Y), [this, xi, start, count, out]() {
        grad_slot(xi).middleRows(start, count) += nodes_[out.id].grad;
    });
}

template <typename T>
Var Tape<T>::gather_rows(Var x, std::span<const int> rows) {
    const Matrix<T>& X = value(x);
    Matrix<T> Y(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] < 0 || rows[r] >= X.rows()) {
            throw ConfigError("gather_rows: index " + std::to_string(rows[r]) + " out of range at position " +
                              std::to_string(r));
        }
        Y.row(static_cast<Eigen::Index>(r)) = X.row(rows[r]);
    }
    const std::int32_t xi = x.id;
    Var out{static_cast<std::int32_t>(nodes_.size())};
    return push(std::move(Y), [this, xi, rows, out]() {
        const Matrix<T>& dY = nodes_[out.id].grad;
        Matrix<T>& dX = grad_slot(xi);
        for (std::size_t r = 0; r < rows.size(); ++r) dX.row(rows[r]) += dY.row(static_cast<Eigen::Index>(r));
    });
}

template <typename T>
Var Tape<T>::scatter_add_rows(Var x, std::span<const int> rows, int out_rows) {
    const Matrix<T>& X = value(x);
    if (static_cast<std::size_t>(X.rows()) != rows.size()) throw ConfigError("scatter_add_rows: index count mismatch");
    Matrix<T> Y = Matrix<T>::Zero(out_rows, X.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] < 0 || rows[r] >= out_rows) {
            throw ConfigError("scatter_add_rows: index " + std::to_string(rows[r]) + " out of range at position " +
                              std::to_string(r));
        }
        Y.row(rows[r]) += X.row(static_cast<Eigen::Index>(r));
    }
    const std::int32_t xi = x.id;
    Var out{static_cast<std::int32_t>(nodes_.size())};
    return push(std::move(Y), [this, xi, rows, out]() {
        const Matrix<T>& dY = nodes_[out.id].grad;
        Matrix<T>& dX = grad_slot(xi);
        for (std::size_t r = 0; r < rows.size(); ++r) dX.row(static_cast<Eigen::Index>(r)) += dY.row(rows[r]);
    });
}

template <typename T>
Var Tape<T>::layer_norm(Var x, Var gamma, Var beta, T eps) {
    const Matrix<T>& X = value(x);
    const Matrix<T>& G = value(gamma);
    const Matrix<T>& B = value(beta);
    const Eigen::Index c = X.cols();
    if (c == 0) throw ConfigError("layer_norm: zero-length feature dimension");
    if (G.rows() != 1 || G.cols() != c || B.rows() != 1 || B.cols() != c) {
        throw ConfigError("layer_norm: scale/shift must be 1x" + std::to_string(c));
    }
    const Eigen::Matrix<T, Eigen::Dynamic, 1> mean = X.rowwise().mean();
    Matrix<T> xhat = X.colwise() - mean;
    Eigen::Array<T, Eigen::Dynamic, 1> inv_std =
        (xhat.array().square().rowwise().sum() / static_cast<T>(c) + eps).rsqrt();
    xhat.array().colwise() *= inv_std;
    Matrix<T> Y(X.rows(), c);
    Y.array() = xhat.array().rowwise() * G.row(0).array();
    Y.rowwise() += B.row(0);
    const std::int32_t xi = x.id, gi = gamma.id, bi = beta.id;
    Var out{static_cast<std::int32_t>(nodes_.size())};
    return push(std::move(Y), [this, xi, gi, bi, out, xhat = std::move(xhat), inv_std = std::move(inv_std)]() {
        const Matrix<T>& dY = nodes_[out.id].grad;
        const Matrix<T>& Gv = nodes_[gi].val();
        grad_slot(gi).row(0) += (dY.array() * xhat.array()).colwise().sum().matrix();
        grad_slot(bi).row(0) += dY.colwise().sum();
        Matrix<T>& dX = grad_slot(xi);
        const T inv_c = T(1) / static_cast<T>(dY.cols());
        Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> dxhat = dY.array().rowwise() * Gv.row(0).array();
        const Eigen::Array<T, Eigen::Dynamic, 1> m1 = dxhat.rowwise().sum() * inv_c;
        const Eigen::Array<T, Eigen::Dynamic, 1> m2 = (dxhat * xhat.array()).rowwise().sum() * inv_c;
        dxhat.colwise() -= m1;
        dxhat -= xhat.array().colwise() * m2;
        dxhat.colwise() *= inv_std;
        dX.array() += dxhat;
    });
}

template <typename T>
Var Tape<T>::sum(Var x) {
    Matrix<T> Y(1, 1);
    Y(0, 0) = value(x).sum();
    const std::int32_t xi = x.id;
    Var out{static_cast<std::int32_t>(nodes_.size())};
    return push(std::move(Y), [this, xi, out]() { grad_slot(xi).array() += nodes_[out.id].grad(0, 0); });
}

template <typename T>
Var Tape<T>::weighted_mse(Var a, Var b, T weight) {
    const Matrix<T>& A = value(a);
    const Matrix<T>& B = value(b);
    if (A.rows() != B.rows() || A.cols() != B.cols()) throw ConfigError("weighted_mse: shape mismatch");
    const T count = static_cast<T>(A.size());
    Matrix<T> Y(1, 1);
    Y(0, 0) = count > 0 ? weight * (A - B).squaredNorm() / count : T(0);
    const std::int32_t ai = a.id, bi = b.id;
    Var out{static_cast<std::int32_t>(nodes_.size())};
    return push(std::move(Y), [this, ai, bi, weight, count, out]() {
        if (count == 0) return;
        const T g = nodes_[out.id].grad(0, 0);
        Matrix<T> d = (nodes_[ai].val() - nodes_[bi].val()) * (T(2) * weight * g / count);
        grad_slot(ai) += d;
        grad_slot(bi) -= d;
    });
}

template <typename T>
void Tape<T>::backward(Var loss) {
    if (done_) throw ConfigError("tape: backward already run");
    const Matrix<T>& L = value(loss);
    if (L.rows() != 1 || L.cols() != 1) throw ConfigError("backward: loss must be a 1x1 scalar");
    if (!std::isfinite(static_cast<double>(L(0, 0)))) throw NumericError("backward: loss is not finite");
    done_ = true;
    grad_slot(loss.id)(0, 0) = T(1);
    for (std::int32_t i = loss.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.grad.size() == 0 || !n.backward) continue;
        n.backward();
    }
    if (!params_) return;
    for (const Node& n : nodes_) {
        if (n.param < 0 || n.grad.size() == 0) continue;
        params_->grad(static_cast<std::size_t>(n.param)) += n.grad;
    }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace mfd
