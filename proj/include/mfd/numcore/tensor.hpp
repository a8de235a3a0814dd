#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

namespace mfd {

/// Dense row-major matrix. Every tensor in the model is two-dimensional:
/// rows index nodes or edges, columns index features.
template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

template <typename T>
bool all_finite(const Matrix<T>& m) {
    return m.allFinite();
}

/// Named learnable tensors with a gradient accumulator each.
/// Iteration order is insertion order; names are unique.
template <typename T>
class ParamStore {
public:
    struct Entry {
        std::string name;
        Matrix<T> value;
        Matrix<T> grad;
    };

    std::size_t add(const std::string& name, Matrix<T> init);

    std::size_t index(const std::string& name) const;
    bool contains(const std::string& name) const { return lookup_.count(name) != 0; }

    std::size_t size() const { return entries_.size(); }
    std::size_t num_scalars() const;

    const std::string& name(std::size_t i) const { return entries_[i].name; }
    Matrix<T>& value(std::size_t i) { return entries_[i].value; }
    const Matrix<T>& value(std::size_t i) const { return entries_[i].value; }
    Matrix<T>& grad(std::size_t i) { return entries_[i].grad; }
    const Matrix<T>& grad(std::size_t i) const { return entries_[i].grad; }

    void zero_grad();

    /// Copy every value into a store of another precision, same names and order.
    template <typename U>
    ParamStore<U> cast() const {
        ParamStore<U> out;
        for (const auto& e : entries_) out.add(e.name, e.value.template cast<U>());
        return out;
    }

    /// Overwrite values from a store with identical names and shapes.
    template <typename U>
    void assign_from(const ParamStore<U>& other);

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> lookup_;
};

}  // namespace mfd

#include "mfd/numcore/tensor_impl.hpp"
