#pragma once

#include "mfd/error.hpp"

namespace mfd {

template <typename T>
std::size_t ParamStore<T>::add(const std::string& name, Matrix<T> init) {
    if (lookup_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    const std::size_t idx = entries_.size();
    Matrix<T> grad = Matrix<T>::Zero(init.rows(), init.cols());
    entries_.push_back({name, std::move(init), std::move(grad)});
    lookup_.emplace(name, idx);
    return idx;
}

template <typename T>
std::size_t ParamStore<T>::index(const std::string& name) const {
    auto it = lookup_.find(name);
    if (it == lookup_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
}

template <typename T>
std::size_t ParamStore<T>::num_scalars() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += static_cast<std::size_t>(e.value.size());
    return n;
}

template <typename T>
void ParamStore<T>::zero_grad() {
    for (auto& e : entries_) e.grad.setZero();
}

template <typename T>
template <typename U>
void ParamStore<T>::assign_from(const ParamStore<U>& other) {
    if (other.size() != size()) throw ConfigError("parameter count mismatch");
    for (std::size_t i = 0; i < size(); ++i) {
        if (other.name(i) != name(i)) {
            throw ConfigError("parameter name mismatch: " + other.name(i) + " vs " + name(i));
        }
        const auto& src = other.value(i);
        if (src.rows() != entries_[i].value.rows() || src.cols() != entries_[i].value.cols()) {
            throw ConfigError("parameter shape mismatch: " + name(i));
        }
        entries_[i].value = src.template cast<T>();
    }
}

}  // namespace mfd
