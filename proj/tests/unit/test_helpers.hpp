#pragma once

#include "mfd/mesh/multiscale.hpp"
#include "mfd/numcore/tensor.hpp"

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace mfd::testing {

/// Structured triangulation of an nx x ny grid on [0, w] x [0, h]. Perimeter
/// nodes are labelled boundary, the rest fluid.
Mesh grid_mesh(int nx, int ny, double w = 1.0, double h = 1.0);

/// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& name);

/// Largest relative error between an analytic gradient and central finite
/// differences of `loss` over every entry of every parameter, using
/// |a - b| / max(|a|, |b|, floor).
double max_fd_rel_error(ParamStore<double>& params, const std::function<double()>& loss,
                        const std::function<void()>& analytic, double h = 1e-5, double floor = 1e-6);

Matrix<double> random_matrix(int rows, int cols, std::mt19937_64& rng, double scale = 1.0);

/// Overwrites every parameter with N(0, scale^2) entries.
void randomize(ParamStore<double>& store, std::uint64_t seed, double scale);

std::vector<int> random_perm(std::size_t n, std::mt19937_64& rng);

/// Relabels original nodes by p (old i -> p[i]) and reduced nodes by q, and
/// shuffles the order of every edge list.
MultiscaleGraph permute_graph(const MultiscaleGraph& g, const std::vector<int>& p, const std::vector<int>& q,
                              std::mt19937_64& rng);

/// Optimal transport cost between two uniform empirical measures on the line,
/// solved as an integer min-cost flow.
double transport_lp(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace mfd::testing
