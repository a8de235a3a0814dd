#include "mfd/metrics/metrics.hpp"

#include "mfd/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace mfd {

namespace {

void require_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw ConfigError(std::string(what) + ": node count mismatch (" + std::to_string(a) + " vs " +
                          std::to_string(b) + ")");
    }
}

double relative(double num_sq, double den_sq) {
    if (den_sq > 0.0) return std::sqrt(num_sq / den_sq);
    if (num_sq == 0.0) return 0.0;
    throw NumericError("relative error: reference field is identically zero");
}

}  // namespace

std::vector<double> magnitudes(std::span<const Vec2> field) {
    std::vector<double> out(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) out[i] = norm(field[i]);
    return out;
}

PointwiseMetrics pointwise_metrics(std::span<const Vec2> pred, std::span<const Vec2> gt) {
    require_same_size(pred.size(), gt.size(), "pointwise_metrics");
    if (gt.empty()) throw ConfigError("pointwise_metrics: empty field");
    double du = 0, gu = 0, dx = 0, gx = 0, dy = 0, gy = 0, dm = 0, gm = 0, epe = 0, cosine = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const Vec2 p = pred[i], g = gt[i];
        const Vec2 d = p - g;
        const double np = norm(p), ng = norm(g);
        du += dot(d, d);
        gu += dot(g, g);
        dx += d.x * d.x;
        gx += g.x * g.x;
        dy += d.y * d.y;
        gy += g.y * g.y;
        dm += (np - ng) * (np - ng);
        gm += ng * ng;
        epe += norm(d);
        if (np > 0.0 && ng > 0.0) {
            cosine += std::clamp(dot(p, g) / (np * ng), -1.0, 1.0);
        } else if (np == ng) {
            cosine += 1.0;
        }
    }
    const double n = static_cast<double>(gt.size());
    PointwiseMetrics m;
    m.rel_l2_u = relative(du, gu);
    m.rel_l2_ux = relative(dx, gx);
    m.rel_l2_uy = relative(dy, gy);
    m.rel_l2_mag = relative(dm, gm);
    m.mae = epe / n;
    m.cosine = cosine / n;
    return m;
}

RasterField rasterize(const Mesh& mesh, std::span<const double> nodal, int resolution) {
    require_same_size(nodal.size(), mesh.num_nodes(), "rasterize");
    if (resolution < 1) throw ConfigError("rasterize: resolution must be positive");
    if (mesh.coords.empty()) throw ConfigError("rasterize: empty mesh");
    double xmin = mesh.coords[0].x, xmax = xmin, ymin = mesh.coords[0].y, ymax = ymin;
    for (const Vec2& p : mesh.coords) {
        xmin = std::min(xmin, p.x), xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y), ymax = std::max(ymax, p.y);
    }
    RasterField r;
    r.resolution = resolution;
    r.x0 = xmin;
    r.y0 = ymin;
    r.dx = (xmax - xmin) / resolution;
    r.dy = (ymax - ymin) / resolution;
    if (!(r.dx > 0.0) || !(r.dy > 0.0)) throw ValidationError("rasterize: mesh has a degenerate bounding box");
    const std::size_t cells = static_cast<std::size_t>(resolution) * resolution;
    r.values.assign(cells, 0.0);
    r.mask.assign(cells, 0);
    for (const auto& t : mesh.triangles) {
        const Vec2 a = mesh.coords[t[0]], b = mesh.coords[t[1]], c = mesh.coords[t[2]];
        const double det = cross(b - a, c - a);
        if (det == 0.0) continue;
        const double tx0 = std::min({a.x, b.x, c.x}), tx1 = std::max({a.x, b.x, c.x});
        const double ty0 = std::min({a.y, b.y, c.y}), ty1 = std::max({a.y, b.y, c.y});
        const int c0 = std::max(0, static_cast<int>(std::floor((tx0 - r.x0) / r.dx - 0.5)));
        const int c1 = std::min(resolution - 1, static_cast<int>(std::ceil((tx1 - r.x0) / r.dx - 0.5)));
        const int r0 = std::max(0, static_cast<int>(std::floor((ty0 - r.y0) / r.dy - 0.5)));
        const int r1 = std::min(resolution - 1, static_cast<int>(std::ceil((ty1 - r.y0) / r.dy - 0.5)));
        for (int row = r0; row <= r1; ++row) {
            for (int col = c0; col <= c1; ++col) {
                const std::size_t idx = static_cast<std::size_t>(row) * resolution + col;
                if (r.mask[idx]) continue;
                const Vec2 p{r.x0 + (col + 0.5) * r.dx, r.y0 + (row + 0.5) * r.dy};
                const double l1 = cross(b - p, c - p) / det;
                const double l2 = cross(c - p, a - p) / det;
                const double l3 = 1.0 - l1 - l2;
                constexpr double tol = -1e-12;
                if (l1 < tol || l2 < tol || l3 < tol) continue;
                r.values[idx] = l1 * nodal[t[0]] + l2 * nodal[t[1]] + l3 * nodal[t[2]];
                r.mask[idx] = 1;
            }
        }
    }
    return r;
}

double ssim_grid(const RasterField& a, const RasterField& b, double dynamic_range, const SsimSettings& s) {
    if (a.resolution != b.resolution) throw ConfigError("ssim: raster resolutions differ");
    if (s.window < 1 || s.window % 2 == 0) throw ConfigError("ssim: window must be a positive odd size");
    const int n = a.resolution;
    const int half = s.window / 2;
    std::vector<double> w(static_cast<std::size_t>(s.window) * s.window);
    double wsum = 0.0;
    for (int i = -half; i <= half; ++i) {
        for (int j = -half; j <= half; ++j) {
            const double v = std::exp(-(i * i + j * j) / (2.0 * s.sigma * s.sigma));
            w[static_cast<std::size_t>(i + half) * s.window + (j + half)] = v;
            wsum += v;
        }
    }
    for (double& v : w) v /= wsum;
    const double c1 = (s.k1 * dynamic_range) * (s.k1 * dynamic_range);
    const double c2 = (s.k2 * dynamic_range) * (s.k2 * dynamic_range);
    double total = 0.0;
    std::size_t count = 0;
    for (int row = 0; row < n; ++row) {
        for (int col = 0; col < n; ++col) {
            if (!a.valid(row, col) || !b.valid(row, col)) continue;
            double sw = 0, mx = 0, my = 0;
            for (int i = -half; i <= half; ++i) {
                for (int j = -half; j <= half; ++j) {
                    const int rr = row + i, cc = col + j;
                    if (rr < 0 || rr >= n || cc < 0 || cc >= n || !a.valid(rr, cc) || !b.valid(rr, cc)) continue;
                    const double wk = w[static_cast<std::size_t>(i + half) * s.window + (j + half)];
                    sw += wk;
                    mx += wk * a.at(rr, cc);
                    my += wk * b.at(rr, cc);
                }
            }
            mx /= sw;
            my /= sw;
            double vx = 0, vy = 0, cxy = 0;
            for (int i = -half; i <= half; ++i) {
                for (int j = -half; j <= half; ++j) {
                    const int rr = row + i, cc = col + j;
                    if (rr < 0 || rr >= n || cc < 0 || cc >= n || !a.valid(rr, cc) || !b.valid(rr, cc)) continue;
                    const double wk = w[static_cast<std::size_t>(i + half) * s.window + (j + half)] / sw;
                    const double ex = a.at(rr, cc) - mx, ey = b.at(rr, cc) - my;
                    vx += wk * ex * ex;
                    vy += wk * ey * ey;
                    cxy += wk * ex * ey;
                }
            }
            total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    }
    if (count == 0) throw ValidationError("ssim: every raster cell is masked");
    return total / static_cast<double>(count);
}

double ssim_raster(std::span<const Vec2> pred, std::span<const Vec2> gt, const Mesh& mesh, int resolution,
                   const SsimSettings& s) {
    if (resolution < 32) throw ConfigError("ssim_raster: resolution must be >= 32");
    require_same_size(pred.size(), gt.size(), "ssim_raster");
    const std::vector<double> mp = magnitudes(pred), mg = magnitudes(gt);
    double range = 0.0;
    for (double v : mp) range = std::max(range, v);
    for (double v : mg) range = std::max(range, v);
    return ssim_grid(rasterize(mesh, mp, resolution), rasterize(mesh, mg, resolution), range, s);
}

StructureFunction structure_function(std::span<const double> pred, std::span<const double> gt,
                                     std::span<const Vec2> coords, int n_bins, std::size_t n_pairs,
                                     std::uint64_t seed) {
    require_same_size(pred.size(), gt.size(), "structure_function");
    require_same_size(pred.size(), coords.size(), "structure_function");
    if (n_bins < 1) throw ConfigError("structure_function: n_bins must be >= 1");
    const std::size_t n = coords.size();
    if (n < 2) throw ConfigError("structure_function: need at least two nodes");
    const std::size_t available = n * (n - 1) / 2;

    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    if (n_pairs >= available) {
        pairs.reserve(available);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
        }
    } else {
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        pairs.reserve(n_pairs);
        while (pairs.size() < n_pairs) {
            const std::size_t i = pick(rng), j = pick(rng);
            if (i != j) pairs.emplace_back(i, j);
        }
    }

    std::vector<double> dist(pairs.size());
    double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        dist[k] = norm(coords[pairs[k].first] - coords[pairs[k].second]);
        if (dist[k] > 0.0) rmin = std::min(rmin, dist[k]);
        rmax = std::max(rmax, dist[k]);
    }
    StructureFunction out;
    out.pairs_used = pairs.size();
    if (!(rmax > 0.0)) throw ValidationError("structure_function: all sampled pairs coincide");
    const double lmin = std::log(rmin), lmax = std::log(rmax);
    const double width = (lmax - lmin) / n_bins;
    std::vector<double> sum_r(static_cast<std::size_t>(n_bins), 0.0), sp(sum_r), st(sum_r);
    std::vector<std::size_t> cnt(static_cast<std::size_t>(n_bins), 0);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        if (!(dist[k] > 0.0)) continue;
        int b = width > 0.0 ? static_cast<int>((std::log(dist[k]) - lmin) / width) : 0;
        b = std::clamp(b, 0, n_bins - 1);
        const auto [i, j] = pairs[k];
        const double dp = pred[i] - pred[j], dt = gt[i] - gt[j];
        sum_r[b] += dist[k];
        sp[b] += dp * dp;
        st[b] += dt * dt;
        ++cnt[b];
    }
    std::size_t total = 0;
    for (std::size_t b = 0; b < cnt.size(); ++b) total += cnt[b];
    double num = 0.0, den = 0.0;
    for (std::size_t b = 0; b < cnt.size(); ++b) {
        if (cnt[b] == 0) {
            ++out.dropped_bins;
            continue;
        }
        const double c = static_cast<double>(cnt[b]);
        out.r.push_back(sum_r[b] / c);
        out.s2_pred.push_back(sp[b] / c);
        out.s2_true.push_back(st[b] / c);
        out.count.push_back(cnt[b]);
        const double wk = c / static_cast<double>(total);
        num += wk * (out.s2_pred.back() - out.s2_true.back()) * (out.s2_pred.back() - out.s2_true.back());
        den += wk * out.s2_true.back() * out.s2_true.back();
    }
    out.eps_s2 = std::sqrt(num) / (std::sqrt(den) + kMetricEps);
    return out;
}

double wasserstein1(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw ConfigError("wasserstein1: empty sample set");
    std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    // Quantile levels i/n and j/m compared as integers i*m and j*n.
    const std::uint64_t n = x.size(), m = y.size();
    std::uint64_t i = 0, j = 0, level = 0;
    double acc = 0.0;
    while (i < n && j < m) {
        const std::uint64_t next_i = (i + 1) * m, next_j = (j + 1) * n;
        const std::uint64_t next = std::min(next_i, next_j);
        acc += std::abs(x[i] - y[j]) * static_cast<double>(next - level);
        level = next;
        if (next_i == next) ++i;
        if (next_j == next) ++j;
    }
    return acc / static_cast<double>(n * m);
}

double silverman_bandwidth(std::span<const double> samples) {
    if (samples.empty()) throw ConfigError("silverman_bandwidth: empty sample set");
    std::vector<double> s(samples.begin(), samples.end());
    std::sort(s.begin(), s.end());
    const double n = static_cast<double>(s.size());
    double mean = 0.0;
    for (double v : s) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : s) var += (v - mean) * (v - mean);
    const double sd = s.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    auto quantile = [&](double q) {
        const double pos = q * (n - 1.0);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, s.size() - 1);
        return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
    };
    const double iqr = quantile(0.75) - quantile(0.25);
    double spread = sd;
    if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
    const double h = 0.9 * spread * std::pow(n, -0.2);
    return std::max(h, 1e-6);
}

std::vector<double> gaussian_kde(std::span<const double> samples, double bandwidth, std::span<const double> grid) {
    if (samples.empty()) throw ConfigError("gaussian_kde: empty sample set");
    if (!(bandwidth > 0.0)) throw ConfigError("gaussian_kde: bandwidth must be positive");
    const double norm_c = 1.0 / (static_cast<double>(samples.size()) * bandwidth * std::sqrt(2.0 * std::numbers::pi));
    std::vector<double> out(grid.size(), 0.0);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double acc = 0.0;
        for (double v : samples) {
            const double z = (grid[g] - v) / bandwidth;
            acc += std::exp(-0.5 * z * z);
        }
        out[g] = acc * norm_c;
    }
    return out;
}

PdfComparison pdf_wasserstein(std::span<const double> pred, std::span<const double> gt, int grid_points) {
    if (pred.size() < 10 || gt.size() < 10) throw ConfigError("pdf_wasserstein: need at least 10 samples per set");
    if (grid_points < 2) throw ConfigError("pdf_wasserstein: need at least 2 grid points");
    PdfComparison out;
    out.bandwidth_pred = silverman_bandwidth(pred);
    out.bandwidth_true = silverman_bandwidth(gt);
    const auto [pmin, pmax] = std::minmax_element(pred.begin(), pred.end());
    const auto [gmin, gmax] = std::minmax_element(gt.begin(), gt.end());
    const double pad = 3.0 * std::max(out.bandwidth_pred, out.bandwidth_true);
    const double lo = std::min(*pmin, *gmin) - pad, hi = std::max(*pmax, *gmax) + pad;
    out.grid.resize(static_cast<std::size_t>(grid_points));
    for (int k = 0; k < grid_points; ++k) out.grid[static_cast<std::size_t>(k)] = lo + (hi - lo) * k / (grid_points - 1);
    out.pdf_pred = gaussian_kde(pred, out.bandwidth_pred, out.grid);
    out.pdf_true = gaussian_kde(gt, out.bandwidth_true, out.grid);
    out.w1 = wasserstein1(pred, gt);
    return out;
}

PodEnergy pod_energy(const std::vector<std::vector<Vec2>>& snapshots) {
    if (snapshots.size() < 2) throw ConfigError("pod_energy: need at least two snapshots");
    const std::size_t n = snapshots[0].size();
    for (std::size_t s = 1; s < snapshots.size(); ++s) {
        if (snapshots[s].size() != n) throw ConfigError("pod_energy: snapshots live on different meshes");
    }
    const auto cols = static_cast<Eigen::Index>(snapshots.size());
    Eigen::MatrixXd x(static_cast<Eigen::Index>(2 * n), cols);
    for (Eigen::Index s = 0; s < cols; ++s) {
        const auto& f = snapshots[static_cast<std::size_t>(s)];
        for (std::size_t i = 0; i < n; ++i) {
            x(static_cast<Eigen::Index>(i), s) = f[i].x;
            x(static_cast<Eigen::Index>(n + i), s) = f[i].y;
        }
    }
    const double raw_norm = x.norm();
    const Eigen::VectorXd mean = x.rowwise().mean();
    x.colwise() -= mean;
    PodEnergy out;
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(x);
    const Eigen::VectorXd sv = svd.singularValues();
    const double total = sv.squaredNorm();
    if (!(total > (1e-12 * raw_norm) * (1e-12 * raw_norm)) || total == 0.0) {
        out.degenerate = true;
        out.energy.assign(static_cast<std::size_t>(sv.size()), 0.0);
        return out;
    }
    for (Eigen::Index k = 0; k < sv.size(); ++k) out.energy.push_back(sv(k) * sv(k) / total);
    std::sort(out.energy.begin(), out.energy.end(), std::greater<>());
    return out;
}

Vorticity vorticity(const Mesh& mesh, std::span<const Vec2> field) {
    require_same_size(field.size(), mesh.num_nodes(), "vorticity");
    const auto nb = node_neighbors(mesh);
    std::vector<double> ux(field.size()), uy(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) ux[i] = field[i].x, uy[i] = field[i].y;
    const GradientResult gx = lsq_gradient(mesh, nb, ux);
    const GradientResult gy = lsq_gradient(mesh, nb, uy);
    Vorticity out;
    out.omega.resize(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) out.omega[i] = gy.grad[i].x - gx.grad[i].y;
    out.flagged = gx.degenerate;
    for (int i : out.flagged) out.omega[static_cast<std::size_t>(i)] = 0.0;
    return out;
}

Moments moments(std::span<const double> v) {
    if (v.empty()) throw ConfigError("moments: empty field");
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    return {mean, std::sqrt(var / static_cast<double>(v.size()))};
}

FlowMoments flow_moments(std::span<const Vec2> field) {
    std::vector<double> ux(field.size()), uy(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) ux[i] = field[i].x, uy[i] = field[i].y;
    const std::vector<double> mag = magnitudes(field);
    return {moments(ux), moments(uy), moments(mag)};
}

}  // namespace mfd
