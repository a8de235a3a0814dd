#include "mfd/synthcfd/synthcfd.hpp"

#include "mfd/error.hpp"
#include "mfd/util/io.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

namespace mfd {

using cplx = std::complex<double>;

void ObstacleSet::validate() const {
    if (!(half_width > 0.0) || !std::isfinite(half_width)) throw ValidationError("obstacles: half-width must be positive");
    const double gap = kClearance * half_width;
    for (std::size_t k = 0; k < disks.size(); ++k) {
        const Disk& d = disks[k];
        const std::string tag = "obstacles: disk " + std::to_string(k);
        if (!(d.radius > 0.0) || !std::isfinite(d.radius) || !std::isfinite(d.center.x) || !std::isfinite(d.center.y)) {
            throw ValidationError(tag + " needs a finite center and positive radius");
        }
        if (std::abs(d.center.x) + d.radius >= half_width || std::abs(d.center.y) + d.radius >= half_width) {
            throw ValidationError(tag + " extends outside the domain");
        }
        for (std::size_t j = 0; j < k; ++j) {
            const double dist = norm(d.center - disks[j].center) - d.radius - disks[j].radius;
            if (dist < gap) {
                throw ValidationError(tag + " and disk " + std::to_string(j) + " are closer than the clearance " +
                                      format_double(gap));
            }
        }
    }
}

double ObstacleSet::covered_fraction() const {
    double area = 0.0;
    for (const Disk& d : disks) area += std::numbers::pi * d.radius * d.radius;
    return area / (4.0 * half_width * half_width);
}

int ObstacleSet::disk_containing(Vec2 p, double tol) const {
    for (std::size_t k = 0; k < disks.size(); ++k) {
        if (norm(p - disks[k].center) < disks[k].radius * (1.0 - tol)) return static_cast<int>(k);
    }
    return -1;
}

ObstacleSet sample_obstacles(const ObstacleSampling& cfg, double half_width, std::mt19937_64& rng) {
    if (cfg.disks_min < 0 || cfg.disks_max < cfg.disks_min) throw ConfigError("obstacles: need 0 <= disks_min <= disks_max");
    if (!(cfg.radius_min > 0.0) || cfg.radius_max < cfg.radius_min) {
        throw ConfigError("obstacles: need 0 < radius_min <= radius_max");
    }
    if (!(cfg.center_extent > 0.0) || cfg.center_extent >= 1.0) throw ConfigError("obstacles: center_extent must lie in (0, 1)");
    std::uniform_int_distribution<int> count(cfg.disks_min, cfg.disks_max);
    std::uniform_real_distribution<double> radius(cfg.radius_min, cfg.radius_max);
    std::uniform_real_distribution<double> pos(-cfg.center_extent, cfg.center_extent);
    const int n = count(rng);
    for (int attempt = 0; attempt < 10000; ++attempt) {
        ObstacleSet set;
        set.half_width = half_width;
        for (int k = 0; k < n; ++k) {
            const double r = radius(rng) * half_width;
            const double x = pos(rng) * half_width;
            const double y = pos(rng) * half_width;
            set.disks.push_back({{x, y}, r});
        }
        double disturbance = 0.0;
        for (const Disk& d : set.disks) {
            const double to_wall = half_width - std::max(std::abs(d.center.x), std::abs(d.center.y));
            disturbance += d.radius * d.radius / (to_wall * to_wall);
        }
        if (disturbance > cfg.max_boundary_disturbance) continue;
        try {
            set.validate();
        } catch (const ValidationError&) {
            continue;
        }
        return set;
    }
    throw ValidationError("obstacles: no valid layout of " + std::to_string(n) + " disks found");
}

namespace {

struct Doublet {
    cplx position;
    cplx strength;  // complex potential term strength / (z - position)
    int owner;      // disk whose boundary condition produced it
};

/// Image of the doublet m / (z - z0) in the circle |z - c| = a, by the
/// circle theorem: -conj(m) a^2 / conj(z0 - c)^2 placed at c + a^2 / conj(z0 - c).
Doublet reflect(const Doublet& d, const Disk& disk, int owner) {
    const cplx c(disk.center.x, disk.center.y);
    const cplx rel = std::conj(d.position - c);
    const double a2 = disk.radius * disk.radius;
    return {c + a2 / rel, -std::conj(d.strength) * a2 / (rel * rel), owner};
}

}  // namespace

std::vector<Vec2> potential_flow(const ObstacleSet& obstacles, double phi, double u_inf,
                                 std::span<const Vec2> points, int image_rounds) {
    if (image_rounds < 0) throw ConfigError("potential_flow: image_rounds must be >= 0");
    for (std::size_t i = 0; i < points.size(); ++i) {
        const int k = obstacles.disk_containing(points[i]);
        if (k >= 0) {
            throw ValidationError("potential_flow: point " + std::to_string(i) + " (" + format_double(points[i].x) +
                                  ", " + format_double(points[i].y) + ") lies inside disk " + std::to_string(k));
        }
    }
    const cplx stream = u_inf * std::polar(1.0, -phi);  // dW/dz of the free stream
    std::vector<Doublet> all;
    std::vector<Doublet> previous;
    for (std::size_t k = 0; k < obstacles.disks.size(); ++k) {
        const Disk& d = obstacles.disks[k];
        previous.push_back({cplx(d.center.x, d.center.y), u_inf * std::polar(1.0, phi) * d.radius * d.radius,
                            static_cast<int>(k)});
    }
    all = previous;
    for (int round = 0; round < image_rounds && obstacles.disks.size() > 1; ++round) {
        std::vector<Doublet> next;
        for (std::size_t k = 0; k < obstacles.disks.size(); ++k) {
            for (const Doublet& d : previous) {
                if (d.owner == static_cast<int>(k)) continue;
                next.push_back(reflect(d, obstacles.disks[k], static_cast<int>(k)));
            }
        }
        all.insert(all.end(), next.begin(), next.end());
        previous = std::move(next);
    }
    std::vector<Vec2> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        const cplx z(points[i].x, points[i].y);
        cplx w = stream;
        for (const Doublet& d : all) {
            const cplx dz = z - d.position;
            w -= d.strength / (dz * dz);
        }
        out[i] = {w.real(), -w.imag()};
    }
    return out;
}

}  // namespace mfd
