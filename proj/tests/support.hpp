#pragma once

#include "dynaspect/core.hpp"
#include "dynaspect/projector.hpp"
#include "dynaspect/regularization.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>

namespace testsupport {

using dynaspect::Matrix;
using dynaspect::Vector;

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    Vector v(n);
    for (auto& x : v)
        x = d(rng);
    return v;
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double lo = -1.0,
                            double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i)
            m(i, j) = d(rng);
    return m;
}

inline dynaspect::GradientField random_field(std::mt19937_64& rng, int w, int h, double scale = 1.0) {
    dynaspect::GradientField g{w, h, random_vector(rng, w * h, -scale, scale), random_vector(rng, w * h, -scale, scale)};
    return g;
}

/// Random field with every per-pixel magnitude at most `radius`.
inline dynaspect::GradientField random_ball_field(std::mt19937_64& rng, int w, int h, double radius = 1.0) {
    auto g = random_field(rng, w, h, radius);
    for (Eigen::Index p = 0; p < g.dx.size(); ++p) {
        const double m = std::hypot(g.dx[p], g.dy[p]);
        if (m > radius) {
            g.dx[p] *= radius / m;
            g.dy[p] *= radius / m;
        }
    }
    return g;
}

/// Golden-section minimisation of a unimodal scalar function on [lo, hi].
inline double golden_min(const std::function<double(double)>& f, double lo, double hi, int iters = 200) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < iters; ++i) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

/// Sinogram layout with per-frame angles and zero counts.
inline dynaspect::SinogramSet layout(const dynaspect::ProjectorGeometry& geom,
                                     const std::vector<std::vector<double>>& angles) {
    dynaspect::SinogramSet s;
    for (const auto& a : angles) {
        dynaspect::SinogramFrame f;
        f.angles_deg = a;
        f.bins = geom.bins;
        f.counts = Vector::Zero(static_cast<Eigen::Index>(a.size()) * geom.bins);
        s.frames.push_back(f);
    }
    return s;
}

} // namespace testsupport
