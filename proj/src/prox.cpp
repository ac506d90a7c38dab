#include "dynaspect/prox.hpp"

#include "dynaspect/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace dynaspect {

double prox_kl_dual(double g, double f, double sigma) {
    // ((g+1)/2)^2 + sigma f - g == ((g-1)/2)^2 + sigma f, a sum of nonnegatives
    const double radicand = (g - 1.0) * (g - 1.0) + 4.0 * sigma * f;
    return 0.5 * (g + 1.0 - std::sqrt(radicand));
}

Vector prox_kl_dual(const Vector& g_tilde, const Vector& f, double sigma) {
    if (g_tilde.size() != f.size())
        throw DimensionError("prox_kl_dual: size mismatch");
    if (!(sigma > 0.0))
        throw DomainError("prox_kl_dual: sigma must be positive");
    Vector out(g_tilde.size());
    for (Eigen::Index k = 0; k < out.size(); ++k)
        out[k] = prox_kl_dual(g_tilde[k], f[k], sigma);
    return out;
}

Vector prox_l2_fidelity_dual(const Vector& g_tilde, const Vector& f, double sigma) {
    if (g_tilde.size() != f.size())
        throw DimensionError("prox_l2_fidelity_dual: size mismatch");
    return (g_tilde - sigma * f) / (1.0 + sigma);
}

Vector prox_l2_dual(const Vector& b_tilde, double eta, double sigma) {
    if (eta < 0.0 || sigma < 0.0)
        throw DomainError("prox_l2_dual: eta and sigma must be nonnegative");
    if (eta + sigma == 0.0)
        return b_tilde;
    return (eta / (eta + sigma)) * b_tilde;
}

void project_unit_ball_inplace(double* dx, double* dy, std::size_t n) {
    for (std::size_t p = 0; p < n; ++p) {
        const double m2 = dx[p] * dx[p] + dy[p] * dy[p];
        if (m2 > 1.0) {
            const double s = 1.0 / std::sqrt(m2);
            dx[p] *= s;
            dy[p] *= s;
        }
    }
}

GradientField project_unit_ball(const GradientField& field) {
    GradientField out = field;
    project_unit_ball_inplace(out.dx.data(), out.dy.data(), static_cast<std::size_t>(out.dx.size()));
    return out;
}

void dual_update_edge_inplace(double* dx, double* dy, const double* qx, const double* qy, std::size_t n,
                              double w, int sign, bool paper_literal) {
    const double shift = paper_literal ? -sign : sign;
    const double inv_w = 1.0 / w;
    for (std::size_t p = 0; p < n; ++p) {
        double vx = dx[p] * inv_w + shift * qx[p];
        double vy = dy[p] * inv_w + shift * qy[p];
        const double m2 = vx * vx + vy * vy;
        if (m2 > 1.0) {
            const double s = 1.0 / std::sqrt(m2);
            vx *= s;
            vy *= s;
        }
        dx[p] = w * (vx - shift * qx[p]);
        dy[p] = w * (vy - shift * qy[p]);
    }
}

GradientField dual_update_edge(const GradientField& d_tilde, const GradientField& q_ref, double w,
                               int sign, bool paper_literal) {
    if (!(w > 0.0))
        throw DomainError("dual_update_edge: weight must be positive");
    if (sign != 1 && sign != -1)
        throw DomainError("dual_update_edge: sign must be +1 or -1");
    if (d_tilde.width != q_ref.width || d_tilde.height != q_ref.height)
        throw DimensionError("dual_update_edge: field grids differ");
    GradientField out = d_tilde;
    dual_update_edge_inplace(out.dx.data(), out.dy.data(), q_ref.dx.data(), q_ref.dy.data(),
                             static_cast<std::size_t>(out.dx.size()), w, sign, paper_literal);
    return out;
}

Matrix primal_update_u(const Matrix& u_prime, const Matrix& target, double gamma, double tau) {
    if (u_prime.rows() != target.rows() || u_prime.cols() != target.cols())
        throw DimensionError("primal_update_u: shape mismatch");
    if (!(tau > 0.0) || gamma < 0.0)
        throw DomainError("primal_update_u: need tau > 0 and gamma >= 0");
    const double denom = gamma + 1.0 / tau;
    return ((gamma * target + u_prime / tau) / denom).cwiseMax(0.0);
}

namespace {

/// Soft-threshold level t >= 0 with sum max(a_i - t, 0) = radius for a >= 0
/// whose sum exceeds radius.
double water_level(std::vector<double> a, double radius) {
    std::sort(a.begin(), a.end(), std::greater<>());
    double cumulative = 0.0;
    double level = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        cumulative += a[k];
        const double candidate = (cumulative - radius) / static_cast<double>(k + 1);
        if (candidate < a[k])
            level = candidate;
        else
            break;
    }
    return std::max(level, 0.0);
}

} // namespace

Vector project_l1_ball(const Vector& v, double radius) {
    if (radius < 0.0)
        throw DomainError("project_l1_ball: radius must be nonnegative");
    if (v.cwiseAbs().sum() <= radius)
        return v;
    if (radius == 0.0)
        return Vector::Zero(v.size());
    std::vector<double> mags(static_cast<std::size_t>(v.size()));
    for (Eigen::Index k = 0; k < v.size(); ++k)
        mags[static_cast<std::size_t>(k)] = std::abs(v[k]);
    const double t = water_level(std::move(mags), radius);
    Vector out(v.size());
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        const double m = std::max(std::abs(v[k]) - t, 0.0);
        out[k] = v[k] < 0.0 ? -m : m;
    }
    return out;
}

Vector project_positive_l1_ball(const Vector& v, double radius) {
    if (radius < 0.0)
        throw DomainError("project_positive_l1_ball: radius must be nonnegative");
    std::vector<double> pos;
    double total = 0.0;
    for (double x : v)
        if (x > 0.0) {
            pos.push_back(x);
            total += x;
        }
    if (total <= radius)
        return v;
    const double t = radius == 0.0 ? std::numeric_limits<double>::infinity() : water_level(std::move(pos), radius);
    Vector out = v;
    for (auto& x : out)
        if (x > 0.0)
            x = std::max(x - t, 0.0);
    return out;
}

Matrix prox_l1inf(const Matrix& alpha, double delta, bool nonneg_variant) {
    if (delta < 0.0)
        throw DomainError("prox_l1inf: delta must be nonnegative");
    Matrix out(alpha.rows(), alpha.cols());
    for (Eigen::Index k = 0; k < alpha.cols(); ++k) {
        const Vector col = alpha.col(k);
        const Vector proj = nonneg_variant ? project_positive_l1_ball(col, delta) : project_l1_ball(col, delta);
        out.col(k) = col - proj;
    }
    return out;
}

GradientField update_edge_subgradient(const GradientField& q, const GradientField& d_ii, double w_ii,
                                      double* unclamped_max) {
    if (!(w_ii > 0.0))
        throw DomainError("update_edge_subgradient: weight must be positive");
    if (q.width != d_ii.width || q.height != d_ii.height)
        throw DimensionError("update_edge_subgradient: field grids differ");
    GradientField out{q.width, q.height, q.dx + d_ii.dx / w_ii, q.dy + d_ii.dy / w_ii};
    if (unclamped_max)
        *unclamped_max = out.max_magnitude();
    project_unit_ball_inplace(out.dx.data(), out.dy.data(), static_cast<std::size_t>(out.dx.size()));
    return out;
}

} // namespace dynaspect
