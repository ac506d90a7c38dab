#pragma once

#include "dynaspect/core.hpp"
#include "dynaspect/regularization.hpp"

namespace dynaspect {

/**
 * Resolvent of the KL conjugate: (g~ + 1 - sqrt((g~ - 1)^2 + 4 sigma f)) / 2,
 * elementwise. Output is always <= 1.
 */
Vector prox_kl_dual(const Vector& g_tilde, const Vector& f, double sigma);
double prox_kl_dual(double g_tilde, double f, double sigma);

/// Resolvent of the conjugate of 1/2 ||. - f||^2: (g~ - sigma f) / (1 + sigma).
Vector prox_l2_fidelity_dual(const Vector& g_tilde, const Vector& f, double sigma);

/// Resolvent of the conjugate of eta/2 ||.||^2: eta / (eta + sigma) * b~.
Vector prox_l2_dual(const Vector& b_tilde, double eta, double sigma);

/// Per-pixel scaling by 1 / max(1, |v|).
GradientField project_unit_ball(const GradientField& field);
void project_unit_ball_inplace(double* dx, double* dy, std::size_t n);

/**
 * Resolvent of the conjugate of w (||.||_1 - sign <q, .>), i.e. the per-pixel
 * projection onto the disk of radius w centred at -sign * w * q:
 *     w * P(d~ / w + sign q) - sign * w * q.
 * `paper_literal` flips the shift to w * P(d~ / w - sign q) + sign * w * q.
 */
GradientField dual_update_edge(const GradientField& d_tilde, const GradientField& q_ref, double w,
                               int sign, bool paper_literal = false);
void dual_update_edge_inplace(double* dx, double* dy, const double* qx, const double* qy,
                              std::size_t n, double w, int sign, bool paper_literal = false);

/// max(0, (gamma * target + u' / tau) / (gamma + 1 / tau)).
Matrix primal_update_u(const Matrix& u_prime, const Matrix& target, double gamma, double tau);

/// Euclidean projection onto {x : ||x||_1 <= radius}.
Vector project_l1_ball(const Vector& v, double radius);

/// Projection onto {x : sum_i max(x_i, 0) <= radius}; nonpositive entries pass through.
Vector project_positive_l1_ball(const Vector& v, double radius);

/**
 * Column-wise prox of delta * max_i |.| via Moreau decomposition: each column
 * minus its projection onto the l1 ball of radius delta. With
 * `nonneg_variant` the projection uses the positive-part ball instead.
 */
Matrix prox_l1inf(const Matrix& alpha, double delta, bool nonneg_variant = false);

/// q + d / w, then clamped into the unit ball per pixel.
GradientField update_edge_subgradient(const GradientField& q, const GradientField& d_ii, double w_ii,
                                      double* unclamped_max = nullptr);

} // namespace dynaspect
