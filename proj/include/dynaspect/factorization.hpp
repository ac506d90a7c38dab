#pragma once

#include "dynaspect/core.hpp"

#include <vector>

namespace dynaspect {

/// 1 / ||B^T B||_2, the largest stable gradient step for the alpha update.
double pfbs_max_step(const BasisMatrix& basis);

struct PfbsOptions {
    double step = 0.0; // 0 selects pfbs_max_step
    double beta = 0.0; // weight of ||alpha||_{1,inf}
    int iters = 50;
    bool nonneg_variant = false;
};

/**
 * Proximal forward-backward splitting for
 *     min_alpha  beta ||alpha||_{1,inf} + 1/2 ||U - alpha B^T||^2.
 * Each step is alpha + step (U - alpha B^T) B followed by prox_l1inf with
 * delta = step * beta. `residual_trace`, when given, receives
 * 1/2 ||U - alpha B^T||^2 after every step.
 */
CoefficientMatrix pfbs_solve_alpha(const CoefficientMatrix& alpha, const BasisMatrix& basis, const Matrix& u,
                                   const PfbsOptions& options, std::vector<double>* residual_trace = nullptr);

/// Gram-condition threshold above which solve_basis switches to damped CG.
inline constexpr double kBasisConditionLimit = 1e12;

/**
 * Least-squares basis for fixed coefficients: solves
 * (alpha^T alpha) B^T = alpha^T U. Direct factorisation when the Gram matrix is
 * well conditioned, otherwise conjugate gradients on the Gram matrix plus
 * 1e-10 * trace / K damping. Throws DomainError when alpha is identically zero.
 */
BasisMatrix solve_basis(const CoefficientMatrix& alpha, const Matrix& u);

} // namespace dynaspect
