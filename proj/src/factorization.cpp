#include "dynaspect/factorization.hpp"

#include "dynaspect/errors.hpp"
#include "dynaspect/prox.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace dynaspect {

double pfbs_max_step(const BasisMatrix& basis) {
    const Matrix gram = basis.data.transpose() * basis.data;
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
    const double top = es.eigenvalues().maxCoeff();
    if (!(top > 0.0))
        throw DomainError("basis is identically zero");
    return 1.0 / top;
}

CoefficientMatrix pfbs_solve_alpha(const CoefficientMatrix& alpha, const BasisMatrix& basis, const Matrix& u,
                                   const PfbsOptions& opt, std::vector<double>* residual_trace) {
    const Matrix& b = basis.data;
    if (alpha.data.cols() != b.cols() || alpha.data.rows() != u.rows() || b.rows() != u.cols())
        throw DimensionError("pfbs: alpha, B and U shapes are inconsistent");
    if (opt.beta < 0.0)
        throw ConfigError("pfbs: beta must be nonnegative");
    const double max_step = pfbs_max_step(basis);
    const double step = opt.step > 0.0 ? opt.step : max_step;
    if (step > max_step * (1.0 + 1e-12))
        throw ConfigError("pfbs: step exceeds 1 / ||B^T B||");

    // (U - a B^T) B = U B - a (B^T B)
    const Matrix ub = u * b;
    const Matrix gram = b.transpose() * b;
    Matrix a = alpha.data;
    for (int k = 0; k < opt.iters; ++k) {
        Matrix half = a + step * (ub - a * gram);
        a = prox_l1inf(half, step * opt.beta, opt.nonneg_variant);
        if (residual_trace)
            residual_trace->push_back(0.5 * (u - a * b.transpose()).squaredNorm());
    }
    if (!a.allFinite())
        throw NumericalError("pfbs produced non-finite coefficients");
    return {a};
}

namespace {

Vector conjugate_gradient(const Matrix& a, const Vector& rhs, int max_iters, double tol) {
    Vector x = Vector::Zero(rhs.size());
    Vector r = rhs;
    Vector p = r;
    double rr = r.squaredNorm();
    const double stop = tol * tol * std::max(rhs.squaredNorm(), 1e-300);
    for (int it = 0; it < max_iters && rr > stop; ++it) {
        const Vector ap = a * p;
        const double alpha = rr / p.dot(ap);
        x += alpha * p;
        r -= alpha * ap;
        const double next = r.squaredNorm();
        p = r + (next / rr) * p;
        rr = next;
    }
    return x;
}

} // namespace

BasisMatrix solve_basis(const CoefficientMatrix& alpha, const Matrix& u) {
    const Matrix& a = alpha.data;
    if (a.rows() != u.rows())
        throw DimensionError("solve_basis: alpha and U pixel counts differ");
    if (a.cols() < 1)
        throw DimensionError("solve_basis: need at least one basis element");
    const Matrix gram = a.transpose() * a;
    const Matrix rhs = a.transpose() * u; // K x T
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
    const double top = es.eigenvalues().maxCoeff();
    const double bottom = es.eigenvalues().minCoeff();
    if (!(top > 0.0))
        throw DomainError("solve_basis: coefficient matrix has rank zero");

    Matrix bt(a.cols(), u.cols());
    if (bottom > 0.0 && top / bottom < kBasisConditionLimit) {
        Eigen::LLT<Matrix> llt(gram);
        bt = llt.solve(rhs);
    } else {
        const auto k = static_cast<double>(a.cols());
        Matrix damped = gram;
        damped.diagonal().array() += 1e-10 * gram.trace() / k;
        for (Eigen::Index t = 0; t < rhs.cols(); ++t)
            bt.col(t) = conjugate_gradient(damped, rhs.col(t), 10 * static_cast<int>(a.cols()) + 100, 1e-14);
    }
    if (!bt.allFinite())
        throw NumericalError("solve_basis produced non-finite values");
    return {bt.transpose()};
}

} // namespace dynaspect
