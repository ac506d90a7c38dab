#pragma once

#include "dynaspect/core.hpp"
#include "dynaspect/projector.hpp"
#include "dynaspect/regularization.hpp"

#include <vector>

namespace dynaspect {

/// Fixed inputs of one U-subproblem.
struct PdhgProblem {
    const SinogramSet& data;
    const ProjectorGeometry& geom;
    FidelityKind fidelity;
    const WeightWindow& window;
    const EdgeSubgradientState& q;
    const Matrix& factor_target; // alpha B^T
    double gamma = 1.0;
    double eta = 0.0;
    double lambda = 0.0;

    bool has_temporal() const { return eta > 0.0 && factor_target.cols() > 1; }
    bool has_edges() const { return lambda > 0.0; }
};

struct PdhgSettings {
    double sigma = 0.0; // step sizes; both required > 0
    double tau = 0.0;
    double theta = 1.0;
    int max_iters = 300;
    double tol = 1e-5; // relative primal change
    bool paper_literal_signs = false;
    int trace_every = 0; // 0 disables the per-iteration trace
};

/**
 * Primal and dual iterates. Kept between outer iterations so each
 * U-subproblem starts from the previous saddle point estimate.
 */
struct PdhgState {
    DynamicImage u;
    Matrix u_bar;
    std::vector<Vector> g;                  // per frame, sinogram shaped
    Matrix b;                               // M x (T-1)
    std::vector<GradientField> d_self;      // d_ii
    AuxiliaryImages z;                      // z_ij per window pair
    std::vector<Vector> z_bar;
    std::vector<GradientField> d_plus;      // paired with grad(u_i - z_ij)
    std::vector<GradientField> d_minus;     // paired with grad z_ij

    static PdhgState init(const DynamicImage& u0, const SinogramSet& layout, const WeightWindow& window);
};

struct PdhgTraceRow {
    int iteration = 0;
    double primal_change = 0.0;
    double objective = 0.0;      // U-subproblem surrogate
    double max_g = 0.0;          // KL dual feasibility requires <= 1
    double edge_violation = 0.0; // largest distance outside the shifted balls
    double min_u = 0.0;
};

struct PdhgResult {
    int iterations = 0;
    double last_change = 0.0;
    bool converged = false;
    std::vector<PdhgTraceRow> trace;
};

/// Stacked operator K X = (A U, d_t U, grad u_i, grad(u_i - z_ij), grad z_ij)
/// on X = (U, z). Blocks absent from the problem are left out.
LinearOperator pdhg_operator(const ProjectorGeometry& geom, const SinogramSet& layout,
                             const WeightWindow& window, bool temporal, bool edges);

double pdhg_operator_norm(const ProjectorGeometry& geom, const SinogramSet& layout,
                          const WeightWindow& window, bool temporal, bool edges);

/// H(f, AU) + gamma/2 ||U - alpha B^T||^2 + eta/2 ||d_t U||^2 + lambda sum_i R~(u_i, z_i.).
double u_subproblem_objective(const DynamicImage& u, const AuxiliaryImages& z, const PdhgProblem& problem);

/**
 * Runs the primal-dual iteration for U until the relative primal change drops
 * below settings.tol or max_iters is reached. Requires
 * sigma * tau * norm^2 <= 1 (checked against `operator_norm` when positive).
 */
PdhgResult pdhg_solve_u(PdhgState& state, const PdhgProblem& problem, const PdhgSettings& settings,
                        double operator_norm = 0.0);

} // namespace dynaspect
