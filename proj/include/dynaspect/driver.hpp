#pragma once

#include "dynaspect/core.hpp"
#include "dynaspect/pdhg.hpp"
#include "dynaspect/projector.hpp"
#include "dynaspect/regularization.hpp"

#include <optional>
#include <vector>

namespace dynaspect {

/// K uniform cubic B-splines sampled at t = 1..T; K = 1 gives a constant column.
BasisMatrix init_bspline_basis(int frames, int k);

struct Factorization {
    DynamicImage u;
    CoefficientMatrix alpha;
    BasisMatrix basis;
};

struct WarmStartOptions {
    int k = 20;
    int iters = 30;
    int alpha_steps = 5;   // projected-gradient steps per outer sweep (least-squares path)
    bool check_monotone = true;
};

/**
 * Factorised fit alpha B^T to the data with B started from B-splines.
 * Gaussian: alternating projected gradient on alpha >= 0 and exact per-frame
 * least squares on B. KL: alternating multiplicative EM updates on alpha then
 * B, with the KL objective checked for monotone decrease after every update.
 * `trace` receives the data term after each sweep.
 */
Factorization warm_start(const SinogramSet& sino, const ProjectorGeometry& geom, FidelityKind kind,
                         const WarmStartOptions& options, std::vector<double>* trace = nullptr);

struct ReconstructionConfig {
    ModelWeights weights{};      // gamma is the starting value
    double epsilon = 0.95;       // gamma <- gamma * epsilon per outer step
    int outer_iters = 20;
    double outer_tol = 1e-4;
    int window_halfwidth = 2;
    int inner_iters = 100;
    double inner_tol = 1e-5;
    double theta = 1.0;
    double step_ratio = 1.0;     // sigma = ratio * 0.99 / ||K||, tau = 0.99 / (ratio ||K||)
    int pfbs_iters = 50;
    bool paper_literal_signs = false;
    bool nonneg_md_variant = false;
    WarmStartOptions warm{};

    void validate() const;
};

/// Shipped defaults. The KL path uses smaller coupling weights because its
/// data term has far less curvature than the least-squares one.
ReconstructionConfig default_solver(FidelityKind kind);

struct OuterRecord {
    int iteration = 0;
    double gamma = 0.0;
    ObjectiveTerms terms{};
    double u_change = 0.0;
    int inner_iterations = 0;
    double inner_change = 0.0;
    double q_unclamped_max = 0.0;
    double mean_relative_error = -1.0; // < 0 without ground truth
    int active_basis = 0;              // nonzero columns of alpha
};

struct ReconstructionRun {
    ReconstructionConfig config;
    FidelityKind fidelity = FidelityKind::Gaussian;
    ObjectiveTerms initial{};
    std::vector<OuterRecord> history;
    DynamicImage u;
    CoefficientMatrix alpha;
    BasisMatrix basis;
    EdgeSubgradientState q;
    double operator_norm = 0.0;
};

/**
 * Alternating scheme: PDHG for U, PFBS for alpha, least squares for B, then
 * the TV subgradients q and gamma <- gamma * epsilon. Starts from
 * warm_start() unless `init` is supplied.
 */
ReconstructionRun reconstruct(const SinogramSet& sino, const ProjectorGeometry& geom,
                              const ReconstructionConfig& config, FidelityKind kind,
                              const DynamicImage* ground_truth = nullptr,
                              const Factorization* init = nullptr);

DynamicImage baseline_fbp(const SinogramSet& sino, const ProjectorGeometry& geom);
/// Alternating least squares for min ||A alpha B^T - f||^2.
DynamicImage baseline_ls(const SinogramSet& sino, const ProjectorGeometry& geom, const WarmStartOptions& options,
                         std::vector<double>* trace = nullptr);
/// Alternating EM for min KL(f, A alpha B^T); data must be nonnegative.
DynamicImage baseline_em(const SinogramSet& sino, const ProjectorGeometry& geom, const WarmStartOptions& options,
                         std::vector<double>* trace = nullptr);

} // namespace dynaspect
