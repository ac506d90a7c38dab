#include "dynaspect/driver.hpp"

#include "dynaspect/errors.hpp"
#include "dynaspect/factorization.hpp"
#include "dynaspect/metrics.hpp"
#include "dynaspect/prox.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>

namespace dynaspect {

namespace {

double cubic_bspline(double x) {
    const double a = std::abs(x);
    if (a >= 2.0)
        return 0.0;
    if (a >= 1.0) {
        const double r = 2.0 - a;
        return r * r * r / 6.0;
    }
    return (4.0 - 6.0 * a * a + 3.0 * a * a * a) / 6.0;
}

// Largest ||A_t||^2 over frames.
double max_frame_norm_sq(const SinogramSet& sino, const ProjectorGeometry& geom) {
    double best = 0.0;
    for (const auto& fr : sino.frames) {
        LinearOperator op;
        op.domain = geom.pixels();
        op.range = static_cast<Eigen::Index>(fr.views()) * geom.bins;
        op.apply = [&](const Vector& x) { return forward_project(x, fr.angles_deg, geom); };
        op.adjoint = [&](const Vector& y) { return back_project(y, fr.angles_deg, geom); };
        const double n = operator_norm_estimate(op, 1e-8, 500);
        best = std::max(best, n * n);
    }
    return best;
}

// Residual A_t u_t - f_t per frame.
std::vector<Vector> residuals(const Matrix& u, const SinogramSet& sino, const ProjectorGeometry& geom) {
    std::vector<Vector> r(sino.frames.size());
#pragma omp parallel for schedule(static)
    for (int t = 0; t < sino.frame_count(); ++t) {
        const auto& fr = sino.frames[static_cast<std::size_t>(t)];
        Vector p(fr.counts.size());
        forward_project_into(u.col(t).data(), fr.angles_deg, geom, p.data());
        r[static_cast<std::size_t>(t)] = p - fr.counts;
    }
    return r;
}

Matrix back_project_frames(const std::vector<Vector>& views, const SinogramSet& sino, const ProjectorGeometry& geom) {
    Matrix out = Matrix::Zero(geom.pixels(), sino.frame_count());
#pragma omp parallel for schedule(static)
    for (int t = 0; t < sino.frame_count(); ++t)
        back_project_add(views[static_cast<std::size_t>(t)].data(), sino.frames[static_cast<std::size_t>(t)].angles_deg,
                         geom, 1.0, out.col(t).data());
    return out;
}

// A_t alpha for one frame: (views * bins) x K.
Matrix project_columns(const Matrix& alpha, const SinogramFrame& fr, const ProjectorGeometry& geom) {
    Matrix c(fr.counts.size(), alpha.cols());
    for (Eigen::Index k = 0; k < alpha.cols(); ++k)
        forward_project_into(alpha.col(k).data(), fr.angles_deg, geom, c.col(k).data());
    return c;
}

double half_squared(const std::vector<Vector>& r) {
    double s = 0.0;
    for (const auto& v : r)
        s += v.squaredNorm();
    return 0.5 * s;
}

Factorization zero_triple(const SinogramSet& sino, const ProjectorGeometry& geom, int k) {
    const int t = sino.frame_count();
    return {DynamicImage(geom.image_size, geom.image_size, t), {Matrix::Zero(geom.pixels(), k)},
            {Matrix::Zero(t, k)}};
}

Factorization finish(const Matrix& alpha, const Matrix& basis, const ProjectorGeometry& geom) {
    Matrix u = (alpha * basis.transpose()).cwiseMax(0.0);
    if (!u.allFinite())
        throw NumericalError("warm start produced non-finite values");
    return {DynamicImage(std::move(u), geom.image_size, geom.image_size), {alpha}, {basis}};
}

Factorization warm_start_ls(const SinogramSet& sino, const ProjectorGeometry& geom, const WarmStartOptions& opt,
                            std::vector<double>* trace) {
    const int frames = sino.frame_count();
    Matrix basis = init_bspline_basis(frames, opt.k).data;
    Matrix alpha = Matrix::Zero(geom.pixels(), opt.k);
    const double a_norm_sq = 1.05 * max_frame_norm_sq(sino, geom);

    for (int it = 0; it < opt.iters; ++it) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(basis.transpose() * basis, Eigen::EigenvaluesOnly);
        const double lip = a_norm_sq * es.eigenvalues().maxCoeff();
        if (lip > 0.0) {
            const double step = 1.0 / lip;
            for (int s = 0; s < opt.alpha_steps; ++s) {
                const Matrix u = alpha * basis.transpose();
                const Matrix grad = back_project_frames(residuals(u, sino, geom), sino, geom) * basis;
                alpha = (alpha - step * grad).cwiseMax(0.0);
            }
        }
#pragma omp parallel for schedule(static)
        for (int t = 0; t < frames; ++t) {
            const auto& fr = sino.frames[static_cast<std::size_t>(t)];
            const Matrix c = project_columns(alpha, fr, geom);
            basis.row(t) = c.completeOrthogonalDecomposition().solve(fr.counts).transpose();
        }
        if (trace)
            trace->push_back(half_squared(residuals(alpha * basis.transpose(), sino, geom)));
    }
    return finish(alpha, basis, geom);
}

double kl_value(const std::vector<Vector>& proj, const SinogramSet& sino) {
    double s = 0.0;
    for (std::size_t t = 0; t < proj.size(); ++t) {
        const auto& f = sino.frames[t].counts;
        for (Eigen::Index k = 0; k < f.size(); ++k) {
            const double p = std::max(proj[t](k), kKlFloor);
            s += p;
            if (f(k) != 0.0)
                s -= f(k) * std::log(p);
        }
    }
    return s;
}

std::vector<Vector> project_all(const Matrix& u, const SinogramSet& sino, const ProjectorGeometry& geom) {
    std::vector<Vector> p(sino.frames.size());
#pragma omp parallel for schedule(static)
    for (int t = 0; t < sino.frame_count(); ++t) {
        const auto& fr = sino.frames[static_cast<std::size_t>(t)];
        p[static_cast<std::size_t>(t)].resize(fr.counts.size());
        forward_project_into(u.col(t).data(), fr.angles_deg, geom, p[static_cast<std::size_t>(t)].data());
    }
    return p;
}

std::vector<Vector> ratios(const std::vector<Vector>& proj, const SinogramSet& sino) {
    std::vector<Vector> r(proj.size());
    for (std::size_t t = 0; t < proj.size(); ++t) {
        const auto& f = sino.frames[t].counts;
        r[t].resize(f.size());
        for (Eigen::Index k = 0; k < f.size(); ++k)
            r[t](k) = f(k) == 0.0 ? 0.0 : f(k) / std::max(proj[t](k), kKlFloor);
    }
    return r;
}

void check_monotone(double before, double after, const char* what) {
    const double slack = 1e-10 * (std::abs(before) + 1.0);
    if (after > before + slack)
        throw NumericalError(std::string("EM objective increased during the ") + what + " update");
}

Factorization warm_start_em(const SinogramSet& sino, const ProjectorGeometry& geom, const WarmStartOptions& opt,
                            std::vector<double>* trace) {
    const int frames = sino.frame_count();
    Matrix basis = init_bspline_basis(frames, opt.k).data;

    std::vector<Vector> ones(sino.frames.size());
    double total = 0.0;
    for (std::size_t t = 0; t < sino.frames.size(); ++t) {
        ones[t] = Vector::Ones(sino.frames[t].counts.size());
        total += sino.frames[t].counts.sum();
    }
    const Matrix sens = back_project_frames(ones, sino, geom); // A_t^T 1 per frame

    Matrix alpha = Matrix::Ones(geom.pixels(), opt.k);
    {
        double mass = 0.0;
        for (const auto& p : project_all(alpha * basis.transpose(), sino, geom))
            mass += p.sum();
        if (!(mass > 0.0))
            throw DomainError("em: data are not seen by any pixel");
        alpha *= total / mass;
    }

    auto proj = project_all(alpha * basis.transpose(), sino, geom);
    double kl = kl_value(proj, sino);
    for (int it = 0; it < opt.iters; ++it) {
        // alpha <- alpha * [A_B^T (f / A_B alpha)] / [A_B^T 1]
        const Matrix num = back_project_frames(ratios(proj, sino), sino, geom) * basis;
        const Matrix den = sens * basis;
        for (Eigen::Index j = 0; j < alpha.cols(); ++j)
            for (Eigen::Index p = 0; p < alpha.rows(); ++p)
                if (den(p, j) > 0.0)
                    alpha(p, j) *= num(p, j) / den(p, j);
        proj = project_all(alpha * basis.transpose(), sino, geom);
        double next = kl_value(proj, sino);
        if (opt.check_monotone)
            check_monotone(kl, next, "coefficient");
        kl = next;
        if (trace)
            trace->push_back(kl);

        const auto r = ratios(proj, sino);
#pragma omp parallel for schedule(static)
        for (int t = 0; t < frames; ++t) {
            const auto& fr = sino.frames[static_cast<std::size_t>(t)];
            const Matrix c = project_columns(alpha, fr, geom);
            const Vector bnum = c.transpose() * r[static_cast<std::size_t>(t)];
            const Vector bden = c.colwise().sum().transpose();
            for (Eigen::Index k = 0; k < basis.cols(); ++k)
                if (bden(k) > 0.0)
                    basis(t, k) *= bnum(k) / bden(k);
        }
        proj = project_all(alpha * basis.transpose(), sino, geom);
        next = kl_value(proj, sino);
        if (opt.check_monotone)
            check_monotone(kl, next, "basis");
        kl = next;
        if (trace)
            trace->push_back(kl);
    }
    return finish(alpha, basis, geom);
}

bool all_zero(const SinogramSet& sino) {
    for (const auto& fr : sino.frames)
        if (fr.counts.cwiseAbs().maxCoeff() > 0.0)
            return false;
    return true;
}

} // namespace

BasisMatrix init_bspline_basis(int frames, int k) {
    if (frames < 1 || k < 1)
        throw ConfigError("B-spline basis needs T >= 1 and K >= 1");
    if (k > frames)
        throw ConfigError("B-spline basis needs K <= T");
    Matrix b(frames, k);
    if (k == 1) {
        b.setOnes();
        return {b};
    }
    const double h = static_cast<double>(frames - 1) / static_cast<double>(k - 1);
    for (int t = 0; t < frames; ++t)
        for (int j = 0; j < k; ++j)
            b(t, j) = cubic_bspline((static_cast<double>(t) - j * h) / h);
    return {b};
}

Factorization warm_start(const SinogramSet& sino, const ProjectorGeometry& geom, FidelityKind kind,
                         const WarmStartOptions& options, std::vector<double>* trace) {
    sino.validate();
    geom.validate();
    if (options.iters < 1)
        throw ConfigError("warm start needs at least one iteration");
    if (options.alpha_steps < 1)
        throw ConfigError("warm start needs at least one coefficient step");
    if (sino.bins() != geom.bins)
        throw DimensionError("sinogram bins do not match the geometry");
    if (all_zero(sino))
        return zero_triple(sino, geom, options.k);
    if (kind == FidelityKind::KullbackLeibler)
        return warm_start_em(sino, geom, options, trace);
    return warm_start_ls(sino, geom, options, trace);
}

void ReconstructionConfig::validate() const {
    if (!(weights.gamma > 0.0) || !std::isfinite(weights.gamma))
        throw ConfigError("gamma must be positive");
    if (weights.beta < 0.0 || weights.eta < 0.0 || weights.lambda < 0.0)
        throw ConfigError("beta, eta and lambda must be nonnegative");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
        throw ConfigError("epsilon must be positive");
    if (outer_iters < 1 || inner_iters < 1 || pfbs_iters < 0)
        throw ConfigError("iteration caps must be positive");
    if (outer_tol < 0.0 || inner_tol < 0.0)
        throw ConfigError("tolerances must be nonnegative");
    if (window_halfwidth < 0)
        throw ConfigError("window halfwidth must be nonnegative");
    if (!(theta >= 0.0 && theta <= 1.0))
        throw ConfigError("theta must lie in [0, 1]");
    if (!(step_ratio > 0.0))
        throw ConfigError("step ratio must be positive");
    if (warm.k < 1 || warm.iters < 1 || warm.alpha_steps < 1)
        throw ConfigError("warm start settings must be positive");
}

ReconstructionConfig default_solver(FidelityKind kind) {
    ReconstructionConfig c;
    if (kind == FidelityKind::KullbackLeibler) {
        c.weights.gamma = 0.1;
        c.weights.beta = 0.1;
        c.weights.eta = 0.1;
        c.weights.lambda = 1.0;
    }
    return c;
}

ReconstructionRun reconstruct(const SinogramSet& sino, const ProjectorGeometry& geom,
                              const ReconstructionConfig& config, FidelityKind kind,
                              const DynamicImage* ground_truth, const Factorization* init) {
    config.validate();
    sino.validate();
    geom.validate();
    if (sino.bins() != geom.bins)
        throw DimensionError("sinogram bins do not match the geometry");
    const int frames = sino.frame_count();
    if (ground_truth && (ground_truth->frames() != frames || ground_truth->width != geom.image_size ||
                         ground_truth->height != geom.image_size))
        throw DimensionError("ground truth does not match the data");

    ReconstructionRun run;
    run.config = config;
    run.fidelity = kind;
    Factorization start = init ? *init : warm_start(sino, geom, kind, config.warm);
    if (start.u.frames() != frames || start.u.pixels() != geom.pixels() ||
        start.alpha.data.rows() != geom.pixels() || start.basis.data.rows() != frames ||
        start.alpha.data.cols() != start.basis.data.cols())
        throw DimensionError("initial factorization does not match the data");

    CoefficientMatrix alpha = start.alpha;
    BasisMatrix basis = start.basis;
    const WeightWindow window = WeightWindow::uniform(frames, config.window_halfwidth);
    run.q = EdgeSubgradientState::zeros(frames, geom.image_size, geom.image_size);
    PdhgState state = PdhgState::init(start.u, sino, window);

    ModelWeights weights = config.weights;
    run.initial = objective_terms({state.u, alpha, basis, state.z, run.q, window, sino, geom}, weights, kind);

    const bool temporal = weights.eta > 0.0 && frames > 1;
    const bool edges = weights.lambda > 0.0;
    run.operator_norm = pdhg_operator_norm(geom, sino, window, temporal, edges);
    PdhgSettings settings;
    settings.sigma = config.step_ratio * 0.99 / run.operator_norm;
    settings.tau = 0.99 / (config.step_ratio * run.operator_norm);
    settings.theta = config.theta;
    settings.max_iters = config.inner_iters;
    settings.tol = config.inner_tol;
    settings.paper_literal_signs = config.paper_literal_signs;

    for (int n = 0; n < config.outer_iters; ++n) {
        const Matrix previous = state.u.data;
        const Matrix target = alpha.data * basis.data.transpose();
        const PdhgProblem problem{sino, geom, kind, window, run.q, target, weights.gamma, weights.eta, weights.lambda};
        const PdhgResult inner = pdhg_solve_u(state, problem, settings, run.operator_norm);

        PfbsOptions pf;
        pf.beta = weights.beta / weights.gamma;
        pf.iters = config.pfbs_iters;
        pf.nonneg_variant = config.nonneg_md_variant;
        alpha = pfbs_solve_alpha(alpha, basis, state.u.data, pf);
        if (alpha.data.cwiseAbs().maxCoeff() > 0.0)
            basis = solve_basis(alpha, state.u.data);

        OuterRecord rec;
        rec.iteration = n + 1;
        rec.gamma = weights.gamma;
        rec.inner_iterations = inner.iterations;
        rec.inner_change = inner.last_change;
        rec.terms = objective_terms({state.u, alpha, basis, state.z, run.q, window, sino, geom}, weights, kind);

        if (edges) {
            for (int i = 0; i < frames; ++i) {
                double unclamped = 0.0;
                auto& q = run.q.q[static_cast<std::size_t>(i)];
                q = update_edge_subgradient(q, state.d_self[static_cast<std::size_t>(i)],
                                            weights.lambda * window.self(i), &unclamped);
                rec.q_unclamped_max = std::max(rec.q_unclamped_max, unclamped);
            }
        }
        const double denom = previous.norm();
        rec.u_change = denom > 0.0 ? (state.u.data - previous).norm() / denom : state.u.data.norm();
        if (ground_truth)
            rec.mean_relative_error = mean_frame_error(state.u, *ground_truth);
        for (Eigen::Index k = 0; k < alpha.data.cols(); ++k)
            if (alpha.data.col(k).cwiseAbs().maxCoeff() > 0.0)
                ++rec.active_basis;
        run.history.push_back(rec);

        weights.gamma = config.weights.gamma * std::pow(config.epsilon, n + 1);
        if (rec.u_change < config.outer_tol)
            break;
    }

    run.u = state.u;
    run.alpha = alpha;
    run.basis = basis;
    return run;
}

DynamicImage baseline_fbp(const SinogramSet& sino, const ProjectorGeometry& geom) {
    return fbp_reconstruct(sino, geom);
}

DynamicImage baseline_ls(const SinogramSet& sino, const ProjectorGeometry& geom, const WarmStartOptions& options,
                         std::vector<double>* trace) {
    return warm_start(sino, geom, FidelityKind::Gaussian, options, trace).u;
}

DynamicImage baseline_em(const SinogramSet& sino, const ProjectorGeometry& geom, const WarmStartOptions& options,
                         std::vector<double>* trace) {
    for (const auto& fr : sino.frames)
        if (fr.counts.size() > 0 && fr.counts.minCoeff() < 0.0)
            throw DataError("EM needs nonnegative data; the sinogram has negative values");
    return warm_start(sino, geom, FidelityKind::KullbackLeibler, options, trace).u;
}

} // namespace dynaspect
