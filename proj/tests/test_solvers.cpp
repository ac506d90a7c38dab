#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dynaspect/errors.hpp"
#include "dynaspect/factorization.hpp"
#include "dynaspect/pdhg.hpp"
#include "dynaspect/phantom.hpp"
#include "dynaspect/prox.hpp"
#include "support.hpp"

#include <Eigen/QR>

#include <cmath>

using namespace dynaspect;

namespace {

struct SmallProblem {
    int n = 8, T = 3;
    ProjectorGeometry geom = ProjectorGeometry::with_default_bins(8);
    SinogramSet data;
    DynamicImage truth{8, 8, 3};
    WeightWindow window = WeightWindow::uniform(3, 2);

    explicit SmallProblem(std::uint64_t seed, bool noisy = false) {
        std::mt19937_64 rng(seed);
        truth.data = testsupport::random_matrix(rng, 64, 3, 0, 1);
        data = testsupport::layout(geom, {{0.0, 90.0}, {31.0, 121.0}, {62.0, 152.0}});
        data = project_dynamic(truth, data, geom);
        if (noisy)
            for (auto& f : data.frames)
                f.counts += testsupport::random_vector(rng, f.counts.size(), -0.2, 0.2);
    }
};

PdhgSettings steps(double norm, int iters, double tol) {
    PdhgSettings s;
    s.sigma = s.tau = 0.99 / norm;
    s.max_iters = iters;
    s.tol = tol;
    return s;
}

LinearOperator frame_operator(const std::vector<double>& angles, const ProjectorGeometry& geom) {
    LinearOperator op;
    op.domain = geom.pixels();
    op.range = static_cast<Eigen::Index>(angles.size()) * geom.bins;
    op.apply = [angles, geom](const Vector& x) { return forward_project(x, angles, geom); };
    op.adjoint = [angles, geom](const Vector& y) { return back_project(y, angles, geom); };
    return op;
}

/// Projected gradient on the smooth Gaussian U-subproblem without edges.
Matrix projected_gradient(const SmallProblem& p, const Matrix& target, double gamma, double eta, int iters) {
    double worst = 0.0;
    for (const auto& f : p.data.frames)
        worst = std::max(worst, std::pow(operator_norm_estimate(frame_operator(f.angles_deg, p.geom), 1e-10, 5000), 2));
    const double step = 1.0 / (worst + gamma + 4.0 * eta);
    Matrix u = Matrix::Zero(64, p.T);
    for (int it = 0; it < iters; ++it) {
        Matrix grad = gamma * (u - target);
        for (int t = 0; t < p.T; ++t) {
            const auto& f = p.data.frames[t];
            grad.col(t) += back_project(forward_project(u.col(t), f.angles_deg, p.geom) - f.counts, f.angles_deg, p.geom);
            if (t > 0)
                grad.col(t) += eta * (u.col(t) - u.col(t - 1));
            if (t + 1 < p.T)
                grad.col(t) -= eta * (u.col(t + 1) - u.col(t));
        }
        u = (u - step * grad).cwiseMax(0.0);
    }
    return u;
}

} // namespace

TEST_CASE("stacked operator has an exact adjoint") {
    SmallProblem p(1);
    std::mt19937_64 rng(2);
    for (bool temporal : {false, true})
        for (bool edges : {false, true}) {
            const LinearOperator k = pdhg_operator(p.geom, p.data, p.window, temporal, edges);
            for (int trial = 0; trial < 5; ++trial) {
                const Vector x = testsupport::random_vector(rng, k.domain);
                const Vector y = testsupport::random_vector(rng, k.range);
                const double lhs = k.apply(x).dot(y), rhs = x.dot(k.adjoint(y));
                CHECK(std::abs(lhs - rhs) <= 1e-10 * (std::abs(lhs) + 1.0));
            }
        }
}

TEST_CASE("PDHG matches projected gradient on the smooth gaussian subproblem") {
    SmallProblem p(3, true);
    std::mt19937_64 rng(4);
    const Matrix target = testsupport::random_matrix(rng, 64, 3, 0, 1);
    const double gamma = 0.5, eta = 0.3;
    const EdgeSubgradientState q = EdgeSubgradientState::zeros(3, 8, 8);
    PdhgProblem pb{p.data, p.geom, FidelityKind::Gaussian, p.window, q, target, gamma, eta, 0.0};
    const double norm = pdhg_operator_norm(p.geom, p.data, p.window, true, false);
    PdhgState s = PdhgState::init(DynamicImage(8, 8, 3), p.data, p.window);
    const double entry = u_subproblem_objective(s.u, s.z, pb);
    const PdhgResult r = pdhg_solve_u(s, pb, steps(norm, 20000, 1e-13), norm);
    const double exit = u_subproblem_objective(s.u, s.z, pb);
    CHECK(exit <= entry);
    CHECK((s.u.data.array() >= 0.0).all());

    DynamicImage ref(projected_gradient(p, target, gamma, eta, 40000), 8, 8);
    const double best = u_subproblem_objective(ref, s.z, pb);
    CHECK(std::abs(exit - best) <= 1e-6 * best);
    CHECK((s.u.data - ref.data).cwiseAbs().maxCoeff() <= 1e-3);
    CHECK(r.iterations > 1);
}

TEST_CASE("PDHG on noiseless KL data fits the data") {
    SmallProblem p(5);
    const EdgeSubgradientState q = EdgeSubgradientState::zeros(3, 8, 8);
    const Matrix target = Matrix::Zero(64, 3);
    PdhgProblem pb{p.data, p.geom, FidelityKind::KullbackLeibler, p.window, q, target, 1e-6, 0.0, 0.0};
    const double norm = pdhg_operator_norm(p.geom, p.data, p.window, false, false);
    PdhgState s = PdhgState::init(DynamicImage(Matrix::Constant(64, 3, 0.5), 8, 8), p.data, p.window);
    PdhgSettings st = steps(norm, 3000, 1e-10);
    st.trace_every = 50;
    const double entry = u_subproblem_objective(s.u, s.z, pb);
    const PdhgResult r = pdhg_solve_u(s, pb, st, norm);
    const double exit = u_subproblem_objective(s.u, s.z, pb);
    CHECK(exit <= entry);
    for (const auto& row : r.trace) {
        CHECK(row.max_g <= 1.0);
        CHECK(row.min_u >= 0.0);
    }
    // the KL minimum sits at A u = f
    const SinogramSet proj = project_dynamic(s.u, p.data, p.geom);
    double best = 0.0;
    for (const auto& f : p.data.frames)
        for (double v : f.counts)
            if (v > 0.0)
                best += v - v * std::log(v);
    CHECK(kl_fidelity(p.data, proj) - best <= 1e-3 * std::abs(best));
}

TEST_CASE("PDHG with edge coupling stays feasible and lowers its objective") {
    SmallProblem p(6, true);
    std::mt19937_64 rng(7);
    EdgeSubgradientState q = EdgeSubgradientState::zeros(3, 8, 8);
    for (auto& qi : q.q)
        qi = testsupport::random_ball_field(rng, 8, 8);
    const Matrix target = testsupport::random_matrix(rng, 64, 3, 0, 1);
    for (auto kind : {FidelityKind::Gaussian, FidelityKind::KullbackLeibler}) {
        SinogramSet data = p.data;
        for (auto& f : data.frames)
            f.counts = f.counts.cwiseMax(0.0);
        PdhgProblem pb{data, p.geom, kind, p.window, q, target, 1.0, 0.5, 0.7};
        const double norm = pdhg_operator_norm(p.geom, data, p.window, true, true);
        PdhgState s = PdhgState::init(DynamicImage(Matrix::Constant(64, 3, 0.3), 8, 8), data, p.window);
        PdhgSettings st = steps(norm, 600, 1e-12);
        st.trace_every = 1;
        const double entry = u_subproblem_objective(s.u, s.z, pb);
        const PdhgResult r = pdhg_solve_u(s, pb, st, norm);
        REQUIRE(r.trace.size() == 600);
        for (const auto& row : r.trace) {
            CHECK(row.edge_violation <= 1e-12);
            CHECK(row.min_u >= 0.0);
            if (kind == FidelityKind::KullbackLeibler)
                CHECK(row.max_g <= 1.0);
        }
        const double exit = u_subproblem_objective(s.u, s.z, pb);
        CHECK(exit < entry);
        // a longer run improves on the short one only marginally
        const PdhgResult more = pdhg_solve_u(s, pb, steps(norm, 3000, 1e-12), norm);
        const double later = u_subproblem_objective(s.u, s.z, pb);
        CHECK(later <= exit + 1e-6 * std::abs(exit));
        CHECK(more.iterations >= 1);
    }
}

TEST_CASE("PDHG zero data from zero start exits at once") {
    SmallProblem p(8);
    const SinogramSet zero = p.data.zeros_like();
    const EdgeSubgradientState q = EdgeSubgradientState::zeros(3, 8, 8);
    const Matrix target = Matrix::Zero(64, 3);
    for (auto kind : {FidelityKind::Gaussian, FidelityKind::KullbackLeibler}) {
        PdhgProblem pb{zero, p.geom, kind, p.window, q, target, 1.0, 1.0, 1.0};
        const double norm = pdhg_operator_norm(p.geom, zero, p.window, true, true);
        PdhgState s = PdhgState::init(DynamicImage(8, 8, 3), zero, p.window);
        const PdhgResult r = pdhg_solve_u(s, pb, steps(norm, 100, 1e-5), norm);
        CHECK(r.iterations == 1);
        CHECK(r.converged);
        CHECK(s.u.data.isZero());
    }
}

TEST_CASE("PDHG is deterministic and validates its inputs") {
    SmallProblem p(9, true);
    std::mt19937_64 rng(10);
    EdgeSubgradientState q = EdgeSubgradientState::zeros(3, 8, 8);
    for (auto& qi : q.q)
        qi = testsupport::random_ball_field(rng, 8, 8);
    const Matrix target = testsupport::random_matrix(rng, 64, 3, 0, 1);
    PdhgProblem pb{p.data, p.geom, FidelityKind::Gaussian, p.window, q, target, 1.0, 1.0, 1.0};
    const double norm = pdhg_operator_norm(p.geom, p.data, p.window, true, true);
    PdhgState a = PdhgState::init(DynamicImage(8, 8, 3), p.data, p.window);
    PdhgState b = a;
    pdhg_solve_u(a, pb, steps(norm, 200, 0.0), norm);
    pdhg_solve_u(b, pb, steps(norm, 200, 0.0), norm);
    CHECK(a.u.data == b.u.data);
    for (std::size_t k = 0; k < a.d_self.size(); ++k)
        CHECK(a.d_self[k].dx == b.d_self[k].dx);

    PdhgSettings bad = steps(norm, 10, 1e-5);
    bad.sigma *= 1.5;
    bad.tau *= 1.5;
    CHECK_THROWS_AS(pdhg_solve_u(a, pb, bad, norm), ConfigError);
    bad = steps(norm, 10, 1e-5);
    bad.theta = 1.5;
    CHECK_THROWS_AS(pdhg_solve_u(a, pb, bad, norm), ConfigError);
    SinogramSet neg = p.data;
    neg.frames[0].counts[0] = -1.0;
    PdhgProblem kl{neg, p.geom, FidelityKind::KullbackLeibler, p.window, q, target, 1.0, 1.0, 1.0};
    CHECK_THROWS_AS(pdhg_solve_u(a, kl, steps(norm, 10, 1e-5), norm), DomainError);
}

TEST_CASE("PFBS gradient step follows the descent direction") {
    std::mt19937_64 rng(11);
    const Matrix u = testsupport::random_matrix(rng, 12, 6);
    const BasisMatrix b{testsupport::random_matrix(rng, 6, 3)};
    const CoefficientMatrix a0{testsupport::random_matrix(rng, 12, 3)};
    const double step = 0.5 * pfbs_max_step(b);
    const CoefficientMatrix a1 = pfbs_solve_alpha(a0, b, u, {step, 0.0, 1});
    const Matrix move = (a1.data - a0.data) / step;

    auto f = [&](const Matrix& a) { return 0.5 * (u - a * b.data.transpose()).squaredNorm(); };
    const double scale = a0.data.cwiseAbs().maxCoeff();
    const double h = 1e-5 * scale;
    Matrix fd(12, 3);
    for (Eigen::Index i = 0; i < 12; ++i)
        for (Eigen::Index k = 0; k < 3; ++k) {
            Matrix ap = a0.data, am = a0.data;
            ap(i, k) += h;
            am(i, k) -= h;
            fd(i, k) = (f(ap) - f(am)) / (2 * h);
        }
    CHECK((move + fd).norm() <= 1e-5 * fd.norm());
}

TEST_CASE("PFBS residual and objective decrease") {
    std::mt19937_64 rng(12);
    const Matrix a_true = testsupport::random_matrix(rng, 20, 3, 0, 1);
    const BasisMatrix b{testsupport::random_matrix(rng, 8, 3, 0, 1)};
    const Matrix u = a_true * b.data.transpose();
    std::vector<double> trace;
    const CoefficientMatrix out = pfbs_solve_alpha({Matrix::Zero(20, 3)}, b, u, {0.0, 0.0, 500}, &trace);
    REQUIRE(trace.size() == 500);
    for (std::size_t k = 1; k < trace.size(); ++k)
        CHECK(trace[k] <= trace[k - 1] + 1e-14);
    CHECK(trace.back() < 1e-3 * trace.front());

    // full objective with beta > 0, one step at a time
    const double beta = 0.3;
    CoefficientMatrix a{testsupport::random_matrix(rng, 20, 3)};
    auto obj = [&](const Matrix& m) { return beta * l1_inf_norm(m) + 0.5 * (u - m * b.data.transpose()).squaredNorm(); };
    double last = obj(a.data);
    for (int k = 0; k < 200; ++k) {
        a = pfbs_solve_alpha(a, b, u, {0.0, beta, 1});
        const double v = obj(a.data);
        CHECK(v <= last + 1e-12);
        last = v;
    }
    // converged: one more step barely moves
    const CoefficientMatrix next = pfbs_solve_alpha(a, b, u, {0.0, beta, 1});
    CHECK((next.data - a.data).norm() <= 1e-6 * (1.0 + a.data.norm()));
}

TEST_CASE("PFBS annihilates coefficients under a large weight") {
    std::mt19937_64 rng(13);
    const BasisMatrix b{testsupport::random_matrix(rng, 8, 3, 0, 1)};
    const CoefficientMatrix a{testsupport::random_matrix(rng, 10, 3)};
    const CoefficientMatrix out = pfbs_solve_alpha(a, b, Matrix::Zero(10, 8), {0.0, 1e3, 5});
    CHECK(out.data.isZero());
    CHECK_THROWS_AS(pfbs_solve_alpha(a, b, Matrix::Zero(10, 8), {1.0 + 2.0 * pfbs_max_step(b), 0.0, 1}), ConfigError);
    CHECK_THROWS_AS(pfbs_solve_alpha(a, b, Matrix::Zero(9, 8), {0.0, 0.0, 1}), DimensionError);
    CHECK_THROWS_AS(pfbs_max_step(BasisMatrix{Matrix::Zero(8, 3)}), DomainError);
}

TEST_CASE("basis solve") {
    std::mt19937_64 rng(14);
    const Matrix u = testsupport::random_matrix(rng, 30, 7);

    Eigen::HouseholderQR<Matrix> qr(testsupport::random_matrix(rng, 30, 4));
    const Matrix orth = qr.householderQ() * Matrix::Identity(30, 4);
    CHECK((solve_basis({orth}, u).data.transpose() - orth.transpose() * u).cwiseAbs().maxCoeff() <= 1e-12);

    const Matrix a = testsupport::random_matrix(rng, 30, 4);
    const BasisMatrix b = solve_basis({a}, u);
    const double scale = a.norm() * u.norm();
    CHECK((a.transpose() * (u - a * b.data.transpose())).cwiseAbs().maxCoeff() <= 1e-8 * scale);

    const Matrix b0 = testsupport::random_matrix(rng, 7, 4);
    CHECK((solve_basis({a}, a * b0.transpose()).data - b0).cwiseAbs().maxCoeff() <= 1e-10);

    // duplicated column: singular Gram, damped CG path
    Matrix dup = a;
    dup.col(3) = dup.col(2);
    const BasisMatrix bd = solve_basis({dup}, u);
    CHECK(bd.data.allFinite());
    CHECK((dup.transpose() * (u - dup * bd.data.transpose())).cwiseAbs().maxCoeff() <= 1e-6 * scale);

    CHECK_THROWS_AS(solve_basis({Matrix::Zero(30, 4)}, u), DomainError);
    CHECK_THROWS_AS(solve_basis({a.topRows(10)}, u), DimensionError);
}
