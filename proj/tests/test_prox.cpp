#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dynaspect/errors.hpp"
#include "dynaspect/prox.hpp"
#include "prox_oracles.hpp"
#include "support.hpp"

#include <cmath>

using namespace dynaspect;

TEST_CASE("every closed form matches its numerical oracle") {
    for (const auto& r : testsupport::run_all_prox_oracles(2024, 200)) {
        INFO(r.name);
        CHECK(r.instances >= 100);
        CHECK(r.max_error <= 1e-6);
    }
}

TEST_CASE("kl dual examples") {
    std::mt19937_64 rng(1);
    const Vector g = testsupport::random_vector(rng, 200, -5, 5);
    CHECK((prox_kl_dual(g, Vector::Zero(200), 0.7) - g.cwiseMin(1.0)).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(prox_kl_dual(1.0, 0.25, 1.0) == doctest::Approx(0.5).epsilon(1e-15));
    const Vector f = testsupport::random_vector(rng, 200, 0, 10);
    for (double sigma : {0.01, 0.5, 3.0}) {
        const Vector out = prox_kl_dual(g, f, sigma);
        CHECK((out.array() <= 1.0).all());
        for (Eigen::Index k = 0; k < g.size(); ++k) {
            const double h = 0.5 * (g[k] + 1.0);
            const double radicand = h * h + sigma * f[k] - g[k];
            CHECK(radicand >= 0.0);
            CHECK(std::abs(out[k] - (h - std::sqrt(radicand))) <= 1e-12 * (1.0 + std::abs(out[k])));
        }
    }
    CHECK_THROWS_AS(prox_kl_dual(g, f.head(3), 1.0), DimensionError);
    CHECK_THROWS_AS(prox_kl_dual(g, f, 0.0), DomainError);
}

TEST_CASE("l2 dual examples") {
    std::mt19937_64 rng(2);
    const Vector b = testsupport::random_vector(rng, 50);
    CHECK((prox_l2_dual(b, 2.0, 1e-12) - b).cwiseAbs().maxCoeff() <= 1e-11);
    CHECK(prox_l2_dual(b, 0.8, 0.8) == 0.5 * b);
    const Vector f = testsupport::random_vector(rng, 50);
    CHECK(prox_l2_fidelity_dual(b, f, 1.0) == (b - f) / 2.0);
}

TEST_CASE("unit ball projection") {
    std::mt19937_64 rng(3);
    GradientField inside = testsupport::random_ball_field(rng, 5, 4, 1.0);
    const GradientField same = project_unit_ball(inside);
    CHECK(same.dx == inside.dx);
    CHECK(same.dy == inside.dy);

    GradientField v{1, 1, Vector::Constant(1, 3.0), Vector::Constant(1, 4.0)};
    const GradientField p = project_unit_ball(v);
    CHECK(p.dx[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(p.dy[0] == doctest::Approx(0.8).epsilon(1e-15));

    const GradientField big = testsupport::random_field(rng, 6, 6, 4.0);
    const GradientField proj = project_unit_ball(big);
    const GradientField twice = project_unit_ball(proj);
    CHECK(twice.dx == proj.dx);
    CHECK(twice.dy == proj.dy);
    for (int trial = 0; trial < 50; ++trial) {
        const GradientField y = testsupport::random_ball_field(rng, 6, 6, 1.0);
        for (Eigen::Index k = 0; k < 36; ++k) {
            const double dp = std::hypot(big.dx[k] - proj.dx[k], big.dy[k] - proj.dy[k]);
            const double dy = std::hypot(big.dx[k] - y.dx[k], big.dy[k] - y.dy[k]);
            CHECK(dp <= dy + 1e-12);
        }
    }
}

TEST_CASE("shifted edge dual") {
    std::mt19937_64 rng(4);
    const GradientField d = testsupport::random_field(rng, 4, 4, 3.0);
    const GradientField zero = GradientField::zeros(4, 4);
    for (double w : {0.3, 1.0, 2.5}) {
        const GradientField plain = dual_update_edge(d, zero, w, 1);
        GradientField scaled = d;
        scaled.dx /= w;
        scaled.dy /= w;
        const GradientField ref = project_unit_ball(scaled);
        CHECK((plain.dx - w * ref.dx).cwiseAbs().maxCoeff() <= 1e-14);
        CHECK((plain.dy - w * ref.dy).cwiseAbs().maxCoeff() <= 1e-14);
    }

    // outputs lie in the disk of radius w centred at -sign w q; feasible inputs stay put
    const GradientField q = testsupport::random_ball_field(rng, 4, 4, 1.0);
    for (int sign : {1, -1}) {
        const double w = 0.7;
        const GradientField out = dual_update_edge(d, q, w, sign);
        for (Eigen::Index k = 0; k < 16; ++k)
            CHECK(std::hypot(out.dx[k] + sign * w * q.dx[k], out.dy[k] + sign * w * q.dy[k]) <= w * (1 + 1e-12));
        const GradientField again = dual_update_edge(out, q, w, sign);
        CHECK((again.dx - out.dx).cwiseAbs().maxCoeff() <= 1e-14);
        CHECK((again.dy - out.dy).cwiseAbs().maxCoeff() <= 1e-14);
    }

    // the printed variant centres the disk on the opposite side
    const GradientField lit = dual_update_edge(d, q, 0.7, 1, true);
    for (Eigen::Index k = 0; k < 16; ++k)
        CHECK(std::hypot(lit.dx[k] - 0.7 * q.dx[k], lit.dy[k] - 0.7 * q.dy[k]) <= 0.7 * (1 + 1e-12));

    CHECK_THROWS_AS(dual_update_edge(d, q, 0.0, 1), DomainError);
    CHECK_THROWS_AS(dual_update_edge(d, q, 1.0, 0), DomainError);
    CHECK_THROWS_AS(dual_update_edge(d, GradientField::zeros(3, 4), 1.0, 1), DimensionError);
}

TEST_CASE("brute-force grid projection for the edge dual") {
    // dense 2-D grid over the feasible disk, 1e-3 accuracy
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int trial = 0; trial < 20; ++trial) {
        const double w = 0.5 + 0.05 * trial;
        const int sign = trial % 2 ? 1 : -1;
        const double qx = 0.4 * std::cos(trial), qy = 0.4 * std::sin(trial);
        const double dx = u(rng), dy = u(rng);
        const double cx = -sign * w * qx, cy = -sign * w * qy;
        double best = 1e300, bx = 0, by = 0;
        const int steps = 2000;
        for (int i = 0; i <= steps; ++i)
            for (int j = 0; j <= steps; ++j) {
                const double x = cx - w + 2 * w * i / steps, y = cy - w + 2 * w * j / steps;
                if (std::hypot(x - cx, y - cy) > w)
                    continue;
                const double v = (x - dx) * (x - dx) + (y - dy) * (y - dy);
                if (v < best) {
                    best = v;
                    bx = x;
                    by = y;
                }
            }
        GradientField d{1, 1, Vector::Constant(1, dx), Vector::Constant(1, dy)};
        GradientField q{1, 1, Vector::Constant(1, qx), Vector::Constant(1, qy)};
        const GradientField out = dual_update_edge(d, q, w, sign);
        CHECK(std::hypot(out.dx[0] - cx, out.dy[0] - cy) <= w * (1 + 1e-12));
        const double mine = (out.dx[0] - dx) * (out.dx[0] - dx) + (out.dy[0] - dy) * (out.dy[0] - dy);
        CHECK(mine <= best + 1e-12);
        CHECK(std::sqrt(best) - std::sqrt(mine) <= 1e-3);
        CHECK(std::hypot(out.dx[0] - bx, out.dy[0] - by) <= 0.1);
    }
}

TEST_CASE("primal blend") {
    std::mt19937_64 rng(6);
    const Matrix up = testsupport::random_matrix(rng, 5, 3);
    const Matrix t = testsupport::random_matrix(rng, 5, 3, 0, 1);
    CHECK((primal_update_u(up, t, 1e-12, 0.5) - up.cwiseMax(0.0)).cwiseAbs().maxCoeff() <= 1e-11);
    CHECK((primal_update_u(t, t, 3.0, 0.5) - t).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((primal_update_u(up, t, 2.0, 0.7).array() >= 0.0).all());
    CHECK_THROWS_AS(primal_update_u(up, t.topRows(2), 1.0, 1.0), DimensionError);
    CHECK_THROWS_AS(primal_update_u(up, t, 1.0, 0.0), DomainError);
}

TEST_CASE("l1 ball projection examples") {
    const Vector v = (Vector(2) << 3, 1).finished();
    CHECK(project_l1_ball(v, 2.0) == (Vector(2) << 2, 0).finished());
    CHECK(project_l1_ball(v, 5.0) == v);
    CHECK(project_l1_ball(v, 0.0).isZero());
    const Vector s = (Vector(3) << -2, 0.5, 1).finished();
    const Vector p = project_l1_ball(s, 1.0);
    CHECK(p.cwiseAbs().sum() == doctest::Approx(1.0));
    CHECK(p[0] < 0.0);
    CHECK_THROWS_AS(project_l1_ball(v, -1.0), DomainError);

    const Vector mixed = (Vector(3) << 3, -5, 1).finished();
    const Vector pos = project_positive_l1_ball(mixed, 2.0);
    CHECK(pos == (Vector(3) << 2, -5, 0).finished());
}

TEST_CASE("l1-inf prox spot values") {
    const Matrix col = (Matrix(2, 1) << 3, 1).finished();
    const Matrix out = prox_l1inf(col, 2.0);
    CHECK(out(0, 0) == 1.0);
    CHECK(out(1, 0) == 1.0);
    auto obj = [&](double a, double b) { return 2.0 * std::max(std::abs(a), std::abs(b)) + 0.5 * ((a - 3) * (a - 3) + (b - 1) * (b - 1)); };
    CHECK(obj(1, 1) == 4.0);
    CHECK(obj(1.2, 1) == doctest::Approx(4.02));
    CHECK(obj(1, 0.8) == doctest::Approx(4.02));
    for (double a = 0.5; a <= 1.5; a += 0.01)
        for (double b = 0.5; b <= 1.5; b += 0.01)
            CHECK(obj(a, b) >= 4.0 - 1e-12);

    const Matrix small = (Matrix(3, 1) << 0.5, -0.5, 0.25).finished();
    CHECK(prox_l1inf(small, 1.25).isZero());
    CHECK(prox_l1inf(col, 0.0) == col);
    CHECK_THROWS_AS(prox_l1inf(col, -1.0), DomainError);
}

TEST_CASE("l1-inf prox optimality and the Moreau split") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dd(0.0, 6.0);
    for (int trial = 0; trial < 200; ++trial) {
        const Matrix a = testsupport::random_matrix(rng, 1 + trial % 6, 1 + trial % 3, -3, 3);
        const double delta = dd(rng);
        const Matrix x = prox_l1inf(a, delta);
        for (Eigen::Index k = 0; k < a.cols(); ++k) {
            const Vector col = a.col(k);
            const Vector proj = project_l1_ball(col, delta);
            CHECK(x.col(k) + proj == col);
            // s = a - x must be a subgradient of delta max|.| at x
            const Vector s = col - x.col(k);
            const double m = x.col(k).cwiseAbs().maxCoeff();
            if (m == 0.0) {
                CHECK(s.cwiseAbs().sum() <= delta + 1e-8);
                continue;
            }
            CHECK(s.cwiseAbs().sum() == doctest::Approx(delta).epsilon(1e-8));
            for (Eigen::Index j = 0; j < s.size(); ++j) {
                if (std::abs(std::abs(x(j, k)) - m) > 1e-8)
                    CHECK(std::abs(s[j]) <= 1e-8);
                else
                    CHECK(s[j] * x(j, k) >= -1e-8);
            }
        }
    }
}

TEST_CASE("edge subgradient update") {
    std::mt19937_64 rng(8);
    const GradientField q = testsupport::random_ball_field(rng, 5, 5, 1.0);
    const GradientField same = update_edge_subgradient(q, GradientField::zeros(5, 5), 0.4);
    CHECK(same.dx == q.dx);
    CHECK(same.dy == q.dy);
    double unclamped = 0.0;
    const GradientField big = update_edge_subgradient(q, testsupport::random_field(rng, 5, 5, 3.0), 0.2, &unclamped);
    CHECK(big.max_magnitude() <= 1.0 + 1e-12);
    CHECK(unclamped > 1.0);

    // aligned piecewise-constant frame: d_ii = w (q* - q) steers q onto the edge normals
    const int n = 8;
    Vector u = Vector::Zero(n * n);
    for (int r = 2; r < 6; ++r)
        for (int c = 3; c < 7; ++c)
            u[r * n + c] = 2.0;
    const GradientField g = spatial_gradient(u, n, n);
    GradientField target = g;
    for (Eigen::Index k = 0; k < g.dx.size(); ++k) {
        const double m = std::hypot(g.dx[k], g.dy[k]);
        target.dx[k] = m > 0 ? g.dx[k] / m : 0.0;
        target.dy[k] = m > 0 ? g.dy[k] / m : 0.0;
    }
    const GradientField q0 = GradientField::zeros(n, n);
    const double w = 0.2;
    GradientField d{n, n, w * (target.dx - q0.dx), w * (target.dy - q0.dy)};
    const GradientField q1 = update_edge_subgradient(q0, d, w);
    CHECK(q1.dot(g) == doctest::Approx(tv(u, n, n)).epsilon(1e-6));
    CHECK_THROWS_AS(update_edge_subgradient(q0, d, 0.0), DomainError);
}
