#include "dynaspect/pdhg.hpp"

#include "dynaspect/errors.hpp"
#include "dynaspect/prox.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#ifdef DYNASPECT_HAVE_OPENMP
#include <omp.h>
#endif

namespace dynaspect {

PdhgState PdhgState::init(const DynamicImage& u0, const SinogramSet& layout, const WeightWindow& window) {
    u0.validate();
    if (layout.frame_count() != u0.frames())
        throw DimensionError("sinogram and image frame counts differ");
    PdhgState s;
    s.u = u0;
    s.u_bar = u0.data;
    for (const auto& f : layout.frames)
        s.g.push_back(Vector::Zero(f.counts.size()));
    s.b = Matrix::Zero(u0.pixels(), std::max(0, u0.frames() - 1));
    s.d_self.assign(static_cast<std::size_t>(u0.frames()), GradientField::zeros(u0.width, u0.height));
    s.z = AuxiliaryImages::zeros(window, u0.pixels());
    s.z_bar = s.z.z;
    s.d_plus.assign(s.z.pairs.size(), GradientField::zeros(u0.width, u0.height));
    s.d_minus = s.d_plus;
    return s;
}

namespace {

/// pair index range [first[i], first[i+1]) for frame i; pairs are sorted by i.
std::vector<std::size_t> pair_offsets(const std::vector<std::pair<int, int>>& pairs, int frames) {
    std::vector<std::size_t> first(static_cast<std::size_t>(frames) + 1, 0);
    for (const auto& p : pairs)
        ++first[static_cast<std::size_t>(p.first) + 1];
    for (std::size_t i = 1; i < first.size(); ++i)
        first[i] += first[i - 1];
    return first;
}

} // namespace

LinearOperator pdhg_operator(const ProjectorGeometry& geom, const SinogramSet& layout,
                             const WeightWindow& window, bool temporal, bool edges) {
    const int T = layout.frame_count();
    const int n = geom.image_size;
    const Eigen::Index M = geom.pixels();
    const auto pairs = edges ? window.pairs() : std::vector<std::pair<int, int>>{};
    const auto P = static_cast<Eigen::Index>(pairs.size());
    const auto bins_total = static_cast<Eigen::Index>(layout.total_bins());
    const bool use_temporal = temporal && T > 1;

    LinearOperator op;
    op.domain = M * T + (edges ? M * P : 0);
    op.range = bins_total + (use_temporal ? M * (T - 1) : 0) + (edges ? 2 * M * T + 4 * M * P : 0);

    op.apply = [=, &layout](const Vector& x) {
        Vector y = Vector::Zero(op.range);
        Eigen::Index off = 0;
        for (int t = 0; t < T; ++t) {
            const auto& f = layout.frames[static_cast<std::size_t>(t)];
            forward_project_into(x.data() + t * M, f.angles_deg, geom, y.data() + off);
            off += f.counts.size();
        }
        if (use_temporal) {
            for (int t = 0; t + 1 < T; ++t)
                y.segment(off + t * M, M) = x.segment((t + 1) * M, M) - x.segment(t * M, M);
            off += M * (T - 1);
        }
        if (edges) {
            for (int t = 0; t < T; ++t, off += 2 * M)
                gradient_into(x.data() + t * M, n, n, y.data() + off, y.data() + off + M);
            Vector diff(M);
            for (Eigen::Index p = 0; p < P; ++p, off += 4 * M) {
                const double* ui = x.data() + pairs[static_cast<std::size_t>(p)].first * M;
                const double* zp = x.data() + M * T + p * M;
                for (Eigen::Index k = 0; k < M; ++k)
                    diff[k] = ui[k] - zp[k];
                gradient_into(diff.data(), n, n, y.data() + off, y.data() + off + M);
                gradient_into(zp, n, n, y.data() + off + 2 * M, y.data() + off + 3 * M);
            }
        }
        return y;
    };

    op.adjoint = [=, &layout](const Vector& y) {
        Vector x = Vector::Zero(op.domain);
        Eigen::Index off = 0;
        for (int t = 0; t < T; ++t) {
            const auto& f = layout.frames[static_cast<std::size_t>(t)];
            back_project_add(y.data() + off, f.angles_deg, geom, 1.0, x.data() + t * M);
            off += f.counts.size();
        }
        if (use_temporal) {
            for (int t = 0; t + 1 < T; ++t) {
                x.segment((t + 1) * M, M) += y.segment(off + t * M, M);
                x.segment(t * M, M) -= y.segment(off + t * M, M);
            }
            off += M * (T - 1);
        }
        if (edges) {
            for (int t = 0; t < T; ++t, off += 2 * M)
                gradient_transpose_add(y.data() + off, y.data() + off + M, n, n, 1.0, x.data() + t * M);
            for (Eigen::Index p = 0; p < P; ++p, off += 4 * M) {
                double* ui = x.data() + pairs[static_cast<std::size_t>(p)].first * M;
                double* zp = x.data() + M * T + p * M;
                gradient_transpose_add(y.data() + off, y.data() + off + M, n, n, 1.0, ui);
                gradient_transpose_add(y.data() + off, y.data() + off + M, n, n, -1.0, zp);
                gradient_transpose_add(y.data() + off + 2 * M, y.data() + off + 3 * M, n, n, 1.0, zp);
            }
        }
        return x;
    };
    return op;
}

double pdhg_operator_norm(const ProjectorGeometry& geom, const SinogramSet& layout,
                          const WeightWindow& window, bool temporal, bool edges) {
    // K^T K applied frame by frame, without forming K X.
    const int T = layout.frame_count();
    const int n = geom.image_size;
    const Eigen::Index M = geom.pixels();
    const auto pairs = edges ? window.pairs() : std::vector<std::pair<int, int>>{};
    const auto first = pair_offsets(pairs, T);
    const bool use_temporal = temporal && T > 1;
    const Eigen::Index domain = M * T + (edges ? M * static_cast<Eigen::Index>(pairs.size()) : 0);

    auto normal = [&](const Vector& x) {
        Vector out = Vector::Zero(domain);
#pragma omp parallel
        {
            Vector views, gx(M), gy(M), diff(M);
#pragma omp for schedule(static)
            for (int t = 0; t < T; ++t) {
                const auto& f = layout.frames[static_cast<std::size_t>(t)];
                const double* u = x.data() + t * M;
                double* ou = out.data() + t * M;
                views.resize(f.counts.size());
                forward_project_into(u, f.angles_deg, geom, views.data());
                back_project_add(views.data(), f.angles_deg, geom, 1.0, ou);
                if (use_temporal) {
                    Eigen::Map<Vector> o(ou, M);
                    Eigen::Map<const Vector> cur(u, M);
                    if (t > 0)
                        o += cur - Eigen::Map<const Vector>(u - M, M);
                    if (t + 1 < T)
                        o -= Eigen::Map<const Vector>(u + M, M) - cur;
                }
                if (!edges)
                    continue;
                gradient_into(u, n, n, gx.data(), gy.data());
                gradient_transpose_add(gx.data(), gy.data(), n, n, 1.0, ou);
                for (std::size_t p = first[static_cast<std::size_t>(t)]; p < first[static_cast<std::size_t>(t) + 1]; ++p) {
                    const double* z = x.data() + M * T + static_cast<Eigen::Index>(p) * M;
                    double* oz = out.data() + M * T + static_cast<Eigen::Index>(p) * M;
                    for (Eigen::Index k = 0; k < M; ++k)
                        diff[k] = u[k] - z[k];
                    gradient_into(diff.data(), n, n, gx.data(), gy.data());
                    gradient_transpose_add(gx.data(), gy.data(), n, n, 1.0, ou);
                    gradient_transpose_add(gx.data(), gy.data(), n, n, -1.0, oz);
                    gradient_into(z, n, n, gx.data(), gy.data());
                    gradient_transpose_add(gx.data(), gy.data(), n, n, 1.0, oz);
                }
            }
        }
        return out;
    };
    return normal_operator_norm(normal, domain, 1e-6, 1000);
}

double u_subproblem_objective(const DynamicImage& u, const AuxiliaryImages& z, const PdhgProblem& pb) {
    const SinogramSet proj = project_dynamic(u, pb.data, pb.geom);
    double value = fidelity(pb.fidelity, pb.data, proj);
    value += 0.5 * pb.gamma * (u.data - pb.factor_target).squaredNorm();
    value += 0.5 * pb.eta * temporal_penalty(u.data);
    if (pb.has_edges()) {
        double edge = 0.0;
        for (int i = 0; i < u.frames(); ++i)
            edge += edge_regularizer_value(u.frame(i), i, z, pb.q, pb.window.rows[static_cast<std::size_t>(i)]);
        value += pb.lambda * edge;
    }
    return value;
}

namespace {

struct FrameScratch {
    Vector proj, kt, gx, gy, zgx, zgy, accx, accy, tmpx, tmpy, zold;

    explicit FrameScratch(Eigen::Index pixels) {
        for (Vector* v : {&kt, &gx, &gy, &zgx, &zgy, &accx, &accy, &tmpx, &tmpy, &zold})
            v->resize(pixels);
    }
};

double edge_violation(const GradientField& d, const GradientField& q, double w, int sign) {
    double worst = 0.0;
    for (Eigen::Index p = 0; p < d.dx.size(); ++p) {
        const double vx = d.dx[p] / w + sign * q.dx[p];
        const double vy = d.dy[p] / w + sign * q.dy[p];
        worst = std::max(worst, std::hypot(vx, vy) - 1.0);
    }
    return worst;
}

void check_problem(const PdhgState& s, const PdhgProblem& pb, const PdhgSettings& st, double norm) {
    const int T = s.u.frames();
    if (pb.data.frame_count() != T || static_cast<int>(s.g.size()) != T)
        throw DimensionError("PDHG state and data frame counts differ");
    if (pb.factor_target.rows() != s.u.data.rows() || pb.factor_target.cols() != T)
        throw DimensionError("factor target shape differs from U");
    if (pb.geom.image_size != s.u.width || s.u.width != s.u.height)
        throw DimensionError("PDHG needs a square image matching the projector");
    if (!(st.sigma > 0.0 && st.tau > 0.0))
        throw ConfigError("PDHG step sizes must be positive");
    if (st.theta < 0.0 || st.theta > 1.0)
        throw ConfigError("PDHG relaxation must lie in [0, 1]");
    if (norm > 0.0 && st.sigma * st.tau * norm * norm > 1.0 + 1e-9)
        throw ConfigError("PDHG steps violate sigma * tau * ||K||^2 <= 1 (sigma=" + std::to_string(st.sigma) +
                          ", tau=" + std::to_string(st.tau) + ", ||K||=" + std::to_string(norm) + ")");
    if (pb.gamma < 0.0 || pb.eta < 0.0 || pb.lambda < 0.0)
        throw ConfigError("model weights must be nonnegative");
    if (pb.has_edges()) {
        if (pb.window.frames != T || static_cast<int>(pb.q.q.size()) != T)
            throw DimensionError("edge coupling state does not match the frame count");
        if (s.z.pairs != pb.window.pairs())
            throw DimensionError("auxiliary images do not match the weight window");
    }
    if (pb.fidelity == FidelityKind::KullbackLeibler)
        for (const auto& f : pb.data.frames)
            if ((f.counts.array() < 0.0).any())
                throw DomainError("KL fidelity needs nonnegative data");
}

} // namespace

PdhgResult pdhg_solve_u(PdhgState& s, const PdhgProblem& pb, const PdhgSettings& st, double norm) {
    check_problem(s, pb, st, norm);

    const int T = s.u.frames();
    const int n = s.u.width;
    const Eigen::Index M = s.u.pixels();
    const auto N = static_cast<std::size_t>(M);
    const double sigma = st.sigma, tau = st.tau, theta = st.theta;
    const bool temporal = pb.has_temporal();
    const bool edges = pb.has_edges();
    const auto first = pair_offsets(s.z.pairs, T);
    const double u_scale = 1.0 / (pb.gamma + 1.0 / tau);

    PdhgResult result;
    std::vector<FrameScratch> scratch;
#ifdef DYNASPECT_HAVE_OPENMP
    const int threads = omp_get_max_threads();
#else
    const int threads = 1;
#endif
    for (int k = 0; k < threads; ++k)
        scratch.emplace_back(M);
    std::vector<double> change2(static_cast<std::size_t>(T)), norm2(static_cast<std::size_t>(T));

    for (int it = 1; it <= st.max_iters; ++it) {
        if (temporal) {
            const double shrink = pb.eta / (pb.eta + sigma);
            for (int t = 0; t + 1 < T; ++t)
                s.b.col(t) = shrink * (s.b.col(t) + sigma * (s.u_bar.col(t + 1) - s.u_bar.col(t)));
        }

#pragma omp parallel
        {
#ifdef DYNASPECT_HAVE_OPENMP
            FrameScratch& w = scratch[static_cast<std::size_t>(omp_get_thread_num())];
#else
            FrameScratch& w = scratch.front();
#endif
#pragma omp for schedule(static)
            for (int i = 0; i < T; ++i) {
                const auto& frame = pb.data.frames[static_cast<std::size_t>(i)];
                double* ubar = s.u_bar.col(i).data();

                // data dual
                Vector& g = s.g[static_cast<std::size_t>(i)];
                w.proj.resize(g.size());
                forward_project_into(ubar, frame.angles_deg, pb.geom, w.proj.data());
                if (pb.fidelity == FidelityKind::KullbackLeibler) {
                    for (Eigen::Index k = 0; k < g.size(); ++k)
                        g[k] = prox_kl_dual(g[k] + sigma * w.proj[k], frame.counts[k], sigma);
                } else {
                    for (Eigen::Index k = 0; k < g.size(); ++k)
                        g[k] = (g[k] + sigma * w.proj[k] - sigma * frame.counts[k]) / (1.0 + sigma);
                }

                w.kt.setZero();
                back_project_add(g.data(), frame.angles_deg, pb.geom, 1.0, w.kt.data());
                if (temporal) {
                    if (i > 0)
                        w.kt += s.b.col(i - 1);
                    if (i + 1 < T)
                        w.kt -= s.b.col(i);
                }

                if (edges) {
                    const auto& row = pb.window.rows[static_cast<std::size_t>(i)];
                    gradient_into(ubar, n, n, w.gx.data(), w.gy.data());

                    auto& d = s.d_self[static_cast<std::size_t>(i)];
                    d.dx += sigma * w.gx;
                    d.dy += sigma * w.gy;
                    const auto& qi = pb.q.q[static_cast<std::size_t>(i)];
                    dual_update_edge_inplace(d.dx.data(), d.dy.data(), qi.dx.data(), qi.dy.data(), N,
                                             pb.lambda * row.weight_of(i), +1, st.paper_literal_signs);
                    w.accx = d.dx;
                    w.accy = d.dy;

                    for (std::size_t p = first[static_cast<std::size_t>(i)]; p < first[static_cast<std::size_t>(i) + 1]; ++p) {
                        const int j = s.z.pairs[p].second;
                        const double wij = pb.lambda * row.weight_of(j);
                        const auto& qj = pb.q.q[static_cast<std::size_t>(j)];
                        gradient_into(s.z_bar[p].data(), n, n, w.zgx.data(), w.zgy.data());

                        auto& dp = s.d_plus[p];
                        dp.dx += sigma * (w.gx - w.zgx);
                        dp.dy += sigma * (w.gy - w.zgy);
                        dual_update_edge_inplace(dp.dx.data(), dp.dy.data(), qj.dx.data(), qj.dy.data(), N, wij,
                                                 +1, st.paper_literal_signs);
                        auto& dm = s.d_minus[p];
                        dm.dx += sigma * w.zgx;
                        dm.dy += sigma * w.zgy;
                        dual_update_edge_inplace(dm.dx.data(), dm.dy.data(), qj.dx.data(), qj.dy.data(), N, wij,
                                                 -1, st.paper_literal_signs);
                        w.accx += dp.dx;
                        w.accy += dp.dy;

                        // z <- z - tau grad^T (d- - d+), then relax
                        Vector& z = s.z.z[p];
                        w.zold = z;
                        w.tmpx = dm.dx - dp.dx;
                        w.tmpy = dm.dy - dp.dy;
                        gradient_transpose_add(w.tmpx.data(), w.tmpy.data(), n, n, -tau, z.data());
                        s.z_bar[p] = z + theta * (z - w.zold);
                    }
                    gradient_transpose_add(w.accx.data(), w.accy.data(), n, n, 1.0, w.kt.data());
                }

                // primal U: nonnegative blend of the factor target and the gradient step
                auto u = s.u.frame(i);
                const auto target = pb.factor_target.col(i);
                double c2 = 0.0, n2 = 0.0;
                for (Eigen::Index k = 0; k < M; ++k) {
                    const double old = u[k];
                    const double prime = old - tau * w.kt[k];
                    const double next = std::max(0.0, (pb.gamma * target[k] + prime / tau) * u_scale);
                    u[k] = next;
                    ubar[k] = next + theta * (next - old);
                    c2 += (next - old) * (next - old);
                    n2 += old * old;
                }
                change2[static_cast<std::size_t>(i)] = c2;
                norm2[static_cast<std::size_t>(i)] = n2;
            }
        }

        double c2 = 0.0, n2 = 0.0;
        for (int i = 0; i < T; ++i) {
            c2 += change2[static_cast<std::size_t>(i)];
            n2 += norm2[static_cast<std::size_t>(i)];
        }
        if (!std::isfinite(c2))
            throw NumericalError("PDHG produced a non-finite iterate at iteration " + std::to_string(it));
        const double change = c2 == 0.0 ? 0.0 : std::sqrt(c2 / std::max(n2, 1e-300));
        result.iterations = it;
        result.last_change = change;

        if (st.trace_every > 0 && (it % st.trace_every == 0 || it == 1)) {
            PdhgTraceRow row;
            row.iteration = it;
            row.primal_change = change;
            row.objective = u_subproblem_objective(s.u, s.z, pb);
            for (const auto& g : s.g)
                row.max_g = std::max(row.max_g, g.size() ? g.maxCoeff() : 0.0);
            if (edges) {
                for (int i = 0; i < T; ++i)
                    row.edge_violation = std::max(
                        row.edge_violation,
                        edge_violation(s.d_self[static_cast<std::size_t>(i)], pb.q.q[static_cast<std::size_t>(i)],
                                       pb.lambda * pb.window.self(i), +1));
                for (std::size_t p = 0; p < s.z.pairs.size(); ++p) {
                    const auto [i, j] = s.z.pairs[p];
                    const double wij = pb.lambda * pb.window.rows[static_cast<std::size_t>(i)].weight_of(j);
                    const auto& qj = pb.q.q[static_cast<std::size_t>(j)];
                    row.edge_violation = std::max({row.edge_violation, edge_violation(s.d_plus[p], qj, wij, +1),
                                                   edge_violation(s.d_minus[p], qj, wij, -1)});
                }
            }
            row.min_u = s.u.data.minCoeff();
            result.trace.push_back(row);
        }

        if (change < st.tol) {
            result.converged = true;
            break;
        }
    }
    return result;
}

} // namespace dynaspect
