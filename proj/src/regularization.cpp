#include "dynaspect/regularization.hpp"

#include "dynaspect/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dynaspect {

GradientField GradientField::zeros(int width, int height) {
    const Eigen::Index n = static_cast<Eigen::Index>(width) * height;
    return {width, height, Vector::Zero(n), Vector::Zero(n)};
}

double GradientField::dot(const GradientField& other) const {
    if (other.width != width || other.height != height)
        throw DimensionError("gradient field grids differ");
    return dx.dot(other.dx) + dy.dot(other.dy);
}

double GradientField::max_magnitude() const {
    double m = 0.0;
    for (Eigen::Index p = 0; p < dx.size(); ++p)
        m = std::max(m, std::hypot(dx[p], dy[p]));
    return m;
}

void gradient_into(const double* u, int width, int height, double* gx, double* gy) {
    for (int r = 0; r < height; ++r) {
        const double* row = u + static_cast<std::size_t>(r) * width;
        double* ox = gx + static_cast<std::size_t>(r) * width;
        double* oy = gy + static_cast<std::size_t>(r) * width;
        for (int c = 0; c + 1 < width; ++c)
            ox[c] = row[c + 1] - row[c];
        ox[width - 1] = 0.0;
        if (r + 1 < height) {
            const double* next = row + width;
            for (int c = 0; c < width; ++c)
                oy[c] = next[c] - row[c];
        } else {
            for (int c = 0; c < width; ++c)
                oy[c] = 0.0;
        }
    }
}

void gradient_transpose_add(const double* gx, const double* gy, int width, int height, double scale,
                            double* out) {
    for (int r = 0; r < height; ++r) {
        const std::size_t base = static_cast<std::size_t>(r) * width;
        const double* ix = gx + base;
        double* o = out + base;
        // x part: -gx(c) for c < W-1, +gx(c-1) for c >= 1
        for (int c = 0; c < width; ++c) {
            double v = 0.0;
            if (c + 1 < width)
                v -= ix[c];
            if (c > 0)
                v += ix[c - 1];
            o[c] += scale * v;
        }
        const double* iy = gy + base;
        if (r + 1 < height)
            for (int c = 0; c < width; ++c)
                o[c] -= scale * iy[c];
        if (r > 0) {
            const double* prev = iy - width;
            for (int c = 0; c < width; ++c)
                o[c] += scale * prev[c];
        }
    }
}

GradientField spatial_gradient(const Eigen::Ref<const Vector>& u, int width, int height) {
    if (u.size() != static_cast<Eigen::Index>(width) * height)
        throw DimensionError("frame does not match the " + std::to_string(width) + "x" +
                             std::to_string(height) + " grid");
    const Vector tmp = u;
    auto g = GradientField::zeros(width, height);
    gradient_into(tmp.data(), width, height, g.dx.data(), g.dy.data());
    return g;
}

Vector gradient_transpose(const GradientField& g) {
    Vector out = Vector::Zero(g.pixels());
    gradient_transpose_add(g.dx.data(), g.dy.data(), g.width, g.height, 1.0, out.data());
    return out;
}

Vector divergence(const GradientField& g) { return -gradient_transpose(g); }

double tv(const Eigen::Ref<const Vector>& u, int width, int height) {
    const auto g = spatial_gradient(u, width, height);
    double s = 0.0;
    for (Eigen::Index p = 0; p < g.dx.size(); ++p)
        s += std::hypot(g.dx[p], g.dy[p]);
    return s;
}

double bregman_tv(const Eigen::Ref<const Vector>& u, const GradientField& q) {
    if (q.max_magnitude() > 1.0 + 1e-9)
        throw DomainError("Bregman-TV reference field leaves the unit ball");
    const auto g = spatial_gradient(u, q.width, q.height);
    double s = 0.0;
    for (Eigen::Index p = 0; p < g.dx.size(); ++p)
        s += std::hypot(g.dx[p], g.dy[p]) - (q.dx[p] * g.dx[p] + q.dy[p] * g.dy[p]);
    return s;
}

namespace {

double cosine(const Vec2& p, const Vec2& q, double np, double nq) {
    return (p[0] * q[0] + p[1] * q[1]) / (np * nq);
}

} // namespace

double relative_distance(const Vec2& p, const Vec2& q) {
    const double np = std::hypot(p[0], p[1]);
    const double nq = std::hypot(q[0], q[1]);
    if (np == 0.0)
        return 0.0;
    if (nq == 0.0)
        return np;
    return std::max(0.0, np * (1.0 - cosine(p, q, np, nq)));
}

double symmetric_distance(const Vec2& p, const Vec2& q) {
    const double np = std::hypot(p[0], p[1]);
    const double nq = std::hypot(q[0], q[1]);
    if (np == 0.0)
        return 0.0;
    if (nq == 0.0)
        return np;
    return std::max(0.0, np * (1.0 - std::abs(cosine(p, q, np, nq))));
}

double WeightRow::weight_of(int j) const {
    auto it = std::lower_bound(frames.begin(), frames.end(), j);
    if (it == frames.end() || *it != j)
        return 0.0;
    return weights[static_cast<std::size_t>(it - frames.begin())];
}

double WeightRow::sum() const {
    double s = 0.0;
    for (double w : weights)
        s += w;
    return s;
}

WeightRow weight_window(int i, int frames, int halfwidth) {
    if (i < 1 || i > frames)
        throw std::out_of_range("frame " + std::to_string(i) + " outside [1, " + std::to_string(frames) + "]");
    if (halfwidth < 0)
        throw ConfigError("window halfwidth must be nonnegative");
    WeightRow row;
    const int lo = std::max(1, i - halfwidth);
    const int hi = std::min(frames, i + halfwidth);
    const double w = 1.0 / (hi - lo + 1);
    double acc = 0.0;
    for (int j = lo; j <= hi; ++j) {
        row.frames.push_back(j - 1);
        const double v = j == hi ? 1.0 - acc : w;
        row.weights.push_back(v);
        acc += v;
    }
    return row;
}

WeightWindow WeightWindow::uniform(int frames, int halfwidth) {
    WeightWindow w{frames, {}};
    for (int i = 1; i <= frames; ++i)
        w.rows.push_back(weight_window(i, frames, halfwidth));
    return w;
}

std::vector<std::pair<int, int>> WeightWindow::pairs() const {
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < frames; ++i) {
        const auto& row = rows[static_cast<std::size_t>(i)];
        for (std::size_t k = 0; k < row.frames.size(); ++k)
            if (row.frames[k] != i && row.weights[k] > 0.0)
                out.emplace_back(i, row.frames[k]);
    }
    return out;
}

EdgeSubgradientState EdgeSubgradientState::zeros(int frames, int width, int height) {
    return {std::vector<GradientField>(static_cast<std::size_t>(frames), GradientField::zeros(width, height))};
}

double EdgeSubgradientState::max_magnitude() const {
    double m = 0.0;
    for (const auto& f : q)
        m = std::max(m, f.max_magnitude());
    return m;
}

AuxiliaryImages AuxiliaryImages::zeros(const WeightWindow& window, int pixels) {
    AuxiliaryImages a;
    a.pairs = window.pairs();
    a.z.assign(a.pairs.size(), Vector::Zero(pixels));
    return a;
}

const Vector* AuxiliaryImages::find(int i, int j) const {
    auto it = std::lower_bound(pairs.begin(), pairs.end(), std::make_pair(i, j));
    if (it == pairs.end() || *it != std::make_pair(i, j))
        return nullptr;
    return &z[static_cast<std::size_t>(it - pairs.begin())];
}

namespace {

GradientField negated(const GradientField& g) { return {g.width, g.height, -g.dx, -g.dy}; }

} // namespace

double edge_regularizer_value(const Eigen::Ref<const Vector>& u_i, int i, const AuxiliaryImages& z,
                              const EdgeSubgradientState& q, const WeightRow& w_row) {
    double value = 0.0;
    for (std::size_t k = 0; k < w_row.frames.size(); ++k) {
        const int j = w_row.frames[k];
        const double w = w_row.weights[k];
        if (w == 0.0)
            continue;
        const auto& qj = q.q.at(static_cast<std::size_t>(j));
        if (j == i) {
            value += w * bregman_tv(u_i, qj);
            continue;
        }
        const Vector* zij = z.find(i, j);
        if (zij == nullptr)
            throw DimensionError("no auxiliary image for pair (" + std::to_string(i) + ", " +
                                 std::to_string(j) + ")");
        const Vector diff = u_i - *zij;
        value += w * (bregman_tv(diff, qj) + bregman_tv(*zij, negated(qj)));
    }
    return value;
}

double l1_inf_norm(const Matrix& alpha) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < alpha.cols(); ++k)
        s += alpha.rows() ? alpha.col(k).cwiseAbs().maxCoeff() : 0.0;
    return s;
}

double temporal_penalty(const Matrix& u) {
    double s = 0.0;
    for (Eigen::Index t = 0; t + 1 < u.cols(); ++t)
        s += (u.col(t + 1) - u.col(t)).squaredNorm();
    return s;
}

ObjectiveTerms objective_terms(const ObjectiveInputs& in, const ModelWeights& wts, FidelityKind kind) {
    in.u.validate();
    const int T = in.u.frames();
    if (in.basis.data.rows() != T || in.alpha.data.rows() != in.u.pixels() ||
        in.alpha.data.cols() != in.basis.data.cols())
        throw DimensionError("U, alpha and B shapes are inconsistent");

    ObjectiveTerms terms;
    const SinogramSet proj = project_dynamic(in.u, in.sino, in.geom);
    terms.data = fidelity(kind, in.sino, proj);
    terms.factor = 0.5 * wts.gamma * (in.u.data - in.alpha.data * in.basis.data.transpose()).squaredNorm();
    terms.sparsity = wts.beta * l1_inf_norm(in.alpha.data);
    terms.temporal = 0.5 * wts.eta * temporal_penalty(in.u.data);
    if (wts.lambda != 0.0) {
        if (in.window.frames != T || static_cast<int>(in.q.q.size()) != T)
            throw DimensionError("edge coupling state does not cover every frame");
        double edge = 0.0;
        for (int i = 0; i < T; ++i)
            edge += edge_regularizer_value(in.u.frame(i), i, in.z, in.q, in.window.rows[static_cast<std::size_t>(i)]);
        terms.edge = wts.lambda * edge;
    }
    return terms;
}

double objective_eval(const ObjectiveInputs& in, const ModelWeights& weights, FidelityKind kind) {
    return objective_terms(in, weights, kind).total();
}

} // namespace dynaspect
