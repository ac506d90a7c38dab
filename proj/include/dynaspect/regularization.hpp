#pragma once

#include "dynaspect/core.hpp"
#include "dynaspect/projector.hpp"

#include <array>
#include <utility>
#include <vector>

namespace dynaspect {

/**
 * Per-pixel 2-vectors of one frame (forward differences along columns in dx,
 * along rows in dy). The last column of dx and last row of dy are zero.
 */
struct GradientField {
    int width = 0;
    int height = 0;
    Vector dx;
    Vector dy;

    static GradientField zeros(int width, int height);

    int pixels() const { return width * height; }
    double dot(const GradientField& other) const;
    /// Largest per-pixel Euclidean magnitude.
    double max_magnitude() const;
};

// Raw kernels shared with the PDHG loop. `out` arrays have width*height entries.
void gradient_into(const double* u, int width, int height, double* gx, double* gy);
/// out += scale * grad^T (gx, gy)
void gradient_transpose_add(const double* gx, const double* gy, int width, int height, double scale,
                            double* out);

GradientField spatial_gradient(const Eigen::Ref<const Vector>& u, int width, int height);
/// grad^T g, the exact adjoint of spatial_gradient.
Vector gradient_transpose(const GradientField& g);
/// div g = -grad^T g.
Vector divergence(const GradientField& g);

/// Isotropic total variation: sum of per-pixel gradient magnitudes.
double tv(const Eigen::Ref<const Vector>& u, int width, int height);

/// TV(u) - <q, grad u>; q must lie in the unit ball per pixel (1e-9 slack).
double bregman_tv(const Eigen::Ref<const Vector>& u, const GradientField& q);

using Vec2 = std::array<double, 2>;

/// |p| (1 - p.q / (|p||q|)); returns |p| when q = 0.
double relative_distance(const Vec2& p, const Vec2& q);
/// |p| (1 - |p.q| / (|p||q|)); returns |p| when q = 0.
double symmetric_distance(const Vec2& p, const Vec2& q);

/// Nonzero weights of one row of w, indices 0-based and ascending.
struct WeightRow {
    std::vector<int> frames;
    std::vector<double> weights;

    double weight_of(int j) const;
    double sum() const;
};

/// Uniform weights over [i - halfwidth, i + halfwidth] clipped to the sequence.
/// `i` is 1-based. The last weight absorbs rounding so the row sums to one.
WeightRow weight_window(int i, int frames, int halfwidth = 2);

struct WeightWindow {
    int frames = 0;
    std::vector<WeightRow> rows; // rows[i], 0-based

    static WeightWindow uniform(int frames, int halfwidth);
    /// Self weight w_{i,i}, 0-based i.
    double self(int i) const { return rows[static_cast<std::size_t>(i)].weight_of(i); }
    /// Ordered pairs (i, j), j != i, with w_{i,j} > 0; sorted by i then j.
    std::vector<std::pair<int, int>> pairs() const;
};

/// Per-frame TV subgradient fields q_i.
struct EdgeSubgradientState {
    std::vector<GradientField> q;

    static EdgeSubgradientState zeros(int frames, int width, int height);
    double max_magnitude() const;
};

/// Auxiliary images z_{ij} of the infimal convolution, one per window pair.
struct AuxiliaryImages {
    std::vector<std::pair<int, int>> pairs;
    std::vector<Vector> z;

    static AuxiliaryImages zeros(const WeightWindow& window, int pixels);
    /// nullptr when (i, j) is not a window pair.
    const Vector* find(int i, int j) const;
};

/**
 * w_ii * D(u_i, q_i) + sum_{j != i} w_ij [D(u_i - z_ij, q_j) + D(z_ij, -q_j)],
 * D the Bregman-TV distance. `i` is 0-based.
 */
double edge_regularizer_value(const Eigen::Ref<const Vector>& u_i, int i, const AuxiliaryImages& z,
                              const EdgeSubgradientState& q, const WeightRow& w_row);

/// Sum over columns of the largest absolute entry.
double l1_inf_norm(const Matrix& alpha);

/// Sum of squared forward temporal differences; 0 for a single frame.
double temporal_penalty(const Matrix& u);

struct ModelWeights {
    double gamma = 1.0;
    double beta = 1.0;
    double eta = 1.0;
    double lambda = 1.0;
};

struct ObjectiveTerms {
    double data = 0.0;     // H(f, AU)
    double factor = 0.0;   // gamma/2 ||U - alpha B^T||^2
    double sparsity = 0.0; // beta ||alpha||_{1,inf}
    double temporal = 0.0; // eta/2 ||d_t U||^2
    double edge = 0.0;     // lambda sum_i R~(u_i, z_i.)

    double total() const { return data + factor + sparsity + temporal + edge; }
};

struct ObjectiveInputs {
    const DynamicImage& u;
    const CoefficientMatrix& alpha;
    const BasisMatrix& basis;
    const AuxiliaryImages& z;
    const EdgeSubgradientState& q;
    const WeightWindow& window;
    const SinogramSet& sino;
    const ProjectorGeometry& geom;
};

ObjectiveTerms objective_terms(const ObjectiveInputs& in, const ModelWeights& weights, FidelityKind kind);
double objective_eval(const ObjectiveInputs& in, const ModelWeights& weights, FidelityKind kind);

} // namespace dynaspect
