#pragma once

#include "dynaspect/core.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace dynaspect {

/**
 * Rotating multi-head acquisition. Frame t (1-based) sees one view per head
 * at start + (t-1) * delta + h * 180 / heads degrees.
 */
struct AngleSchedule {
    int heads = 2;
    double delta_deg = 1.0;
    double start_deg = 1.0;
    int frames = 90;

    std::vector<double> angles(int t) const;
};

/// Alias kept for call sites that read better as a free function.
std::vector<double> angle_schedule(int t, const AngleSchedule& sched);

/// Parallel-beam detector for a square image grid centred on the rotation axis.
struct ProjectorGeometry {
    int image_size = 64;
    int bins = 0;
    double bin_spacing = 1.0;

    /// ceil(size * sqrt 2), bumped to the next odd number.
    static int default_bins(int image_size);
    static ProjectorGeometry with_default_bins(int image_size);

    int pixels() const { return image_size * image_size; }
    void validate() const;
};

/**
 * Pixel-driven linear-interpolation projector. Each pixel centre is mapped to
 * its signed detector coordinate and split between the two nearest bins, so
 * every view preserves the image mass exactly while the pixel stays on the
 * detector. back_project() is the exact transpose of forward_project().
 */
Vector forward_project(const Eigen::Ref<const Vector>& image, const std::vector<double>& angles_deg,
                       const ProjectorGeometry& geom);
Vector back_project(const Eigen::Ref<const Vector>& views, const std::vector<double>& angles_deg,
                    const ProjectorGeometry& geom);

// Accumulating variants used by the solvers' inner loops.
void forward_project_into(const double* image, const std::vector<double>& angles_deg,
                          const ProjectorGeometry& geom, double* views);
void back_project_add(const double* views, const std::vector<double>& angles_deg,
                      const ProjectorGeometry& geom, double scale, double* image);

/// Applies A_t frame by frame with each frame's own angles.
SinogramSet project_dynamic(const DynamicImage& image, const SinogramSet& layout,
                            const ProjectorGeometry& geom);
SinogramSet project_dynamic(const Matrix& frames, const SinogramSet& layout,
                            const ProjectorGeometry& geom);
Matrix back_project_dynamic(const SinogramSet& sino, const ProjectorGeometry& geom);

/// Noiseless acquisition of `image` under a schedule.
SinogramSet acquire(const DynamicImage& image, const AngleSchedule& sched,
                    const ProjectorGeometry& geom);

/// Ram-Lak filtered backprojection, each frame from its own views only.
/// Negative values are kept.
DynamicImage fbp_reconstruct(const SinogramSet& sino, const ProjectorGeometry& geom);

/// Matrix-free linear map with its adjoint.
struct LinearOperator {
    Eigen::Index domain = 0;
    Eigen::Index range = 0;
    std::function<Vector(const Vector&)> apply;
    std::function<Vector(const Vector&)> adjoint;
};

/// Power iteration on K^T K. Deterministic for a fixed seed.
double operator_norm_estimate(const LinearOperator& op, double rel_tol = 1e-6, int max_iters = 2000,
                              std::uint64_t seed = 12345);

/// Same power iteration given x -> K^T K x directly.
double normal_operator_norm(const std::function<Vector(const Vector&)>& normal, Eigen::Index domain,
                            double rel_tol = 1e-6, int max_iters = 2000, std::uint64_t seed = 12345);

} // namespace dynaspect
