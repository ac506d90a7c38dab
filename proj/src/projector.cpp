#include "dynaspect/projector.hpp"

#include "dynaspect/errors.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace dynaspect {

std::vector<double> AngleSchedule::angles(int t) const {
    if (t < 1 || t > frames)
        throw std::out_of_range("frame index " + std::to_string(t) + " outside [1, " +
                                std::to_string(frames) + "]");
    if (heads < 1)
        throw ConfigError("angle schedule needs at least one head");
    std::vector<double> out(static_cast<std::size_t>(heads));
    const double spread = 180.0 / heads;
    for (int h = 0; h < heads; ++h)
        out[static_cast<std::size_t>(h)] = start_deg + (t - 1) * delta_deg + h * spread;
    return out;
}

std::vector<double> angle_schedule(int t, const AngleSchedule& sched) { return sched.angles(t); }

int ProjectorGeometry::default_bins(int image_size) {
    int b = static_cast<int>(std::ceil(image_size * std::numbers::sqrt2));
    return b % 2 == 0 ? b + 1 : b;
}

ProjectorGeometry ProjectorGeometry::with_default_bins(int image_size) {
    return {image_size, default_bins(image_size), 1.0};
}

void ProjectorGeometry::validate() const {
    if (image_size < 1)
        throw ConfigError("image size must be positive");
    if (bins < 1)
        throw ConfigError("detector bin count must be positive");
    if (!(bin_spacing > 0.0))
        throw ConfigError("bin spacing must be positive");
}

namespace {

struct ViewStencil {
    double p0; // continuous bin index of pixel (0, 0)
    double dc; // per column
    double dr; // per row
};

ViewStencil stencil(double angle_deg, const ProjectorGeometry& g) {
    const double th = angle_deg * std::numbers::pi / 180.0;
    const double c = std::cos(th) / g.bin_spacing;
    const double s = std::sin(th) / g.bin_spacing;
    const double half = 0.5 * (g.image_size - 1);
    // x = col - half, y = row - half, detector coordinate x cos + y sin
    return {-half * c - half * s + 0.5 * (g.bins - 1), c, s};
}

} // namespace

void forward_project_into(const double* image, const std::vector<double>& angles_deg,
                          const ProjectorGeometry& g, double* views) {
    const int n = g.image_size;
    const int nb = g.bins;
    for (std::size_t v = 0; v < angles_deg.size(); ++v) {
        double* out = views + v * static_cast<std::size_t>(nb);
        for (int b = 0; b < nb; ++b)
            out[b] = 0.0;
        const auto st = stencil(angles_deg[v], g);
        for (int r = 0; r < n; ++r) {
            const double* row = image + static_cast<std::size_t>(r) * n;
            const double pr = st.p0 + r * st.dr;
            for (int c = 0; c < n; ++c) {
                const double val = row[c];
                if (val == 0.0)
                    continue;
                const double p = pr + c * st.dc;
                const double fl = std::floor(p);
                const int lo = static_cast<int>(fl);
                const double frac = p - fl;
                if (lo >= 0 && lo < nb)
                    out[lo] += (1.0 - frac) * val;
                if (lo + 1 >= 0 && lo + 1 < nb)
                    out[lo + 1] += frac * val;
            }
        }
    }
}

void back_project_add(const double* views, const std::vector<double>& angles_deg,
                      const ProjectorGeometry& g, double scale, double* image) {
    const int n = g.image_size;
    const int nb = g.bins;
    for (std::size_t v = 0; v < angles_deg.size(); ++v) {
        const double* in = views + v * static_cast<std::size_t>(nb);
        const auto st = stencil(angles_deg[v], g);
        for (int r = 0; r < n; ++r) {
            double* row = image + static_cast<std::size_t>(r) * n;
            const double pr = st.p0 + r * st.dr;
            for (int c = 0; c < n; ++c) {
                const double p = pr + c * st.dc;
                const double fl = std::floor(p);
                const int lo = static_cast<int>(fl);
                const double frac = p - fl;
                double acc = 0.0;
                if (lo >= 0 && lo < nb)
                    acc += (1.0 - frac) * in[lo];
                if (lo + 1 >= 0 && lo + 1 < nb)
                    acc += frac * in[lo + 1];
                row[c] += scale * acc;
            }
        }
    }
}

Vector forward_project(const Eigen::Ref<const Vector>& image, const std::vector<double>& angles_deg,
                       const ProjectorGeometry& geom) {
    geom.validate();
    if (image.size() != geom.pixels())
        throw DimensionError("image has " + std::to_string(image.size()) + " pixels, geometry expects " +
                             std::to_string(geom.pixels()));
    Vector contiguous = image;
    Vector out(static_cast<Eigen::Index>(angles_deg.size()) * geom.bins);
    forward_project_into(contiguous.data(), angles_deg, geom, out.data());
    return out;
}

Vector back_project(const Eigen::Ref<const Vector>& views, const std::vector<double>& angles_deg,
                    const ProjectorGeometry& geom) {
    geom.validate();
    if (views.size() != static_cast<Eigen::Index>(angles_deg.size()) * geom.bins)
        throw DimensionError("view data has " + std::to_string(views.size()) + " entries, expected " +
                             std::to_string(angles_deg.size() * static_cast<std::size_t>(geom.bins)));
    Vector contiguous = views;
    Vector out = Vector::Zero(geom.pixels());
    back_project_add(contiguous.data(), angles_deg, geom, 1.0, out.data());
    return out;
}

SinogramSet project_dynamic(const Matrix& frames, const SinogramSet& layout,
                            const ProjectorGeometry& geom) {
    if (frames.cols() != layout.frame_count())
        throw DimensionError("image has " + std::to_string(frames.cols()) + " frames, sinogram has " +
                             std::to_string(layout.frame_count()));
    if (frames.rows() != geom.pixels())
        throw DimensionError("image pixel count does not match projector geometry");
    SinogramSet out = layout.zeros_like();
    for (int t = 0; t < layout.frame_count(); ++t) {
        auto& f = out.frames[static_cast<std::size_t>(t)];
        if (f.bins != geom.bins)
            throw DimensionError("sinogram bins do not match projector geometry");
        forward_project_into(frames.col(t).data(), f.angles_deg, geom, f.counts.data());
    }
    return out;
}

SinogramSet project_dynamic(const DynamicImage& image, const SinogramSet& layout,
                            const ProjectorGeometry& geom) {
    return project_dynamic(image.data, layout, geom);
}

Matrix back_project_dynamic(const SinogramSet& sino, const ProjectorGeometry& geom) {
    Matrix out = Matrix::Zero(geom.pixels(), sino.frame_count());
    for (int t = 0; t < sino.frame_count(); ++t) {
        const auto& f = sino.frames[static_cast<std::size_t>(t)];
        if (f.bins != geom.bins)
            throw DimensionError("sinogram bins do not match projector geometry");
        back_project_add(f.counts.data(), f.angles_deg, geom, 1.0, out.col(t).data());
    }
    return out;
}

SinogramSet acquire(const DynamicImage& image, const AngleSchedule& sched,
                    const ProjectorGeometry& geom) {
    if (image.frames() != sched.frames)
        throw DimensionError("schedule covers " + std::to_string(sched.frames) + " frames, image has " +
                             std::to_string(image.frames()));
    if (image.width != geom.image_size || image.height != geom.image_size)
        throw DimensionError("image grid does not match projector geometry");
    SinogramSet layout;
    for (int t = 1; t <= sched.frames; ++t) {
        auto angles = sched.angles(t);
        const auto n = static_cast<Eigen::Index>(angles.size()) * geom.bins;
        layout.frames.push_back({std::move(angles), Vector::Zero(n), geom.bins});
    }
    return project_dynamic(image, layout, geom);
}

DynamicImage fbp_reconstruct(const SinogramSet& sino, const ProjectorGeometry& geom) {
    geom.validate();
    sino.validate();
    const int nb = geom.bins;
    if (sino.bins() != nb)
        throw DimensionError("sinogram bins do not match projector geometry");

    // spatial Ram-Lak kernel on the bin lattice
    const double h = geom.bin_spacing;
    std::vector<double> kernel(static_cast<std::size_t>(2 * nb - 1), 0.0);
    for (int k = -(nb - 1); k <= nb - 1; ++k) {
        double v = 0.0;
        if (k == 0)
            v = 1.0 / (4.0 * h * h);
        else if (k % 2 != 0)
            v = -1.0 / (std::numbers::pi * std::numbers::pi * k * k * h * h);
        kernel[static_cast<std::size_t>(k + nb - 1)] = v * h;
    }

    DynamicImage out(geom.image_size, geom.image_size, sino.frame_count());
    for (int t = 0; t < sino.frame_count(); ++t) {
        const auto& f = sino.frames[static_cast<std::size_t>(t)];
        if (f.views() < 1)
            throw DataError("frame " + std::to_string(t) + " has no views to backproject");
        Vector filtered(f.counts.size());
        for (int v = 0; v < f.views(); ++v) {
            const double* p = f.counts.data() + static_cast<std::size_t>(v) * nb;
            double* q = filtered.data() + static_cast<std::size_t>(v) * nb;
            for (int b = 0; b < nb; ++b) {
                double acc = 0.0;
                for (int k = 0; k < nb; ++k)
                    acc += p[k] * kernel[static_cast<std::size_t>(b - k + nb - 1)];
                q[b] = acc;
            }
        }
        back_project_add(filtered.data(), f.angles_deg, geom, std::numbers::pi / f.views(),
                         out.frame(t).data());
    }
    return out;
}

double operator_norm_estimate(const LinearOperator& op, double rel_tol, int max_iters,
                              std::uint64_t seed) {
    return normal_operator_norm([&](const Vector& x) { return op.adjoint(op.apply(x)); }, op.domain, rel_tol,
                                max_iters, seed);
}

double normal_operator_norm(const std::function<Vector(const Vector&)>& normal, Eigen::Index domain,
                            double rel_tol, int max_iters, std::uint64_t seed) {
    if (domain <= 0)
        return 0.0;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    Vector x(domain);
    for (auto& v : x)
        v = dist(rng);
    x.normalize();

    double estimate = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        Vector y = normal(x);
        const double nrm = y.norm(); // converges to ||K||^2
        if (!std::isfinite(nrm))
            throw NumericalError("power iteration produced a non-finite value");
        if (nrm == 0.0)
            return 0.0;
        const double next = std::sqrt(nrm);
        x = y / nrm;
        if (it > 0 && std::abs(next - estimate) <= rel_tol * next)
            return next;
        estimate = next;
    }
    return estimate;
}

} // namespace dynaspect
