#include "dynaspect/core.hpp"

#include "dynaspect/errors.hpp"

#include <cmath>
#include <string>

namespace dynaspect {

DynamicImage::DynamicImage(int width, int height, int frames)
    : data(Matrix::Zero(static_cast<Eigen::Index>(width) * height, frames)), width(width),
      height(height) {}

DynamicImage::DynamicImage(Matrix data, int width, int height)
    : data(std::move(data)), width(width), height(height) {
    validate();
}

void DynamicImage::validate() const {
    if (width <= 0 || height <= 0)
        throw DimensionError("image grid must be positive, got " + std::to_string(width) + "x" +
                             std::to_string(height));
    if (data.rows() != static_cast<Eigen::Index>(width) * height)
        throw DimensionError("image has " + std::to_string(data.rows()) + " pixels, grid needs " +
                             std::to_string(width * height));
    if (data.cols() < 1)
        throw DimensionError("dynamic image needs at least one frame");
}

std::size_t SinogramSet::total_bins() const {
    std::size_t n = 0;
    for (const auto& f : frames)
        n += static_cast<std::size_t>(f.counts.size());
    return n;
}

void SinogramSet::validate() const {
    if (frames.empty())
        throw DimensionError("sinogram set has no frames");
    const int nb = frames.front().bins;
    if (nb <= 0)
        throw DimensionError("sinogram bin count must be positive");
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const auto& f = frames[t];
        if (f.bins != nb)
            throw DimensionError("frame " + std::to_string(t) + " has " + std::to_string(f.bins) +
                                 " bins, expected " + std::to_string(nb));
        if (f.counts.size() != static_cast<Eigen::Index>(f.views()) * nb)
            throw DimensionError("frame " + std::to_string(t) + " counts do not match views x bins");
        if (!f.counts.allFinite())
            throw DataError("frame " + std::to_string(t) + " contains non-finite counts");
    }
}

SinogramSet SinogramSet::zeros_like() const {
    SinogramSet out;
    out.frames.reserve(frames.size());
    for (const auto& f : frames)
        out.frames.push_back({f.angles_deg, Vector::Zero(f.counts.size()), f.bins});
    return out;
}

namespace {

void check_same_shape(const SinogramSet& a, const SinogramSet& b) {
    if (a.frame_count() != b.frame_count())
        throw DimensionError("frame count mismatch: " + std::to_string(a.frame_count()) + " vs " +
                             std::to_string(b.frame_count()));
    for (int t = 0; t < a.frame_count(); ++t) {
        if (a.frames[t].bins != b.frames[t].bins ||
            a.frames[t].counts.size() != b.frames[t].counts.size())
            throw DimensionError("bin layout mismatch in frame " + std::to_string(t));
    }
}

} // namespace

FidelityKind fidelity_for(const NoiseModel& noise) {
    return std::holds_alternative<GaussianNoise>(noise) ? FidelityKind::Gaussian
                                                         : FidelityKind::KullbackLeibler;
}

std::string noise_name(const NoiseModel& noise) {
    struct Visitor {
        std::string operator()(const GaussianNoise&) const { return "gaussian"; }
        std::string operator()(const PoissonNoise&) const { return "poisson"; }
        std::string operator()(const MonteCarloNoise&) const { return "monte_carlo"; }
    };
    return std::visit(Visitor{}, noise);
}

void validate_noise(const NoiseModel& noise) {
    if (const auto* g = std::get_if<GaussianNoise>(&noise)) {
        if (!(g->level > 0.0 && g->level <= 1.0))
            throw ConfigError("gaussian noise level must lie in (0,1]");
    } else if (const auto* p = std::get_if<PoissonNoise>(&noise)) {
        if (!(p->scale > 0.0))
            throw ConfigError("poisson scale must be positive");
    } else if (const auto* m = std::get_if<MonteCarloNoise>(&noise)) {
        if (!(m->events_factor > 0.0))
            throw ConfigError("monte carlo events factor must be positive");
    }
}

double gaussian_fidelity(const SinogramSet& sino, const SinogramSet& proj) {
    check_same_shape(sino, proj);
    double sum = 0.0;
    for (int t = 0; t < sino.frame_count(); ++t)
        sum += (proj.frames[t].counts - sino.frames[t].counts).squaredNorm();
    return 0.5 * sum;
}

double kl_fidelity(const SinogramSet& sino, const SinogramSet& proj, bool clamp) {
    check_same_shape(sino, proj);
    double sum = 0.0;
    for (int t = 0; t < sino.frame_count(); ++t) {
        const auto& f = sino.frames[t].counts;
        const auto& p = proj.frames[t].counts;
        for (Eigen::Index k = 0; k < f.size(); ++k) {
            double a = p[k];
            if (a < kKlFloor) {
                if (!clamp && f[k] > 0.0)
                    throw DomainError("KL fidelity: nonpositive projection " + std::to_string(a) +
                                      " paired with positive count in frame " + std::to_string(t));
                if (clamp)
                    a = kKlFloor;
            }
            sum += a;
            if (f[k] != 0.0)
                sum -= f[k] * std::log(a);
        }
    }
    return sum;
}

double fidelity(FidelityKind kind, const SinogramSet& sino, const SinogramSet& proj) {
    return kind == FidelityKind::Gaussian ? gaussian_fidelity(sino, proj) : kl_fidelity(sino, proj);
}

} // namespace dynaspect
