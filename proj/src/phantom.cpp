#include "dynaspect/phantom.hpp"

#include "dynaspect/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace dynaspect {

std::size_t LabelMap::region_pixels(int region) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), region));
}

void LabelMap::validate() const {
    if (size < 1 || labels.size() != static_cast<std::size_t>(size) * size)
        throw DimensionError("label map does not match its grid size");
    for (int l : labels)
        if (l < 0 || l > regions)
            throw DataError("label " + std::to_string(l) + " outside [0, " + std::to_string(regions) + "]");
    for (int r = 1; r <= regions; ++r)
        if (region_pixels(r) == 0)
            throw DataError("region " + std::to_string(r) + " is empty at size " + std::to_string(size));
}

TacKind parse_tac_kind(const std::string& name) {
    if (name == "blood")
        return TacKind::Blood;
    if (name == "liver")
        return TacKind::Liver;
    if (name == "myocardium")
        return TacKind::Myocardium;
    if (name == "kidney")
        return TacKind::Kidney;
    if (name == "tissue")
        return TacKind::Tissue;
    if (name == "constant")
        return TacKind::Constant;
    throw ConfigError("unknown TAC kind '" + name + "'");
}

std::string tac_kind_name(TacKind kind) {
    switch (kind) {
    case TacKind::Blood: return "blood";
    case TacKind::Liver: return "liver";
    case TacKind::Myocardium: return "myocardium";
    case TacKind::Kidney: return "kidney";
    case TacKind::Tissue: return "tissue";
    case TacKind::Constant: return "constant";
    }
    return "unknown";
}

double GammaVariate::operator()(double t) const {
    if (kind == TacKind::Constant)
        return amplitude;
    const double r = t / peak;
    return amplitude * std::pow(r, shape) * std::exp(shape * (1.0 - r));
}

GammaVariate GammaVariate::defaults(TacKind kind) {
    // Blood peaks early and washes out, liver accumulates slowly.
    switch (kind) {
    case TacKind::Blood: return {kind, 8.0, 6.0, 1.5};
    case TacKind::Liver: return {kind, 4.0, 55.0, 2.0};
    case TacKind::Myocardium: return {kind, 5.0, 20.0, 1.5};
    case TacKind::Kidney: return {kind, 6.0, 12.0, 2.0};
    case TacKind::Tissue: return {kind, 2.0, 40.0, 1.0};
    case TacKind::Constant: return {kind, 1.0, 1.0, 1.0};
    }
    throw ConfigError("unknown TAC kind");
}

namespace {

struct Ellipse {
    double cx, cy, ax, ay; // normalised [-1, 1] grid coordinates
    bool contains(double x, double y) const {
        const double dx = (x - cx) / ax, dy = (y - cy) / ay;
        return dx * dx + dy * dy <= 1.0;
    }
};

/// Paints shapes in order; later shapes win where they overlap.
LabelMap paint(int size, const std::vector<std::pair<Ellipse, int>>& shapes, int regions) {
    if (size < 8)
        throw ConfigError("phantom size must be at least 8");
    LabelMap m{size, regions, std::vector<int>(static_cast<std::size_t>(size) * size, 0)};
    const double half = 0.5 * (size - 1);
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
            const double x = (c - half) / half;
            const double y = (r - half) / half;
            for (const auto& [shape, label] : shapes)
                if (shape.contains(x, y))
                    m.labels[static_cast<std::size_t>(r) * size + c] = label;
        }
    }
    m.validate();
    return m;
}

} // namespace

LabelMap make_ellipse_phantom(int size) {
    return paint(size,
                 {{{-0.38, -0.05, 0.26, 0.46}, 1}, //
                  {{0.36, 0.08, 0.30, 0.55}, 2}},
                 2);
}

LabelMap make_rat_phantom(int size) {
    return paint(size,
                 {{{0.0, 0.0, 0.86, 0.72}, 4},     // body
                  {{-0.30, 0.18, 0.42, 0.32}, 2},  // liver
                  {{0.45, 0.32, 0.14, 0.20}, 3},   // kidney
                  {{0.22, -0.30, 0.20, 0.20}, 1}}, // heart
                 4);
}

LabelMap make_circle_phantom(int size) {
    return paint(size,
                 {{{0.0, 0.0, 0.75, 0.75}, 1}, //
                  {{-0.35, 0.0, 0.2, 0.2}, 2},
                  {{0.35, 0.0, 0.2, 0.2}, 2}},
                 2);
}

TacSet make_tacs(int frames, const std::vector<GammaVariate>& curves) {
    if (frames < 2)
        throw ConfigError("TAC synthesis needs at least two frames");
    TacSet s{Matrix(frames, static_cast<Eigen::Index>(curves.size()))};
    for (std::size_t k = 0; k < curves.size(); ++k) {
        const auto& g = curves[k];
        if (g.kind != TacKind::Constant && !(g.peak > 0.0 && g.shape > 0.0))
            throw ConfigError("gamma-variate peak and shape must be positive");
        if (!(g.amplitude >= 0.0))
            throw ConfigError("TAC amplitude must be nonnegative");
        for (int t = 0; t < frames; ++t)
            s.curves(t, static_cast<Eigen::Index>(k)) = g(t + 1.0);
    }
    return s;
}

TacSet make_tacs(int frames, const std::vector<TacKind>& kinds) {
    std::vector<GammaVariate> curves;
    curves.reserve(kinds.size());
    for (auto k : kinds)
        curves.push_back(GammaVariate::defaults(k));
    return make_tacs(frames, curves);
}

DynamicImage synthesize_dynamic(const LabelMap& labels, const TacSet& tacs) {
    labels.validate();
    if (labels.regions != tacs.regions())
        throw DimensionError("label map has " + std::to_string(labels.regions) + " regions but " +
                             std::to_string(tacs.regions()) + " curves were supplied");
    DynamicImage u(labels.size, labels.size, tacs.frames());
    for (std::size_t p = 0; p < labels.labels.size(); ++p) {
        const int l = labels.labels[p];
        if (l > 0)
            u.data.row(static_cast<Eigen::Index>(p)) = tacs.curves.col(l - 1).transpose();
    }
    return u;
}

std::uint64_t frame_stream_seed(std::uint64_t seed, int frame) {
    // splitmix64 finaliser over (seed, frame)
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(frame) + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

SinogramSet add_gaussian_noise(const SinogramSet& sino, double level, std::uint64_t seed) {
    sino.validate();
    if (level < 0.0)
        throw DomainError("gaussian noise level must be nonnegative");
    SinogramSet out = sino;
    if (level == 0.0)
        return out;
    double sq = 0.0;
    for (const auto& f : sino.frames)
        sq += f.counts.squaredNorm();
    const double rms = std::sqrt(sq / static_cast<double>(sino.total_bins()));
    const double sd = level * rms;
    for (int t = 0; t < out.frame_count(); ++t) {
        std::mt19937_64 rng(frame_stream_seed(seed, t));
        std::normal_distribution<double> normal(0.0, sd);
        for (auto& v : out.frames[static_cast<std::size_t>(t)].counts)
            v += normal(rng);
    }
    return out;
}

namespace {

double max_count(const SinogramSet& sino) {
    double m = 0.0;
    for (const auto& f : sino.frames) {
        if ((f.counts.array() < 0.0).any())
            throw DomainError("Poisson noise needs a nonnegative sinogram");
        m = std::max(m, f.counts.maxCoeff());
    }
    return m;
}

} // namespace

SinogramSet poisson_counts(const SinogramSet& sino, double scale, std::uint64_t seed) {
    sino.validate();
    if (!(scale > 0.0))
        throw DomainError("Poisson scale must be positive");
    const double fmax = max_count(sino);
    SinogramSet out = sino.zeros_like();
    if (fmax == 0.0)
        return out;
    for (int t = 0; t < out.frame_count(); ++t) {
        std::mt19937_64 rng(frame_stream_seed(seed, t));
        const auto& f = sino.frames[static_cast<std::size_t>(t)].counts;
        auto& k = out.frames[static_cast<std::size_t>(t)].counts;
        for (Eigen::Index i = 0; i < f.size(); ++i) {
            const double mean = scale * f[i] / fmax;
            if (mean > 0.0) {
                std::poisson_distribution<long long> pois(mean);
                k[i] = static_cast<double>(pois(rng));
            }
        }
    }
    return out;
}

SinogramSet add_poisson_noise(const SinogramSet& sino, double scale, std::uint64_t seed) {
    SinogramSet out = poisson_counts(sino, scale, seed);
    const double fmax = max_count(sino);
    for (auto& f : out.frames)
        f.counts *= fmax / scale;
    return out;
}

SinogramSet MonteCarloAcquisition::rescaled() const {
    SinogramSet out = counts;
    for (std::size_t t = 0; t < out.frames.size(); ++t)
        out.frames[t].counts *= rescale[t];
    return out;
}

MonteCarloAcquisition monte_carlo_acquire(const DynamicImage& image, const AngleSchedule& sched,
                                          const ProjectorGeometry& geom, double events_factor,
                                          std::uint64_t seed, bool record_origins) {
    image.validate();
    geom.validate();
    if (!(events_factor > 0.0))
        throw DomainError("events factor must be positive");
    if ((image.data.array() < 0.0).any())
        throw DomainError("Monte Carlo acquisition needs a nonnegative image");
    if (image.frames() != sched.frames)
        throw DimensionError("schedule and image frame counts differ");
    if (image.width != geom.image_size || image.height != geom.image_size)
        throw DimensionError("image grid does not match projector geometry");

    const int n = geom.image_size;
    const int nb = geom.bins;
    const double half = 0.5 * (n - 1);

    MonteCarloAcquisition acq;
    acq.events.assign(static_cast<std::size_t>(image.frames()), 0);
    acq.rescale.assign(static_cast<std::size_t>(image.frames()), 0.0);
    if (record_origins)
        acq.origins.assign(static_cast<std::size_t>(image.frames()),
                           std::vector<std::int64_t>(static_cast<std::size_t>(image.pixels()), 0));
    for (int t = 0; t < image.frames(); ++t) {
        auto angles = sched.angles(t + 1);
        const int heads = static_cast<int>(angles.size());
        SinogramFrame frame{angles, Vector::Zero(static_cast<Eigen::Index>(heads) * nb), nb};

        const auto u = image.frame(t);
        std::vector<double> cdf(static_cast<std::size_t>(u.size()));
        double total = 0.0;
        Eigen::Index active = 0;
        for (Eigen::Index p = 0; p < u.size(); ++p) {
            total += u[p];
            active += u[p] > 0.0 ? 1 : 0;
            cdf[static_cast<std::size_t>(p)] = total;
        }
        if (active > 0) {
            const auto n_events = static_cast<std::int64_t>(std::llround(events_factor * total / active));
            acq.events[static_cast<std::size_t>(t)] = n_events;
            acq.rescale[static_cast<std::size_t>(t)] = heads * static_cast<double>(active) / events_factor;

            std::vector<double> cosv(angles.size()), sinv(angles.size());
            for (std::size_t h = 0; h < angles.size(); ++h) {
                const double th = angles[h] * std::numbers::pi / 180.0;
                cosv[h] = std::cos(th) / geom.bin_spacing;
                sinv[h] = std::sin(th) / geom.bin_spacing;
            }

            std::mt19937_64 rng(frame_stream_seed(seed, t));
            std::uniform_real_distribution<double> unif(0.0, 1.0);
            std::uniform_int_distribution<int> pick_head(0, heads - 1);
            for (std::int64_t e = 0; e < n_events; ++e) {
                const double target = unif(rng) * total;
                auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
                if (it == cdf.end())
                    --it;
                const auto p = static_cast<int>(it - cdf.begin());
                if (record_origins)
                    ++acq.origins[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
                const int h = pick_head(rng);
                const double x = (p % n) - half;
                const double y = (p / n) - half;
                const double s = x * cosv[static_cast<std::size_t>(h)] + y * sinv[static_cast<std::size_t>(h)] +
                                 0.5 * (nb - 1);
                const double fl = std::floor(s);
                int bin = static_cast<int>(fl);
                if (unif(rng) < s - fl)
                    ++bin;
                if (bin >= 0 && bin < nb)
                    frame.counts[static_cast<Eigen::Index>(h) * nb + bin] += 1.0;
            }
        }
        acq.counts.frames.push_back(std::move(frame));
    }
    return acq;
}

} // namespace dynaspect
