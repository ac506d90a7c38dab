#pragma once

#include "dynaspect/core.hpp"
#include "dynaspect/projector.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dynaspect {

/// Compartment labels on a square grid, row-major; 0 is background.
struct LabelMap {
    int size = 0;
    int regions = 0;
    std::vector<int> labels;

    int at(int row, int col) const { return labels[static_cast<std::size_t>(row) * size + col]; }
    std::size_t region_pixels(int region) const;
    void validate() const;
};

enum class TacKind { Blood, Liver, Myocardium, Kidney, Tissue, Constant };

TacKind parse_tac_kind(const std::string& name);
std::string tac_kind_name(TacKind kind);

/// c(t) = amplitude * (t / peak)^shape * exp(shape * (1 - t / peak)), t = 1..T.
/// `Constant` ignores peak and shape.
struct GammaVariate {
    TacKind kind = TacKind::Constant;
    double amplitude = 1.0;
    double peak = 1.0;
    double shape = 1.0;

    double operator()(double t) const;
    static GammaVariate defaults(TacKind kind);
};

/// Ground-truth curves, one column per region: T x R.
struct TacSet {
    Matrix curves;

    int frames() const { return static_cast<int>(curves.rows()); }
    int regions() const { return static_cast<int>(curves.cols()); }
};

/// Two disjoint axis-aligned ellipses: 1 = blood, 2 = liver.
LabelMap make_ellipse_phantom(int size = 64);

/// Rat abdomen stand-in: 1 = heart, 2 = liver, 3 = kidney, 4 = surrounding tissue.
LabelMap make_rat_phantom(int size = 64);

/// Outer circle (1) enclosing two disjoint inner circles (2).
LabelMap make_circle_phantom(int size = 129);

TacSet make_tacs(int frames, const std::vector<GammaVariate>& curves);
TacSet make_tacs(int frames, const std::vector<TacKind>& kinds);

/// U(x, t) = curve_{label(x)}(t); background stays 0.
DynamicImage synthesize_dynamic(const LabelMap& labels, const TacSet& tacs);

/// Seed for frame t's private RNG stream; identical for serial and parallel runs.
std::uint64_t frame_stream_seed(std::uint64_t seed, int frame);

/// f + N(0, (level * RMS(f))^2), RMS over every bin of every frame.
SinogramSet add_gaussian_noise(const SinogramSet& sino, double level, std::uint64_t seed);

/// Raw Poisson counts k ~ Poisson(scale * f / max f).
SinogramSet poisson_counts(const SinogramSet& sino, double scale, std::uint64_t seed);

/// Poisson counts rescaled back to data units: k * max f / scale.
SinogramSet add_poisson_noise(const SinogramSet& sino, double scale, std::uint64_t seed);

struct MonteCarloAcquisition {
    SinogramSet counts;                 // integer event counts
    std::vector<std::int64_t> events;   // N_t drawn per frame
    std::vector<double> rescale;        // per-frame factor back to line-integral units
    std::vector<std::vector<std::int64_t>> origins; // per-frame pixel histogram, when recorded

    /// counts scaled so that E[data] = A_t u_t.
    SinogramSet rescaled() const;
};

/**
 * Event-level acquisition. Frame t emits N_t = round(events_factor * mean of
 * u_t over its active pixels) decays. Each decay picks a pixel with probability
 * proportional to u_t and a head uniformly, and is counted at the detector bin
 * its pixel centre projects to; the fractional bin position is resolved by a
 * Bernoulli draw between the two neighbouring bins.
 */
MonteCarloAcquisition monte_carlo_acquire(const DynamicImage& image, const AngleSchedule& sched,
                                          const ProjectorGeometry& geom, double events_factor,
                                          std::uint64_t seed, bool record_origins = false);

} // namespace dynaspect
