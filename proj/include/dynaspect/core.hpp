#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

namespace dynaspect {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/**
 * Dynamic activity image: one column per frame, pixels within a frame stored
 * row-major (pixel index = row * width + col).
 */
struct DynamicImage {
    Matrix data; // M x T
    int width = 0;
    int height = 0;

    DynamicImage() = default;
    DynamicImage(int width, int height, int frames);
    DynamicImage(Matrix data, int width, int height);

    int pixels() const { return width * height; }
    int frames() const { return static_cast<int>(data.cols()); }

    auto frame(int t) { return data.col(t); }
    auto frame(int t) const { return data.col(t); }

    /// Throws DimensionError when the matrix shape disagrees with the grid.
    void validate() const;
};

/// Projections for one time frame; counts are view-major (view * bins + bin).
struct SinogramFrame {
    std::vector<double> angles_deg;
    Vector counts;
    int bins = 0;

    int views() const { return static_cast<int>(angles_deg.size()); }
};

struct SinogramSet {
    std::vector<SinogramFrame> frames;

    int frame_count() const { return static_cast<int>(frames.size()); }
    int bins() const { return frames.empty() ? 0 : frames.front().bins; }
    std::size_t total_bins() const;

    /// Shape and finiteness checks; throws DimensionError / DataError.
    void validate() const;

    /// Same angles and bins, zero counts.
    SinogramSet zeros_like() const;
};

/// Mixing coefficients alpha, M x K.
struct CoefficientMatrix {
    Matrix data;
};

/// Temporal basis B, T x K; columns are time activity curves.
struct BasisMatrix {
    Matrix data;
};

struct GaussianNoise {
    double level = 0.1; // relative to sinogram RMS
};
struct PoissonNoise {
    double scale = 1000.0;
};
struct MonteCarloNoise {
    double events_factor = 2e4;
};

using NoiseModel = std::variant<GaussianNoise, PoissonNoise, MonteCarloNoise>;

/// Which data-fidelity functional a reconstruction uses.
enum class FidelityKind { Gaussian, KullbackLeibler };

/// Gaussian noise uses the least-squares term, the count models use KL.
FidelityKind fidelity_for(const NoiseModel& noise);

std::string noise_name(const NoiseModel& noise);

/// Throws ConfigError on out-of-range noise parameters.
void validate_noise(const NoiseModel& noise);

/// Projections below this are clamped before taking the log in the KL term.
inline constexpr double kKlFloor = 1e-12;

/// 1/2 sum_t ||proj_t - sino_t||^2.
double gaussian_fidelity(const SinogramSet& sino, const SinogramSet& proj);

/// <proj, 1> - <sino, log proj>, with proj clamped to kKlFloor when
/// `clamp` is set. Without clamping a nonpositive projection paired with a
/// positive count raises DomainError.
double kl_fidelity(const SinogramSet& sino, const SinogramSet& proj, bool clamp = true);

double fidelity(FidelityKind kind, const SinogramSet& sino, const SinogramSet& proj);

} // namespace dynaspect
