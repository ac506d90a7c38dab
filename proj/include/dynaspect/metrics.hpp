#pragma once

#include "dynaspect/core.hpp"
#include "dynaspect/phantom.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace dynaspect {

/// ||rec_t - truth_t||^2 / ||truth_t||^2 for 0-based frame t.
double frame_relative_error(const DynamicImage& rec, const DynamicImage& truth, int t);
std::vector<double> frame_error_series(const DynamicImage& rec, const DynamicImage& truth);
double mean_frame_error(const DynamicImage& rec, const DynamicImage& truth);

/// Per-frame mean over the region's pixels.
Vector region_mean_curve(const DynamicImage& u, const LabelMap& labels, int region);
/// region_mean_curve divided by its maximum.
Vector extract_tac(const DynamicImage& u, const LabelMap& labels, int region);

struct TacFidelity {
    double max_abs_dev = 0.0;
    double pearson = 0.0;
};

TacFidelity tac_fidelity(const Vector& rec, const Vector& truth);

/// Frames written as images by export_report, 1-based.
std::vector<int> report_frames(int frames);

/// 8-bit binary PGM, values mapped linearly from [0, max_value] and clipped.
void write_pgm(const std::filesystem::path& path, const Eigen::Ref<const Vector>& frame, int width, int height,
               double max_value);

struct MethodResult {
    std::string name;
    DynamicImage u;
};

/**
 * Writes frame_error.csv (t plus one column per method), tac_<region>.csv
 * (t, true, one column per method), frame_<method>_<t>.pgm for report_frames()
 * scaled to the largest value over all methods and the truth, and summary.txt.
 */
void export_report(const std::vector<MethodResult>& methods, const DynamicImage& truth, const LabelMap& labels,
                   const std::filesystem::path& out_dir);

} // namespace dynaspect
