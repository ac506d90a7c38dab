#pragma once

#include "dynaspect/config.hpp"
#include "dynaspect/driver.hpp"
#include "dynaspect/metrics.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dynaspect {

struct Dataset {
    LabelMap labels;
    TacSet tacs;
    DynamicImage truth;
    SinogramSet sino;                      // what every reconstruction consumes
    std::optional<SinogramSet> raw_counts; // integer counts for the count models
};

/// Phantom, TACs, noiseless acquisition and the configured noise.
Dataset simulate(const RunConfig& config);

/**
 * Directory layout: truth.dsp, labels.dsp, tacs.csv, sinogram.dsp plus
 * sinogram.angles.txt, counts.dsp (count models only), config.json and
 * manifest.txt.
 */
void write_dataset(const Dataset& data, const RunConfig& config, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

/// Throws DataError when the dataset grid, frame count or bins differ from the config.
void check_dataset_matches(const RunConfig& config, const Dataset& data);

enum class Method { Proposed, Fbp, Ls, Em };
Method parse_method(const std::string& name);
std::string method_name(Method method);

struct MethodRun {
    Method method = Method::Proposed;
    DynamicImage u;
    std::optional<ReconstructionRun> run; // proposed only
    std::vector<double> trace;            // baseline objective per sweep (ls, em)
};

MethodRun run_method(const RunConfig& config, const Dataset& data, Method method);

/// Run directory name: <method>-<config hash>.
std::string run_dir_name(const RunConfig& config, Method method);

/// Writes manifest.txt, u.dsp and, as available, history.csv, alpha.dsp,
/// basis.dsp and trace.csv. Returns the directory.
std::filesystem::path write_run(const MethodRun& run, const RunConfig& config, const std::filesystem::path& root);

/// Reads u.dsp; the method name comes from the manifest.
MethodResult read_run(const std::filesystem::path& dir);

/// Library version recorded in manifests.
std::string code_version();

} // namespace dynaspect
