#pragma once

#include "dynaspect/core.hpp"
#include "dynaspect/driver.hpp"
#include "dynaspect/phantom.hpp"
#include "dynaspect/projector.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dynaspect {

struct PhantomConfig {
    std::string kind = "ellipse"; // ellipse | rat | circle
    int size = 64;
    int frames = 90;
    std::vector<GammaVariate> tacs; // one per region; empty selects the phantom's defaults
};

struct GeometryConfig {
    int bins = 0; // 0 selects ProjectorGeometry::default_bins
    double bin_spacing = 1.0;
    int heads = 2;
    double delta_deg = 1.0;
    double start_deg = 1.0;
};

struct NoiseConfig {
    NoiseModel model = GaussianNoise{};
    std::uint64_t seed = 1;
};

struct RunConfig {
    PhantomConfig phantom;
    GeometryConfig geometry;
    NoiseConfig noise;
    ReconstructionConfig solver;
    std::string output_dir = "out";

    ProjectorGeometry projector() const;
    AngleSchedule schedule() const;
    LabelMap labels() const;
    TacSet tacs() const;

    /// Throws ConfigError naming the first invalid setting.
    void validate() const;
};

/// Preset names: ellipse, ellipse-poisson, rat, rat-poisson, circle-mc.
RunConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

/**
 * Parses a JSON document; unknown keys and type mismatches raise ConfigError
 * with the dotted key path. An optional top-level "preset" seeds the values.
 * Solver settings start from default_solver() of the configured noise model.
 */
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);

/// Canonical JSON with every field present, keys sorted.
std::string config_to_json(const RunConfig& config);

/// 16 hex digits of FNV-1a over the canonical JSON.
std::string config_hash(const RunConfig& config);

/// Default TAC kinds per phantom kind, in region order.
std::vector<TacKind> default_tac_kinds(const std::string& phantom_kind);

} // namespace dynaspect
