#pragma once

#include "dynaspect/core.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace dynaspect::io {

/// 8-byte magic at the start of every array file.
inline constexpr char kMagic[8] = {'D', 'S', 'P', 'E', 'C', 'T', '0', '1'};

/// An n-dimensional float64 array in row-major order.
struct NdArray {
    std::vector<std::uint32_t> dims;
    std::vector<double> values;

    std::size_t element_count() const;
};

/**
 * Binary layout: magic "DSPECT01", u32 rank, u32 dims[rank], then the
 * float64 payload, all little-endian, payload row-major.
 */
void write_array(const std::filesystem::path& path, std::span<const std::uint32_t> dims,
                 std::span<const double> values);
NdArray read_array(const std::filesystem::path& path);

/// CSV mirror of an array: a header row naming the dimensions, then one row
/// per leading index with the remaining dimensions flattened.
void write_array_csv(const std::filesystem::path& path, const NdArray& array);

// Stored as dims {T, height, width}.
void write_image(const std::filesystem::path& path, const DynamicImage& image);
DynamicImage read_image(const std::filesystem::path& path);

// Stored as dims {rows, cols}.
void write_matrix(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix(const std::filesystem::path& path);

/**
 * Sinograms go to `<stem>.dsp` with dims {T, views, bins} plus a sidecar
 * `<stem>.angles.txt` holding one line of space-separated degrees per frame.
 * All frames must have the same view count.
 */
void write_sinogram(const std::filesystem::path& stem, const SinogramSet& sino);
SinogramSet read_sinogram(const std::filesystem::path& stem);

/// Shortest round-trip decimal form, used for every text export.
std::string format_double(double v);

} // namespace dynaspect::io
