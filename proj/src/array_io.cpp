#include "dynaspect/array_io.hpp"

#include "dynaspect/errors.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dynaspect::io {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little,
              "array files are little-endian; big-endian hosts need byte swapping");

std::size_t NdArray::element_count() const {
    std::size_t n = 1;
    for (auto d : dims)
        n *= d;
    return dims.empty() ? 0 : n;
}

void write_array(const fs::path& path, std::span<const std::uint32_t> dims,
                 std::span<const double> values) {
    std::size_t n = 1;
    for (auto d : dims)
        n *= d;
    if (dims.empty() || n != values.size())
        throw DimensionError("array payload of " + std::to_string(values.size()) +
                             " values does not match its dims");

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw DataError("cannot open " + path.string() + " for writing");
    out.write(kMagic, sizeof(kMagic));
    const auto rank = static_cast<std::uint32_t>(dims.size());
    out.write(reinterpret_cast<const char*>(&rank), sizeof(rank));
    out.write(reinterpret_cast<const char*>(dims.data()),
              static_cast<std::streamsize>(dims.size() * sizeof(std::uint32_t)));
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!out)
        throw DataError("write failed for " + path.string());
}

NdArray read_array(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open " + path.string());
    char magic[sizeof(kMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw DataError(path.string() + " is not a DSPECT01 array file");
    std::uint32_t rank = 0;
    in.read(reinterpret_cast<char*>(&rank), sizeof(rank));
    if (!in || rank == 0 || rank > 16)
        throw DataError(path.string() + ": invalid rank");
    NdArray a;
    a.dims.resize(rank);
    in.read(reinterpret_cast<char*>(a.dims.data()), static_cast<std::streamsize>(rank * sizeof(std::uint32_t)));
    if (!in)
        throw DataError(path.string() + ": truncated header");
    a.values.resize(a.element_count());
    in.read(reinterpret_cast<char*>(a.values.data()),
            static_cast<std::streamsize>(a.values.size() * sizeof(double)));
    if (!in)
        throw DataError(path.string() + ": truncated payload");
    if (in.peek() != std::char_traits<char>::eof())
        throw DataError(path.string() + ": trailing bytes after payload");
    return a;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

void write_array_csv(const fs::path& path, const NdArray& array) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw DataError("cannot open " + path.string() + " for writing");
    out << "# dims";
    for (auto d : array.dims)
        out << ' ' << d;
    out << '\n';
    const std::size_t rows = array.dims.empty() ? 0 : array.dims.front();
    const std::size_t cols = rows == 0 ? 0 : array.element_count() / rows;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            if (c)
                out << ',';
            out << format_double(array.values[r * cols + c]);
        }
        out << '\n';
    }
}

void write_image(const fs::path& path, const DynamicImage& image) {
    image.validate();
    const std::uint32_t dims[3] = {static_cast<std::uint32_t>(image.frames()),
                                   static_cast<std::uint32_t>(image.height),
                                   static_cast<std::uint32_t>(image.width)};
    // column-major M x T is exactly row-major T x H x W
    write_array(path, dims, std::span<const double>(image.data.data(), image.data.size()));
}

DynamicImage read_image(const fs::path& path) {
    auto a = read_array(path);
    if (a.dims.size() != 3)
        throw DataError(path.string() + ": expected a rank-3 image array");
    const int t = static_cast<int>(a.dims[0]);
    const int h = static_cast<int>(a.dims[1]);
    const int w = static_cast<int>(a.dims[2]);
    DynamicImage img(w, h, t);
    std::copy(a.values.begin(), a.values.end(), img.data.data());
    return img;
}

void write_matrix(const fs::path& path, const Matrix& m) {
    const std::uint32_t dims[2] = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    write_array(path, dims, std::span<const double>(rm.data(), rm.size()));
}

Matrix read_matrix(const fs::path& path) {
    auto a = read_array(path);
    if (a.dims.size() != 2)
        throw DataError(path.string() + ": expected a rank-2 array");
    Matrix m(a.dims[0], a.dims[1]);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            m(r, c) = a.values[static_cast<std::size_t>(r * m.cols() + c)];
    return m;
}

namespace {

fs::path with_suffix(const fs::path& stem, const char* suffix) {
    return fs::path(stem.string() + suffix);
}

} // namespace

void write_sinogram(const fs::path& stem, const SinogramSet& sino) {
    sino.validate();
    const int views = sino.frames.front().views();
    for (const auto& f : sino.frames)
        if (f.views() != views)
            throw DimensionError("sinogram files require the same view count in every frame");

    std::vector<double> payload;
    payload.reserve(sino.total_bins());
    for (const auto& f : sino.frames)
        payload.insert(payload.end(), f.counts.data(), f.counts.data() + f.counts.size());
    const std::uint32_t dims[3] = {static_cast<std::uint32_t>(sino.frame_count()),
                                   static_cast<std::uint32_t>(views),
                                   static_cast<std::uint32_t>(sino.bins())};
    write_array(with_suffix(stem, ".dsp"), dims, payload);

    std::ofstream out(with_suffix(stem, ".angles.txt"), std::ios::trunc);
    if (!out)
        throw DataError("cannot write angle sidecar for " + stem.string());
    for (const auto& f : sino.frames) {
        for (std::size_t v = 0; v < f.angles_deg.size(); ++v)
            out << (v ? " " : "") << format_double(f.angles_deg[v]);
        out << '\n';
    }
}

SinogramSet read_sinogram(const fs::path& stem) {
    auto a = read_array(with_suffix(stem, ".dsp"));
    if (a.dims.size() != 3)
        throw DataError(stem.string() + ".dsp: expected dims {T, views, bins}");
    const std::uint32_t frames = a.dims[0], views = a.dims[1], bins = a.dims[2];

    std::ifstream in(with_suffix(stem, ".angles.txt"));
    if (!in)
        throw DataError("missing angle sidecar " + stem.string() + ".angles.txt");

    SinogramSet sino;
    sino.frames.resize(frames);
    std::string line;
    for (std::uint32_t t = 0; t < frames; ++t) {
        if (!std::getline(in, line))
            throw DataError("angle sidecar has fewer lines than frames");
        std::istringstream ls(line);
        double ang;
        auto& f = sino.frames[t];
        while (ls >> ang)
            f.angles_deg.push_back(ang);
        if (f.angles_deg.size() != views)
            throw DataError("angle sidecar line " + std::to_string(t + 1) + " lists " +
                            std::to_string(f.angles_deg.size()) + " angles, expected " +
                            std::to_string(views));
        f.bins = static_cast<int>(bins);
        f.counts = Eigen::Map<const Vector>(a.values.data() + static_cast<std::size_t>(t) * views * bins,
                                            static_cast<Eigen::Index>(views) * bins);
    }
    sino.validate();
    return sino;
}

} // namespace dynaspect::io
