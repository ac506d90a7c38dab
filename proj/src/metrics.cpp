#include "dynaspect/metrics.hpp"

#include "dynaspect/array_io.hpp"
#include "dynaspect/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dynaspect {

namespace fs = std::filesystem;

namespace {

void check_same_shape(const DynamicImage& a, const DynamicImage& b) {
    if (a.width != b.width || a.height != b.height || a.frames() != b.frames())
        throw DimensionError("images differ in shape");
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw DataError("cannot write " + path.string());
    out << text;
    if (!out)
        throw DataError("write failed for " + path.string());
}

} // namespace

double frame_relative_error(const DynamicImage& rec, const DynamicImage& truth, int t) {
    check_same_shape(rec, truth);
    if (t < 0 || t >= truth.frames())
        throw DimensionError("frame index out of range");
    const double denom = truth.frame(t).squaredNorm();
    if (!(denom > 0.0))
        throw DomainError("true frame " + std::to_string(t + 1) + " is zero");
    return (rec.frame(t) - truth.frame(t)).squaredNorm() / denom;
}

std::vector<double> frame_error_series(const DynamicImage& rec, const DynamicImage& truth) {
    std::vector<double> out(static_cast<std::size_t>(truth.frames()));
    for (int t = 0; t < truth.frames(); ++t)
        out[static_cast<std::size_t>(t)] = frame_relative_error(rec, truth, t);
    return out;
}

double mean_frame_error(const DynamicImage& rec, const DynamicImage& truth) {
    const auto s = frame_error_series(rec, truth);
    double sum = 0.0;
    for (double v : s)
        sum += v;
    return s.empty() ? 0.0 : sum / static_cast<double>(s.size());
}

Vector region_mean_curve(const DynamicImage& u, const LabelMap& labels, int region) {
    if (labels.size != u.width || labels.size != u.height)
        throw DimensionError("label map and image grids differ");
    std::vector<Eigen::Index> idx;
    for (std::size_t p = 0; p < labels.labels.size(); ++p)
        if (labels.labels[p] == region)
            idx.push_back(static_cast<Eigen::Index>(p));
    if (idx.empty())
        throw DomainError("region " + std::to_string(region) + " is empty");
    Vector curve(u.frames());
    for (int t = 0; t < u.frames(); ++t) {
        double s = 0.0;
        for (auto p : idx)
            s += u.data(p, t);
        curve(t) = s / static_cast<double>(idx.size());
    }
    return curve;
}

Vector extract_tac(const DynamicImage& u, const LabelMap& labels, int region) {
    Vector c = region_mean_curve(u, labels, region);
    const double m = c.maxCoeff();
    if (!(m > 0.0))
        throw DomainError("region curve has no positive value");
    return c / m;
}

TacFidelity tac_fidelity(const Vector& rec, const Vector& truth) {
    if (rec.size() != truth.size() || rec.size() < 2)
        throw DimensionError("curves must have equal length >= 2");
    TacFidelity out;
    out.max_abs_dev = (rec - truth).cwiseAbs().maxCoeff();
    const Vector a = rec.array() - rec.mean();
    const Vector b = truth.array() - truth.mean();
    const double den = std::sqrt(a.squaredNorm() * b.squaredNorm());
    if (!(den > 0.0))
        throw DomainError("pearson correlation undefined for a constant curve");
    out.pearson = a.dot(b) / den;
    return out;
}

std::vector<int> report_frames(int frames) {
    std::vector<int> out;
    for (int t = 1; t <= std::min(frames, 81); t += 10)
        out.push_back(t);
    return out;
}

void write_pgm(const fs::path& path, const Eigen::Ref<const Vector>& frame, int width, int height, double max_value) {
    if (frame.size() != static_cast<Eigen::Index>(width) * height)
        throw DimensionError("pgm: frame size does not match the grid");
    std::string bytes = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    for (Eigen::Index p = 0; p < frame.size(); ++p) {
        double v = max_value > 0.0 ? frame(p) / max_value : 0.0;
        v = std::clamp(v, 0.0, 1.0);
        bytes.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v))));
    }
    write_text(path, bytes);
}

void export_report(const std::vector<MethodResult>& methods, const DynamicImage& truth, const LabelMap& labels,
                   const fs::path& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir))
        throw DataError("cannot create report directory " + out_dir.string());
    for (const auto& m : methods)
        check_same_shape(m.u, truth);
    using io::format_double;

    std::vector<std::vector<double>> errors;
    for (const auto& m : methods)
        errors.push_back(frame_error_series(m.u, truth));

    std::ostringstream csv;
    csv << "t";
    for (const auto& m : methods)
        csv << ',' << m.name;
    csv << '\n';
    for (int t = 0; t < truth.frames(); ++t) {
        csv << t + 1;
        for (const auto& e : errors)
            csv << ',' << format_double(e[static_cast<std::size_t>(t)]);
        csv << '\n';
    }
    write_text(out_dir / "frame_error.csv", csv.str());

    std::ostringstream summary;
    summary << "method mean_error median_error max_error\n";
    for (std::size_t k = 0; k < methods.size(); ++k) {
        auto e = errors[k];
        double mean = 0.0;
        for (double v : e)
            mean += v;
        mean /= static_cast<double>(e.size());
        std::sort(e.begin(), e.end());
        const double median = e.size() % 2 ? e[e.size() / 2] : 0.5 * (e[e.size() / 2 - 1] + e[e.size() / 2]);
        summary << methods[k].name << ' ' << format_double(mean) << ' ' << format_double(median) << ' '
                << format_double(e.back()) << '\n';
    }

    summary << "\nregion method max_abs_dev pearson\n";
    for (int r = 1; r <= labels.regions; ++r) {
        if (labels.region_pixels(r) == 0)
            continue;
        const Vector true_curve = extract_tac(truth, labels, r);
        std::vector<Vector> curves;
        for (const auto& m : methods) {
            const Vector raw = region_mean_curve(m.u, labels, r);
            const double mx = raw.maxCoeff();
            curves.push_back(mx > 0.0 ? Vector(raw / mx) : Vector(Vector::Zero(raw.size())));
        }
        std::ostringstream tac;
        tac << "t,true";
        for (const auto& m : methods)
            tac << ',' << m.name;
        tac << '\n';
        for (int t = 0; t < truth.frames(); ++t) {
            tac << t + 1 << ',' << format_double(true_curve(t));
            for (const auto& c : curves)
                tac << ',' << format_double(c(t));
            tac << '\n';
        }
        write_text(out_dir / ("tac_" + std::to_string(r) + ".csv"), tac.str());
        for (std::size_t k = 0; k < methods.size(); ++k) {
            std::string pearson = "nan";
            double dev = (curves[k] - true_curve).cwiseAbs().maxCoeff();
            try {
                pearson = format_double(tac_fidelity(curves[k], true_curve).pearson);
            } catch (const DomainError&) {
            }
            summary << r << ' ' << methods[k].name << ' ' << format_double(dev) << ' ' << pearson << '\n';
        }
    }
    write_text(out_dir / "summary.txt", summary.str());

    double vmax = truth.data.maxCoeff();
    for (const auto& m : methods)
        vmax = std::max(vmax, m.u.data.maxCoeff());
    for (int t : report_frames(truth.frames())) {
        write_pgm(out_dir / ("frame_true_" + std::to_string(t) + ".pgm"), truth.frame(t - 1), truth.width,
                  truth.height, vmax);
        for (const auto& m : methods)
            write_pgm(out_dir / ("frame_" + m.name + "_" + std::to_string(t) + ".pgm"), m.u.frame(t - 1),
                      truth.width, truth.height, vmax);
    }
}

} // namespace dynaspect
