#include "dynaspect/pipeline.hpp"

#include "dynaspect/array_io.hpp"
#include "dynaspect/errors.hpp"
#include "dynaspect/phantom.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace dynaspect {

namespace fs = std::filesystem;
using io::format_double;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw DataError("cannot write " + path.string());
    out << text;
    if (!out)
        throw DataError("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void make_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw DataError("cannot create directory " + dir.string());
}

std::map<std::string, std::string> read_manifest(const fs::path& path) {
    std::map<std::string, std::string> kv;
    std::istringstream in(read_text(path));
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos)
            kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

std::string noise_parameter(const NoiseModel& m) {
    if (auto* g = std::get_if<GaussianNoise>(&m))
        return "level=" + format_double(g->level);
    if (auto* p = std::get_if<PoissonNoise>(&m))
        return "scale=" + format_double(p->scale);
    return "events_factor=" + format_double(std::get<MonteCarloNoise>(m).events_factor);
}

} // namespace

std::string code_version() {
#ifdef DYNASPECT_VERSION
    return DYNASPECT_VERSION;
#else
    return "0.1.0";
#endif
}

Dataset simulate(const RunConfig& config) {
    config.validate();
    Dataset d;
    d.labels = config.labels();
    d.tacs = config.tacs();
    if (d.tacs.regions() != d.labels.regions)
        throw ConfigError("phantom.tacs: curve count differs from the phantom's regions");
    d.truth = synthesize_dynamic(d.labels, d.tacs);
    const ProjectorGeometry geom = config.projector();
    const AngleSchedule sched = config.schedule();
    const std::uint64_t seed = config.noise.seed;
    if (auto* g = std::get_if<GaussianNoise>(&config.noise.model)) {
        d.sino = add_gaussian_noise(acquire(d.truth, sched, geom), g->level, seed);
    } else if (auto* p = std::get_if<PoissonNoise>(&config.noise.model)) {
        const SinogramSet clean = acquire(d.truth, sched, geom);
        d.raw_counts = poisson_counts(clean, p->scale, seed);
        d.sino = add_poisson_noise(clean, p->scale, seed);
    } else {
        const auto& mc = std::get<MonteCarloNoise>(config.noise.model);
        MonteCarloAcquisition acq = monte_carlo_acquire(d.truth, sched, geom, mc.events_factor, seed);
        d.sino = acq.rescaled();
        d.raw_counts = std::move(acq.counts);
    }
    return d;
}

void write_dataset(const Dataset& d, const RunConfig& config, const fs::path& dir) {
    make_dir(dir);
    io::write_image(dir / "truth.dsp", d.truth);
    const std::uint32_t ldims[2] = {static_cast<std::uint32_t>(d.labels.size),
                                    static_cast<std::uint32_t>(d.labels.size)};
    std::vector<double> lv(d.labels.labels.begin(), d.labels.labels.end());
    io::write_array(dir / "labels.dsp", ldims, lv);

    std::ostringstream tacs;
    tacs << "t";
    for (int r = 1; r <= d.tacs.regions(); ++r)
        tacs << ",region" << r;
    tacs << '\n';
    for (int t = 0; t < d.tacs.frames(); ++t) {
        tacs << t + 1;
        for (int r = 0; r < d.tacs.regions(); ++r)
            tacs << ',' << format_double(d.tacs.curves(t, r));
        tacs << '\n';
    }
    write_text(dir / "tacs.csv", tacs.str());

    io::write_sinogram(dir / "sinogram", d.sino);
    if (d.raw_counts)
        io::write_sinogram(dir / "counts", *d.raw_counts);
    write_text(dir / "config.json", config_to_json(config));

    std::ostringstream m;
    m << "code_version=" << code_version() << '\n'
      << "config_hash=" << config_hash(config) << '\n'
      << "seed=" << config.noise.seed << '\n'
      << "noise=" << noise_name(config.noise.model) << '\n'
      << "noise_" << noise_parameter(config.noise.model) << '\n'
      << "phantom=" << config.phantom.kind << '\n'
      << "size=" << config.phantom.size << '\n'
      << "frames=" << config.phantom.frames << '\n'
      << "bins=" << config.projector().bins << '\n'
      << "views_per_frame=" << config.geometry.heads << '\n';
    write_text(dir / "manifest.txt", m.str());
}

Dataset read_dataset(const fs::path& dir) {
    if (!fs::is_directory(dir))
        throw DataError("dataset directory " + dir.string() + " does not exist");
    Dataset d;
    d.truth = io::read_image(dir / "truth.dsp");
    const io::NdArray labels = io::read_array(dir / "labels.dsp");
    if (labels.dims.size() != 2 || labels.dims[0] != labels.dims[1])
        throw DataError("labels.dsp: expected a square 2-d array");
    d.labels.size = static_cast<int>(labels.dims[0]);
    for (double v : labels.values) {
        d.labels.labels.push_back(static_cast<int>(v));
        d.labels.regions = std::max(d.labels.regions, static_cast<int>(v));
    }
    d.labels.validate();

    std::istringstream tacs(read_text(dir / "tacs.csv"));
    std::string line;
    std::getline(tacs, line);
    std::vector<std::vector<double>> rows;
    while (std::getline(tacs, line)) {
        std::vector<double> row;
        std::istringstream ls(line);
        std::string cell;
        std::getline(ls, cell, ','); // frame index
        while (std::getline(ls, cell, ','))
            row.push_back(std::stod(cell));
        rows.push_back(row);
    }
    if (!rows.empty()) {
        d.tacs.curves.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
        for (std::size_t t = 0; t < rows.size(); ++t) {
            if (rows[t].size() != rows.front().size())
                throw DataError("tacs.csv: ragged rows");
            for (std::size_t r = 0; r < rows[t].size(); ++r)
                d.tacs.curves(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(r)) = rows[t][r];
        }
    }
    d.sino = io::read_sinogram(dir / "sinogram");
    if (fs::exists(dir / "counts.dsp"))
        d.raw_counts = io::read_sinogram(dir / "counts");
    if (d.truth.width != d.labels.size || d.truth.frames() != d.sino.frame_count())
        throw DataError("dataset files disagree in shape");
    return d;
}

void check_dataset_matches(const RunConfig& config, const Dataset& d) {
    const ProjectorGeometry geom = config.projector();
    if (d.truth.width != geom.image_size || d.truth.height != geom.image_size)
        throw DataError("dataset grid " + std::to_string(d.truth.width) + " does not match the configured size " +
                        std::to_string(geom.image_size));
    if (d.sino.frame_count() != config.phantom.frames)
        throw DataError("dataset has " + std::to_string(d.sino.frame_count()) + " frames, config expects " +
                        std::to_string(config.phantom.frames));
    if (d.sino.bins() != geom.bins)
        throw DataError("dataset has " + std::to_string(d.sino.bins()) + " bins, config expects " +
                        std::to_string(geom.bins));
}

Method parse_method(const std::string& name) {
    if (name == "proposed")
        return Method::Proposed;
    if (name == "fbp")
        return Method::Fbp;
    if (name == "ls")
        return Method::Ls;
    if (name == "em")
        return Method::Em;
    throw ConfigError("unknown method '" + name + "' (expected proposed, fbp, ls or em)");
}

std::string method_name(Method m) {
    switch (m) {
    case Method::Proposed: return "proposed";
    case Method::Fbp: return "fbp";
    case Method::Ls: return "ls";
    case Method::Em: return "em";
    }
    return "unknown";
}

MethodRun run_method(const RunConfig& config, const Dataset& d, Method method) {
    config.validate();
    check_dataset_matches(config, d);
    const ProjectorGeometry geom = config.projector();
    MethodRun out;
    out.method = method;
    switch (method) {
    case Method::Fbp:
        out.u = baseline_fbp(d.sino, geom);
        break;
    case Method::Ls:
        out.u = baseline_ls(d.sino, geom, config.solver.warm, &out.trace);
        break;
    case Method::Em:
        out.u = baseline_em(d.sino, geom, config.solver.warm, &out.trace);
        break;
    case Method::Proposed: {
        const DynamicImage* truth = d.truth.frames() > 0 ? &d.truth : nullptr;
        out.run = reconstruct(d.sino, geom, config.solver, fidelity_for(config.noise.model), truth);
        out.u = out.run->u;
        break;
    }
    }
    return out;
}

std::string run_dir_name(const RunConfig& config, Method method) {
    return method_name(method) + "-" + config_hash(config);
}

fs::path write_run(const MethodRun& r, const RunConfig& config, const fs::path& root) {
    const fs::path dir = root / run_dir_name(config, r.method);
    make_dir(dir);
    io::write_image(dir / "u.dsp", r.u);
    write_text(dir / "config.json", config_to_json(config));

    std::ostringstream m;
    m << "code_version=" << code_version() << '\n'
      << "config_hash=" << config_hash(config) << '\n'
      << "seed=" << config.noise.seed << '\n'
      << "method=" << method_name(r.method) << '\n'
      << "noise=" << noise_name(config.noise.model) << '\n'
      << "fidelity=" << (fidelity_for(config.noise.model) == FidelityKind::Gaussian ? "gaussian" : "kl") << '\n';
    if (r.run) {
        const auto& run = *r.run;
        m << "outer_iterations=" << run.history.size() << '\n'
          << "operator_norm=" << format_double(run.operator_norm) << '\n'
          << "initial_objective=" << format_double(run.initial.total()) << '\n';
        if (!run.history.empty())
            m << "final_objective=" << format_double(run.history.back().terms.total()) << '\n';

        std::ostringstream h;
        h << "iteration,gamma,data,factor,sparsity,temporal,edge,total,u_change,inner_iterations,inner_change,"
             "q_unclamped_max,mean_relative_error,active_basis\n";
        for (const auto& rec : run.history)
            h << rec.iteration << ',' << format_double(rec.gamma) << ',' << format_double(rec.terms.data) << ','
              << format_double(rec.terms.factor) << ',' << format_double(rec.terms.sparsity) << ','
              << format_double(rec.terms.temporal) << ',' << format_double(rec.terms.edge) << ','
              << format_double(rec.terms.total()) << ',' << format_double(rec.u_change) << ','
              << rec.inner_iterations << ',' << format_double(rec.inner_change) << ','
              << format_double(rec.q_unclamped_max) << ',' << format_double(rec.mean_relative_error) << ','
              << rec.active_basis << '\n';
        write_text(dir / "history.csv", h.str());
        io::write_matrix(dir / "alpha.dsp", run.alpha.data);
        io::write_matrix(dir / "basis.dsp", run.basis.data);
    }
    if (!r.trace.empty()) {
        std::ostringstream t;
        t << "sweep,objective\n";
        for (std::size_t k = 0; k < r.trace.size(); ++k)
            t << k + 1 << ',' << format_double(r.trace[k]) << '\n';
        write_text(dir / "trace.csv", t.str());
    }
    write_text(dir / "manifest.txt", m.str());
    return dir;
}

MethodResult read_run(const fs::path& dir) {
    if (!fs::is_directory(dir))
        throw DataError("run directory " + dir.string() + " does not exist");
    const auto kv = read_manifest(dir / "manifest.txt");
    const auto it = kv.find("method");
    if (it == kv.end())
        throw DataError(dir.string() + "/manifest.txt has no method entry");
    return {it->second, io::read_image(dir / "u.dsp")};
}

} // namespace dynaspect
