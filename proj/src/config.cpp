#include "dynaspect/config.hpp"

#include "dynaspect/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <limits>
#include <fstream>
#include <set>
#include <sstream>

namespace dynaspect {

using nlohmann::json;

namespace {

class Section {
public:
    Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object())
            throw ConfigError(path_ + ": expected an object");
    }

    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* find(const std::string& key) {
        known_.insert(key);
        auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    void get(const std::string& key, double& out) {
        if (const json* v = find(key)) {
            if (!v->is_number())
                throw ConfigError(key_path(key) + ": expected a number");
            out = v->get<double>();
        }
    }
    void get(const std::string& key, int& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_integer())
                throw ConfigError(key_path(key) + ": expected an integer");
            const auto x = v->get<std::int64_t>();
            if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
                throw ConfigError(key_path(key) + ": integer out of range");
            out = static_cast<int>(x);
        }
    }
    void get(const std::string& key, std::uint64_t& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_unsigned())
                throw ConfigError(key_path(key) + ": expected a nonnegative integer");
            out = v->get<std::uint64_t>();
        }
    }
    void get(const std::string& key, bool& out) {
        if (const json* v = find(key)) {
            if (!v->is_boolean())
                throw ConfigError(key_path(key) + ": expected true or false");
            out = v->get<bool>();
        }
    }
    void get(const std::string& key, std::string& out) {
        if (const json* v = find(key)) {
            if (!v->is_string())
                throw ConfigError(key_path(key) + ": expected a string");
            out = v->get<std::string>();
        }
    }

    /// Rejects keys that were never looked up.
    void finish() const {
        for (auto it = obj_.begin(); it != obj_.end(); ++it)
            if (!known_.count(it.key()))
                throw ConfigError("unknown key: " + key_path(it.key()));
    }

private:
    const json& obj_;
    std::string path_;
    std::set<std::string> known_;
};

GammaVariate parse_tac(const json& j, const std::string& path) {
    Section s(j, path);
    std::string kind;
    s.get("kind", kind);
    if (kind.empty())
        throw ConfigError(path + ".kind: required");
    GammaVariate g;
    try {
        g = GammaVariate::defaults(parse_tac_kind(kind));
    } catch (const std::exception&) {
        throw ConfigError(path + ".kind: unknown curve kind '" + kind + "'");
    }
    s.get("amplitude", g.amplitude);
    s.get("peak", g.peak);
    s.get("shape", g.shape);
    s.finish();
    return g;
}

void parse_noise(const json& j, NoiseConfig& noise) {
    Section s(j, "noise");
    std::string model = noise_name(noise.model);
    s.get("model", model);
    GaussianNoise gauss;
    PoissonNoise poisson;
    MonteCarloNoise mc;
    if (auto* g = std::get_if<GaussianNoise>(&noise.model))
        gauss = *g;
    if (auto* p = std::get_if<PoissonNoise>(&noise.model))
        poisson = *p;
    if (auto* m = std::get_if<MonteCarloNoise>(&noise.model))
        mc = *m;
    s.get("level", gauss.level);
    s.get("scale", poisson.scale);
    s.get("events_factor", mc.events_factor);
    s.get("seed", noise.seed);
    s.finish();
    if (model == "gaussian")
        noise.model = gauss;
    else if (model == "poisson")
        noise.model = poisson;
    else if (model == "monte_carlo")
        noise.model = mc;
    else
        throw ConfigError("noise.model: expected gaussian, poisson or monte_carlo, got '" + model + "'");
}

void parse_solver(const json& j, ReconstructionConfig& c) {
    Section s(j, "solver");
    s.get("gamma", c.weights.gamma);
    s.get("beta", c.weights.beta);
    s.get("eta", c.weights.eta);
    s.get("lambda", c.weights.lambda);
    s.get("epsilon", c.epsilon);
    s.get("outer_iters", c.outer_iters);
    s.get("outer_tol", c.outer_tol);
    s.get("inner_iters", c.inner_iters);
    s.get("inner_tol", c.inner_tol);
    s.get("theta", c.theta);
    s.get("step_ratio", c.step_ratio);
    s.get("pfbs_iters", c.pfbs_iters);
    s.get("window_halfwidth", c.window_halfwidth);
    s.get("k", c.warm.k);
    s.get("warm_iters", c.warm.iters);
    s.get("warm_alpha_steps", c.warm.alpha_steps);
    s.get("paper_literal_signs", c.paper_literal_signs);
    s.get("nonneg_md_variant", c.nonneg_md_variant);
    s.finish();
}

json noise_json(const NoiseConfig& n) {
    json j;
    j["model"] = noise_name(n.model);
    j["seed"] = n.seed;
    if (auto* g = std::get_if<GaussianNoise>(&n.model))
        j["level"] = g->level;
    if (auto* p = std::get_if<PoissonNoise>(&n.model))
        j["scale"] = p->scale;
    if (auto* m = std::get_if<MonteCarloNoise>(&n.model))
        j["events_factor"] = m->events_factor;
    return j;
}

} // namespace

std::vector<TacKind> default_tac_kinds(const std::string& kind) {
    if (kind == "ellipse")
        return {TacKind::Blood, TacKind::Liver};
    if (kind == "rat")
        return {TacKind::Myocardium, TacKind::Liver, TacKind::Kidney, TacKind::Tissue};
    if (kind == "circle")
        return {TacKind::Tissue, TacKind::Blood};
    throw ConfigError("phantom.kind: expected ellipse, rat or circle, got '" + kind + "'");
}

ProjectorGeometry RunConfig::projector() const {
    ProjectorGeometry g;
    g.image_size = phantom.size;
    g.bins = geometry.bins > 0 ? geometry.bins : ProjectorGeometry::default_bins(phantom.size);
    g.bin_spacing = geometry.bin_spacing;
    return g;
}

AngleSchedule RunConfig::schedule() const {
    return {geometry.heads, geometry.delta_deg, geometry.start_deg, phantom.frames};
}

LabelMap RunConfig::labels() const {
    if (phantom.kind == "ellipse")
        return make_ellipse_phantom(phantom.size);
    if (phantom.kind == "rat")
        return make_rat_phantom(phantom.size);
    if (phantom.kind == "circle")
        return make_circle_phantom(phantom.size);
    throw ConfigError("phantom.kind: expected ellipse, rat or circle, got '" + phantom.kind + "'");
}

TacSet RunConfig::tacs() const {
    if (!phantom.tacs.empty())
        return make_tacs(phantom.frames, phantom.tacs);
    return make_tacs(phantom.frames, default_tac_kinds(phantom.kind));
}

void RunConfig::validate() const {
    const auto kinds = default_tac_kinds(phantom.kind);
    if (phantom.size < 8)
        throw ConfigError("phantom.size: must be at least 8");
    if (phantom.frames < 2)
        throw ConfigError("phantom.frames: must be at least 2");
    if (!phantom.tacs.empty() && phantom.tacs.size() != kinds.size())
        throw ConfigError("phantom.tacs: the " + phantom.kind + " phantom has " + std::to_string(kinds.size()) +
                          " regions");
    for (const auto& g : phantom.tacs)
        if (!(g.amplitude >= 0.0) || (g.kind != TacKind::Constant && !(g.peak > 0.0 && g.shape > 0.0)))
            throw ConfigError("phantom.tacs: amplitude must be >= 0, peak and shape > 0");
    if (geometry.bins < 0)
        throw ConfigError("geometry.bins: must be nonnegative");
    if (geometry.heads < 1)
        throw ConfigError("geometry.heads: must be positive");
    if (!std::isfinite(geometry.delta_deg) || !std::isfinite(geometry.start_deg))
        throw ConfigError("geometry: angles must be finite");
    try {
        projector().validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("geometry: ") + e.what());
    }
    try {
        validate_noise(noise.model);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("noise: ") + e.what());
    }
    try {
        solver.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("solver: ") + e.what());
    }
    if (solver.warm.k > phantom.frames)
        throw ConfigError("solver.k: must not exceed phantom.frames");
    if (output_dir.empty())
        throw ConfigError("output.dir: must not be empty");
}

std::vector<std::string> preset_names() { return {"ellipse", "ellipse-poisson", "rat", "rat-poisson", "circle-mc"}; }

RunConfig preset_config(const std::string& name) {
    RunConfig c;
    if (name == "ellipse" || name == "ellipse-poisson" || name == "rat" || name == "rat-poisson") {
        c.phantom.kind = name.starts_with("rat") ? "rat" : "ellipse";
        if (name.ends_with("-poisson")) {
            c.noise.model = PoissonNoise{};
            c.solver = default_solver(FidelityKind::KullbackLeibler);
        }
        return c;
    }
    if (name == "circle-mc") {
        c.phantom.kind = "circle";
        c.phantom.size = 129;
        c.geometry.bins = 187;
        c.noise.model = MonteCarloNoise{2e4};
        c.solver = default_solver(FidelityKind::KullbackLeibler);
        return c;
    }
    throw ConfigError("unknown preset '" + name + "'");
}

RunConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what());
    }
    Section top(root, "");
    RunConfig c;
    std::string preset;
    top.get("preset", preset);
    if (!preset.empty())
        c = preset_config(preset);

    if (const json* p = top.find("phantom")) {
        Section s(*p, "phantom");
        s.get("kind", c.phantom.kind);
        s.get("size", c.phantom.size);
        s.get("frames", c.phantom.frames);
        if (const json* t = s.find("tacs")) {
            if (!t->is_array())
                throw ConfigError("phantom.tacs: expected an array");
            c.phantom.tacs.clear();
            for (std::size_t i = 0; i < t->size(); ++i)
                c.phantom.tacs.push_back(parse_tac((*t)[i], "phantom.tacs[" + std::to_string(i) + "]"));
        }
        s.finish();
    }
    if (const json* g = top.find("geometry")) {
        Section s(*g, "geometry");
        s.get("bins", c.geometry.bins);
        s.get("bin_spacing", c.geometry.bin_spacing);
        s.get("heads", c.geometry.heads);
        s.get("delta_deg", c.geometry.delta_deg);
        s.get("start_deg", c.geometry.start_deg);
        s.finish();
    }
    if (const json* n = top.find("noise")) {
        const FidelityKind before = fidelity_for(c.noise.model);
        parse_noise(*n, c.noise);
        if (fidelity_for(c.noise.model) != before)
            c.solver = default_solver(fidelity_for(c.noise.model));
    }
    if (const json* s = top.find("solver"))
        parse_solver(*s, c.solver);
    if (const json* o = top.find("output")) {
        Section s(*o, "output");
        s.get("dir", c.output_dir);
        s.finish();
    }
    top.finish();
    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot read config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string config_to_json(const RunConfig& c) {
    json j;
    json tacs = json::array();
    for (const auto& g : c.phantom.tacs)
        tacs.push_back({{"kind", tac_kind_name(g.kind)}, {"amplitude", g.amplitude}, {"peak", g.peak},
                        {"shape", g.shape}});
    j["phantom"] = {{"kind", c.phantom.kind}, {"size", c.phantom.size}, {"frames", c.phantom.frames}, {"tacs", tacs}};
    j["geometry"] = {{"bins", c.geometry.bins},
                     {"bin_spacing", c.geometry.bin_spacing},
                     {"heads", c.geometry.heads},
                     {"delta_deg", c.geometry.delta_deg},
                     {"start_deg", c.geometry.start_deg}};
    j["noise"] = noise_json(c.noise);
    const auto& s = c.solver;
    j["solver"] = {{"gamma", s.weights.gamma},
                   {"beta", s.weights.beta},
                   {"eta", s.weights.eta},
                   {"lambda", s.weights.lambda},
                   {"epsilon", s.epsilon},
                   {"outer_iters", s.outer_iters},
                   {"outer_tol", s.outer_tol},
                   {"inner_iters", s.inner_iters},
                   {"inner_tol", s.inner_tol},
                   {"theta", s.theta},
                   {"step_ratio", s.step_ratio},
                   {"pfbs_iters", s.pfbs_iters},
                   {"window_halfwidth", s.window_halfwidth},
                   {"k", s.warm.k},
                   {"warm_iters", s.warm.iters},
                   {"warm_alpha_steps", s.warm.alpha_steps},
                   {"paper_literal_signs", s.paper_literal_signs},
                   {"nonneg_md_variant", s.nonneg_md_variant}};
    j["output"] = {{"dir", c.output_dir}};
    return j.dump(2) + "\n";
}

std::string config_hash(const RunConfig& config) {
    RunConfig c = config;
    c.output_dir = "-";
    const std::string text = config_to_json(c);
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace dynaspect
