// dynaspect: simulate, reconstruct and evaluate dynamic SPECT runs.

#include "dynaspect/errors.hpp"
#include "dynaspect/parallel.hpp"
#include "dynaspect/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace dynaspect;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kNumerical = 4 };

RunConfig load(const std::string& path, std::optional<std::uint64_t> seed) {
    RunConfig c = load_config(path);
    if (seed) {
        c.noise.seed = *seed;
        c.validate();
    }
    return c;
}

int cmd_simulate(const std::string& config_path, std::optional<std::uint64_t> seed) {
    const RunConfig c = load(config_path, seed);
    const fs::path dir = fs::path(c.output_dir) / "data";
    write_dataset(simulate(c), c, dir);
    std::cout << dir.string() << '\n';
    return kOk;
}

int cmd_reconstruct(const std::string& config_path, const std::string& data_dir, const std::string& method_text,
                    std::optional<std::uint64_t> seed) {
    const RunConfig c = load(config_path, seed);
    const Method method = parse_method(method_text);
    const Dataset data = read_dataset(data_dir);
    const MethodRun run = run_method(c, data, method);
    const fs::path dir = write_run(run, c, fs::path(c.output_dir) / "runs");
    if (run.run) {
        const auto& h = run.run->history;
        std::cerr << "outer iterations: " << h.size() << '\n';
    }
    std::cout << dir.string() << '\n';
    return kOk;
}

int cmd_evaluate(const std::string& config_path, const std::string& data_dir, const std::vector<std::string>& runs) {
    const RunConfig c = load_config(config_path);
    if (!fs::exists(fs::path(data_dir) / "truth.dsp"))
        throw DataError("no ground truth in " + data_dir);
    const Dataset data = read_dataset(data_dir);
    std::vector<MethodResult> methods;
    for (const auto& r : runs)
        methods.push_back(read_run(r));
    const fs::path out = fs::path(c.output_dir) / "report";
    export_report(methods, data.truth, data.labels, out);
    std::cout << out.string() << '\n';
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic SPECT reconstruction with edge-coupled regularisation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", code_version());

    std::string config_path, data_dir, method = "proposed";
    std::optional<std::uint64_t> seed;
    std::vector<std::string> runs;

    auto* sim = app.add_subcommand("simulate", "Generate phantom, ground truth and noisy sinograms");
    sim->add_option("config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sim->add_option("--seed", seed, "Override noise.seed");

    auto* rec = app.add_subcommand("reconstruct", "Reconstruct a simulated dataset");
    rec->add_option("config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    rec->add_option("--data", data_dir, "Dataset directory from simulate")->required();
    rec->add_option("--method", method, "proposed, fbp, ls or em")
        ->check(CLI::IsMember({"proposed", "fbp", "ls", "em"}));
    rec->add_option("--seed", seed, "Override noise.seed");

    auto* ev = app.add_subcommand("evaluate", "Compare run directories against the ground truth");
    ev->add_option("config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    ev->add_option("--data", data_dir, "Dataset directory holding truth.dsp")->required();
    ev->add_option("runs", runs, "Run directories")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    configure_threads_from_env();
    try {
        if (*sim)
            return cmd_simulate(config_path, seed);
        if (*rec)
            return cmd_reconstruct(config_path, data_dir, method, seed);
        return cmd_evaluate(config_path, data_dir, runs);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const DimensionError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const DomainError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
}
