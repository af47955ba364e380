#include "lab/errors.hpp"
#include "lab/harness.hpp"
#include "lab/jld.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace lab;
using nlohmann::json;

namespace {

constexpr int kPass = 0, kFail = 1, kUsage = 2;

json read_json(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw ConfigError("cannot open " + p.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(p.string() + ": " + e.what());
    }
}

int run(const std::string& config_path, const std::string& out, unsigned jobs) {
    ExperimentConfig cfg = ExperimentConfig::load(config_path);
    if (!out.empty()) cfg.out_dir = out;
    const ExperimentReport rep = run_experiment(cfg, jobs);
    for (const auto& c : rep.checks)
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " " << c.value << " " << c.op << " " << c.limit << "\n";
    std::cout << rep.experiment << " " << (rep.passed() ? "PASS" : "FAIL") << " config " << rep.config_hash;
    if (!cfg.out_dir.empty()) std::cout << " -> " << cfg.out_dir;
    std::cout << "\n";
    return rep.passed() ? kPass : kFail;
}

int golden_check(std::string report, const std::string& golden) {
    if (std::filesystem::is_directory(report)) report = (std::filesystem::path(report) / "report.json").string();
    const GoldenVerdict v = compare_golden(read_json(report), golden);
    std::cout << v.summary();
    return v.pass ? kPass : kFail;
}

int rasterize(const std::string& scene_path, const std::string& out) {
    const Region r = make_region(read_json(scene_path));
    if (out.empty()) {
        std::cout << r.to_pbm();
        return kPass;
    }
    std::ofstream(out + ".pbm", std::ios::binary) << r.to_pbm();
    std::ofstream(out + ".json", std::ios::binary) << r.to_json().dump(2) << "\n";
    std::cout << r.count() << " cells -> " << out << ".pbm\n";
    return kPass;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lab: experiments, golden checks and scene rasters"};
    app.require_subcommand(1);

    std::string config, out;
    unsigned jobs = 0;
    auto* run_cmd = app.add_subcommand("run", "run an experiment config and write its report");
    run_cmd->add_option("config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--out", out, "output directory");
    run_cmd->add_option("--jobs", jobs, "worker threads (0 = all cores)");

    std::string report, golden;
    auto* golden_cmd = app.add_subcommand("golden", "golden-file regression");
    golden_cmd->require_subcommand(1);
    auto* check_cmd = golden_cmd->add_subcommand("check", "compare a report with a golden file");
    check_cmd->add_option("report", report, "report.json or its directory")->required();
    check_cmd->add_option("golden", golden, "golden JSON")->required();

    std::string scene, prefix;
    auto* scene_cmd = app.add_subcommand("scene", "scene utilities");
    scene_cmd->require_subcommand(1);
    auto* raster_cmd = scene_cmd->add_subcommand("rasterize", "rasterize a scene file to a bitmap");
    raster_cmd->add_option("scene", scene, "scene JSON")->required()->check(CLI::ExistingFile);
    raster_cmd->add_option("--out", prefix, "write PREFIX.pbm and PREFIX.json instead of printing");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kPass : kUsage;
    }

    try {
        if (*run_cmd) return run(config, out, jobs);
        if (*check_cmd) return golden_check(report, golden);
        if (*raster_cmd) return rasterize(scene, prefix);
    } catch (const GoldenMissing& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kUsage;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kFail;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}
