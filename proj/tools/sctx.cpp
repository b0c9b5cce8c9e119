// Command-line front end: run the scenario matrix, summarize CSVs, serve a
// context store over TCP, or write the default scene config.

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <CLI11.hpp>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "sctx/experiment.hpp"
#include "sctx/scene.hpp"
#include "sctx/service.hpp"

namespace {

sctx::TcpServer* g_server = nullptr;

void on_signal(int) {
    // stop() joins threads; hand it to the main thread instead.
    if (g_server) std::_Exit(0);
}

void write_report(const sctx::Report& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream txt(dir / "report.txt");
    report.write_text(txt);
    std::ofstream csv(dir / "report.csv");
    report.write_csv(csv);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Shared spatial-context simulation: scenarios, reports and the share service"};
    app.require_subcommand(1);

    std::string config_path, out, endpoint_text = "127.0.0.1:7878";
    std::vector<std::string> scenarios, csvs;
    std::uint64_t seed = 0;

    auto* run = app.add_subcommand("run", "Run the scenario matrix and write CSVs and images");
    run->add_option("--config", config_path, "Experiment config (INI, [experiment] section)")
        ->check(CLI::ExistingFile);
    run->add_option("--scenario", scenarios, "Scenario(s) to run; overrides the config")
        ->delimiter(',');
    auto* seed_opt = run->add_option("--seed", seed, "Experiment seed; overrides the config");
    auto* run_out = run->add_option("--out", out, "Output directory; overrides the config");

    auto* report = app.add_subcommand("report", "Summarize metric CSVs against the acceptance thresholds");
    report->add_option("csv", csvs, "Metric CSVs")->required()->check(CLI::ExistingFile);
    report->add_option("--out", out, "Also write report.txt and report.csv into this directory");

    auto* serve = app.add_subcommand("serve", "Serve a fresh context store over TCP");
    serve->add_option("--endpoint", endpoint_text, "host:port to listen on")
        ->envname(sctx::kEndpointEnv)
        ->capture_default_str();
    serve->add_option("--config", config_path, "Experiment config supplying the voxel size")
        ->check(CLI::ExistingFile);

    auto* gen = app.add_subcommand("gen-scene", "Write the default scene config");
    gen->add_option("--out", out, "Destination file (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            sctx::ExperimentConfig config =
                config_path.empty() ? sctx::ExperimentConfig{} : sctx::ExperimentConfig::load(config_path);
            if (!scenarios.empty()) {
                config.scenarios.clear();
                for (const auto& s : scenarios) config.scenarios.push_back(sctx::parse_scenario(s));
            }
            if (*seed_opt) config.seed = seed;
            if (*run_out) config.out_dir = out;
            config.validate();

            const auto result = sctx::run_experiment(config);
            std::vector<std::string> paths;
            for (const auto& r : result.runs) {
                paths.push_back(r.csv_path);
                fmt::print("wrote {}\n", r.csv_path);
            }
            if (paths.size() >= 2) {
                const auto summary = sctx::compare_report(paths);
                summary.write_text(std::cout);
                write_report(summary, config.out_dir);
            }
        } else if (*report) {
            const auto summary = sctx::compare_report(csvs);
            summary.write_text(std::cout);
            if (!out.empty()) write_report(summary, out);
        } else if (*serve) {
            sctx::StoreOptions options;
            if (!config_path.empty())
                options.voxel_size = sctx::ExperimentConfig::load(config_path).voxel_size;
            sctx::ContextStore store(options);
            sctx::TcpServer server(store, sctx::Endpoint::parse(endpoint_text));
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            fmt::print("serving on {}:{}\n", sctx::Endpoint::parse(endpoint_text).host, server.port());
            std::fflush(stdout);
            server.wait();
        } else if (*gen) {
            if (out.empty()) {
                sctx::write_scene(std::cout, sctx::SceneSpec::default_scene());
            } else {
                std::ofstream file(out);
                if (!file) throw sctx::Error("cannot write " + out);
                sctx::write_scene(file, sctx::SceneSpec::default_scene());
            }
        }
    } catch (const sctx::Error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
