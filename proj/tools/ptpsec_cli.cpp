// ptpsec: run attack scenarios, list the bundled ones, benchmark signatures.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ptpsec/scenario.hpp"

#ifndef PTPSEC_SCENARIO_DIR
#define PTPSEC_SCENARIO_DIR "scenarios"
#endif

namespace fs = std::filesystem;

namespace {

fs::path scenario_dir() {
    if (const char* env = std::getenv("PTPSEC_SCENARIOS")) return env;
    return PTPSEC_SCENARIO_DIR;
}

// Accepts a path or the name of a bundled scenario.
fs::path resolve(const std::string& config) {
    if (fs::exists(config)) return config;
    const auto bundled = scenario_dir() / (config + ".yaml");
    if (fs::exists(bundled)) return bundled;
    return config;
}

int run_command(const std::string& config, std::optional<std::uint64_t> seed, const fs::path& out) {
    ptpsec::Scenario sc;
    try {
        sc = ptpsec::load_scenario(resolve(config));
    } catch (const ptpsec::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }
    const std::uint64_t s = seed.value_or(sc.seed);
    try {
        const auto log = ptpsec::Simulator(sc).run(sc.horizon, s);
        const auto files = ptpsec::write_outputs(out, sc, s, log);
        ptpsec::write_summary(std::cout, sc, s, log);
        std::cout << "wrote " << files.offsets.string() << ", " << files.verdicts.string() << ", "
                  << files.summary.string() << '\n';
    } catch (const ptpsec::CapabilityViolation& e) {
        std::cerr << "capability violation: " << e.what() << '\n';
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}

int list_command() {
    std::vector<std::string> names;
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(scenario_dir(), ec)) {
        if (e.path().extension() == ".yaml") names.push_back(e.path().stem().string());
    }
    if (ec) {
        std::cerr << "cannot read scenario directory " << scenario_dir().string() << '\n';
        return 2;
    }
    std::sort(names.begin(), names.end());
    for (const auto& n : names) std::cout << n << '\n';
    return 0;
}

int bench_command(std::size_t iters) {
    const auto b = ptpsec::benchmark_crypto(iters);
    std::cout << std::fixed << std::setprecision(4) << "iterations: " << b.iterations << '\n'
              << "sign_median_ms: " << static_cast<double>(b.signMedianNs) / 1e6 << '\n'
              << "verify_median_ms: " << static_cast<double>(b.verifyMedianNs) / 1e6 << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PTP security scenario runner"};
    app.require_subcommand(1);

    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    auto* run = app.add_subcommand("run", "run a scenario file or bundled scenario name");
    run->add_option("config", config, "scenario YAML file")->required();
    run->add_option("--seed", seed, "override the scenario seed");
    run->add_option("--out", out, "output directory");

    app.add_subcommand("list", "list bundled scenarios");

    std::size_t iters = 1000;
    auto* bench = app.add_subcommand("bench", "median Ed25519 sign/verify cost");
    bench->add_option("--iters", iters, "iterations (>= 100)")->check(CLI::Range(100, 10'000'000));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    if (*run) return run_command(config, seed, out);
    if (app.got_subcommand("list")) return list_command();
    return bench_command(iters);
}
