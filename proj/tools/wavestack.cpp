#include "wavestack/config.hpp"
#include "wavestack/error.hpp"
#include "wavestack/pipeline.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wavestack;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> horizon;
    std::size_t repeats = 1;
    std::string run_dir;
};

RunConfig load(const Options& o, std::optional<std::uint64_t> seed)
{
    if (o.config.empty()) {
        throw ConfigError("--config is required");
    }
    std::optional<fs::path> out;
    if (o.out) {
        out = fs::path(*o.out);
    }
    return load_config(o.config, seed, out);
}

/// Mean, min and max of every numeric combined metric across repeated runs.
json summarize(const std::vector<json>& reports, const std::vector<std::uint64_t>& seeds)
{
    std::map<std::string, std::vector<double>> values;
    for (const auto& run : reports) {
        for (const auto& r : run) {
            const std::string key = r.at("task").get<std::string>() + "_h" +
                                    std::to_string(r.at("horizon").get<std::size_t>());
            for (const auto& [name, v] : r.at("metrics").items()) {
                if (v.is_number()) {
                    values[key + "." + name].push_back(v.get<double>());
                }
            }
        }
    }
    json metrics = json::object();
    for (const auto& [key, xs] : values) {
        double sum = 0.0;
        for (double x : xs) {
            sum += x;
        }
        const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
        metrics[key] = {{"mean", sum / static_cast<double>(xs.size())}, {"min", *lo}, {"max", *hi}, {"runs", xs.size()}};
    }
    return {{"seeds", seeds}, {"metrics", metrics}};
}

int cmd_run(const Options& o)
{
    const RunConfig base = load(o, o.seed);
    if (o.repeats <= 1) {
        std::cout << pipeline::run(base).string() << '\n';
        return 0;
    }
    std::vector<json> reports;
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < o.repeats; ++i) {
        const RunConfig cfg = load(o, base.seed + i);
        const auto dir = pipeline::run(cfg);
        std::cout << dir.string() << '\n';
        std::ifstream in(dir / "report.json");
        reports.push_back(json::parse(in));
        seeds.push_back(cfg.seed);
    }
    const json summary = summarize(reports, seeds);
    fs::create_directories(base.output);
    const auto path = base.output / ("repeats-" + base.hash() + ".json");
    std::ofstream(path) << summary.dump(2) << '\n';
    std::cout << path.string() << '\n';
    return 0;
}

int cmd_stage(const std::string& name, const Options& o)
{
    const RunConfig cfg = load(o, o.seed);
    const fs::path dir = cfg.run_dir();
    if (name == "features") {
        pipeline::stage_features(cfg, dir);
    } else if (name == "denoise") {
        pipeline::stage_denoise(cfg, dir);
    } else if (name == "select") {
        pipeline::stage_select(cfg, dir);
    } else if (name == "train") {
        pipeline::stage_train(cfg, dir);
    } else if (name == "evaluate") {
        pipeline::stage_evaluate(cfg, dir, o.horizon);
    } else if (name == "predict") {
        json out = json::array();
        for (const auto& f : pipeline::stage_predict(cfg, dir, o.horizon)) {
            json j{{"task", to_string(f.task)},
                   {"horizon", f.horizon},
                   {"origin", f.origin.to_string()},
                   {"kinds", f.kinds},
                   {"members", f.members},
                   {"combined", f.combined}};
            if (f.score) {
                j["score"] = *f.score;
            }
            out.push_back(j);
        }
        std::cout << out.dump(2) << '\n';
        return 0;
    }
    std::cout << dir.string() << '\n';
    return 0;
}

int cmd_report(const Options& o)
{
    fs::path dir;
    if (!o.run_dir.empty()) {
        dir = o.run_dir;
    } else if (!o.config.empty()) {
        dir = load(o, o.seed).run_dir();
    } else {
        throw ConfigError("report needs a run directory or --config");
    }
    pipeline::stage_report(dir);
    std::cout << dir.string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Wavelet-denoised ensemble forecaster for daily price series"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "Run config JSON")->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "Override the config seed");
        sub->add_option("--out", o.out, "Override the output directory");
    };
    auto* run = app.add_subcommand("run", "Run every stage into a fresh run directory");
    common(run);
    run->add_option("--repeats", o.repeats, "Run with seeds seed .. seed+N-1 and summarize")->check(CLI::PositiveNumber);

    const char* stages[][2] = {
        {"features", "Load, clean, filter outliers and expand indicators"},
        {"denoise", "Wavelet-denoise the feature frame"},
        {"select", "Rank and select features per task and horizon"},
        {"train", "Fit the ensembles"},
        {"evaluate", "Score the ensembles on the test partition"},
        {"predict", "Forecast from the final available window"},
    };
    std::vector<std::pair<std::string, CLI::App*>> stage_cmds;
    for (const auto& [name, help] : stages) {
        auto* sub = app.add_subcommand(name, help);
        common(sub);
        if (std::string(name) == "evaluate" || std::string(name) == "predict") {
            sub->add_option("--horizon", o.horizon, "Only this horizon");
        }
        stage_cmds.emplace_back(name, sub);
    }
    auto* report = app.add_subcommand("report", "Write tidy plot-data CSVs for a run directory");
    common(report);
    report->add_option("run_dir", o.run_dir, "Run directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) {
            return cmd_run(o);
        }
        if (report->parsed()) {
            return cmd_report(o);
        }
        for (const auto& [name, sub] : stage_cmds) {
            if (sub->parsed()) {
                return cmd_stage(name, o);
            }
        }
    } catch (const Error& e) {
        std::cerr << "wavestack: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "wavestack: " << e.what() << '\n';
        return 3;
    }
    return 2;
}
