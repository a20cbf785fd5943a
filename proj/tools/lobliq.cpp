#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "lobliq/parallel.hpp"
#include "lobliq/pipeline.hpp"
#include "lobliq/synthgen.hpp"

namespace fs = std::filesystem;
using namespace lobliq;

namespace {

struct AnalysisFlags {
    std::vector<std::string> inputs;
    std::string preset;
    std::optional<double> delta_t;
    std::optional<double> abs_threshold;
    std::optional<double> vol_multiplier;
    std::optional<double> min_gap;
    std::optional<double> delta;
    std::optional<int> depth;
    std::optional<int> bins;
    std::string out;
    std::string config;
    unsigned threads = 1;
};

Duration seconds_to_duration(double s) {
    return Duration(static_cast<std::int64_t>(std::llround(s * 1e6)));
}

void add_analysis_flags(CLI::App* app, AnalysisFlags& f) {
    app->add_option("--input", f.inputs, "message files or directories of *.csv, one file per day");
    app->add_option("--preset", f.preset, "large_scale | short_scale | custom");
    app->add_option("--delta-t", f.delta_t, "event window length in seconds");
    app->add_option("--abs-threshold", f.abs_threshold, "absolute log-return threshold");
    app->add_option("--vol-multiplier", f.vol_multiplier, "multiple of the time-of-day volatility");
    app->add_option("--min-gap", f.min_gap, "declustering gap in seconds");
    app->add_option("--delta", f.delta, "liquidity decay length in ticks");
    app->add_option("--depth-n", f.depth, "levels per side used for liquidity");
    app->add_option("--bins", f.bins, "number of bins for binned curves");
    app->add_option("--out", f.out, "output directory")->required();
    app->add_option("--config", f.config, "JSON run manifest; flags override it");
    app->add_option("--threads", f.threads, "worker threads (output does not depend on it)");
}

RunManifest build_manifest(const AnalysisFlags& f) {
    RunManifest m;
    if (!f.config.empty()) {
        std::ifstream in(f.config);
        if (!in) throw Error(Errc::io_error, "cannot open " + f.config);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& ex) {
            throw Error(Errc::config_error, ex.what());
        }
        m = manifest_from_json(j);
    }
    if (!f.inputs.empty()) m.inputs.assign(f.inputs.begin(), f.inputs.end());
    m.inputs = expand_inputs(m.inputs);
    if (!f.preset.empty()) m.preset = preset_from_string(f.preset);
    if (f.delta_t) m.delta_t = seconds_to_duration(*f.delta_t);
    if (f.abs_threshold) m.abs_threshold = *f.abs_threshold;
    if (f.vol_multiplier) m.vol_multiplier = *f.vol_multiplier;
    if (f.min_gap) m.min_gap = seconds_to_duration(*f.min_gap);
    if (f.delta) m.delta = *f.delta;
    if (f.depth) m.depth = *f.depth;
    if (f.bins) m.bins = *f.bins;
    m.out = f.out;
    m.threads = f.threads;
    return m;
}

int run_analysis(const AnalysisFlags& f, unsigned stages) {
    RunManifest m;
    try {
        m = build_manifest(f);
    } catch (const std::exception& ex) {
        std::cerr << "usage: " << ex.what() << '\n';
        return static_cast<int>(Stage::usage);
    }
    try {
        const Bundle b = run_pipeline(m, stages);
        std::cerr << "wrote " << b.size() << " files to " << m.out.string() << '\n';
        return 0;
    } catch (const StageError& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return static_cast<int>(ex.stage());
    }
}

struct GenerateFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> days;
    std::string out;
    unsigned threads = 1;
};

int run_generate(const GenerateFlags& f) {
    GeneratorConfig cfg;
    try {
        if (!f.config.empty()) cfg = load_generator_config(f.config);
        if (f.seed) cfg.seed = *f.seed;
        if (f.days) cfg.days = *f.days;
        cfg.validate();
    } catch (const std::exception& ex) {
        std::cerr << "usage: " << ex.what() << '\n';
        return static_cast<int>(Stage::usage);
    }
    set_worker_threads(f.threads);
    std::vector<std::vector<OrderEvent>> days;
    try {
        days = generate(cfg);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return static_cast<int>(Stage::usage);
    }
    Bundle files;
    for (std::size_t d = 0; d < days.size(); ++d) {
        char name[32];
        std::snprintf(name, sizeof name, "day_%03zu.csv", d);
        files[name] = serialize_messages(days[d]);
    }
    nlohmann::json j;
    to_json(j, cfg);
    files["generator.json"] = j.dump(2) + "\n";
    try {
        write_bundle(files, f.out);
    } catch (const StageError& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return static_cast<int>(ex.stage());
    }
    std::cerr << "wrote " << days.size() << " days to " << f.out << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Order book reconstruction and liquidity analytics"};
    app.require_subcommand(1);

    GenerateFlags gen;
    auto* generate = app.add_subcommand("generate", "write synthetic message files");
    generate->add_option("--config", gen.config, "generator JSON config");
    generate->add_option("--seed", gen.seed, "root seed");
    generate->add_option("--days", gen.days, "number of days");
    generate->add_option("--out", gen.out, "output directory")->required();
    generate->add_option("--threads", gen.threads, "worker threads");

    struct Sub {
        const char* name;
        const char* help;
        unsigned stages;
    };
    const Sub subs[] = {
        {"detect", "large-event detection", stage_detect},
        {"flows", "relative flow curves and response fits", stage_detect | stage_flows},
        {"liquidity", "profiles and liquidity snapshots", stage_detect | stage_liquidity},
        {"fit", "delta scan, power-law fits and imbalance conditionals", stage_detect | stage_fit},
        {"run", "full pipeline", stage_all},
    };
    AnalysisFlags flags;
    std::vector<std::pair<CLI::App*, unsigned>> analysis;
    for (const auto& s : subs) {
        auto* sub = app.add_subcommand(s.name, s.help);
        add_analysis_flags(sub, flags);
        analysis.emplace_back(sub, s.stages);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(Stage::usage);
    }

    if (generate->parsed()) return run_generate(gen);
    for (const auto& [sub, stages] : analysis)
        if (sub->parsed()) return run_analysis(flags, stages);
    return static_cast<int>(Stage::usage);
}
