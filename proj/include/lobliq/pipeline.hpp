#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lobliq/event_detection.hpp"
#include "lobliq/flow_analysis.hpp"
#include "lobliq/ingestion.hpp"
#include "lobliq/liquidity.hpp"
#include "lobliq/stats.hpp"

namespace lobliq {

inline constexpr const char* kToolVersion = "0.1.0";

enum class Preset { large_scale, short_scale, custom };

const char* to_string(Preset p);
Preset preset_from_string(const std::string& s);

/// Pipeline stages; the numeric value is the process exit code on failure.
enum class Stage : int { usage = 1, ingestion = 2, detection = 3, flows = 4, liquidity = 5, fit = 6, output = 7 };

const char* to_string(Stage s);

class StageError : public std::runtime_error {
public:
    StageError(Stage stage, const std::string& what)
        : std::runtime_error(std::string(to_string(stage)) + ": " + what), stage_(stage) {}
    [[nodiscard]] Stage stage() const noexcept { return stage_; }

private:
    Stage stage_;
};

struct RunManifest {
    /// Message files, one trading day each, in day order.
    std::vector<std::filesystem::path> inputs;
    Preset preset = Preset::large_scale;
    std::optional<Duration> delta_t;
    std::optional<double> abs_threshold;
    std::optional<double> vol_multiplier;
    std::optional<Duration> min_gap;
    double delta = 5.0;
    int depth = 100;
    int bins = 20;
    std::filesystem::path out;
    /// Worker threads; never affects the output.
    unsigned threads = 1;

    SessionConfig session;
    OrderingMode ordering = OrderingMode::strict;
    CancelPolicy cancel_policy = CancelPolicy::clamp;
    VolatilityMeasure volatility_measure = VolatilityMeasure::mean_abs;
    NormSampling norm_sampling = NormSampling::event_time;
    bool per_side_norm = false;
    FitSpace fit_space = FitSpace::log_log;
    Duration flow_range = 1h;
    Duration flow_subinterval = 30s;
    bool flows_at_best_only = true;
    FlowAveraging flow_averaging = FlowAveraging::ratio;
    bool response_at_best_only = false;
    int response_bins = kResponseBins;
    std::size_t min_events = 1;
    std::size_t min_bin_count = kMinBinCount;
    std::vector<double> scan_deltas;  ///< empty means 1..20
};

/// Preset values with the manifest's overrides applied.
struct ResolvedParams {
    DetectionParams detection;
    Duration min_gap{0};
};

ResolvedParams resolve(const RunManifest& m);

/// Manifest as canonical JSON. Output location and thread count are left
/// out so they cannot change the bundle.
nlohmann::json manifest_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Hash of the canonical manifest and the bytes of every input file, as 16
/// hex digits.
std::string config_hash(const RunManifest& m);

/// Shortest decimal text that round-trips the double.
std::string format_number(double v);

enum StageMask : unsigned {
    stage_detect = 1u << 0,
    stage_flows = 1u << 1,
    stage_liquidity = 1u << 2,
    stage_fit = 1u << 3,
    stage_all = 0xfu,
};

/// Files of a report bundle, name -> content.
using Bundle = std::map<std::string, std::string>;

/// Runs the selected stages and returns the artifacts without writing them.
/// Throws StageError.
Bundle build_bundle(const RunManifest& m, unsigned stages = stage_all);

/// Writes each artifact atomically into m.out; on failure every artifact
/// already written is removed. Throws StageError(Stage::output).
void write_bundle(const Bundle& bundle, const std::filesystem::path& out);

/// build_bundle + write_bundle.
Bundle run_pipeline(const RunManifest& m, unsigned stages = stage_all);

/// Expands directories into their *.csv files (sorted by name).
std::vector<std::filesystem::path> expand_inputs(const std::vector<std::filesystem::path>& inputs);

}  // namespace lobliq
