#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "lobliq/ingestion.hpp"

namespace lobliq {

/// Poisson intensities (per second) of the operations touching one book side.
struct SideRates {
    double lo = 0.5;   ///< limit orders resting on this side
    double mo = 0.15;  ///< market orders executing against this side
    /// Cancellations per second while the side holds `reference_volume`
    /// shares; the intensity scales linearly with the resting volume.
    double cancel = 0.3;
};

enum class EpisodeKind { mo_flow_imbalance, depletion, planted_return_rule };

enum class RuleKind { zero, cubic_imbalance, power_law };

/// Target 30 s return as a function of the book at the window start.
///   zero:             r = 0
///   cubic_imbalance:  r = c · L_imb³ + N(0, noise_sd)
///   power_law:        |r| = K · L_side^-alpha · exp(N(0, noise_sd)), capped
///                     at max_return; the sign is drawn per window and the
///                     side is the ask for upward moves, the bid otherwise.
/// Liquidities use `delta`, `depth` and `norm` with the library's
/// exponential liquidity.
struct PlantedRule {
    RuleKind kind = RuleKind::zero;
    double c = 0.0;
    double K = 0.0;
    double alpha = 0.0;
    double noise_sd = 0.0;
    double max_return = 0.05;
    double delta = 5.0;
    int depth = 100;
    double norm = 1000.0;
    Duration window = 30s;
    /// Levels from the best re-drawn before every window so L varies.
    int shape_levels = 30;
    double shape_log_sd = 1.5;
    double shape_empty_prob = 0.3;
    /// Scale of the random bid/ask tilt applied when re-drawing levels.
    double shape_tilt = 3.0;
    /// Pull of the power-law sign draw back toward the opening midprice.
    double mean_reversion = 20.0;

    /// Expected return for a given imbalance / side liquidity (no noise).
    [[nodiscard]] double expected(double l_imb, double l_side) const;
};

struct Episode {
    EpisodeKind kind = EpisodeKind::mo_flow_imbalance;
    /// Day index, or every day when absent.
    std::optional<int> day;
    Timestamp start{0};
    Duration duration{0};
    /// Side under pressure: the ask for upward imbalance or an ask depletion.
    BookSide side = BookSide::Ask;
    double intensity = 1.0;
    PlantedRule rule;  ///< planted_return_rule only

    [[nodiscard]] bool active(Timestamp t) const { return t >= start && t < start + duration; }
};

struct GeneratorConfig {
    std::uint64_t seed = 1;
    int days = 1;
    SessionConfig session;
    Tick initial_mid = 5000;
    int initial_depth = 40;
    SideRates bid;
    SideRates ask;
    /// All rates are multiplied by 1 + A·cos(2π u), u in [0, 1] across the
    /// analysed part of the day (a U-shaped activity profile for A > 0).
    /// Relative flows are unaffected.
    double activity_amplitude = 0.0;
    /// LO distance d >= 1 from the opposite best: P(d) ∝ (1-p)^(d-1), d <= max_distance.
    double placement_p = 0.15;
    int max_distance = 100;
    /// Order sizes are max(1, round(lognormal(volume_log_mean, volume_log_sd))).
    double volume_log_mean = 4.6;
    double volume_log_sd = 0.6;
    double reference_volume = 2000.0;
    /// Each market order of volume v triggers a limit order of about gain·v
    /// at the side's best after an exponential delay.
    double response_gain = 0.6;
    Duration response_delay = 2s;
    /// Depletion episodes cut levels within this many ticks of the best.
    int depletion_levels = 10;
    std::vector<Episode> episodes;

    /// Throws Errc::config_error / Errc::feasibility_error.
    void validate() const;
};

/// One message stream per day, deterministic in (seed, day).
std::vector<std::vector<OrderEvent>> generate(const GeneratorConfig& cfg);
std::vector<OrderEvent> generate_day(const GeneratorConfig& cfg, int day);

/// Adds a session-wide planted_return_rule episode and generates.
std::vector<std::vector<OrderEvent>> plant_return_rule(const GeneratorConfig& cfg, const PlantedRule& rule);

/// Seed of one day's random stream.
std::uint64_t day_seed(std::uint64_t root, std::uint64_t day);

void to_json(nlohmann::json& j, const GeneratorConfig& cfg);
void from_json(const nlohmann::json& j, GeneratorConfig& cfg);
GeneratorConfig load_generator_config(const std::filesystem::path& path);

const char* to_string(EpisodeKind k);
const char* to_string(RuleKind k);

}  // namespace lobliq
