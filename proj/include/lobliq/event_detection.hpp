#pragma once

#include <optional>
#include <span>
#include <vector>

#include "lobliq/ingestion.hpp"

namespace lobliq {

enum class VolatilityMeasure {
    mean_abs,  ///< mean absolute Δt log-return
    std_dev,   ///< standard deviation of Δt log-returns
};

/// Time-of-day volatility: one σ per bucket of window start times.
struct VolatilityProfile {
    Duration delta_t{0};
    Duration bucket_width{0};
    Duration session_length{0};
    VolatilityMeasure measure = VolatilityMeasure::mean_abs;
    std::vector<double> sigma;
    std::vector<std::size_t> sample_counts;
    /// True where the bucket had no samples and σ was borrowed from the nearest populated one.
    std::vector<bool> filled;

    [[nodiscard]] std::size_t bucket_of(Timestamp t) const;
    [[nodiscard]] double sigma_at(Timestamp t) const { return sigma[bucket_of(t)]; }
};

/// A fixed-length window flagged by both the absolute and the relative filter.
struct LargeEvent {
    std::size_t day = 0;
    Timestamp window_start{0};
    Duration delta_t{0};
    double log_return = 0.0;
    Sign sign = Sign::Positive;
    /// Index (within the day) of the operation opening the window.
    std::size_t trigger_index = 0;

    [[nodiscard]] Timestamp window_end() const { return window_start + delta_t; }
    bool operator==(const LargeEvent&) const = default;
};

struct DetectionParams {
    Duration delta_t = 15min;
    double abs_threshold = 0.005;
    double vol_multiplier = 3.0;
};

/// Log-midprice change over the Δt following one operation.
struct WindowReturn {
    std::size_t index = 0;
    Timestamp start{0};
    double log_return = 0.0;
};

/// For every operation with a defined midprice whose window [t, t+Δt] ends
/// inside the session, the log-return from the midprice after the operation
/// to the midprice after the last operation at or before t+Δt.
std::vector<WindowReturn> operation_window_returns(const ReplayLog& day, Duration delta_t, Timestamp session_end);

/// 5 minutes for windows of 15 minutes or more, 1 minute below that.
Duration default_bucket_width(Duration delta_t);

VolatilityProfile compute_volatility_profile(std::span<const ReplayLog> days, Duration delta_t, Duration bucket_width,
                                             const SessionConfig& session,
                                             VolatilityMeasure measure = VolatilityMeasure::mean_abs);

/// Per-operation scan for windows passing both filters. Overlapping triggers
/// (each within Δt of the previous one) form a cluster reported once, anchored
/// at its first trigger.
std::vector<LargeEvent> detect_large_events(std::span<const ReplayLog> days, const VolatilityProfile& profile,
                                            const DetectionParams& params, const SessionConfig& session);

/// Left-to-right scan keeping an event only when no previously kept event on
/// the same day started less than `min_gap` before it. Input must be sorted
/// by (day, window_start).
std::vector<LargeEvent> decluster(std::span<const LargeEvent> events, Duration min_gap);

}  // namespace lobliq
