#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lobliq/event_detection.hpp"
#include "lobliq/ingestion.hpp"
#include "lobliq/stats.hpp"

namespace lobliq {

/// Volumes one operation contributes to one book side.
struct SideFlow {
    Volume lo = 0;       ///< volume left resting on the side
    Volume lo_best = 0;  ///< resting volume placed at or inside the side's previous best
    Volume mo = 0;       ///< volume executed against the side (MOs and crossing LOs)
    Volume c = 0;        ///< cancelled volume
    Volume c_best = 0;   ///< cancelled volume at the side's previous best
};

struct FrameFlow {
    SideFlow bid;
    SideFlow ask;

    [[nodiscard]] const SideFlow& side(BookSide s) const { return s == BookSide::Bid ? bid : ask; }
    [[nodiscard]] SideFlow& side(BookSide s) { return s == BookSide::Bid ? bid : ask; }
};

/// Splits a replayed operation into per-side LO / MO / C volumes. The crossing
/// part of a limit order counts as market-order volume. A resting LO counts as
/// placed at the best when its price is at or better than the side's best
/// before the operation (or the side was empty); a cancellation when its price
/// equals that best.
FrameFlow classify_frame(const ReplayFrame& frame);

/// Q_LO, Q_MO, Q_C summed over an interval on one side.
struct FlowRecord {
    Timestamp start{0};
    Volume lo = 0;
    Volume mo = 0;
    Volume c = 0;

    [[nodiscard]] Volume total() const { return lo + mo + c; }
};

/// Ratios r_LO, r_MO, r_C; absent when the record has no volume.
std::optional<std::array<double, 3>> relative_flows(const FlowRecord& r);

/// Prefix sums of classified flows per day, for O(log n) interval totals.
class FlowIndex {
public:
    FlowIndex() = default;
    explicit FlowIndex(std::span<const ReplayLog> days);

    /// Totals over operations with timestamp in [from, to).
    [[nodiscard]] FlowRecord totals(std::size_t day, BookSide side, bool at_best, Timestamp from, Timestamp to) const;
    [[nodiscard]] std::size_t days() const { return days_.size(); }

private:
    struct Day {
        std::vector<Timestamp> ts;
        // prefix[i] holds sums over frames [0, i): bid lo, lo_best, mo, c, c_best, then ask.
        std::vector<std::array<Volume, 10>> prefix;
    };
    std::vector<Day> days_;
};

enum class FlowAveraging {
    ratio,   ///< mean over events of per-subinterval ratios
    pooled,  ///< ratio of volumes pooled over events
};

struct FlowCurveParams {
    Duration range = 1h;
    Duration subinterval = 30s;
    bool at_best_only = true;
    FlowAveraging averaging = FlowAveraging::ratio;
    std::size_t min_events = 1;
};

struct FlowCurve {
    BookSide side = BookSide::Ask;
    Sign event_sign = Sign::Positive;
    bool at_best_only = true;
    FlowAveraging averaging = FlowAveraging::ratio;
    /// Subinterval midpoints in seconds relative to the event end, ascending.
    std::vector<double> offsets;
    std::vector<double> r_lo, r_mo, r_c;
    std::vector<double> se_lo, se_mo, se_c;
    /// Events contributing at each offset.
    std::vector<std::size_t> counts;
    double baseline_lo = 0.0, baseline_mo = 0.0, baseline_c = 0.0;
    std::size_t n_events = 0;
    /// per_event[e][k]: ratios of event e at offset k (absent if no volume).
    std::vector<std::vector<std::optional<std::array<double, 3>>>> per_event;
};

/// Relative flows around events of one sign on one side, over `range` before
/// each event's end. Subintervals starting before the analysis start are
/// treated as missing. Baselines tile every day's analysis period with the
/// same subinterval and averaging.
FlowCurve relative_flow_curve(const FlowIndex& index, std::span<const LargeEvent> events, BookSide side,
                              Sign event_sign, const SessionConfig& session, const FlowCurveParams& params = {});

/// Mean ratios over consecutive subintervals tiling [from, to) of each day.
std::array<double, 3> baseline_flows(const FlowIndex& index, BookSide side, const SessionConfig& session,
                                     const FlowCurveParams& params);

enum class ResponseCondition { all, positive_events, negative_events };

/// (Q_MO, Q_LO) pairs over windows: x = market-order volume hitting `side`,
/// y = limit-order volume placed on `side`.
std::vector<Point> response_points(const FlowIndex& index, BookSide side, ResponseCondition condition,
                                   std::span<const LargeEvent> events, Duration delta_t, const SessionConfig& session,
                                   bool at_best_only = false);

struct ResponseFit {
    BookSide side = BookSide::Ask;
    ResponseCondition condition = ResponseCondition::all;
    LinearFit fit;  ///< Q_LO = a Q_MO + b: slope = a, intercept = b
    ConditionalCurve binned;
};

inline constexpr int kResponseBins = 20;

/// Equal-count bins by x; centres are the member means of x.
ConditionalCurve equal_count_binning(std::span<const Point> points, int n_bins);

ResponseFit response_fit(std::span<const Point> points, BookSide side, ResponseCondition condition,
                         int n_bins = kResponseBins);

const char* to_string(ResponseCondition c);

}  // namespace lobliq
