#pragma once

#include <optional>
#include <span>
#include <vector>

#include "lobliq/event_detection.hpp"
#include "lobliq/ingestion.hpp"

namespace lobliq {

/// Exponentially distance-weighted volume of one side, normalised:
///
///     L(δ) = (1 / norm) · Σ_{Δ=1..N} V(Δ) · exp(-Δ/δ)
///
/// where profile[Δ-1] = V(Δ) and Δ = 1 is the best price. Evaluated as a
/// nested (Horner) product in w = exp(-1/δ).
/// Throws Errc::normalization_error for norm <= 0 and Errc::parameter_error
/// for delta <= 0.
double exponential_liquidity(std::span<const double> profile, double delta, double norm);

struct SideLiquidity {
    double value = 0.0;
    bool empty_side = false;
};

/// Exponential liquidity of one side of a book; an empty side yields 0 with the flag set.
SideLiquidity side_liquidity(const OrderBookState& book, BookSide side, int depth, double delta, double norm);

/// (L_B - L_A) / (L_B + L_A); absent when both are zero (undefined imbalance).
/// Positive values favour upward moves.
std::optional<double> liquidity_imbalance(double l_bid, double l_ask);

struct LiquiditySnapshot {
    std::size_t day = 0;
    Timestamp timestamp{0};
    double delta = 5.0;
    int depth = 100;
    double l_ask = 0.0;
    double l_bid = 0.0;
    std::optional<double> l_imb;
    double norm = 1.0;
};

LiquiditySnapshot measure_liquidity(const OrderBookState& book, double delta, int depth, double norm);

enum class NormSampling {
    event_time,  ///< every snapshot weighs the same
    wall_clock,  ///< snapshots weighted by how long they stayed current
};

/// Average volume within `depth` ticks of the best. `pooled` averages both
/// sides together (an empty side counts as zero volume); `bid`/`ask` are the
/// per-side averages.
struct BookNorm {
    double pooled = 0.0;
    double bid = 0.0;
    double ask = 0.0;
    std::size_t samples = 0;
};

BookNorm compute_norm(std::span<const ReplayLog> days, int depth, NormSampling sampling = NormSampling::event_time);

enum class ProfileConditioning { unconditional, pre_positive_event, pre_negative_event };

struct ProfileAverage {
    BookSide side = BookSide::Ask;
    ProfileConditioning conditioning = ProfileConditioning::unconditional;
    std::vector<double> mean_volume;
    std::size_t sample_count = 0;
};

/// Mean side profile. Unconditional averages every snapshot where the side is
/// populated; conditioned variants average the snapshot each event's window
/// starts from (the book right after the triggering operation).
ProfileAverage average_profile(std::span<const ReplayLog> days, BookSide side, ProfileConditioning conditioning,
                               std::span<const LargeEvent> events, int depth);

/// A fixed-length window tiling the session, with the book profile at its
/// start and the log-midprice change across it.
struct BookWindow {
    std::size_t day = 0;
    Timestamp start{0};
    std::vector<double> ask_profile;  ///< empty when the side was empty
    std::vector<double> bid_profile;
    std::optional<double> log_return;
};

/// Windows [start, start+Δt) tiling each day from the analysis start. The
/// book is taken after the last operation at or before `start`; windows
/// with no preceding operation are skipped.
std::vector<BookWindow> tile_windows(std::span<const ReplayLog> days, Duration delta_t, int depth,
                                     const SessionConfig& session);

}  // namespace lobliq
