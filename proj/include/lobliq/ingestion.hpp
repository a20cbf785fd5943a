#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lobliq/order_book.hpp"

namespace lobliq {

using namespace std::chrono_literals;

/// Trading-session layout. Message timestamps count microseconds from
/// `session_open`; the analysable part of a day starts after `open_skip`.
struct SessionConfig {
    Duration session_open = 8h;
    Duration session_close = 16h + 30min;
    Duration open_skip = 30min;
    double tick_size = 0.01;

    [[nodiscard]] Duration length() const { return session_close - session_open; }
    [[nodiscard]] Timestamp analysis_start() const { return open_skip; }
    [[nodiscard]] Timestamp analysis_end() const { return length(); }

    /// Throws Errc::config_error when the layout is inconsistent.
    void validate() const;
};

enum class OrderingMode {
    strict,   ///< any timestamp regression is an error
    lenient,  ///< regressions within `reorder_tolerance` are stably re-sorted
};

struct ParseOptions {
    OrderingMode ordering = OrderingMode::strict;
    Duration reorder_tolerance = 1s;
};

inline constexpr std::string_view kMessageHeader = "timestamp_us,op,side,price_ticks,volume,order_ref";

/// Parses the message CSV. Events before the session filter are dropped;
/// malformed lines raise ParseError carrying the 1-based line number.
std::vector<OrderEvent> parse_messages(std::istream& in, const SessionConfig& cfg, const ParseOptions& opts = {});
std::vector<OrderEvent> parse_messages(std::string_view text, const SessionConfig& cfg, const ParseOptions& opts = {});
std::vector<OrderEvent> read_message_file(const std::filesystem::path& path, const SessionConfig& cfg,
                                          const ParseOptions& opts = {});

/// Canonical form: header, one event per line, '\n' endings, no comments.
void write_messages(std::ostream& out, std::span<const OrderEvent> events);
std::string serialize_messages(std::span<const OrderEvent> events);

/// Converts a price in currency units to ticks; throws Errc::off_grid when
/// the price is not a multiple of the tick size.
Tick price_to_ticks(double price, double tick_size);

/// One replayed operation and its effect on the book.
struct ReplayFrame {
    OrderEvent event;
    BookDelta delta;

    [[nodiscard]] Timestamp timestamp() const { return event.timestamp; }
    [[nodiscard]] std::optional<double> midprice() const { return delta.midprice_after; }
};

struct ReplayOptions {
    double tick_size = 0.01;
    CancelPolicy cancel_policy = CancelPolicy::clamp;
    /// Frames between materialised checkpoints.
    std::size_t checkpoint_stride = 1024;
};

/// Immutable result of replaying one trading day.
///
/// Book states are not stored per frame. Full states are checkpointed every
/// `checkpoint_stride` frames and any intermediate state is rebuilt by
/// applying the recorded deltas, so `book_after(i)` costs at most one stride
/// of level updates. The log is safe to share across threads once built.
class ReplayLog {
public:
    ReplayLog() = default;

    [[nodiscard]] std::span<const ReplayFrame> frames() const { return frames_; }
    [[nodiscard]] std::size_t size() const { return frames_.size(); }
    [[nodiscard]] bool empty() const { return frames_.empty(); }
    [[nodiscard]] const ReplayFrame& operator[](std::size_t i) const { return frames_[i]; }
    [[nodiscard]] double tick_size() const { return tick_size_; }
    [[nodiscard]] std::size_t clamped_cancellations() const { return clamped_; }

    /// Book state after frame i.
    [[nodiscard]] OrderBookState book_after(std::size_t i) const;
    [[nodiscard]] OrderBookState final_book() const;

    /// Index of the last frame with timestamp <= t.
    [[nodiscard]] std::optional<std::size_t> last_at_or_before(Timestamp t) const;
    /// Index of the first frame with timestamp >= t (size() when none).
    [[nodiscard]] std::size_t first_at_or_after(Timestamp t) const;

    /// Walks every frame in order with the book state after it:
    /// f(index, frame, state).
    template <class F>
    void sweep(F&& f) const {
        OrderBookState state(tick_size_);
        for (std::size_t i = 0; i < frames_.size(); ++i) {
            advance(state, frames_[i]);
            f(i, frames_[i], static_cast<const OrderBookState&>(state));
        }
    }

    /// Like sweep() but only calls f at the requested (ascending) indices.
    template <class F>
    void visit_states(std::span<const std::size_t> indices, F&& f) const {
        OrderBookState state(tick_size_);
        std::size_t next = 0;
        for (std::size_t k = 0; k < indices.size(); ++k) {
            const std::size_t target = indices[k];
            if (target < next) {
                f(k, static_cast<const OrderBookState&>(state));
                continue;
            }
            while (next <= target) advance(state, frames_[next++]);
            f(k, static_cast<const OrderBookState&>(state));
        }
    }

    static void advance(OrderBookState& state, const ReplayFrame& frame);

private:
    friend ReplayLog replay(std::span<const OrderEvent>, const ReplayOptions&);

    double tick_size_ = 0.01;
    std::size_t stride_ = 1024;
    std::size_t clamped_ = 0;
    std::vector<ReplayFrame> frames_;
    // checkpoints_[k] is the state after frame (k + 1) * stride_ - 1.
    std::vector<std::shared_ptr<const OrderBookState>> checkpoints_;
};

/// Replays one day from an empty book. Book errors are rethrown as
/// ReplayError tagged with the offending event index.
ReplayLog replay(std::span<const OrderEvent> events, const ReplayOptions& opts = {});

}  // namespace lobliq
