#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lobliq/types.hpp"

namespace lobliq {

/// One order message. `price` is absent for market orders; an empty
/// `order_ref` means the message carries no identifier.
struct OrderEvent {
    Op op = Op::LO;
    Side side = Side::Buy;
    std::optional<Tick> price;
    Volume volume = 0;
    Timestamp timestamp{0};
    std::string order_ref;

    bool operator==(const OrderEvent&) const = default;
};

/// Signed volume change at one absolute price level.
struct LevelChange {
    BookSide side = BookSide::Bid;
    Tick price = 0;
    Volume change = 0;

    bool operator==(const LevelChange&) const = default;
};

/// What a single operation did to the book.
///
/// `executed_volume` is the effective market-order volume: a market order's
/// fills plus the crossing part of an aggressive limit order. `levels_touched`
/// lists every level change in application order, so replaying the deltas of a
/// stream from an empty book reproduces every intermediate state.
struct BookDelta {
    std::optional<double> midprice_before;
    std::optional<double> midprice_after;
    std::optional<Tick> best_bid_before;
    std::optional<Tick> best_ask_before;
    Volume executed_volume = 0;
    Volume rested_volume = 0;
    Volume cancelled_volume = 0;
    std::vector<LevelChange> levels_touched;
    bool liquidity_exhausted = false;
    bool clamped = false;

    [[nodiscard]] std::optional<Tick> best_before(BookSide s) const {
        return s == BookSide::Bid ? best_bid_before : best_ask_before;
    }
};

/// Aggregate volume per tick-indexed price level on both sides.
class OrderBookState {
public:
    using BidLevels = std::map<Tick, Volume, std::greater<>>;
    using AskLevels = std::map<Tick, Volume>;

    explicit OrderBookState(double tick_size = 0.01) : tick_size_(tick_size) {}

    [[nodiscard]] double tick_size() const noexcept { return tick_size_; }
    [[nodiscard]] Timestamp last_update() const noexcept { return last_update_; }

    [[nodiscard]] std::optional<Tick> best_bid() const;
    [[nodiscard]] std::optional<Tick> best_ask() const;
    [[nodiscard]] std::optional<Tick> best(BookSide s) const {
        return s == BookSide::Bid ? best_bid() : best_ask();
    }

    /// Mean of the bests in price units; absent unless both sides are populated.
    [[nodiscard]] std::optional<double> midprice() const;

    [[nodiscard]] bool empty(BookSide s) const;
    [[nodiscard]] std::size_t level_count(BookSide s) const;
    [[nodiscard]] Volume volume_at(BookSide s, Tick price) const;
    [[nodiscard]] Volume total_volume(BookSide s) const;

    /// Total volume within `depth` ticks of the side's best (distances 0..depth-1).
    [[nodiscard]] Volume depth_volume(BookSide s, int depth) const;

    /// Volume at tick distance Δ-1 from the side's best, Δ = 1..depth.
    /// Throws Errc::empty_side when the side holds no volume.
    [[nodiscard]] std::vector<double> side_profile(BookSide s, int depth) const;

    /// Levels from the best outward as (price, volume).
    [[nodiscard]] std::vector<std::pair<Tick, Volume>> levels(BookSide s) const;

    /// Calls f(price, volume) from the best outward until it returns false.
    template <class F>
    void for_each_level(BookSide s, F&& f) const {
        if (s == BookSide::Bid) {
            for (const auto& [p, v] : bids_)
                if (!f(p, v)) return;
        } else {
            for (const auto& [p, v] : asks_)
                if (!f(p, v)) return;
        }
    }

    /// Adds a signed change to a level; levels that reach zero are erased.
    void apply(const LevelChange& change);
    void set_last_update(Timestamp t) noexcept { last_update_ = t; }

    bool operator==(const OrderBookState&) const = default;

private:
    friend class OrderBook;

    double tick_size_;
    Timestamp last_update_{0};
    BidLevels bids_;
    AskLevels asks_;
};

/// Behaviour when a cancellation targets volume the book does not hold.
enum class CancelPolicy {
    clamp,   ///< remove what exists, flag the delta
    strict,  ///< throw Errc::inconsistent_stream
};

/// Single-writer book engine applying LO / MO / C messages.
class OrderBook {
public:
    explicit OrderBook(double tick_size = 0.01, CancelPolicy policy = CancelPolicy::clamp)
        : state_(tick_size), policy_(policy) {}

    /// Dispatches on ev.op.
    BookDelta apply(const OrderEvent& ev);

    BookDelta apply_limit_order(const OrderEvent& ev);
    BookDelta apply_market_order(const OrderEvent& ev);
    BookDelta apply_cancellation(const OrderEvent& ev);

    [[nodiscard]] const OrderBookState& state() const noexcept { return state_; }
    [[nodiscard]] CancelPolicy policy() const noexcept { return policy_; }
    [[nodiscard]] std::size_t clamped_count() const noexcept { return clamped_; }

private:
    struct RefEntry {
        BookSide side;
        Tick price;
        Volume remaining;
    };

    BookDelta begin_delta() const;
    void finish_delta(BookDelta& d, Timestamp t);
    Volume execute(BookSide contra, Volume volume, std::optional<Tick> limit, BookDelta& d);
    void change_level(BookSide side, Tick price, Volume change, BookDelta& d);

    OrderBookState state_;
    CancelPolicy policy_;
    std::unordered_map<std::string, RefEntry> refs_;
    std::size_t clamped_ = 0;
};

}  // namespace lobliq
