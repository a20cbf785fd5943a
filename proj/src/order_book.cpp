#include "lobliq/order_book.hpp"

#include <algorithm>
#include <cstdlib>

namespace lobliq {

const char* to_string(Op op) {
    switch (op) {
        case Op::LO: return "LO";
        case Op::MO: return "MO";
        case Op::C: return "C";
    }
    return "?";
}

const char* to_string(Side s) { return s == Side::Buy ? "B" : "S"; }
const char* to_string(BookSide s) { return s == BookSide::Bid ? "bid" : "ask"; }
const char* to_string(Sign s) { return s == Sign::Positive ? "+" : "-"; }

const char* to_string(Errc code) {
    switch (code) {
        case Errc::rejected_message: return "rejected message";
        case Errc::off_grid: return "price off tick grid";
        case Errc::no_liquidity: return "no liquidity";
        case Errc::inconsistent_stream: return "inconsistent stream";
        case Errc::empty_side: return "empty side";
        case Errc::parse_error: return "parse error";
        case Errc::stream_order: return "stream order";
        case Errc::insufficient_sample: return "insufficient sample";
        case Errc::fit_error: return "fit error";
        case Errc::domain_error: return "domain error";
        case Errc::parameter_error: return "parameter error";
        case Errc::normalization_error: return "normalization error";
        case Errc::config_error: return "config error";
        case Errc::feasibility_error: return "feasibility error";
        case Errc::io_error: return "io error";
    }
    return "error";
}

// ---------------------------------------------------------------------------
// OrderBookState

std::optional<Tick> OrderBookState::best_bid() const {
    if (bids_.empty()) return std::nullopt;
    return bids_.begin()->first;
}

std::optional<Tick> OrderBookState::best_ask() const {
    if (asks_.empty()) return std::nullopt;
    return asks_.begin()->first;
}

std::optional<double> OrderBookState::midprice() const {
    if (bids_.empty() || asks_.empty()) return std::nullopt;
    return static_cast<double>(bids_.begin()->first + asks_.begin()->first) * 0.5 * tick_size_;
}

bool OrderBookState::empty(BookSide s) const {
    return s == BookSide::Bid ? bids_.empty() : asks_.empty();
}

std::size_t OrderBookState::level_count(BookSide s) const {
    return s == BookSide::Bid ? bids_.size() : asks_.size();
}

Volume OrderBookState::volume_at(BookSide s, Tick price) const {
    if (s == BookSide::Bid) {
        auto it = bids_.find(price);
        return it == bids_.end() ? 0 : it->second;
    }
    auto it = asks_.find(price);
    return it == asks_.end() ? 0 : it->second;
}

Volume OrderBookState::total_volume(BookSide s) const {
    Volume total = 0;
    for_each_level(s, [&](Tick, Volume v) {
        total += v;
        return true;
    });
    return total;
}

Volume OrderBookState::depth_volume(BookSide s, int depth) const {
    const auto top = best(s);
    if (!top || depth <= 0) return 0;
    Volume total = 0;
    for_each_level(s, [&](Tick p, Volume v) {
        if (std::abs(p - *top) >= depth) return false;
        total += v;
        return true;
    });
    return total;
}

std::vector<double> OrderBookState::side_profile(BookSide s, int depth) const {
    if (depth <= 0) throw Error(Errc::parameter_error, "profile depth must be positive");
    const auto top = best(s);
    if (!top) throw Error(Errc::empty_side, std::string("no volume on ") + to_string(s) + " side");
    std::vector<double> profile(static_cast<std::size_t>(depth), 0.0);
    for_each_level(s, [&](Tick p, Volume v) {
        const auto dist = std::abs(p - *top);
        if (dist >= depth) return false;
        profile[static_cast<std::size_t>(dist)] = static_cast<double>(v);
        return true;
    });
    return profile;
}

std::vector<std::pair<Tick, Volume>> OrderBookState::levels(BookSide s) const {
    std::vector<std::pair<Tick, Volume>> out;
    out.reserve(level_count(s));
    for_each_level(s, [&](Tick p, Volume v) {
        out.emplace_back(p, v);
        return true;
    });
    return out;
}

void OrderBookState::apply(const LevelChange& change) {
    auto update = [&](auto& levels) {
        auto [it, inserted] = levels.try_emplace(change.price, 0);
        it->second += change.change;
        if (it->second <= 0) levels.erase(it);
    };
    if (change.side == BookSide::Bid)
        update(bids_);
    else
        update(asks_);
}

// ---------------------------------------------------------------------------
// OrderBook

namespace {

void require(bool ok, Errc code, const char* what) {
    if (!ok) throw Error(code, what);
}

}  // namespace

BookDelta OrderBook::apply(const OrderEvent& ev) {
    switch (ev.op) {
        case Op::LO: return apply_limit_order(ev);
        case Op::MO: return apply_market_order(ev);
        case Op::C: return apply_cancellation(ev);
    }
    throw Error(Errc::rejected_message, "unknown operation");
}

BookDelta OrderBook::begin_delta() const {
    BookDelta d;
    d.midprice_before = state_.midprice();
    d.best_bid_before = state_.best_bid();
    d.best_ask_before = state_.best_ask();
    return d;
}

void OrderBook::finish_delta(BookDelta& d, Timestamp t) {
    d.midprice_after = state_.midprice();
    state_.last_update_ = t;
}

void OrderBook::change_level(BookSide side, Tick price, Volume change, BookDelta& d) {
    const LevelChange lc{side, price, change};
    state_.apply(lc);
    d.levels_touched.push_back(lc);
}

Volume OrderBook::execute(BookSide contra, Volume volume, std::optional<Tick> limit, BookDelta& d) {
    Volume remaining = volume;
    while (remaining > 0 && !state_.empty(contra)) {
        const Tick price = *state_.best(contra);
        if (limit) {
            const bool reachable = contra == BookSide::Ask ? price <= *limit : price >= *limit;
            if (!reachable) break;
        }
        const Volume take = std::min(remaining, state_.volume_at(contra, price));
        change_level(contra, price, -take, d);
        remaining -= take;
    }
    const Volume filled = volume - remaining;
    d.executed_volume += filled;
    return filled;
}

BookDelta OrderBook::apply_limit_order(const OrderEvent& ev) {
    require(ev.op == Op::LO, Errc::rejected_message, "not a limit order");
    require(ev.volume > 0, Errc::rejected_message, "non-positive volume");
    require(ev.price.has_value(), Errc::rejected_message, "limit order without price");
    require(*ev.price > 0, Errc::off_grid, "price must be a positive tick index");

    BookDelta d = begin_delta();
    const Tick price = *ev.price;
    const BookSide own = resting_side(ev.side);
    const Volume filled = execute(contra_side(ev.side), ev.volume, price, d);
    const Volume residual = ev.volume - filled;
    if (residual > 0) {
        change_level(own, price, residual, d);
        d.rested_volume = residual;
        if (!ev.order_ref.empty()) {
            auto [it, inserted] = refs_.try_emplace(ev.order_ref, RefEntry{own, price, 0});
            if (!inserted && (it->second.side != own || it->second.price != price))
                it->second = RefEntry{own, price, 0};
            it->second.remaining += residual;
        }
    }
    finish_delta(d, ev.timestamp);
    return d;
}

BookDelta OrderBook::apply_market_order(const OrderEvent& ev) {
    require(ev.op == Op::MO, Errc::rejected_message, "not a market order");
    require(ev.volume > 0, Errc::rejected_message, "non-positive volume");
    const BookSide contra = contra_side(ev.side);
    if (state_.empty(contra))
        throw Error(Errc::no_liquidity, std::string("market order against empty ") + to_string(contra) + " side");

    BookDelta d = begin_delta();
    execute(contra, ev.volume, std::nullopt, d);
    d.liquidity_exhausted = state_.empty(contra);
    finish_delta(d, ev.timestamp);
    return d;
}

BookDelta OrderBook::apply_cancellation(const OrderEvent& ev) {
    require(ev.op == Op::C, Errc::rejected_message, "not a cancellation");
    require(ev.volume > 0, Errc::rejected_message, "non-positive volume");

    // Resolve the target level: by reference when known, else by (side, price).
    BookSide side = resting_side(ev.side);
    std::optional<Tick> price = ev.price;
    RefEntry* entry = nullptr;
    if (!ev.order_ref.empty()) {
        if (auto it = refs_.find(ev.order_ref); it != refs_.end()) {
            entry = &it->second;
            side = entry->side;
            price = entry->price;
        }
    }

    const Volume available = price ? state_.volume_at(side, *price) : 0;
    Volume allowed = ev.volume;
    if (entry) allowed = std::min(allowed, entry->remaining);
    const Volume removable = std::min(allowed, available);
    const bool consistent = price.has_value() && removable == ev.volume;

    if (!price && ev.order_ref.empty())
        throw Error(Errc::rejected_message, "cancellation without price or order reference");
    if (!consistent && policy_ == CancelPolicy::strict)
        throw Error(Errc::inconsistent_stream, "cancellation of " + std::to_string(ev.volume) +
                                                   " exceeds resting volume " + std::to_string(available));

    BookDelta d = begin_delta();
    if (removable > 0) change_level(side, *price, -removable, d);
    d.cancelled_volume = removable;
    if (entry) {
        entry->remaining -= std::min(entry->remaining, ev.volume);
        if (entry->remaining <= 0) refs_.erase(ev.order_ref);
    }
    if (!consistent) {
        d.clamped = true;
        ++clamped_;
    }
    finish_delta(d, ev.timestamp);
    return d;
}

}  // namespace lobliq
