#include "lobliq/ingestion.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

namespace lobliq {

void SessionConfig::validate() const {
    if (open_skip < Duration::zero()) throw Error(Errc::config_error, "open_skip must be non-negative");
    if (session_open + open_skip >= session_close)
        throw Error(Errc::config_error, "session_open + open_skip must precede session_close");
    if (!(tick_size > 0.0)) throw Error(Errc::config_error, "tick_size must be positive");
}

Tick price_to_ticks(double price, double tick_size) {
    if (!(tick_size > 0.0)) throw Error(Errc::parameter_error, "tick_size must be positive");
    const double ticks = price / tick_size;
    const double nearest = std::round(ticks);
    if (std::abs(ticks - nearest) > 1e-9 * std::max(1.0, std::abs(ticks)))
        throw Error(Errc::off_grid, "price " + std::to_string(price) + " is not a multiple of the tick");
    return static_cast<Tick>(nearest);
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            return out;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
}

bool parse_int(std::string_view s, std::int64_t& out) {
    if (s.empty()) return false;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && ptr == end;
}

Tick parse_price(std::string_view s, std::size_t line) {
    std::int64_t ticks = 0;
    if (!parse_int(s, ticks)) {
        double value = 0.0;
        const auto* end = s.data() + s.size();
        auto [ptr, ec] = std::from_chars(s.data(), end, value);
        if (ec != std::errc() || ptr != end)
            throw ParseError(Errc::parse_error, line, "bad price_ticks '" + std::string(s) + "'");
        if (value != std::floor(value))
            throw ParseError(Errc::off_grid, line, "price_ticks '" + std::string(s) + "' is not on the tick grid");
        ticks = static_cast<std::int64_t>(value);
    }
    if (ticks <= 0) throw ParseError(Errc::off_grid, line, "price_ticks must be positive");
    return ticks;
}

OrderEvent parse_line(std::string_view text, std::size_t line) {
    const auto f = split(text);
    if (f.size() != 5 && f.size() != 6)
        throw ParseError(Errc::parse_error, line, "expected 6 fields, got " + std::to_string(f.size()));

    OrderEvent ev;
    std::int64_t ts = 0;
    if (!parse_int(f[0], ts)) throw ParseError(Errc::parse_error, line, "bad timestamp '" + std::string(f[0]) + "'");
    ev.timestamp = Timestamp{ts};

    if (f[1] == "LO")
        ev.op = Op::LO;
    else if (f[1] == "MO")
        ev.op = Op::MO;
    else if (f[1] == "C")
        ev.op = Op::C;
    else
        throw ParseError(Errc::parse_error, line, "unknown op '" + std::string(f[1]) + "'");

    if (f[2] == "B")
        ev.side = Side::Buy;
    else if (f[2] == "S")
        ev.side = Side::Sell;
    else
        throw ParseError(Errc::parse_error, line, "unknown side '" + std::string(f[2]) + "'");

    if (!f[3].empty()) {
        if (ev.op == Op::MO) throw ParseError(Errc::parse_error, line, "market order must not carry a price");
        ev.price = parse_price(f[3], line);
    }

    if (!parse_int(f[4], ev.volume)) throw ParseError(Errc::parse_error, line, "bad volume '" + std::string(f[4]) + "'");
    if (ev.volume <= 0) throw ParseError(Errc::rejected_message, line, "volume must be positive");

    if (f.size() == 6) ev.order_ref = std::string(f[5]);

    if (ev.op == Op::LO && !ev.price) throw ParseError(Errc::parse_error, line, "limit order without price");
    if (ev.op == Op::C && !ev.price && ev.order_ref.empty())
        throw ParseError(Errc::parse_error, line, "cancellation needs a price or an order_ref");
    return ev;
}

}  // namespace

std::vector<OrderEvent> parse_messages(std::istream& in, const SessionConfig& cfg, const ParseOptions& opts) {
    std::vector<OrderEvent> events;
    std::string raw;
    std::size_t line = 0;
    bool header_seen = false;
    Timestamp latest = Timestamp::min();

    while (std::getline(in, raw)) {
        ++line;
        const auto text = trim(raw);
        if (text.empty() || text.front() == '#') continue;
        if (!header_seen) {
            if (text != kMessageHeader)
                throw ParseError(Errc::parse_error, line, "missing header '" + std::string(kMessageHeader) + "'");
            header_seen = true;
            continue;
        }
        OrderEvent ev = parse_line(text, line);
        if (ev.timestamp < latest) {
            const bool tolerated = opts.ordering == OrderingMode::lenient && latest - ev.timestamp <= opts.reorder_tolerance;
            if (!tolerated)
                throw ParseError(Errc::stream_order, line,
                                 "timestamp " + std::to_string(ev.timestamp.count()) + " precedes " +
                                     std::to_string(latest.count()));
        }
        latest = std::max(latest, ev.timestamp);
        if (ev.timestamp < cfg.analysis_start()) continue;
        events.push_back(std::move(ev));
    }
    if (!header_seen) throw ParseError(Errc::parse_error, line == 0 ? 1 : line, "empty message file");

    if (opts.ordering == OrderingMode::lenient)
        std::stable_sort(events.begin(), events.end(),
                         [](const OrderEvent& a, const OrderEvent& b) { return a.timestamp < b.timestamp; });
    return events;
}

std::vector<OrderEvent> parse_messages(std::string_view text, const SessionConfig& cfg, const ParseOptions& opts) {
    std::istringstream in{std::string(text)};
    return parse_messages(in, cfg, opts);
}

std::vector<OrderEvent> read_message_file(const std::filesystem::path& path, const SessionConfig& cfg,
                                          const ParseOptions& opts) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
    return parse_messages(in, cfg, opts);
}

void write_messages(std::ostream& out, std::span<const OrderEvent> events) {
    out << kMessageHeader << '\n';
    for (const auto& ev : events) {
        out << ev.timestamp.count() << ',' << to_string(ev.op) << ',' << to_string(ev.side) << ',';
        if (ev.price) out << *ev.price;
        out << ',' << ev.volume << ',' << ev.order_ref << '\n';
    }
}

std::string serialize_messages(std::span<const OrderEvent> events) {
    std::ostringstream out;
    write_messages(out, events);
    return std::move(out).str();
}

// ---------------------------------------------------------------------------
// Replay

void ReplayLog::advance(OrderBookState& state, const ReplayFrame& frame) {
    for (const auto& lc : frame.delta.levels_touched) state.apply(lc);
    state.set_last_update(frame.event.timestamp);
}

OrderBookState ReplayLog::book_after(std::size_t i) const {
    if (i >= frames_.size()) throw Error(Errc::parameter_error, "frame index out of range");
    const std::size_t k = (i + 1) / stride_;
    OrderBookState state = k == 0 ? OrderBookState(tick_size_) : *checkpoints_[k - 1];
    for (std::size_t j = k * stride_; j <= i; ++j) advance(state, frames_[j]);
    return state;
}

OrderBookState ReplayLog::final_book() const {
    if (frames_.empty()) return OrderBookState(tick_size_);
    return book_after(frames_.size() - 1);
}

std::optional<std::size_t> ReplayLog::last_at_or_before(Timestamp t) const {
    auto it = std::upper_bound(frames_.begin(), frames_.end(), t,
                               [](Timestamp v, const ReplayFrame& f) { return v < f.event.timestamp; });
    if (it == frames_.begin()) return std::nullopt;
    return static_cast<std::size_t>(std::distance(frames_.begin(), it) - 1);
}

std::size_t ReplayLog::first_at_or_after(Timestamp t) const {
    auto it = std::lower_bound(frames_.begin(), frames_.end(), t,
                               [](const ReplayFrame& f, Timestamp v) { return f.event.timestamp < v; });
    return static_cast<std::size_t>(std::distance(frames_.begin(), it));
}

ReplayLog replay(std::span<const OrderEvent> events, const ReplayOptions& opts) {
    if (opts.checkpoint_stride == 0) throw Error(Errc::parameter_error, "checkpoint stride must be positive");
    ReplayLog log;
    log.tick_size_ = opts.tick_size;
    log.stride_ = opts.checkpoint_stride;
    log.frames_.reserve(events.size());

    OrderBook book(opts.tick_size, opts.cancel_policy);
    for (std::size_t i = 0; i < events.size(); ++i) {
        try {
            log.frames_.push_back(ReplayFrame{events[i], book.apply(events[i])});
        } catch (const Error& e) {
            throw ReplayError(e.code(), i, e.what());
        }
        if ((i + 1) % log.stride_ == 0)
            log.checkpoints_.push_back(std::make_shared<const OrderBookState>(book.state()));
    }
    log.clamped_ = book.clamped_count();
    return log;
}

}  // namespace lobliq
