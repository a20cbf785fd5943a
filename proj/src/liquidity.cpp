#include "lobliq/liquidity.hpp"

#include <algorithm>
#include <cmath>

#include "lobliq/parallel.hpp"

namespace lobliq {

double exponential_liquidity(std::span<const double> profile, double delta, double norm) {
    if (!(norm > 0.0)) throw Error(Errc::normalization_error, "liquidity norm must be positive");
    if (!(delta > 0.0)) throw Error(Errc::parameter_error, "characteristic distance must be positive");
    const double w = std::exp(-1.0 / delta);
    double acc = 0.0;
    for (auto it = profile.rbegin(); it != profile.rend(); ++it) acc = (acc + *it) * w;
    return acc / norm;
}

SideLiquidity side_liquidity(const OrderBookState& book, BookSide side, int depth, double delta, double norm) {
    if (book.empty(side)) {
        if (!(norm > 0.0)) throw Error(Errc::normalization_error, "liquidity norm must be positive");
        return {0.0, true};
    }
    const auto profile = book.side_profile(side, depth);
    return {exponential_liquidity(profile, delta, norm), false};
}

std::optional<double> liquidity_imbalance(double l_bid, double l_ask) {
    if (l_bid < 0.0 || l_ask < 0.0) throw Error(Errc::domain_error, "liquidity must be non-negative");
    const double total = l_bid + l_ask;
    if (total == 0.0) return std::nullopt;
    return (l_bid - l_ask) / total;
}

LiquiditySnapshot measure_liquidity(const OrderBookState& book, double delta, int depth, double norm) {
    LiquiditySnapshot s;
    s.timestamp = book.last_update();
    s.delta = delta;
    s.depth = depth;
    s.norm = norm;
    s.l_ask = side_liquidity(book, BookSide::Ask, depth, delta, norm).value;
    s.l_bid = side_liquidity(book, BookSide::Bid, depth, delta, norm).value;
    s.l_imb = liquidity_imbalance(s.l_bid, s.l_ask);
    return s;
}

BookNorm compute_norm(std::span<const ReplayLog> days, int depth, NormSampling sampling) {
    if (depth <= 0) throw Error(Errc::parameter_error, "depth must be positive");
    struct Partial {
        double bid = 0.0, ask = 0.0, weight = 0.0;
        std::size_t samples = 0;
    };
    std::vector<Partial> partial(days.size());
    parallel_for(days.size(), [&](std::size_t d) {
        auto& p = partial[d];
        const auto frames = days[d].frames();
        days[d].sweep([&](std::size_t i, const ReplayFrame& f, const OrderBookState& book) {
            double w = 1.0;
            if (sampling == NormSampling::wall_clock)
                w = i + 1 < frames.size() ? static_cast<double>((frames[i + 1].timestamp() - f.timestamp()).count()) : 0.0;
            p.bid += w * static_cast<double>(book.depth_volume(BookSide::Bid, depth));
            p.ask += w * static_cast<double>(book.depth_volume(BookSide::Ask, depth));
            p.weight += w;
            ++p.samples;
        });
    });
    BookNorm norm;
    double bid = 0.0, ask = 0.0, weight = 0.0;
    for (const auto& p : partial) {
        bid += p.bid;
        ask += p.ask;
        weight += p.weight;
        norm.samples += p.samples;
    }
    if (weight > 0.0) {
        norm.bid = bid / weight;
        norm.ask = ask / weight;
        norm.pooled = (bid + ask) / (2.0 * weight);
    }
    return norm;
}

ProfileAverage average_profile(std::span<const ReplayLog> days, BookSide side, ProfileConditioning conditioning,
                               std::span<const LargeEvent> events, int depth) {
    if (depth <= 0) throw Error(Errc::parameter_error, "depth must be positive");
    ProfileAverage out;
    out.side = side;
    out.conditioning = conditioning;
    out.mean_volume.assign(static_cast<std::size_t>(depth), 0.0);

    struct Partial {
        std::vector<double> sum;
        std::size_t count = 0;
    };
    std::vector<Partial> partial(days.size());

    auto accumulate = [&](Partial& p, const OrderBookState& book) {
        if (book.empty(side)) return;
        const auto profile = book.side_profile(side, depth);
        for (std::size_t k = 0; k < profile.size(); ++k) p.sum[k] += profile[k];
        ++p.count;
    };

    if (conditioning == ProfileConditioning::unconditional) {
        parallel_for(days.size(), [&](std::size_t d) {
            auto& p = partial[d];
            p.sum.assign(out.mean_volume.size(), 0.0);
            days[d].sweep([&](std::size_t, const ReplayFrame&, const OrderBookState& book) { accumulate(p, book); });
        });
    } else {
        const Sign wanted = conditioning == ProfileConditioning::pre_positive_event ? Sign::Positive : Sign::Negative;
        std::vector<std::vector<std::size_t>> indices(days.size());
        for (const auto& ev : events) {
            if (ev.sign != wanted) continue;
            if (ev.day >= days.size() || ev.trigger_index >= days[ev.day].size())
                throw Error(Errc::parameter_error, "event refers to a frame outside the replayed days");
            indices[ev.day].push_back(ev.trigger_index);
        }
        parallel_for(days.size(), [&](std::size_t d) {
            auto& p = partial[d];
            p.sum.assign(out.mean_volume.size(), 0.0);
            auto& idx = indices[d];
            std::sort(idx.begin(), idx.end());
            days[d].visit_states(idx, [&](std::size_t, const OrderBookState& book) { accumulate(p, book); });
        });
    }

    std::vector<double> sum(out.mean_volume.size(), 0.0);
    for (const auto& p : partial) {
        for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += p.sum[k];
        out.sample_count += p.count;
    }
    if (out.sample_count == 0) throw Error(Errc::insufficient_sample, "no snapshots qualify for the profile average");
    for (std::size_t k = 0; k < sum.size(); ++k) out.mean_volume[k] = sum[k] / static_cast<double>(out.sample_count);
    return out;
}

std::vector<BookWindow> tile_windows(std::span<const ReplayLog> days, Duration delta_t, int depth,
                                     const SessionConfig& session) {
    if (delta_t <= Duration::zero()) throw Error(Errc::parameter_error, "delta_t must be positive");
    if (depth <= 0) throw Error(Errc::parameter_error, "depth must be positive");
    std::vector<std::vector<BookWindow>> per_day(days.size());
    parallel_for(days.size(), [&](std::size_t d) {
        const ReplayLog& log = days[d];
        std::vector<BookWindow> windows;
        std::vector<std::size_t> snapshot;
        for (Timestamp t = session.analysis_start(); t + delta_t <= session.analysis_end(); t += delta_t) {
            const auto idx = log.last_at_or_before(t);
            if (!idx) continue;
            BookWindow w;
            w.day = d;
            w.start = t;
            const auto m0 = log[*idx].midprice();
            const auto end_idx = log.last_at_or_before(t + delta_t);
            const auto m1 = log[*end_idx].midprice();
            if (m0 && m1) w.log_return = std::log(*m1) - std::log(*m0);
            windows.push_back(std::move(w));
            snapshot.push_back(*idx);
        }
        log.visit_states(snapshot, [&](std::size_t k, const OrderBookState& book) {
            if (!book.empty(BookSide::Ask)) windows[k].ask_profile = book.side_profile(BookSide::Ask, depth);
            if (!book.empty(BookSide::Bid)) windows[k].bid_profile = book.side_profile(BookSide::Bid, depth);
        });
        per_day[d] = std::move(windows);
    });
    std::vector<BookWindow> all;
    for (auto& v : per_day)
        for (auto& w : v) all.push_back(std::move(w));
    return all;
}

}  // namespace lobliq
