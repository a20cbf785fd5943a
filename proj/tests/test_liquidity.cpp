#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lobliq/liquidity.hpp"
#include "oracles/oracles.hpp"
#include "support/streams.hpp"

using namespace lobliq;

namespace {

Errc code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return Errc::io_error;
}

OrderEvent lo(Side s, Tick p, Volume v, Timestamp t) { return {Op::LO, s, p, v, t, {}}; }

// Asks 5 x 100 from 1001, bids 3 x 100 from 1000, then far-away idle orders.
std::vector<OrderEvent> static_book(Duration idle_every, int idle_count) {
    std::vector<OrderEvent> ev;
    for (int d = 0; d < 5; ++d) ev.push_back(lo(Side::Sell, 1001 + d, 100, Timestamp(0)));
    for (int d = 0; d < 3; ++d) ev.push_back(lo(Side::Buy, 1000 - d, 100, Timestamp(0)));
    for (int i = 1; i <= idle_count; ++i) ev.push_back(lo(Side::Sell, 1900, 1, idle_every * i));
    return ev;
}

}  // namespace

TEST(ExponentialLiquidity, Examples) {
    const std::vector<double> zeros(50, 0.0);
    EXPECT_EQ(exponential_liquidity(zeros, 5.0, 100.0), 0.0);
    std::vector<double> single(100, 0.0);
    single[0] = 250.0;
    EXPECT_NEAR(exponential_liquidity(single, 5.0, 250.0), std::exp(-0.2), 1e-15);
    const std::vector<double> three{10, 20, 30, 0, 0};
    const double expected = (10 * std::exp(-0.5) + 20 * std::exp(-1.0) + 30 * std::exp(-1.5)) / 60.0;
    EXPECT_NEAR(exponential_liquidity(three, 2.0, 60.0), expected, 1e-15);
    EXPECT_EQ(exponential_liquidity(std::vector<double>{}, 2.0, 60.0), 0.0);
}

TEST(ExponentialLiquidity, MatchesDirectSum) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> p(1 + rng() % 200);
        for (auto& v : p) v = u(rng) < 0.3 ? 0.0 : std::floor(1000.0 * u(rng));
        const double delta = 0.2 + 30.0 * u(rng);
        const double norm = 1.0 + 5000.0 * u(rng);
        const double got = exponential_liquidity(p, delta, norm);
        const double want = oracle::liquidity(p, delta, norm);
        if (want == 0.0)
            EXPECT_EQ(got, 0.0);
        else
            EXPECT_LE(std::abs(got - want) / want, 1e-12);
    }
}

TEST(ExponentialLiquidity, Errors) {
    const std::vector<double> p{1, 2};
    EXPECT_EQ(code_of([&] { (void)exponential_liquidity(p, 5.0, 0.0); }), Errc::normalization_error);
    EXPECT_EQ(code_of([&] { (void)exponential_liquidity(p, 0.0, 1.0); }), Errc::parameter_error);
}

TEST(ExponentialLiquidity, MonotoneInDelta) {
    const std::vector<double> p{5, 0, 7, 1, 9};
    double prev = 0.0;
    for (double d = 0.5; d < 40; d *= 1.5) {
        const double l = exponential_liquidity(p, d, 10.0);
        EXPECT_GT(l, prev);
        prev = l;
    }
    EXPECT_LT(prev, 22.0 / 10.0);
}

TEST(Imbalance, Examples) {
    EXPECT_EQ(*liquidity_imbalance(2.0, 2.0), 0.0);
    EXPECT_EQ(*liquidity_imbalance(3.0, 0.0), 1.0);
    EXPECT_EQ(*liquidity_imbalance(0.0, 3.0), -1.0);
    EXPECT_EQ(*liquidity_imbalance(3.0, 1.0), 0.5);
    EXPECT_FALSE(liquidity_imbalance(0.0, 0.0).has_value());
    EXPECT_EQ(code_of([] { (void)liquidity_imbalance(-1.0, 1.0); }), Errc::domain_error);
}

TEST(Imbalance, AntisymmetricAndBounded) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 10000; ++i) {
        const double b = u(rng) < 0.05 ? 0.0 : std::exp(10 * u(rng) - 5);
        const double a = u(rng) < 0.05 ? 0.0 : std::exp(10 * u(rng) - 5);
        const auto x = liquidity_imbalance(b, a);
        const auto y = liquidity_imbalance(a, b);
        if (a == 0.0 && b == 0.0) continue;
        ASSERT_EQ(*x, -*y);
        ASSERT_LE(*x, 1.0);
        ASSERT_GE(*x, -1.0);
    }
}

TEST(SideLiquidity, EmptySideIsZero) {
    OrderBook b;
    b.apply(lo(Side::Buy, 1000, 60, Timestamp(0)));
    const auto ask = side_liquidity(b.state(), BookSide::Ask, 10, 5.0, 100.0);
    EXPECT_TRUE(ask.empty_side);
    EXPECT_EQ(ask.value, 0.0);
    const auto s = measure_liquidity(b.state(), 5.0, 10, 60.0);
    EXPECT_NEAR(s.l_bid, std::exp(-0.2), 1e-15);
    EXPECT_EQ(*s.l_imb, 1.0);
}

TEST(Norm, StaticBookPoolsBothSides) {
    const std::vector<ReplayLog> days{replay(static_book(1s, 50))};
    const auto n = compute_norm(days, 10, NormSampling::wall_clock);
    EXPECT_DOUBLE_EQ(n.pooled, 400.0);
    EXPECT_DOUBLE_EQ(n.ask, 500.0);
    EXPECT_DOUBLE_EQ(n.bid, 300.0);
    // Depth cuts the ask ladder.
    EXPECT_DOUBLE_EQ(compute_norm(days, 2, NormSampling::wall_clock).ask, 200.0);
}

TEST(Norm, ConstantBookIndependentOfSampling) {
    const std::vector<ReplayLog> a{replay(static_book(1s, 300))};
    const std::vector<ReplayLog> b{replay(static_book(7s, 40))};
    EXPECT_DOUBLE_EQ(compute_norm(a, 10, NormSampling::wall_clock).pooled,
                     compute_norm(b, 10, NormSampling::wall_clock).pooled);
}

TEST(Norm, SingleSnapshotSingleSide) {
    const std::vector<ReplayLog> days{replay(std::vector{lo(Side::Sell, 1001, 70, Timestamp(0))})};
    const auto n = compute_norm(days, 10);
    EXPECT_DOUBLE_EQ(n.pooled, 35.0);
    EXPECT_DOUBLE_EQ(n.ask, 70.0);
    EXPECT_DOUBLE_EQ(n.bid, 0.0);
    EXPECT_EQ(n.samples, 1u);
}

TEST(Norm, EventTimeMatchesFrameAverage) {
    std::mt19937_64 rng(13);
    const auto stream = oracle::random_stream(rng, {});
    const std::vector<ReplayLog> days{replay(stream)};
    double sum = 0.0;
    for (std::size_t i = 0; i < days[0].size(); ++i) {
        const auto s = days[0].book_after(i);
        sum += static_cast<double>(s.depth_volume(BookSide::Bid, 20) + s.depth_volume(BookSide::Ask, 20)) / 2.0;
    }
    EXPECT_NEAR(compute_norm(days, 20).pooled, sum / static_cast<double>(days[0].size()), 1e-9);
    EXPECT_EQ(code_of([&] { (void)compute_norm(days, 0); }), Errc::parameter_error);
}

TEST(AverageProfile, StaticBookEqualsInstantaneous) {
    const std::vector<ReplayLog> days{replay(static_book(1s, 20))};
    const auto p = average_profile(days, BookSide::Ask, ProfileConditioning::unconditional, {}, 6);
    // The construction frames see partial ladders; compare with a frame average.
    std::vector<double> want(6, 0.0);
    std::size_t n = 0;
    days[0].sweep([&](std::size_t, const ReplayFrame&, const OrderBookState& s) {
        if (s.empty(BookSide::Ask)) return;
        const auto prof = s.side_profile(BookSide::Ask, 6);
        for (std::size_t k = 0; k < 6; ++k) want[k] += prof[k];
        ++n;
    });
    for (auto& w : want) w /= static_cast<double>(n);
    EXPECT_EQ(p.sample_count, n);
    for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(p.mean_volume[k], want[k], 1e-12);
    // Two frames: the level at 1003 exists only in the second.
    const std::vector<ReplayLog> built{replay(std::vector{lo(Side::Sell, 1001, 100, Timestamp(0)),
                                                          lo(Side::Sell, 1003, 40, Timestamp(0))})};
    const auto q = average_profile(built, BookSide::Ask, ProfileConditioning::unconditional, {}, 4);
    EXPECT_EQ(q.mean_volume, (std::vector<double>{100, 0, 20, 0}));
}

TEST(AverageProfile, DepletionBeforeJumps) {
    SessionConfig s;
    s.session_close = s.session_open + s.open_skip + 2h;
    const Timestamp t0 = s.analysis_start();
    std::vector<OrderEvent> ev;
    Tick bid = 10000, ask = 10001;
    for (int d = 0; d < 1000; ++d) {
        ev.push_back(lo(Side::Buy, bid - d, 10, t0));
        ev.push_back(lo(Side::Sell, ask + d, 10, t0));
    }
    std::vector<Timestamp> jumps;
    for (Timestamp j = t0 + 5min; j + 5min < s.analysis_end(); j += 10min) jumps.push_back(j);
    std::size_t next = 0;
    for (Timestamp t = t0 + 1s; t < s.analysis_end(); t += 1s) {
        if (next < jumps.size() && t == jumps[next] - 35s) {
            // Halve the ten levels nearest the ask.
            for (int d = 0; d < 10; ++d) ev.push_back({Op::C, Side::Sell, ask + d, 5, t, {}});
            continue;
        }
        if (next < jumps.size() && t == jumps[next]) {
            // One crossing order takes 40 ask levels; the bid ladder is refilled behind it.
            ev.push_back(lo(Side::Buy, ask + 39, 10 * 5 + 30 * 10 + 10, t));
            for (Tick p = ask; p < ask + 39; ++p) ev.push_back(lo(Side::Buy, p, 10, t));
            bid = ask + 39;
            ask = bid + 1;
            ++next;
            continue;
        }
        ev.push_back(lo(Side::Buy, bid - 900, 1, t));
    }
    const std::vector<ReplayLog> days{replay(ev)};
    const auto vol = compute_volatility_profile(days, 30s, 1min, s);
    const auto events = detect_large_events(days, vol, {30s, 0.001, 0.0}, s);
    ASSERT_EQ(events.size(), jumps.size());
    for (std::size_t i = 0; i < events.size(); ++i) {
        EXPECT_EQ(events[i].window_start, jumps[i] - 30s);
        EXPECT_EQ(events[i].sign, Sign::Positive);
    }

    const auto ask_all = average_profile(days, BookSide::Ask, ProfileConditioning::unconditional, events, 100);
    const auto ask_pre = average_profile(days, BookSide::Ask, ProfileConditioning::pre_positive_event, events, 100);
    const auto bid_all = average_profile(days, BookSide::Bid, ProfileConditioning::unconditional, events, 100);
    const auto bid_pre = average_profile(days, BookSide::Bid, ProfileConditioning::pre_positive_event, events, 100);
    EXPECT_EQ(ask_pre.sample_count, events.size());
    for (std::size_t k = 0; k < 10; ++k) {
        EXPECT_EQ(ask_pre.mean_volume[k], 5.0);
        const double ratio = ask_pre.mean_volume[k] / ask_all.mean_volume[k];
        EXPECT_GT(ratio, 0.45);
        EXPECT_LT(ratio, 0.56);
    }
    for (std::size_t k = 0; k < 100; ++k) EXPECT_NEAR(bid_pre.mean_volume[k], bid_all.mean_volume[k], 0.1 * 10.0);
    EXPECT_EQ(code_of([&] {
                  (void)average_profile(days, BookSide::Ask, ProfileConditioning::pre_negative_event, events, 100);
              }),
              Errc::insufficient_sample);
}

TEST(AverageProfile, Errors) {
    const std::vector<ReplayLog> days{replay(static_book(1s, 3))};
    EXPECT_EQ(code_of([&] { (void)average_profile(days, BookSide::Ask, ProfileConditioning::unconditional, {}, 0); }),
              Errc::parameter_error);
    const std::vector<LargeEvent> bad{{0, Timestamp(0), 1s, 0.1, Sign::Positive, 999}};
    EXPECT_EQ(code_of([&] {
                  (void)average_profile(days, BookSide::Ask, ProfileConditioning::pre_positive_event, bad, 5);
              }),
              Errc::parameter_error);
}

TEST(TileWindows, GridReturnsAndProfiles) {
    SessionConfig s;
    s.session_close = s.session_open + s.open_skip + 30min;
    std::mt19937_64 rng(1);
    support::PathBuilder b(s.analysis_start(), 10000);
    for (Timestamp t = s.analysis_start() + 7s; t < s.analysis_end(); t += 7s) b.step(t, (rng() & 1) ? 2 : -1);
    const std::vector<ReplayLog> days{replay(b.events())};
    const auto w = tile_windows(days, 1min, 20, s);
    ASSERT_EQ(w.size(), 30u);
    for (std::size_t k = 0; k < w.size(); ++k) {
        EXPECT_EQ(w[k].start, s.analysis_start() + 1min * static_cast<long>(k));
        const auto i0 = *days[0].last_at_or_before(w[k].start);
        const auto i1 = *days[0].last_at_or_before(w[k].start + 1min);
        ASSERT_TRUE(w[k].log_return.has_value());
        EXPECT_NEAR(*w[k].log_return, std::log(*days[0][i1].midprice() / *days[0][i0].midprice()), 1e-14);
        const auto st = days[0].book_after(i0);
        EXPECT_EQ(w[k].ask_profile, st.side_profile(BookSide::Ask, 20));
        EXPECT_EQ(w[k].bid_profile, st.side_profile(BookSide::Bid, 20));
    }
    EXPECT_EQ(code_of([&] { (void)tile_windows(days, 0s, 20, s); }), Errc::parameter_error);
}
