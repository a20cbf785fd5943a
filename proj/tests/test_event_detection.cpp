#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lobliq/event_detection.hpp"
#include "oracles/oracles.hpp"
#include "support/streams.hpp"

using namespace lobliq;

namespace {

SessionConfig short_session(Duration analysed) {
    SessionConfig s;
    s.session_close = s.session_open + s.open_skip + analysed;
    return s;
}

// One day: a step of k(t) ticks with a random sign every `every`, from the
// analysis start onward.
template <class K>
ReplayLog walk_day(const SessionConfig& s, Duration every, K k_of, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    support::PathBuilder b(s.analysis_start(), 10000);
    for (Timestamp t = s.analysis_start() + every; t < s.analysis_end(); t += every) {
        const int k = k_of(t);
        b.step(t, (rng() & 1) ? k : -k);
    }
    return replay(b.events());
}

}  // namespace

TEST(Volatility, ConstantMidpriceGivesZero) {
    const auto s = short_session(1h);
    support::PathBuilder b(s.analysis_start(), 10000);
    for (Timestamp t = s.analysis_start(); t < s.analysis_end(); t += 10s) b.idle(t);
    const std::vector<ReplayLog> days{replay(b.events())};
    const auto p = compute_volatility_profile(days, 1min, 1min, s);
    for (double v : p.sigma) EXPECT_EQ(v, 0.0);
    const auto e = detect_large_events(days, p, {1min, 0.0, 0.0}, s);
    EXPECT_TRUE(e.empty());
}

TEST(Volatility, RecoversUShapedPattern) {
    const auto s = short_session(2h);
    const Duration len = s.analysis_end() - s.analysis_start();
    const auto k_of = [&](Timestamp t) {
        const double u = std::chrono::duration<double>(t - s.analysis_start()) / std::chrono::duration<double>(len);
        return 1 + static_cast<int>(std::lround(8.0 * (2.0 * u - 1.0) * (2.0 * u - 1.0)));
    };
    const std::vector<ReplayLog> days{walk_day(s, 1min, k_of, 1), walk_day(s, 1min, k_of, 2)};
    const auto p = compute_volatility_profile(days, 1min, 1min, s);
    // The window starting at a step ends at the next step, so its |return|
    // is the next step's size over the midprice (about 10000 ticks).
    std::size_t checked = 0;
    for (Timestamp t = s.analysis_start() + 1min; t + 2min <= s.analysis_end(); t += 1min) {
        const double expected = k_of(t + 1min) / 10000.0;
        EXPECT_NEAR(p.sigma_at(t), expected, 0.03 * expected) << t.count();
        ++checked;
    }
    EXPECT_GT(checked, 100u);
    // Ends are higher than the middle.
    EXPECT_GT(p.sigma_at(s.analysis_start() + 2min), 4 * p.sigma_at(s.analysis_start() + 1h));
}

TEST(Volatility, SingleBucketIsDirectMean) {
    const auto s = short_session(1h);
    const auto day = walk_day(s, 20s, [](Timestamp) { return 3; }, 4);
    const std::vector<ReplayLog> days{day};
    const auto p = compute_volatility_profile(days, 2min, s.length(), s);
    ASSERT_EQ(p.sigma.size(), 1u);
    const auto w = oracle::window_returns(day, 2min, s.analysis_end());
    double sum = 0;
    for (const auto& x : w) sum += std::abs(x.log_return);
    EXPECT_NEAR(p.sigma[0], sum / static_cast<double>(w.size()), 1e-15);
    EXPECT_EQ(p.sample_counts[0], w.size());
}

TEST(Volatility, MatchesBucketOracleAndFillsGaps) {
    const auto s = short_session(1h);
    const std::vector<ReplayLog> days{walk_day(s, 45s, [](Timestamp) { return 2; }, 8),
                                      walk_day(s, 70s, [](Timestamp) { return 1; }, 9)};
    const auto p = compute_volatility_profile(days, 3min, 1min, s);
    const auto o = oracle::bucket_mean_abs(days, 3min, 1min, s);
    ASSERT_EQ(p.sigma.size(), o.size());
    for (std::size_t b = 0; b < o.size(); ++b) {
        if (o[b]) {
            EXPECT_NEAR(p.sigma[b], *o[b], 1e-15);
            EXPECT_FALSE(p.filled[b]);
        } else {
            EXPECT_TRUE(p.filled[b]);
        }
    }
    // The opening skip has no samples and borrows the first analysed bucket.
    EXPECT_TRUE(p.filled[0]);
    EXPECT_EQ(p.sigma[0], p.sigma[30]);
}

TEST(Volatility, StdDevMeasure) {
    const auto s = short_session(1h);
    const auto day = walk_day(s, 30s, [](Timestamp) { return 2; }, 12);
    const std::vector<ReplayLog> days{day};
    const auto p = compute_volatility_profile(days, 1min, s.length(), s, VolatilityMeasure::std_dev);
    const auto w = oracle::window_returns(day, 1min, s.analysis_end());
    double m = 0;
    for (const auto& x : w) m += x.log_return;
    m /= static_cast<double>(w.size());
    double v = 0;
    for (const auto& x : w) v += (x.log_return - m) * (x.log_return - m);
    v /= static_cast<double>(w.size() - 1);
    EXPECT_NEAR(p.sigma[0], std::sqrt(v), 1e-12);
}

TEST(Volatility, Errors) {
    const auto s = short_session(1h);
    const std::vector<ReplayLog> none;
    EXPECT_THROW((void)compute_volatility_profile(none, 1min, 1min, s), Error);
    const std::vector<ReplayLog> empty_day{ReplayLog{}};
    EXPECT_THROW((void)compute_volatility_profile(empty_day, 1min, 1min, s), Error);
    EXPECT_THROW((void)compute_volatility_profile(empty_day, 0s, 1min, s), Error);
    EXPECT_EQ(default_bucket_width(15min), Duration(5min));
    EXPECT_EQ(default_bucket_width(30s), Duration(1min));
}

TEST(Detection, BelowAbsoluteThresholdFindsNothing) {
    const auto s = short_session(3h);
    std::vector<ReplayLog> days;
    for (int d = 0; d < 3; ++d) days.push_back(walk_day(s, 1min, [](Timestamp) { return 1; }, 30 + d));
    const auto p = compute_volatility_profile(days, 15min, 5min, s);
    double max_abs = 0;
    for (const auto& d : days)
        for (const auto& w : oracle::window_returns(d, 15min, s.analysis_end()))
            max_abs = std::max(max_abs, std::abs(w.log_return));
    ASSERT_LT(max_abs, 0.003);
    EXPECT_TRUE(detect_large_events(days, p, {15min, 0.005, 3.0}, s).empty());
}

TEST(Detection, SingleInjectedJump) {
    const auto s = short_session(4h);
    const Timestamp jump = s.analysis_start() + 2h;
    std::vector<ReplayLog> days;
    for (int d = 0; d < 10; ++d) {
        std::mt19937_64 rng(100 + d);
        support::PathBuilder b(s.analysis_start(), 10000);
        for (Timestamp t = s.analysis_start() + 1min; t < s.analysis_end(); t += 1min) {
            if (d == 3 && (t == jump || t == jump + 1min)) {
                b.step(t, 40);
                continue;
            }
            b.step(t, (rng() & 1) ? 2 : -2);
        }
        days.push_back(replay(b.events()));
    }
    const auto p = compute_volatility_profile(days, 15min, 5min, s);
    const auto events = detect_large_events(days, p, {15min, 0.005, 3.0}, s);
    ASSERT_EQ(events.size(), 1u);
    const auto& e = events[0];
    EXPECT_EQ(e.day, 3u);
    EXPECT_EQ(e.sign, Sign::Positive);
    EXPECT_LE(e.window_start, jump);
    EXPECT_GE(e.window_end(), jump + 1min);
    EXPECT_TRUE(oracle::same_events(events, oracle::detect(days, p, {15min, 0.005, 3.0}, s)));
}

TEST(Detection, ClustersAreReportedOnce) {
    const auto s = short_session(1h);
    support::PathBuilder b(s.analysis_start(), 10000);
    // Steps 20 s apart chain into one cluster; the drop 9 min later opens another.
    const Timestamp t0 = s.analysis_start();
    for (Timestamp t = t0 + 10s; t < s.analysis_end(); t += 10s) {
        if (t == t0 + 10min + 20s || t == t0 + 10min + 40s || t == t0 + 11min)
            b.step(t, 30);
        else if (t == t0 + 20min)
            b.step(t, -60);
        else
            b.idle(t);
    }
    const std::vector<ReplayLog> days{replay(b.events())};
    const auto p = compute_volatility_profile(days, 1min, 1min, s);
    const auto events = detect_large_events(days, p, {1min, 0.001, 0.0}, s);
    ASSERT_TRUE(oracle::same_events(events, oracle::detect(days, p, {1min, 0.001, 0.0}, s)));
    ASSERT_EQ(events.size(), 2u);
    EXPECT_EQ(events[0].sign, Sign::Positive);
    EXPECT_EQ(events[1].sign, Sign::Negative);
    EXPECT_EQ(events[0].window_start, t0 + 9min + 20s);
    EXPECT_EQ(events[1].window_start, t0 + 19min);
}

TEST(Detection, MatchesQuadraticOracleOnRandomWalks) {
    std::mt19937_64 rng(77);
    for (int run = 0; run < 15; ++run) {
        const auto s = short_session(30min);
        std::vector<ReplayLog> days;
        for (int d = 0; d < 2; ++d) {
            support::PathBuilder b(s.analysis_start(), 10000);
            for (Timestamp t = s.analysis_start(); t < s.analysis_end(); t += Duration(1000000 + rng() % 20000000)) {
                int k = 1 + static_cast<int>(rng() % 3);
                if (rng() % 50 == 0) k = 25;
                b.step(t, (rng() & 1) ? k : -k);
            }
            days.push_back(replay(b.events()));
        }
        const Duration dt = Duration(60000000 + static_cast<std::int64_t>(rng() % 120000000));
        const auto p = compute_volatility_profile(days, dt, 1min, s);
        const DetectionParams params{dt, 0.001, 2.0};
        ASSERT_TRUE(oracle::same_events(detect_large_events(days, p, params, s), oracle::detect(days, p, params, s))) << run;
    }
}

TEST(Detection, Errors) {
    const auto s = short_session(1h);
    const std::vector<ReplayLog> days{walk_day(s, 1min, [](Timestamp) { return 1; }, 1)};
    const auto p = compute_volatility_profile(days, 1min, 1min, s);
    EXPECT_THROW((void)detect_large_events(days, p, {2min, 0.0, 0.0}, s), Error);
    EXPECT_THROW((void)detect_large_events(days, p, {1min, -1.0, 0.0}, s), Error);
}

TEST(Decluster, Examples) {
    const auto ev = [](std::size_t day, Duration t) { return LargeEvent{day, t, 1min, 0.01, Sign::Positive, 0}; };
    EXPECT_EQ(decluster(std::vector{ev(0, 0min), ev(0, 5min)}, 15min).size(), 1u);
    EXPECT_EQ(decluster(std::vector{ev(0, 0min), ev(0, 16min), ev(0, 32min)}, 15min).size(), 3u);
    // Gaps are measured from the last kept event, and days do not interact.
    const auto kept = decluster(std::vector{ev(0, 0min), ev(0, 10min), ev(0, 20min), ev(1, 21min)}, 15min);
    ASSERT_EQ(kept.size(), 3u);
    EXPECT_EQ(kept[1].window_start, Duration(20min));
    EXPECT_EQ(kept[2].day, 1u);
    EXPECT_THROW((void)decluster(std::vector{ev(0, 5min), ev(0, 1min)}, 15min), Error);
    EXPECT_THROW((void)decluster(std::vector{ev(1, 5min), ev(0, 6min)}, 15min), Error);
}

TEST(Decluster, MatchesQuadraticOracle) {
    std::mt19937_64 rng(4);
    for (int run = 0; run < 200; ++run) {
        std::vector<LargeEvent> events;
        for (std::size_t day = 0; day < 3; ++day) {
            Duration t{0};
            const int n = static_cast<int>(rng() % 30);
            for (int i = 0; i < n; ++i) {
                t += Duration(static_cast<std::int64_t>(rng() % 1200) * 1000000);
                events.push_back({day, t, 1min, 0.01, Sign::Negative, 0});
            }
        }
        const Duration gap = Duration(static_cast<std::int64_t>(rng() % 1800) * 1000000);
        ASSERT_EQ(decluster(events, gap), oracle::decluster(events, gap));
    }
}
