#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "lobliq/event_detection.hpp"
#include "lobliq/flow_analysis.hpp"
#include "lobliq/stats.hpp"
#include "lobliq/synthgen.hpp"

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

std::vector<ReplayLog> replay_all(const std::vector<std::vector<OrderEvent>>& days) {
    ReplayOptions strict;
    strict.cancel_policy = CancelPolicy::strict;
    std::vector<ReplayLog> out;
    for (const auto& d : days) out.push_back(replay(d, strict));
    return out;
}

std::vector<LargeEvent> large_scale_events(std::span<const ReplayLog> days, const SessionConfig& s) {
    const DetectionParams p;
    const auto vol = compute_volatility_profile(days, p.delta_t, default_bucket_width(p.delta_t), s);
    return decluster(detect_large_events(days, vol, p, s), p.delta_t);
}

GeneratorConfig short_day(std::uint64_t seed) {
    GeneratorConfig cfg;
    cfg.seed = seed;
    cfg.session.session_close = cfg.session.session_open + cfg.session.open_skip + 1h;
    return cfg;
}

}  // namespace

TEST(Generator, ZeroRatesGiveHeaderOnly) {
    GeneratorConfig cfg = short_day(1);
    cfg.bid = cfg.ask = SideRates{0.0, 0.0, 0.0};
    cfg.initial_depth = 0;
    const auto ev = generate_day(cfg, 0);
    EXPECT_TRUE(ev.empty());
    EXPECT_EQ(serialize_messages(ev), "timestamp_us,op,side,price_ticks,volume,order_ref\n");
}

TEST(Generator, DeterministicPerSeedAndDay) {
    GeneratorConfig cfg = short_day(42);
    cfg.days = 2;
    const auto a = generate(cfg);
    const auto b = generate(cfg);
    EXPECT_EQ(a, b);
    EXPECT_NE(a[0], a[1]);
    EXPECT_EQ(generate_day(cfg, 1), a[1]);
    cfg.seed = 43;
    EXPECT_NE(generate(cfg)[0], a[0]);
    EXPECT_NE(day_seed(42, 0), day_seed(42, 1));
    EXPECT_NE(day_seed(42, 0), day_seed(43, 0));
}

TEST(Generator, StreamsReplayStrictlyWithinSession) {
    GeneratorConfig cfg = short_day(7);
    cfg.days = 2;
    cfg.activity_amplitude = 0.5;
    const Timestamp s0 = cfg.session.analysis_start();
    Episode mo;
    mo.start = s0 + 10min;
    mo.duration = 10min;
    mo.intensity = 3.0;
    mo.side = BookSide::Bid;
    Episode dep;
    dep.kind = EpisodeKind::depletion;
    dep.day = 1;
    dep.start = s0 + 30min;
    dep.duration = 5min;
    cfg.episodes = {mo, dep};
    const auto days = generate(cfg);
    for (const auto& d : days) {
        ASSERT_FALSE(d.empty());
        EXPECT_GE(d.front().timestamp, s0);
        EXPECT_LT(d.back().timestamp, cfg.session.analysis_end());
        EXPECT_TRUE(std::is_sorted(d.begin(), d.end(),
                                   [](const OrderEvent& x, const OrderEvent& y) { return x.timestamp < y.timestamp; }));
        // Round trip through the message format.
        EXPECT_EQ(parse_messages(serialize_messages(d), cfg.session), d);
    }
    const auto logs = replay_all(days);
    for (const auto& l : logs) EXPECT_EQ(l.clamped_cancellations(), 0u);
}

TEST(Generator, Validation) {
    GeneratorConfig cfg;
    cfg.bid.lo = -1.0;
    EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::config_error);
    cfg = GeneratorConfig{};
    cfg.activity_amplitude = 1.0;
    EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::config_error);
    cfg = GeneratorConfig{};
    Episode e;
    e.start = Timestamp(0);
    e.duration = 1min;
    cfg.episodes = {e};
    EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::config_error);
    cfg.episodes[0].start = cfg.session.analysis_start();
    cfg.episodes[0].day = 3;
    EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::config_error);
    cfg.episodes[0].day = 0;
    EXPECT_NO_THROW(cfg.validate());

    // Rules the price grid cannot express, or that are not monotone.
    PlantedRule tiny;
    tiny.kind = RuleKind::cubic_imbalance;
    tiny.c = 1e-7;
    EXPECT_EQ(code_of([&] { (void)plant_return_rule(GeneratorConfig{}, tiny); }), Errc::feasibility_error);
    PlantedRule unbounded;
    unbounded.kind = RuleKind::power_law;
    unbounded.K = std::numeric_limits<double>::quiet_NaN();
    unbounded.alpha = 0.5;
    EXPECT_EQ(code_of([&] { (void)plant_return_rule(GeneratorConfig{}, unbounded); }), Errc::config_error);
}

TEST(Generator, JsonRoundTrip) {
    GeneratorConfig cfg = short_day(99);
    cfg.days = 3;
    cfg.ask.mo = 0.25;
    cfg.activity_amplitude = 0.4;
    Episode e;
    e.kind = EpisodeKind::planted_return_rule;
    e.day = 2;
    e.start = cfg.session.analysis_start() + 5min;
    e.duration = 20min;
    e.rule.kind = RuleKind::cubic_imbalance;
    e.rule.c = 0.002;
    e.rule.noise_sd = 0.001;
    cfg.episodes = {e};
    nlohmann::json j;
    to_json(j, cfg);
    GeneratorConfig back;
    from_json(j, back);
    nlohmann::json again;
    to_json(again, back);
    EXPECT_EQ(j, again);
    EXPECT_EQ(generate(back), generate(cfg));
    EXPECT_THROW(from_json(nlohmann::json::parse(R"({"days": "three"})"), back), std::exception);
}

TEST(Generator, NullModelHasFewLargeEvents) {
    GeneratorConfig cfg;
    cfg.seed = 5;
    cfg.days = 10;
    const auto logs = replay_all(generate(cfg));
    EXPECT_LE(large_scale_events(logs, cfg.session).size(), 1u);
}

TEST(Generator, FlowImbalanceEpisodeIsDetected) {
    GeneratorConfig cfg;
    cfg.seed = 8;
    cfg.days = 5;
    Episode e;
    e.day = 2;
    e.start = cfg.session.analysis_start() + 3h;
    e.duration = 30min;
    e.side = BookSide::Ask;
    e.intensity = 5.0;
    cfg.episodes = {e};
    const auto logs = replay_all(generate(cfg));
    const auto events = large_scale_events(logs, cfg.session);
    const auto hit = std::find_if(events.begin(), events.end(), [&](const LargeEvent& ev) {
        return ev.day == 2 && ev.window_end() > e.start && ev.window_start < e.start + e.duration;
    });
    ASSERT_NE(hit, events.end());
    EXPECT_EQ(hit->sign, Sign::Positive);
    EXPECT_GE(hit->log_return, 0.005);

    // Market orders dominate the ask during the episode.
    const FlowIndex index(logs);
    const auto during = *relative_flows(index.totals(2, BookSide::Ask, false, e.start, e.start + e.duration));
    FlowCurveParams p;
    p.at_best_only = false;
    const auto base = baseline_flows(index, BookSide::Ask, cfg.session, p);
    EXPECT_GT(during[1], 2.0 * base[1]);
}

TEST(Generator, ZeroRuleKeepsPriceFlat) {
    GeneratorConfig cfg = short_day(3);
    PlantedRule r;
    const auto logs = replay_all(plant_return_rule(cfg, r));
    const auto w = tile_windows(logs, r.window, r.depth, cfg.session);
    ASSERT_GT(w.size(), 100u);
    // The window at the analysis start opens on the initial book and carries no target.
    std::size_t nonzero = 0;
    for (std::size_t i = 1; i < w.size(); ++i)
        if (w[i].log_return && *w[i].log_return != 0.0) ++nonzero;
    EXPECT_EQ(nonzero, 0u);
}

TEST(Generator, CubicRuleSignsFollowImbalance) {
    GeneratorConfig cfg = short_day(2);
    cfg.session.session_close = cfg.session.session_open + cfg.session.open_skip + 4h;
    PlantedRule r;
    r.kind = RuleKind::cubic_imbalance;
    r.c = 0.002;
    r.noise_sd = 0.0;
    const auto logs = replay_all(plant_return_rule(cfg, r));
    const auto w = tile_windows(logs, r.window, r.depth, cfg.session);
    std::size_t checked = 0, agree = 0;
    for (const auto& x : w) {
        if (!x.log_return || x.ask_profile.empty() || x.bid_profile.empty()) continue;
        const auto imb = liquidity_imbalance(exponential_liquidity(x.bid_profile, r.delta, r.norm),
                                             exponential_liquidity(x.ask_profile, r.delta, r.norm));
        if (!imb || std::abs(*imb) < 0.5) continue;
        ++checked;
        // Without noise the realised return rounds the target to the price grid.
        if (std::abs(*x.log_return - r.expected(*imb, 0.0)) <= 1.0 / cfg.initial_mid) ++agree;
    }
    ASSERT_GT(checked, 50u);
    EXPECT_GE(static_cast<double>(agree), 0.95 * static_cast<double>(checked));
}

TEST(Generator, PowerLawRulePeaksAtPlantedDelta) {
    GeneratorConfig cfg;
    cfg.seed = 1000;
    cfg.days = 2;
    PlantedRule r;
    r.kind = RuleKind::power_law;
    r.K = 0.003;
    r.alpha = 0.5;
    r.noise_sd = 0.1;
    const auto logs = replay_all(plant_return_rule(cfg, r));
    const auto w = tile_windows(logs, 30s, 100, cfg.session);
    std::vector<double> deltas;
    for (int d = 1; d <= 20; ++d) deltas.push_back(d);
    const auto scan = delta_scan(w, deltas, Sign::Positive, r.norm);
    ASSERT_TRUE(scan.best_delta.has_value());
    EXPECT_EQ(*scan.best_delta, 5.0);
    EXPECT_GT(scan.entries[4].r_squared, 0.5);
}
