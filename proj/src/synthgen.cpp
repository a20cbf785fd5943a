#include "lobliq/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <random>

#include "lobliq/liquidity.hpp"
#include "lobliq/parallel.hpp"

namespace lobliq {

const char* to_string(EpisodeKind k) {
    switch (k) {
        case EpisodeKind::mo_flow_imbalance: return "mo_flow_imbalance";
        case EpisodeKind::depletion: return "depletion";
        case EpisodeKind::planted_return_rule: return "planted_return_rule";
    }
    return "?";
}

const char* to_string(RuleKind k) {
    switch (k) {
        case RuleKind::zero: return "zero";
        case RuleKind::cubic_imbalance: return "cubic_imbalance";
        case RuleKind::power_law: return "power_law";
    }
    return "?";
}

double PlantedRule::expected(double l_imb, double l_side) const {
    switch (kind) {
        case RuleKind::zero: return 0.0;
        case RuleKind::cubic_imbalance: return c * l_imb * l_imb * l_imb;
        case RuleKind::power_law:
            if (!(l_side > 0.0)) return max_return;
            return std::min(K * std::pow(l_side, -alpha), max_return);
    }
    return 0.0;
}

std::uint64_t day_seed(std::uint64_t root, std::uint64_t day) {
    // splitmix64 over (root, day)
    std::uint64_t z = root + 0x9e3779b97f4a7c15ULL * (day + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {

void check(bool ok, const std::string& what, Errc code = Errc::config_error) {
    if (!ok) throw Error(code, what);
}

void validate_rule(const PlantedRule& r, Tick initial_mid) {
    check(r.delta > 0.0 && r.depth > 0 && r.norm > 0.0, "planted rule needs positive delta, depth and norm");
    check(r.window > Duration::zero(), "planted rule window must be positive");
    check(r.noise_sd >= 0.0 && r.max_return > 0.0, "planted rule noise and cap must be non-negative");
    check(r.shape_levels >= 1 && r.shape_log_sd >= 0.0 && r.shape_empty_prob >= 0.0 && r.shape_empty_prob < 1.0,
          "invalid shaping parameters");

    // Probe grid: monotone and bounded, and not entirely below one tick.
    std::vector<double> values;
    if (r.kind == RuleKind::power_law) {
        for (int k = -30; k <= 30; ++k) values.push_back(r.expected(0.0, std::pow(10.0, k / 10.0)));
    } else {
        for (int k = -50; k <= 50; ++k) values.push_back(r.expected(k / 50.0, 1.0));
    }
    bool up = true, down = true;
    double max_abs = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        check(std::isfinite(values[i]), "planted rule is unbounded");
        max_abs = std::max(max_abs, std::abs(values[i]));
        if (i > 0) {
            up = up && values[i] >= values[i - 1];
            down = down && values[i] <= values[i - 1];
        }
    }
    check(up || down, "planted rule must be monotone");
    // One tick of the bests' sum is the finest midprice step.
    const double finest = 1.0 / (2.0 * static_cast<double>(initial_mid));
    check(max_abs == 0.0 || max_abs >= finest,
          "planted rule needs returns below the price grid resolution", Errc::feasibility_error);
}

}  // namespace

void GeneratorConfig::validate() const {
    session.validate();
    check(days >= 0, "days must be non-negative");
    check(initial_mid > static_cast<Tick>(max_distance) + initial_depth + 1, "initial_mid too close to zero");
    check(initial_depth >= 0, "initial_depth must be non-negative");
    for (const SideRates* r : {&bid, &ask})
        check(r->lo >= 0.0 && r->mo >= 0.0 && r->cancel >= 0.0, "rates must be non-negative");
    check(activity_amplitude >= 0.0 && activity_amplitude < 1.0, "activity_amplitude must be in [0, 1)");
    check(placement_p > 0.0 && placement_p <= 1.0, "placement_p must be in (0, 1]");
    check(max_distance >= 1, "max_distance must be >= 1");
    check(volume_log_sd >= 0.0, "volume_log_sd must be non-negative");
    check(reference_volume > 0.0, "reference_volume must be positive");
    check(response_gain >= 0.0, "response_gain must be non-negative");
    check(response_delay > Duration::zero(), "response_delay must be positive");
    check(depletion_levels >= 1, "depletion_levels must be >= 1");
    for (const auto& e : episodes) {
        check(e.intensity > 0.0, "episode intensity must be positive");
        check(e.duration > Duration::zero(), "episode duration must be positive");
        check(e.start >= session.analysis_start() && e.start + e.duration <= session.analysis_end(),
              "episode must lie within the session");
        check(!e.day || (*e.day >= 0 && *e.day < days), "episode day out of range");
        if (e.kind == EpisodeKind::planted_return_rule) validate_rule(e.rule, initial_mid);
    }
}

namespace {

enum class Action : std::uint8_t { wake, response, deplete, recenter, shape };

struct Scheduled {
    double t_us;
    std::uint64_t seq;
    Action action;
    BookSide side;
    Volume volume;
    std::size_t episode;

    bool operator>(const Scheduled& o) const { return t_us != o.t_us ? t_us > o.t_us : seq > o.seq; }
};

struct PlantedWindow {
    double sum0 = 0.0;  // best bid + best ask at the window start, in ticks
    double target = 0.0;
    bool pending = false;
};

class DayGenerator {
public:
    DayGenerator(const GeneratorConfig& cfg, int day)
        : cfg_(cfg), day_(day), rng_(day_seed(cfg.seed, static_cast<std::uint64_t>(day))),
          book_(cfg.session.tick_size, CancelPolicy::strict) {
        for (std::size_t i = 0; i < cfg_.episodes.size(); ++i) {
            const auto& e = cfg_.episodes[i];
            if (e.day && *e.day != day_) continue;
            active_.push_back(i);
        }
        planted_.resize(cfg_.episodes.size());
    }

    std::vector<OrderEvent> run() {
        const double start = static_cast<double>(cfg_.session.analysis_start().count());
        const double end = static_cast<double>(cfg_.session.analysis_end().count());
        now_ = start;
        seed_book();
        schedule_episodes();

        for (;;) {
            const double rate = total_rate();
            const double t_next = rate > 0.0 ? now_ + std::exponential_distribution<double>(rate)(rng_) * 1e6
                                             : std::numeric_limits<double>::infinity();
            if (!queue_.empty() && queue_.top().t_us <= t_next) {
                const Scheduled s = queue_.top();
                queue_.pop();
                if (s.t_us >= end) break;
                now_ = std::max(now_, s.t_us);
                handle(s);
                continue;
            }
            if (t_next >= end) break;
            if (const auto q = quiet_end(t_next)) {
                now_ = *q;
                continue;
            }
            now_ = t_next;
            fire_stochastic();
        }
        return std::move(out_);
    }

private:
    // -- helpers ----------------------------------------------------------

    Timestamp stamp() const { return Timestamp(static_cast<std::int64_t>(std::floor(now_))); }

    Volume draw_volume() {
        const double v = std::exp(cfg_.volume_log_mean + cfg_.volume_log_sd * normal_(rng_));
        return std::max<Volume>(1, static_cast<Volume>(std::llround(v)));
    }

    int draw_distance() {
        if (cfg_.placement_p >= 1.0) return 1;
        std::geometric_distribution<int> geo(cfg_.placement_p);
        for (;;) {
            const int d = geo(rng_) + 1;
            if (d <= cfg_.max_distance) return d;
        }
    }

    bool uniform_below(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p; }

    BookDelta emit(Op op, Side side, std::optional<Tick> price, Volume volume) {
        OrderEvent ev;
        ev.op = op;
        ev.side = side;
        ev.price = price;
        ev.volume = volume;
        ev.timestamp = stamp();
        BookDelta d = book_.apply(ev);
        out_.push_back(std::move(ev));
        return d;
    }

    void place(BookSide side, Tick price, Volume volume) {
        emit(Op::LO, side == BookSide::Bid ? Side::Buy : Side::Sell, price, volume);
    }
    void cancel(BookSide side, Tick price, Volume volume) {
        emit(Op::C, side == BookSide::Bid ? Side::Buy : Side::Sell, price, volume);
    }

    /// Reference price for LO placement on `side`: the opposite best.
    Tick reference(BookSide side) const {
        const auto& st = book_.state();
        if (const auto opp = st.best(opposite(side))) return *opp;
        if (const auto own = st.best(side)) return side == BookSide::Bid ? *own + 1 : *own - 1;
        return cfg_.initial_mid;
    }

    Tick price_at_distance(BookSide side, int d) const {
        const Tick ref = reference(side);
        return side == BookSide::Bid ? std::max<Tick>(1, ref - d) : ref + d;
    }

    bool episode_active(EpisodeKind kind, BookSide side, double* intensity = nullptr) const {
        const Timestamp t = stamp();
        for (auto i : active_) {
            const auto& e = cfg_.episodes[i];
            if (e.kind == kind && e.side == side && e.active(t)) {
                if (intensity) *intensity = e.intensity;
                return true;
            }
        }
        return false;
    }

    const SideRates& rates(BookSide s) const { return s == BookSide::Bid ? cfg_.bid : cfg_.ask; }

    // -- stochastic flow ----------------------------------------------------

    struct Rates {
        double lo[2], mo[2], c[2];
    };

    double activity() const {
        if (cfg_.activity_amplitude == 0.0) return 1.0;
        const auto a = static_cast<double>(cfg_.session.analysis_start().count());
        const auto b = static_cast<double>(cfg_.session.analysis_end().count());
        return 1.0 + cfg_.activity_amplitude * std::cos(2.0 * M_PI * (now_ - a) / (b - a));
    }

    Rates current_rates() const {
        Rates r{};
        const auto& st = book_.state();
        const double m = activity();
        for (int k = 0; k < 2; ++k) {
            const auto side = static_cast<BookSide>(k);
            const auto& base = rates(side);
            double intensity = 1.0;
            r.lo[k] = base.lo * m;
            if (episode_active(EpisodeKind::depletion, side, &intensity)) r.lo[k] /= intensity;
            r.mo[k] = st.total_volume(side) > 1 ? base.mo * m : 0.0;
            if (episode_active(EpisodeKind::mo_flow_imbalance, side, &intensity)) r.mo[k] *= intensity;
            r.c[k] = base.cancel * m * static_cast<double>(st.total_volume(side)) / cfg_.reference_volume;
        }
        return r;
    }

    double total_rate() const {
        const Rates r = current_rates();
        return r.lo[0] + r.lo[1] + r.mo[0] + r.mo[1] + r.c[0] + r.c[1];
    }

    void fire_stochastic() {
        const Rates r = current_rates();
        const double w[6] = {r.lo[0], r.lo[1], r.mo[0], r.mo[1], r.c[0], r.c[1]};
        double total = 0.0;
        for (double x : w) total += x;
        double u = std::uniform_real_distribution<double>(0.0, total)(rng_);
        int pick = 5;
        for (int k = 0; k < 6; ++k) {
            if (u < w[k]) {
                pick = k;
                break;
            }
            u -= w[k];
        }
        const auto side = static_cast<BookSide>(pick % 2);
        switch (pick / 2) {
            case 0: place(side, price_at_distance(side, draw_distance()), draw_volume()); break;
            case 1: market_order(side); break;
            case 2: random_cancel(side); break;
        }
    }

    void market_order(BookSide hit) {
        const Volume available = book_.state().total_volume(hit);
        if (available <= 1) return;
        const Volume v = std::min(draw_volume(), available - 1);
        const BookDelta d = emit(Op::MO, hit == BookSide::Ask ? Side::Buy : Side::Sell, std::nullopt, v);
        schedule_response(hit, d.executed_volume);
    }

    void schedule_response(BookSide hit, Volume executed) {
        double gain = cfg_.response_gain;
        double intensity = 1.0;
        if (episode_active(EpisodeKind::mo_flow_imbalance, hit, &intensity)) gain /= intensity;
        if (episode_active(EpisodeKind::mo_flow_imbalance, opposite(hit), &intensity)) gain *= intensity;
        const auto v = static_cast<Volume>(std::llround(gain * static_cast<double>(executed)));
        if (v < 1) return;
        const double mean_us = static_cast<double>(cfg_.response_delay.count());
        const double delay = std::exponential_distribution<double>(1.0 / mean_us)(rng_);
        push({now_ + delay, 0, Action::response, hit, v, 0});
    }

    void random_cancel(BookSide side) {
        const auto& st = book_.state();
        const Volume total = st.total_volume(side);
        if (total <= 0) return;
        Volume u = std::uniform_int_distribution<Volume>(0, total - 1)(rng_);
        Tick price = 0;
        Volume level = 0;
        st.for_each_level(side, [&](Tick p, Volume v) {
            if (u < v) {
                price = p;
                level = v;
                return false;
            }
            u -= v;
            return true;
        });
        cancel(side, price, std::min(level, draw_volume()));
    }

    // -- scheduled actions ---------------------------------------------------

    void push(Scheduled s) {
        s.seq = seq_++;
        queue_.push(s);
    }

    void handle(const Scheduled& s) {
        switch (s.action) {
            case Action::wake: break;
            case Action::response: {
                if (const auto q = quiet_end(now_)) {
                    push({*q, 0, Action::response, s.side, s.volume, 0});
                    break;
                }
                const auto best = book_.state().best(s.side);
                place(s.side, best ? *best : price_at_distance(s.side, 1), s.volume);
                break;
            }
            case Action::deplete: deplete(cfg_.episodes[s.episode]); break;
            case Action::recenter: recenter(s.episode); break;
            case Action::shape: shape_and_measure(s.episode); break;
        }
    }

    void schedule_episodes() {
        for (auto i : active_) {
            const auto& e = cfg_.episodes[i];
            const auto t0 = static_cast<double>(e.start.count());
            const auto t1 = static_cast<double>((e.start + e.duration).count());
            if (e.kind == EpisodeKind::depletion) {
                push({t0, 0, Action::deplete, e.side, 0, i});
            } else {
                push({t0, 0, Action::wake, e.side, 0, i});
            }
            push({t1, 0, Action::wake, e.side, 0, i});
            if (e.kind != EpisodeKind::planted_return_rule) continue;

            // Windows on the analysis grid that fit inside the episode. The
            // book is re-drawn 1 ms before each window start and the midprice
            // moved to the target 2 ms before each window end.
            const Duration w = e.rule.window;
            const Timestamp origin = cfg_.session.analysis_start();
            auto k = (e.start - origin + w - Duration(1)) / w;
            for (Timestamp t = origin + w * k; t + w <= e.start + e.duration; t += w) {
                if (t - 2ms <= origin) continue;
                const auto tu = static_cast<double>(t.count());
                push({tu - 2000.0, 0, Action::recenter, e.side, 0, i});
                push({tu - 1000.0, 0, Action::shape, e.side, 0, i});
                quiet_.emplace_back(tu - 2000.0, tu + 1.0);
            }
            // Closing recenter for the last window.
            const Timestamp last_end = origin + w * ((e.start + e.duration - origin) / w);
            if (last_end > origin + w * k) {
                const auto le = static_cast<double>(last_end.count());
                push({le - 2000.0, 0, Action::recenter, e.side, 0, i});
                quiet_.emplace_back(le - 2000.0, le + 1.0);
            }
        }
        std::sort(quiet_.begin(), quiet_.end());
    }

    std::optional<double> quiet_end(double t) {
        while (quiet_pos_ < quiet_.size() && quiet_[quiet_pos_].second <= t) ++quiet_pos_;
        if (quiet_pos_ < quiet_.size() && quiet_[quiet_pos_].first <= t) return quiet_[quiet_pos_].second;
        return std::nullopt;
    }

    void seed_book() {
        for (int d = 0; d < cfg_.initial_depth; ++d) {
            place(BookSide::Bid, cfg_.initial_mid - 1 - d, draw_volume());
            place(BookSide::Ask, cfg_.initial_mid + 1 + d, draw_volume());
        }
    }

    void deplete(const Episode& e) {
        const auto levels = book_.state().levels(e.side);
        const int n = std::min<int>(cfg_.depletion_levels, static_cast<int>(levels.size()));
        const Tick best = levels.empty() ? 0 : levels.front().first;
        for (int k = 0; k < n; ++k) {
            const auto [price, volume] = levels[static_cast<std::size_t>(k)];
            if (std::abs(price - best) >= cfg_.depletion_levels) break;
            Volume keep = static_cast<Volume>(std::floor(static_cast<double>(volume) / e.intensity));
            if (k == 0) keep = std::max<Volume>(keep, 1);
            if (volume > keep) cancel(e.side, price, volume - keep);
        }
    }

    /// Re-draws the levels near both bests, then evaluates the rule on the
    /// resulting book and stores the target for the window that follows.
    void shape_and_measure(std::size_t episode) {
        const auto& e = cfg_.episodes[episode];
        const auto& rule = e.rule;
        const double tilt = rule.shape_tilt * std::uniform_real_distribution<double>(-0.5, 0.5)(rng_);
        for (int k = 0; k < 2; ++k) {
            const auto side = static_cast<BookSide>(k);
            const double factor = std::exp(side == BookSide::Bid ? tilt : -tilt);
            auto best = book_.state().best(side);
            if (!best) {
                place(side, price_at_distance(side, 1), draw_volume());
                best = book_.state().best(side);
            }
            for (int d = 0; d < rule.shape_levels; ++d) {
                const Tick price = side == BookSide::Bid ? *best - d : *best + d;
                if (price <= 0) break;
                Volume target = 0;
                const bool empty = d > 0 && uniform_below(rule.shape_empty_prob);
                const double draw = factor * std::exp(cfg_.volume_log_mean + rule.shape_log_sd * normal_(rng_));
                if (!empty) target = static_cast<Volume>(std::llround(draw));
                if (d == 0) target = std::max<Volume>(target, 1);
                const Volume current = book_.state().volume_at(side, price);
                if (target > current) place(side, price, target - current);
                if (target < current) cancel(side, price, current - target);
            }
        }

        const auto& st = book_.state();
        const double l_bid = side_liquidity(st, BookSide::Bid, rule.depth, rule.delta, rule.norm).value;
        const double l_ask = side_liquidity(st, BookSide::Ask, rule.depth, rule.delta, rule.norm).value;
        const double l_imb = liquidity_imbalance(l_bid, l_ask).value_or(0.0);
        auto& w = planted_[episode];
        w.sum0 = static_cast<double>(*st.best_bid() + *st.best_ask());
        switch (rule.kind) {
            case RuleKind::zero: w.target = 0.0; break;
            case RuleKind::cubic_imbalance:
                w.target = rule.expected(l_imb, 0.0) + rule.noise_sd * normal_(rng_);
                break;
            case RuleKind::power_law: {
                const double drift = std::log(w.sum0 / (2.0 * static_cast<double>(cfg_.initial_mid)));
                const double p_up = std::clamp(0.5 - rule.mean_reversion * drift, 0.05, 0.95);
                const bool up = uniform_below(p_up);
                const double l = up ? l_ask : l_bid;
                const double mag =
                    std::min(rule.expected(0.0, l) * std::exp(rule.noise_sd * normal_(rng_)), rule.max_return);
                w.target = up ? mag : -mag;
                break;
            }
        }
        w.pending = true;
    }

    /// Moves the bests so that their sum equals sum0 · exp(target), rounding
    /// randomly to keep the expected log-return unbiased to first order.
    void recenter(std::size_t episode) {
        auto& w = planted_[episode];
        if (!w.pending) return;
        w.pending = false;
        const auto& st = book_.state();
        const double exact = w.sum0 * std::exp(w.target);
        const double fl = std::floor(exact);
        const auto sum = static_cast<Tick>(fl) + (uniform_below(exact - fl) ? 1 : 0);

        Tick spread = 2;
        if (st.best_bid() && st.best_ask()) spread = *st.best_ask() - *st.best_bid();
        if ((spread - sum) % 2 != 0) spread = spread > 1 ? spread - 1 : spread + 1;
        const Tick ask = (sum + spread) / 2;
        const Tick bid = (sum - spread) / 2;
        if (bid <= 0) throw Error(Errc::feasibility_error, "planted returns drove the price to zero");

        for (const auto& [p, v] : book_.state().levels(BookSide::Ask)) {
            if (p >= ask) break;
            cancel(BookSide::Ask, p, v);
        }
        for (const auto& [p, v] : book_.state().levels(BookSide::Bid)) {
            if (p <= bid) break;
            cancel(BookSide::Bid, p, v);
        }
        if (book_.state().volume_at(BookSide::Ask, ask) == 0) place(BookSide::Ask, ask, draw_volume());
        if (book_.state().volume_at(BookSide::Bid, bid) == 0) place(BookSide::Bid, bid, draw_volume());
    }

    const GeneratorConfig& cfg_;
    int day_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    OrderBook book_;
    std::vector<OrderEvent> out_;
    double now_ = 0.0;
    std::uint64_t seq_ = 0;
    std::priority_queue<Scheduled, std::vector<Scheduled>, std::greater<>> queue_;
    std::vector<std::size_t> active_;
    std::vector<PlantedWindow> planted_;
    std::vector<std::pair<double, double>> quiet_;
    std::size_t quiet_pos_ = 0;
};

}  // namespace

std::vector<OrderEvent> generate_day(const GeneratorConfig& cfg, int day) {
    cfg.validate();
    if (day < 0 || day >= cfg.days) throw Error(Errc::config_error, "day index out of range");
    return DayGenerator(cfg, day).run();
}

std::vector<std::vector<OrderEvent>> generate(const GeneratorConfig& cfg) {
    cfg.validate();
    std::vector<std::vector<OrderEvent>> days(static_cast<std::size_t>(cfg.days));
    parallel_for(days.size(), [&](std::size_t d) { days[d] = DayGenerator(cfg, static_cast<int>(d)).run(); });
    return days;
}

std::vector<std::vector<OrderEvent>> plant_return_rule(const GeneratorConfig& cfg, const PlantedRule& rule) {
    GeneratorConfig c = cfg;
    Episode e;
    e.kind = EpisodeKind::planted_return_rule;
    e.start = cfg.session.analysis_start();
    e.duration = cfg.session.analysis_end() - cfg.session.analysis_start();
    e.rule = rule;
    c.episodes.push_back(e);
    return generate(c);
}

// ---------------------------------------------------------------------------
// JSON

namespace {

template <class E>
E enum_from(const nlohmann::json& j, std::initializer_list<E> values) {
    const auto s = j.get<std::string>();
    for (E v : values)
        if (s == to_string(v)) return v;
    throw Error(Errc::config_error, "unknown value '" + s + "'");
}

double seconds(Duration d) { return std::chrono::duration<double>(d).count(); }
Duration from_seconds(double s) { return Duration(static_cast<std::int64_t>(std::llround(s * 1e6))); }

nlohmann::json rates_json(const SideRates& r) { return {{"lo", r.lo}, {"mo", r.mo}, {"cancel", r.cancel}}; }

void rates_from(const nlohmann::json& j, SideRates& r) {
    r.lo = j.value("lo", r.lo);
    r.mo = j.value("mo", r.mo);
    r.cancel = j.value("cancel", r.cancel);
}

nlohmann::json rule_json(const PlantedRule& r) {
    return {{"kind", to_string(r.kind)},
            {"c", r.c},
            {"K", r.K},
            {"alpha", r.alpha},
            {"noise_sd", r.noise_sd},
            {"max_return", r.max_return},
            {"delta", r.delta},
            {"depth", r.depth},
            {"norm", r.norm},
            {"window_s", seconds(r.window)},
            {"shape_levels", r.shape_levels},
            {"shape_log_sd", r.shape_log_sd},
            {"shape_empty_prob", r.shape_empty_prob},
            {"shape_tilt", r.shape_tilt},
            {"mean_reversion", r.mean_reversion}};
}

void rule_from(const nlohmann::json& j, PlantedRule& r) {
    if (j.contains("kind"))
        r.kind = enum_from(j.at("kind"), {RuleKind::zero, RuleKind::cubic_imbalance, RuleKind::power_law});
    r.c = j.value("c", r.c);
    r.K = j.value("K", r.K);
    r.alpha = j.value("alpha", r.alpha);
    r.noise_sd = j.value("noise_sd", r.noise_sd);
    r.max_return = j.value("max_return", r.max_return);
    r.delta = j.value("delta", r.delta);
    r.depth = j.value("depth", r.depth);
    r.norm = j.value("norm", r.norm);
    if (j.contains("window_s")) r.window = from_seconds(j.at("window_s").get<double>());
    r.shape_levels = j.value("shape_levels", r.shape_levels);
    r.shape_log_sd = j.value("shape_log_sd", r.shape_log_sd);
    r.shape_empty_prob = j.value("shape_empty_prob", r.shape_empty_prob);
    r.shape_tilt = j.value("shape_tilt", r.shape_tilt);
    r.mean_reversion = j.value("mean_reversion", r.mean_reversion);
}

}  // namespace

void to_json(nlohmann::json& j, const GeneratorConfig& cfg) {
    nlohmann::json episodes = nlohmann::json::array();
    for (const auto& e : cfg.episodes) {
        nlohmann::json je{{"kind", to_string(e.kind)},
                          {"start_s", seconds(e.start)},
                          {"duration_s", seconds(e.duration)},
                          {"side", to_string(e.side)},
                          {"intensity", e.intensity}};
        if (e.day) je["day"] = *e.day;
        if (e.kind == EpisodeKind::planted_return_rule) je["rule"] = rule_json(e.rule);
        episodes.push_back(std::move(je));
    }
    j = nlohmann::json{{"seed", cfg.seed},
                       {"days", cfg.days},
                       {"session",
                        {{"open_s", seconds(cfg.session.session_open)},
                         {"close_s", seconds(cfg.session.session_close)},
                         {"open_skip_s", seconds(cfg.session.open_skip)},
                         {"tick_size", cfg.session.tick_size}}},
                       {"initial_mid", cfg.initial_mid},
                       {"initial_depth", cfg.initial_depth},
                       {"bid", rates_json(cfg.bid)},
                       {"ask", rates_json(cfg.ask)},
                       {"activity_amplitude", cfg.activity_amplitude},
                       {"placement_p", cfg.placement_p},
                       {"max_distance", cfg.max_distance},
                       {"volume_log_mean", cfg.volume_log_mean},
                       {"volume_log_sd", cfg.volume_log_sd},
                       {"reference_volume", cfg.reference_volume},
                       {"response_gain", cfg.response_gain},
                       {"response_delay_s", seconds(cfg.response_delay)},
                       {"depletion_levels", cfg.depletion_levels},
                       {"episodes", episodes}};
}

void from_json(const nlohmann::json& j, GeneratorConfig& cfg) {
    try {
        cfg.seed = j.value("seed", cfg.seed);
        cfg.days = j.value("days", cfg.days);
        if (j.contains("session")) {
            const auto& s = j.at("session");
            if (s.contains("open_s")) cfg.session.session_open = from_seconds(s.at("open_s").get<double>());
            if (s.contains("close_s")) cfg.session.session_close = from_seconds(s.at("close_s").get<double>());
            if (s.contains("open_skip_s")) cfg.session.open_skip = from_seconds(s.at("open_skip_s").get<double>());
            cfg.session.tick_size = s.value("tick_size", cfg.session.tick_size);
        }
        cfg.initial_mid = j.value("initial_mid", cfg.initial_mid);
        cfg.initial_depth = j.value("initial_depth", cfg.initial_depth);
        if (j.contains("bid")) rates_from(j.at("bid"), cfg.bid);
        if (j.contains("ask")) rates_from(j.at("ask"), cfg.ask);
        cfg.activity_amplitude = j.value("activity_amplitude", cfg.activity_amplitude);
        cfg.placement_p = j.value("placement_p", cfg.placement_p);
        cfg.max_distance = j.value("max_distance", cfg.max_distance);
        cfg.volume_log_mean = j.value("volume_log_mean", cfg.volume_log_mean);
        cfg.volume_log_sd = j.value("volume_log_sd", cfg.volume_log_sd);
        cfg.reference_volume = j.value("reference_volume", cfg.reference_volume);
        cfg.response_gain = j.value("response_gain", cfg.response_gain);
        if (j.contains("response_delay_s")) cfg.response_delay = from_seconds(j.at("response_delay_s").get<double>());
        cfg.depletion_levels = j.value("depletion_levels", cfg.depletion_levels);
        if (j.contains("episodes")) {
            cfg.episodes.clear();
            for (const auto& je : j.at("episodes")) {
                Episode e;
                e.kind = enum_from(je.at("kind"), {EpisodeKind::mo_flow_imbalance, EpisodeKind::depletion,
                                                   EpisodeKind::planted_return_rule});
                if (je.contains("day")) e.day = je.at("day").get<int>();
                e.start = from_seconds(je.at("start_s").get<double>());
                e.duration = from_seconds(je.at("duration_s").get<double>());
                if (je.contains("side")) e.side = enum_from(je.at("side"), {BookSide::Bid, BookSide::Ask});
                e.intensity = je.value("intensity", e.intensity);
                if (je.contains("rule")) rule_from(je.at("rule"), e.rule);
                cfg.episodes.push_back(e);
            }
        }
    } catch (const nlohmann::json::exception& ex) {
        throw Error(Errc::config_error, ex.what());
    }
}

GeneratorConfig load_generator_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw Error(Errc::config_error, path.string() + ": " + ex.what());
    }
    GeneratorConfig cfg;
    from_json(j, cfg);
    cfg.validate();
    return cfg;
}

}  // namespace lobliq
