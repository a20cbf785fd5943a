#include "lobliq/flow_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lobliq/parallel.hpp"

namespace lobliq {

const char* to_string(ResponseCondition c) {
    switch (c) {
        case ResponseCondition::all: return "all";
        case ResponseCondition::positive_events: return "positive_events";
        case ResponseCondition::negative_events: return "negative_events";
    }
    return "?";
}

FrameFlow classify_frame(const ReplayFrame& frame) {
    FrameFlow out;
    const auto& ev = frame.event;
    const auto& d = frame.delta;
    switch (ev.op) {
        case Op::MO:
            out.side(contra_side(ev.side)).mo += d.executed_volume;
            break;
        case Op::LO: {
            out.side(contra_side(ev.side)).mo += d.executed_volume;
            if (d.rested_volume > 0) {
                const BookSide own = resting_side(ev.side);
                auto& f = out.side(own);
                f.lo += d.rested_volume;
                const auto best = d.best_before(own);
                const Tick p = *ev.price;
                const bool at_best = !best || (own == BookSide::Bid ? p >= *best : p <= *best);
                if (at_best) f.lo_best += d.rested_volume;
            }
            break;
        }
        case Op::C: {
            if (d.cancelled_volume == 0) break;
            // Resolved by reference, the cancelled level may differ from the message fields.
            const auto& lc = d.levels_touched.front();
            auto& f = out.side(lc.side);
            f.c += d.cancelled_volume;
            const auto best = d.best_before(lc.side);
            if (best && *best == lc.price) f.c_best += d.cancelled_volume;
            break;
        }
    }
    return out;
}

std::optional<std::array<double, 3>> relative_flows(const FlowRecord& r) {
    const Volume total = r.total();
    if (total <= 0) return std::nullopt;
    const auto t = static_cast<double>(total);
    return std::array<double, 3>{static_cast<double>(r.lo) / t, static_cast<double>(r.mo) / t,
                                 static_cast<double>(r.c) / t};
}

FlowIndex::FlowIndex(std::span<const ReplayLog> days) : days_(days.size()) {
    parallel_for(days.size(), [&](std::size_t d) {
        auto& out = days_[d];
        const auto frames = days[d].frames();
        out.ts.reserve(frames.size());
        out.prefix.assign(frames.size() + 1, {});
        for (std::size_t i = 0; i < frames.size(); ++i) {
            out.ts.push_back(frames[i].timestamp());
            const FrameFlow f = classify_frame(frames[i]);
            const std::array<Volume, 10> v{f.bid.lo, f.bid.lo_best, f.bid.mo, f.bid.c, f.bid.c_best,
                                           f.ask.lo, f.ask.lo_best, f.ask.mo, f.ask.c, f.ask.c_best};
            for (std::size_t k = 0; k < v.size(); ++k) out.prefix[i + 1][k] = out.prefix[i][k] + v[k];
        }
    });
}

FlowRecord FlowIndex::totals(std::size_t day, BookSide side, bool at_best, Timestamp from, Timestamp to) const {
    FlowRecord r;
    r.start = from;
    if (day >= days_.size()) throw Error(Errc::parameter_error, "day index out of range");
    if (to <= from) return r;
    const auto& d = days_[day];
    const auto lo_i = static_cast<std::size_t>(std::lower_bound(d.ts.begin(), d.ts.end(), from) - d.ts.begin());
    const auto hi_i = static_cast<std::size_t>(std::lower_bound(d.ts.begin(), d.ts.end(), to) - d.ts.begin());
    const std::size_t base = side == BookSide::Bid ? 0 : 5;
    auto sum = [&](std::size_t k) { return d.prefix[hi_i][base + k] - d.prefix[lo_i][base + k]; };
    r.lo = at_best ? sum(1) : sum(0);
    r.mo = sum(2);
    r.c = at_best ? sum(4) : sum(3);
    return r;
}

namespace {

struct RatioAccumulator {
    std::array<double, 3> sum{};
    std::array<double, 3> sum_sq{};
    std::size_t n = 0;

    void add(const std::array<double, 3>& r) {
        for (int k = 0; k < 3; ++k) {
            sum[k] += r[k];
            sum_sq[k] += r[k] * r[k];
        }
        ++n;
    }
    [[nodiscard]] double mean(int k) const { return n ? sum[k] / static_cast<double>(n) : 0.0; }
    [[nodiscard]] double se(int k) const {
        if (n < 2) return 0.0;
        const double nn = static_cast<double>(n);
        const double m = sum[k] / nn;
        const double var = std::max(0.0, (sum_sq[k] - nn * m * m) / (nn - 1.0));
        return std::sqrt(var / nn);
    }
};

void validate(const FlowCurveParams& p) {
    if (p.subinterval <= Duration::zero() || p.range <= Duration::zero())
        throw Error(Errc::parameter_error, "range and subinterval must be positive");
    if (p.range % p.subinterval != Duration::zero())
        throw Error(Errc::parameter_error, "range must be a multiple of the subinterval");
}

std::array<double, 3> pooled_ratio(const std::vector<FlowRecord>& records, std::size_t skip) {
    Volume lo = 0, mo = 0, c = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (i == skip) continue;
        lo += records[i].lo;
        mo += records[i].mo;
        c += records[i].c;
    }
    const auto r = relative_flows(FlowRecord{Timestamp{0}, lo, mo, c});
    return r ? *r : std::array<double, 3>{0.0, 0.0, 0.0};
}

/// Pooled ratio with jackknife standard errors.
void pooled_stats(const std::vector<FlowRecord>& records, std::array<double, 3>& mean, std::array<double, 3>& se) {
    mean = pooled_ratio(records, records.size());
    se = {0.0, 0.0, 0.0};
    const std::size_t n = records.size();
    if (n < 2) return;
    std::vector<std::array<double, 3>> loo(n);
    std::array<double, 3> loo_mean{};
    for (std::size_t i = 0; i < n; ++i) {
        loo[i] = pooled_ratio(records, i);
        for (int k = 0; k < 3; ++k) loo_mean[k] += loo[i][k] / static_cast<double>(n);
    }
    for (int k = 0; k < 3; ++k) {
        double ss = 0.0;
        for (const auto& r : loo) ss += (r[k] - loo_mean[k]) * (r[k] - loo_mean[k]);
        se[k] = std::sqrt(ss * static_cast<double>(n - 1) / static_cast<double>(n));
    }
}

}  // namespace

std::array<double, 3> baseline_flows(const FlowIndex& index, BookSide side, const SessionConfig& session,
                                     const FlowCurveParams& params) {
    validate(params);
    RatioAccumulator acc;
    std::vector<FlowRecord> records;
    for (std::size_t d = 0; d < index.days(); ++d) {
        for (Timestamp t = session.analysis_start(); t + params.subinterval <= session.analysis_end();
             t += params.subinterval) {
            const FlowRecord r = index.totals(d, side, params.at_best_only, t, t + params.subinterval);
            if (params.averaging == FlowAveraging::pooled) {
                records.push_back(r);
            } else if (const auto ratios = relative_flows(r)) {
                acc.add(*ratios);
            }
        }
    }
    if (params.averaging == FlowAveraging::pooled) return pooled_ratio(records, records.size());
    return {acc.mean(0), acc.mean(1), acc.mean(2)};
}

FlowCurve relative_flow_curve(const FlowIndex& index, std::span<const LargeEvent> events, BookSide side,
                              Sign event_sign, const SessionConfig& session, const FlowCurveParams& params) {
    validate(params);
    std::vector<const LargeEvent*> selected;
    for (const auto& ev : events)
        if (ev.sign == event_sign) selected.push_back(&ev);
    if (selected.size() < std::max<std::size_t>(params.min_events, 1))
        throw Error(Errc::insufficient_sample, "only " + std::to_string(selected.size()) + " " + to_string(event_sign) +
                                                   " events, need " + std::to_string(params.min_events));

    const auto n_sub = static_cast<std::size_t>(params.range / params.subinterval);
    FlowCurve curve;
    curve.side = side;
    curve.event_sign = event_sign;
    curve.at_best_only = params.at_best_only;
    curve.averaging = params.averaging;
    curve.n_events = selected.size();

    // records[e][k]: subinterval k (ascending offset) of event e; start < 0 marks missing.
    std::vector<std::vector<std::optional<FlowRecord>>> records(selected.size());
    parallel_for(selected.size(), [&](std::size_t e) {
        const LargeEvent& ev = *selected[e];
        auto& row = records[e];
        row.resize(n_sub);
        for (std::size_t k = 0; k < n_sub; ++k) {
            const Timestamp from = ev.window_end() - params.range + params.subinterval * static_cast<long>(k);
            if (from < session.analysis_start()) continue;
            row[k] = index.totals(ev.day, side, params.at_best_only, from, from + params.subinterval);
        }
    });

    const double sub_s = std::chrono::duration<double>(params.subinterval).count();
    const double range_s = std::chrono::duration<double>(params.range).count();
    curve.per_event.assign(selected.size(), std::vector<std::optional<std::array<double, 3>>>(n_sub));
    for (std::size_t e = 0; e < selected.size(); ++e)
        for (std::size_t k = 0; k < n_sub; ++k)
            if (records[e][k]) curve.per_event[e][k] = relative_flows(*records[e][k]);

    for (std::size_t k = 0; k < n_sub; ++k) {
        curve.offsets.push_back(-range_s + (static_cast<double>(k) + 0.5) * sub_s);
        std::array<double, 3> mean{}, se{};
        std::size_t count = 0;
        if (params.averaging == FlowAveraging::ratio) {
            RatioAccumulator acc;
            for (std::size_t e = 0; e < selected.size(); ++e)
                if (curve.per_event[e][k]) acc.add(*curve.per_event[e][k]);
            for (int c = 0; c < 3; ++c) {
                mean[c] = acc.mean(c);
                se[c] = acc.se(c);
            }
            count = acc.n;
        } else {
            std::vector<FlowRecord> col;
            for (std::size_t e = 0; e < selected.size(); ++e)
                if (records[e][k] && records[e][k]->total() > 0) col.push_back(*records[e][k]);
            if (!col.empty()) pooled_stats(col, mean, se);
            count = col.size();
        }
        curve.r_lo.push_back(mean[0]);
        curve.r_mo.push_back(mean[1]);
        curve.r_c.push_back(mean[2]);
        curve.se_lo.push_back(se[0]);
        curve.se_mo.push_back(se[1]);
        curve.se_c.push_back(se[2]);
        curve.counts.push_back(count);
    }

    const auto base = baseline_flows(index, side, session, params);
    curve.baseline_lo = base[0];
    curve.baseline_mo = base[1];
    curve.baseline_c = base[2];
    return curve;
}

std::vector<Point> response_points(const FlowIndex& index, BookSide side, ResponseCondition condition,
                                   std::span<const LargeEvent> events, Duration delta_t, const SessionConfig& session,
                                   bool at_best_only) {
    if (delta_t <= Duration::zero()) throw Error(Errc::parameter_error, "delta_t must be positive");
    std::vector<Point> points;
    auto add = [&](std::size_t day, Timestamp from, Timestamp to) {
        const FlowRecord r = index.totals(day, side, at_best_only, from, to);
        points.push_back({static_cast<double>(r.mo), static_cast<double>(r.lo)});
    };
    if (condition == ResponseCondition::all) {
        for (std::size_t d = 0; d < index.days(); ++d)
            for (Timestamp t = session.analysis_start(); t + delta_t <= session.analysis_end(); t += delta_t)
                add(d, t, t + delta_t);
    } else {
        const Sign wanted = condition == ResponseCondition::positive_events ? Sign::Positive : Sign::Negative;
        for (const auto& ev : events)
            if (ev.sign == wanted) add(ev.day, ev.window_start, ev.window_end());
    }
    return points;
}

ConditionalCurve equal_count_binning(std::span<const Point> points, int n_bins) {
    if (n_bins < 1) throw Error(Errc::parameter_error, "need at least one bin");
    if (points.empty()) throw Error(Errc::insufficient_sample, "no points to bin");
    std::vector<Point> sorted(points.begin(), points.end());
    std::stable_sort(sorted.begin(), sorted.end(), [](const Point& a, const Point& b) { return a.x < b.x; });
    const std::size_t n = sorted.size();
    const std::size_t bins = std::min<std::size_t>(static_cast<std::size_t>(n_bins), n);
    ConditionalCurve curve;
    for (std::size_t b = 0; b < bins; ++b) {
        const std::size_t lo = b * n / bins, hi = (b + 1) * n / bins;
        const auto m = static_cast<double>(hi - lo);
        double sx = 0.0, sy = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            sx += sorted[i].x;
            sy += sorted[i].y;
        }
        const double my = sy / m;
        double ss = 0.0;
        for (std::size_t i = lo; i < hi; ++i) ss += (sorted[i].y - my) * (sorted[i].y - my);
        const double se = hi - lo > 1 ? std::sqrt(ss / (m - 1.0) / m) : 0.0;
        curve.bin_centers.push_back(sx / m);
        curve.lower.push_back(sorted[lo].x);
        curve.upper.push_back(sorted[hi - 1].x);
        curve.means.push_back(my);
        curve.se.push_back(se);
        curve.bars.push_back(2.0 * se);
        curve.counts.push_back(hi - lo);
    }
    return curve;
}

ResponseFit response_fit(std::span<const Point> points, BookSide side, ResponseCondition condition, int n_bins) {
    ResponseFit out;
    out.side = side;
    out.condition = condition;
    out.fit = ordinary_least_squares(points);
    out.binned = equal_count_binning(points, n_bins);
    return out;
}

}  // namespace lobliq
