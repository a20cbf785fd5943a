#include "lobliq/event_detection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lobliq/parallel.hpp"

namespace lobliq {

std::size_t VolatilityProfile::bucket_of(Timestamp t) const {
    if (sigma.empty()) throw Error(Errc::parameter_error, "empty volatility profile");
    if (t < Timestamp::zero()) return 0;
    const auto b = static_cast<std::size_t>(t / bucket_width);
    return std::min(b, sigma.size() - 1);
}

Duration default_bucket_width(Duration delta_t) { return delta_t >= 15min ? Duration(5min) : Duration(1min); }

std::vector<WindowReturn> operation_window_returns(const ReplayLog& day, Duration delta_t, Timestamp session_end) {
    std::vector<WindowReturn> out;
    const auto frames = day.frames();
    std::size_t end = 0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const Timestamp start = frames[i].timestamp();
        const Timestamp stop = start + delta_t;
        if (stop > session_end) break;
        const auto m0 = frames[i].midprice();
        // Last frame with timestamp <= stop; monotone in i.
        if (end < i) end = i;
        while (end + 1 < frames.size() && frames[end + 1].timestamp() <= stop) ++end;
        if (!m0) continue;
        const auto m1 = frames[end].midprice();
        if (!m1) continue;
        out.push_back({i, start, std::log(*m1) - std::log(*m0)});
    }
    return out;
}

namespace {

struct BucketSums {
    std::vector<double> sum;
    std::vector<double> sum_sq;
    std::vector<std::size_t> count;
};

}  // namespace

VolatilityProfile compute_volatility_profile(std::span<const ReplayLog> days, Duration delta_t, Duration bucket_width,
                                             const SessionConfig& session, VolatilityMeasure measure) {
    if (delta_t <= Duration::zero()) throw Error(Errc::parameter_error, "delta_t must be positive");
    if (bucket_width <= Duration::zero()) throw Error(Errc::parameter_error, "bucket_width must be positive");
    if (days.empty()) throw Error(Errc::insufficient_sample, "no trading days");

    VolatilityProfile profile;
    profile.delta_t = delta_t;
    profile.bucket_width = bucket_width;
    profile.session_length = session.length();
    profile.measure = measure;
    const auto n_buckets = static_cast<std::size_t>((session.length() + bucket_width - Duration(1)) / bucket_width);

    std::vector<BucketSums> per_day(days.size());
    parallel_for(days.size(), [&](std::size_t d) {
        auto& acc = per_day[d];
        acc.sum.assign(n_buckets, 0.0);
        acc.sum_sq.assign(n_buckets, 0.0);
        acc.count.assign(n_buckets, 0);
        for (const auto& w : operation_window_returns(days[d], delta_t, session.analysis_end())) {
            if (w.start < Timestamp::zero()) continue;
            const auto b = std::min(static_cast<std::size_t>(w.start / bucket_width), n_buckets - 1);
            acc.sum[b] += measure == VolatilityMeasure::mean_abs ? std::abs(w.log_return) : w.log_return;
            acc.sum_sq[b] += w.log_return * w.log_return;
            ++acc.count[b];
        }
    });

    std::vector<double> sum(n_buckets, 0.0), sum_sq(n_buckets, 0.0);
    profile.sample_counts.assign(n_buckets, 0);
    for (const auto& acc : per_day) {
        for (std::size_t b = 0; b < n_buckets; ++b) {
            sum[b] += acc.sum[b];
            sum_sq[b] += acc.sum_sq[b];
            profile.sample_counts[b] += acc.count[b];
        }
    }

    profile.sigma.assign(n_buckets, 0.0);
    profile.filled.assign(n_buckets, false);
    bool any = false;
    for (std::size_t b = 0; b < n_buckets; ++b) {
        const auto n = profile.sample_counts[b];
        if (n == 0) continue;
        any = true;
        const double mean = sum[b] / static_cast<double>(n);
        if (measure == VolatilityMeasure::mean_abs) {
            profile.sigma[b] = mean;
        } else {
            const double var = n > 1 ? (sum_sq[b] - static_cast<double>(n) * mean * mean) / static_cast<double>(n - 1) : 0.0;
            profile.sigma[b] = std::sqrt(std::max(var, 0.0));
        }
    }
    if (!any) throw Error(Errc::insufficient_sample, "no window returns in any time-of-day bucket");

    // Empty buckets borrow from the nearest populated bucket (earlier wins ties).
    for (std::size_t b = 0; b < n_buckets; ++b) {
        if (profile.sample_counts[b] != 0) continue;
        for (std::size_t k = 1; k < n_buckets; ++k) {
            if (b >= k && profile.sample_counts[b - k] != 0) {
                profile.sigma[b] = profile.sigma[b - k];
                break;
            }
            if (b + k < n_buckets && profile.sample_counts[b + k] != 0) {
                profile.sigma[b] = profile.sigma[b + k];
                break;
            }
        }
        profile.filled[b] = true;
    }
    return profile;
}

std::vector<LargeEvent> detect_large_events(std::span<const ReplayLog> days, const VolatilityProfile& profile,
                                            const DetectionParams& params, const SessionConfig& session) {
    if (profile.delta_t != params.delta_t)
        throw Error(Errc::parameter_error, "volatility profile was computed for a different delta_t");
    if (params.abs_threshold < 0.0 || params.vol_multiplier < 0.0)
        throw Error(Errc::parameter_error, "thresholds must be non-negative");

    std::vector<std::vector<LargeEvent>> per_day(days.size());
    parallel_for(days.size(), [&](std::size_t d) {
        auto& out = per_day[d];
        std::optional<Timestamp> last_trigger;
        for (const auto& w : operation_window_returns(days[d], params.delta_t, session.analysis_end())) {
            const double magnitude = std::abs(w.log_return);
            const bool large = magnitude > params.abs_threshold &&
                               magnitude > params.vol_multiplier * profile.sigma_at(w.start);
            if (!large) continue;
            const bool new_cluster = !last_trigger || w.start - *last_trigger >= params.delta_t;
            last_trigger = w.start;
            if (!new_cluster) continue;
            out.push_back(LargeEvent{d, w.start, params.delta_t, w.log_return,
                                     w.log_return > 0 ? Sign::Positive : Sign::Negative, w.index});
        }
    });

    std::vector<LargeEvent> events;
    for (auto& v : per_day) events.insert(events.end(), v.begin(), v.end());
    return events;
}

std::vector<LargeEvent> decluster(std::span<const LargeEvent> events, Duration min_gap) {
    std::vector<LargeEvent> kept;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& ev = events[i];
        if (i > 0) {
            const auto& prev = events[i - 1];
            if (prev.day > ev.day || (prev.day == ev.day && prev.window_start > ev.window_start))
                throw Error(Errc::parameter_error, "events must be sorted by (day, window_start)");
        }
        if (!kept.empty() && kept.back().day == ev.day && ev.window_start - kept.back().window_start < min_gap) continue;
        kept.push_back(ev);
    }
    return kept;
}

}  // namespace lobliq
