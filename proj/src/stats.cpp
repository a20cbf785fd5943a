#include "lobliq/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "lobliq/parallel.hpp"

namespace lobliq {

namespace {

double two_sided_p(double t, double dof) {
    if (!std::isfinite(t)) return 0.0;
    if (dof < 1.0) return 1.0;
    boost::math::students_t dist(dof);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

}  // namespace

LinearFit ordinary_least_squares(std::span<const Point> points) {
    const std::size_t n = points.size();
    if (n < 3) throw Error(Errc::fit_error, "need at least 3 points, got " + std::to_string(n));
    double mx = 0.0, my = 0.0;
    for (const auto& p : points) {
        mx += p.x;
        my += p.y;
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& p : points) {
        const double dx = p.x - mx, dy = p.y - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (!(sxx > 0.0)) throw Error(Errc::fit_error, "regressor has zero variance");

    LinearFit fit;
    fit.n_points = n;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (const auto& p : points) {
        const double r = p.y - (fit.intercept + fit.slope * p.x);
        ss_res += r * r;
    }
    const double s2 = ss_res / static_cast<double>(n - 2);
    fit.se_slope = std::sqrt(s2 / sxx);
    fit.se_intercept = std::sqrt(s2 * (1.0 / static_cast<double>(n) + mx * mx / sxx));
    fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    fit.p_value_slope = fit.se_slope > 0.0 ? two_sided_p(fit.slope / fit.se_slope, static_cast<double>(n - 2))
                                           : (fit.slope != 0.0 ? 0.0 : 1.0);
    return fit;
}

namespace {

FitResult nonlinear_power_law(std::span<const Point> points, const FitResult& start) {
    const std::size_t n = points.size();
    double K = start.K, alpha = start.alpha;
    std::vector<double> logx(n);
    for (std::size_t i = 0; i < n; ++i) logx[i] = std::log(points[i].x);

    auto sse = [&](double k, double a) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = points[i].y - k * std::exp(-a * logx[i]);
            s += r * r;
        }
        return s;
    };

    // Levenberg-Marquardt on (K, alpha).
    double lambda = 1e-3;
    double current = sse(K, alpha);
    double jtj[2][2] = {};
    for (int iter = 0; iter < 200; ++iter) {
        double g0 = 0.0, g1 = 0.0;
        jtj[0][0] = jtj[0][1] = jtj[1][1] = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double f = std::exp(-alpha * logx[i]);
            const double j0 = f;
            const double j1 = -K * f * logx[i];
            const double r = points[i].y - K * f;
            jtj[0][0] += j0 * j0;
            jtj[0][1] += j0 * j1;
            jtj[1][1] += j1 * j1;
            g0 += j0 * r;
            g1 += j1 * r;
        }
        bool improved = false;
        for (int attempt = 0; attempt < 20 && !improved; ++attempt) {
            const double a00 = jtj[0][0] * (1.0 + lambda), a11 = jtj[1][1] * (1.0 + lambda), a01 = jtj[0][1];
            const double det = a00 * a11 - a01 * a01;
            if (!(std::abs(det) > 0.0)) break;
            const double dK = (a11 * g0 - a01 * g1) / det;
            const double dA = (a00 * g1 - a01 * g0) / det;
            const double trial = sse(K + dK, alpha + dA);
            if (trial < current) {
                const double rel = (current - trial) / std::max(current, 1e-300);
                K += dK;
                alpha += dA;
                current = trial;
                lambda = std::max(lambda / 10.0, 1e-12);
                improved = true;
                if (rel < 1e-14) iter = 1 << 20;
            } else {
                lambda *= 10.0;
            }
        }
        if (!improved) break;
    }

    FitResult fit;
    fit.space = FitSpace::nonlinear;
    fit.n_points = n;
    fit.K = K;
    fit.alpha = alpha;
    const double det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[0][1];
    const double s2 = current / static_cast<double>(n - 2);
    if (det > 0.0) {
        fit.se_K = std::sqrt(s2 * jtj[1][1] / det);
        fit.se_alpha = std::sqrt(s2 * jtj[0][0] / det);
    }
    double my = 0.0;
    for (const auto& p : points) my += p.y;
    my /= static_cast<double>(n);
    double ss_tot = 0.0;
    for (const auto& p : points) ss_tot += (p.y - my) * (p.y - my);
    fit.r_squared = ss_tot > 0.0 ? 1.0 - current / ss_tot : 1.0;
    fit.p_value_alpha = fit.se_alpha > 0.0 ? two_sided_p(fit.alpha / fit.se_alpha, static_cast<double>(n - 2)) : 0.0;
    return fit;
}

}  // namespace

FitResult power_law_fit(std::span<const Point> points, FitSpace space) {
    if (points.size() < 3) throw Error(Errc::fit_error, "need at least 3 points, got " + std::to_string(points.size()));
    std::vector<Point> logged;
    logged.reserve(points.size());
    for (const auto& p : points) {
        if (!(p.x > 0.0) || !(p.y > 0.0)) throw Error(Errc::domain_error, "power-law fit needs strictly positive points");
        logged.push_back({std::log(p.x), std::log(p.y)});
    }
    const LinearFit line = ordinary_least_squares(logged);
    FitResult fit;
    fit.n_points = points.size();
    fit.K = std::exp(line.intercept);
    fit.alpha = -line.slope;
    fit.se_K = fit.K * line.se_intercept;
    fit.se_alpha = line.se_slope;
    fit.r_squared = line.r_squared;
    fit.p_value_alpha = line.p_value_slope;
    if (space == FitSpace::nonlinear) return nonlinear_power_law(points, fit);
    return fit;
}

// ---------------------------------------------------------------------------
// Binning

namespace {

struct RawBin {
    double lower = 0.0;
    double upper = 0.0;
    std::vector<std::size_t> members;
};

std::string format_range(double lo, double hi) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "[%.6g, %.6g)", lo, hi);
    return buf;
}

/// Drops empty bins (with a warning) and merges runs of under-filled bins.
std::vector<RawBin> merge_bins(std::vector<RawBin> bins, std::size_t min_count, std::vector<std::string>& warnings) {
    std::vector<RawBin> occupied;
    for (auto& b : bins) {
        if (b.members.empty()) {
            warnings.push_back("empty bin " + format_range(b.lower, b.upper) + " dropped");
            continue;
        }
        occupied.push_back(std::move(b));
    }
    std::vector<RawBin> merged;
    RawBin pending;
    bool open = false;
    for (auto& b : occupied) {
        if (!open) {
            pending = std::move(b);
            open = true;
        } else {
            pending.upper = b.upper;
            pending.members.insert(pending.members.end(), b.members.begin(), b.members.end());
        }
        if (pending.members.size() >= min_count) {
            merged.push_back(std::move(pending));
            open = false;
        }
    }
    if (open) {
        if (merged.empty()) {
            warnings.push_back("only " + std::to_string(pending.members.size()) +
                               " samples in total, below the minimum bin count");
            merged.push_back(std::move(pending));
        } else {
            auto& last = merged.back();
            last.upper = pending.upper;
            last.members.insert(last.members.end(), pending.members.begin(), pending.members.end());
        }
    }
    return merged;
}

void mean_and_se(const std::vector<std::size_t>& members, std::span<const double> values, double& mean, double& se) {
    const auto n = static_cast<double>(members.size());
    double sum = 0.0;
    for (auto i : members) sum += values[i];
    mean = sum / n;
    if (members.size() < 2) {
        se = 0.0;
        return;
    }
    double ss = 0.0;
    for (auto i : members) ss += (values[i] - mean) * (values[i] - mean);
    se = std::sqrt(ss / (n - 1.0) / n);
}

}  // namespace

ConditionalCurve log_binning(std::span<const Point> points, int n_bins, std::size_t min_count) {
    if (n_bins < 2) throw Error(Errc::parameter_error, "log binning needs at least 2 bins");
    if (points.empty()) throw Error(Errc::insufficient_sample, "no points to bin");
    double lo = points.front().x, hi = points.front().x;
    for (const auto& p : points) {
        if (!(p.x > 0.0)) throw Error(Errc::domain_error, "log binning needs positive abscissae");
        lo = std::min(lo, p.x);
        hi = std::max(hi, p.x);
    }
    const double log_lo = std::log(lo);
    const double span = std::log(hi) - log_lo;

    std::vector<RawBin> bins(static_cast<std::size_t>(n_bins));
    for (int k = 0; k < n_bins; ++k) {
        bins[k].lower = std::exp(log_lo + span * k / n_bins);
        bins[k].upper = std::exp(log_lo + span * (k + 1) / n_bins);
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
        int k = span > 0.0 ? static_cast<int>(std::floor((std::log(points[i].x) - log_lo) / span * n_bins)) : 0;
        k = std::clamp(k, 0, n_bins - 1);
        bins[k].members.push_back(i);
    }

    ConditionalCurve curve;
    std::vector<double> ys(points.size()), logxs(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        ys[i] = points[i].y;
        logxs[i] = std::log(points[i].x);
    }
    for (const auto& b : merge_bins(std::move(bins), min_count, curve.warnings)) {
        double mean = 0.0, se = 0.0, log_center = 0.0, unused = 0.0;
        mean_and_se(b.members, ys, mean, se);
        mean_and_se(b.members, logxs, log_center, unused);
        curve.bin_centers.push_back(std::exp(log_center));
        curve.lower.push_back(b.lower);
        curve.upper.push_back(b.upper);
        curve.means.push_back(mean);
        curve.se.push_back(se);
        curve.bars.push_back(2.0 * se);
        curve.counts.push_back(b.members.size());
    }
    return curve;
}

std::vector<Point> liquidity_return_points(std::span<const BookWindow> windows, double delta, Sign sign, double norm,
                                           double return_scale) {
    if (!(return_scale > 0.0)) throw Error(Errc::parameter_error, "return scale must be positive");
    std::vector<Point> points;
    for (const auto& w : windows) {
        if (!w.log_return) continue;
        const double r = *w.log_return;
        if (sign == Sign::Positive ? !(r > 0.0) : !(r < 0.0)) continue;
        const auto& profile = sign == Sign::Positive ? w.ask_profile : w.bid_profile;
        if (profile.empty()) continue;
        const double L = exponential_liquidity(profile, delta, norm);
        if (!(L > 0.0)) continue;
        points.push_back({L, std::abs(r) / return_scale});
    }
    return points;
}

DeltaScan delta_scan(std::span<const BookWindow> windows, std::span<const double> delta_values, Sign sign, double norm,
                     double return_scale) {
    if (delta_values.empty()) throw Error(Errc::parameter_error, "no delta values to scan");
    for (double d : delta_values)
        if (!(d > 0.0)) throw Error(Errc::parameter_error, "delta values must be positive");

    DeltaScan scan;
    scan.sign = sign;
    scan.entries.resize(delta_values.size());
    parallel_for(delta_values.size(), [&](std::size_t k) {
        auto& e = scan.entries[k];
        e.delta = delta_values[k];
        try {
            const auto points = liquidity_return_points(windows, e.delta, sign, norm, return_scale);
            e.fit = power_law_fit(points);
            e.r_squared = e.fit.r_squared;
            e.valid = true;
        } catch (const Error& err) {
            e.valid = false;
            e.error = err.what();
        }
    });
    for (const auto& e : scan.entries) {
        if (!e.valid) continue;
        if (!scan.best_delta) {
            scan.best_delta = e.delta;
            continue;
        }
        const auto best = std::find_if(scan.entries.begin(), scan.entries.end(),
                                       [&](const DeltaScanEntry& x) { return x.delta == *scan.best_delta; });
        if (e.r_squared > best->r_squared) scan.best_delta = e.delta;
    }
    return scan;
}

ImbalanceConditionals imbalance_conditionals(std::span<const ImbalanceSample> samples, int n_bins,
                                             std::size_t min_count) {
    if (n_bins < 1) throw Error(Errc::parameter_error, "need at least one imbalance bin");
    std::vector<RawBin> bins(static_cast<std::size_t>(n_bins));
    const double width = 2.0 / n_bins;
    for (int k = 0; k < n_bins; ++k) {
        bins[k].lower = -1.0 + width * k;
        bins[k].upper = k + 1 == n_bins ? 1.0 : -1.0 + width * (k + 1);
    }
    std::vector<double> xs(samples.size()), rs(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double x = samples[i].imbalance;
        if (!(x >= -1.0 && x <= 1.0)) throw Error(Errc::domain_error, "imbalance outside [-1, 1]");
        const int k = std::clamp(static_cast<int>(std::floor((x + 1.0) / width)), 0, n_bins - 1);
        bins[k].members.push_back(i);
        xs[i] = x;
        rs[i] = samples[i].log_return;
    }

    ImbalanceConditionals out;
    auto& curve = out.mean_return;
    for (const auto& b : merge_bins(std::move(bins), min_count, curve.warnings)) {
        double mean = 0.0, se = 0.0, center = 0.0, unused = 0.0;
        mean_and_se(b.members, rs, mean, se);
        mean_and_se(b.members, xs, center, unused);
        curve.bin_centers.push_back(center);
        curve.lower.push_back(b.lower);
        curve.upper.push_back(b.upper);
        curve.means.push_back(mean);
        curve.se.push_back(se);
        curve.bars.push_back(2.0 * se);
        curve.counts.push_back(b.members.size());

        std::size_t pos = 0, neg = 0;
        for (auto i : b.members) {
            if (rs[i] > 0.0) ++pos;
            if (rs[i] < 0.0) ++neg;
        }
        const auto n = static_cast<double>(b.members.size());
        const double fp = static_cast<double>(pos) / n;
        const double fn = static_cast<double>(neg) / n;
        out.frequencies.positive.push_back(fp);
        out.frequencies.negative.push_back(fn);
        out.frequencies.zero.push_back(1.0 - (fp + fn));
    }
    return out;
}

}  // namespace lobliq
