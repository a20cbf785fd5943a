#include "lobliq/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lobliq/parallel.hpp"

namespace lobliq {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(Preset p) {
    switch (p) {
        case Preset::large_scale: return "large_scale";
        case Preset::short_scale: return "short_scale";
        case Preset::custom: return "custom";
    }
    return "?";
}

Preset preset_from_string(const std::string& s) {
    for (Preset p : {Preset::large_scale, Preset::short_scale, Preset::custom})
        if (s == to_string(p)) return p;
    throw Error(Errc::config_error, "unknown preset '" + s + "'");
}

const char* to_string(Stage s) {
    switch (s) {
        case Stage::usage: return "usage";
        case Stage::ingestion: return "ingestion";
        case Stage::detection: return "detection";
        case Stage::flows: return "flows";
        case Stage::liquidity: return "liquidity";
        case Stage::fit: return "fit";
        case Stage::output: return "output";
    }
    return "?";
}

ResolvedParams resolve(const RunManifest& m) {
    ResolvedParams r;
    switch (m.preset) {
        case Preset::large_scale:
        case Preset::custom:
            r.detection = DetectionParams{15min, 0.005, 3.0};
            r.min_gap = 15min;
            break;
        case Preset::short_scale:
            r.detection = DetectionParams{30s, 0.003, 6.0};
            r.min_gap = 90s;
            break;
    }
    if (m.delta_t) {
        r.detection.delta_t = *m.delta_t;
        // The large-scale min_gap tracks Δt unless overridden.
        if (m.preset != Preset::short_scale) r.min_gap = *m.delta_t;
    }
    if (m.abs_threshold) r.detection.abs_threshold = *m.abs_threshold;
    if (m.vol_multiplier) r.detection.vol_multiplier = *m.vol_multiplier;
    if (m.min_gap) r.min_gap = *m.min_gap;
    return r;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

double seconds(Duration d) { return std::chrono::duration<double>(d).count(); }
Duration from_seconds(double s) { return Duration(static_cast<std::int64_t>(std::llround(s * 1e6))); }

std::vector<double> scan_deltas(const RunManifest& m) {
    if (!m.scan_deltas.empty()) return m.scan_deltas;
    std::vector<double> d;
    for (int k = 1; k <= 20; ++k) d.push_back(k);
    return d;
}

}  // namespace

json manifest_json(const RunManifest& m) {
    json inputs = json::array();
    for (const auto& p : m.inputs) inputs.push_back(p.filename().string());
    const ResolvedParams r = resolve(m);
    return json{
        {"tool_version", kToolVersion},
        {"inputs", inputs},
        {"preset", to_string(m.preset)},
        {"delta_t_s", seconds(r.detection.delta_t)},
        {"abs_threshold", r.detection.abs_threshold},
        {"vol_multiplier", r.detection.vol_multiplier},
        {"min_gap_s", seconds(r.min_gap)},
        {"delta", m.delta},
        {"depth_n", m.depth},
        {"bins", m.bins},
        {"session",
         {{"open_s", seconds(m.session.session_open)},
          {"close_s", seconds(m.session.session_close)},
          {"open_skip_s", seconds(m.session.open_skip)},
          {"tick_size", m.session.tick_size}}},
        {"ordering", m.ordering == OrderingMode::strict ? "strict" : "lenient"},
        {"cancel_policy", m.cancel_policy == CancelPolicy::clamp ? "clamp" : "strict"},
        {"volatility_measure", m.volatility_measure == VolatilityMeasure::mean_abs ? "mean_abs" : "std_dev"},
        {"norm_sampling", m.norm_sampling == NormSampling::event_time ? "event_time" : "wall_clock"},
        {"per_side_norm", m.per_side_norm},
        {"fit_space", m.fit_space == FitSpace::log_log ? "log_log" : "nonlinear"},
        {"flow_range_s", seconds(m.flow_range)},
        {"flow_subinterval_s", seconds(m.flow_subinterval)},
        {"flows_at_best_only", m.flows_at_best_only},
        {"flow_averaging", m.flow_averaging == FlowAveraging::ratio ? "ratio" : "pooled"},
        {"response_at_best_only", m.response_at_best_only},
        {"response_bins", m.response_bins},
        {"min_events", m.min_events},
        {"min_bin_count", m.min_bin_count},
        {"scan_deltas", scan_deltas(m)},
    };
}

RunManifest manifest_from_json(const json& j) {
    RunManifest m;
    try {
        if (j.contains("inputs"))
            for (const auto& p : j.at("inputs")) m.inputs.emplace_back(p.get<std::string>());
        if (j.contains("preset")) m.preset = preset_from_string(j.at("preset").get<std::string>());
        if (j.contains("delta_t_s")) m.delta_t = from_seconds(j.at("delta_t_s").get<double>());
        if (j.contains("abs_threshold")) m.abs_threshold = j.at("abs_threshold").get<double>();
        if (j.contains("vol_multiplier")) m.vol_multiplier = j.at("vol_multiplier").get<double>();
        if (j.contains("min_gap_s")) m.min_gap = from_seconds(j.at("min_gap_s").get<double>());
        m.delta = j.value("delta", m.delta);
        m.depth = j.value("depth_n", m.depth);
        m.bins = j.value("bins", m.bins);
        if (j.contains("out")) m.out = j.at("out").get<std::string>();
        m.threads = j.value("threads", m.threads);
        if (j.contains("session")) {
            const auto& s = j.at("session");
            if (s.contains("open_s")) m.session.session_open = from_seconds(s.at("open_s").get<double>());
            if (s.contains("close_s")) m.session.session_close = from_seconds(s.at("close_s").get<double>());
            if (s.contains("open_skip_s")) m.session.open_skip = from_seconds(s.at("open_skip_s").get<double>());
            m.session.tick_size = s.value("tick_size", m.session.tick_size);
        }
        if (j.contains("ordering"))
            m.ordering = j.at("ordering") == "lenient" ? OrderingMode::lenient : OrderingMode::strict;
        if (j.contains("cancel_policy"))
            m.cancel_policy = j.at("cancel_policy") == "strict" ? CancelPolicy::strict : CancelPolicy::clamp;
        if (j.contains("volatility_measure"))
            m.volatility_measure =
                j.at("volatility_measure") == "std_dev" ? VolatilityMeasure::std_dev : VolatilityMeasure::mean_abs;
        if (j.contains("norm_sampling"))
            m.norm_sampling = j.at("norm_sampling") == "wall_clock" ? NormSampling::wall_clock : NormSampling::event_time;
        m.per_side_norm = j.value("per_side_norm", m.per_side_norm);
        if (j.contains("fit_space"))
            m.fit_space = j.at("fit_space") == "nonlinear" ? FitSpace::nonlinear : FitSpace::log_log;
        if (j.contains("flow_range_s")) m.flow_range = from_seconds(j.at("flow_range_s").get<double>());
        if (j.contains("flow_subinterval_s"))
            m.flow_subinterval = from_seconds(j.at("flow_subinterval_s").get<double>());
        m.flows_at_best_only = j.value("flows_at_best_only", m.flows_at_best_only);
        if (j.contains("flow_averaging"))
            m.flow_averaging = j.at("flow_averaging") == "pooled" ? FlowAveraging::pooled : FlowAveraging::ratio;
        m.response_at_best_only = j.value("response_at_best_only", m.response_at_best_only);
        m.response_bins = j.value("response_bins", m.response_bins);
        m.min_events = j.value("min_events", m.min_events);
        m.min_bin_count = j.value("min_bin_count", m.min_bin_count);
        if (j.contains("scan_deltas")) m.scan_deltas = j.at("scan_deltas").get<std::vector<double>>();
    } catch (const json::exception& ex) {
        throw Error(Errc::config_error, ex.what());
    }
    return m;
}

std::vector<fs::path> expand_inputs(const std::vector<fs::path>& inputs) {
    std::vector<fs::path> out;
    for (const auto& p : inputs) {
        if (fs::is_directory(p)) {
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(p))
                if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
            std::sort(files.begin(), files.end());
            out.insert(out.end(), files.begin(), files.end());
        } else {
            out.push_back(p);
        }
    }
    return out;
}

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(Errc::io_error, "cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string config_hash(const RunManifest& m) {
    std::uint64_t h = fnv1a64(manifest_json(m).dump());
    for (const auto& p : m.inputs) h = fnv1a64(read_file(p), h);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------

namespace {

class Csv {
public:
    explicit Csv(const std::string& hash) { out_ << "# config_hash=" << hash << '\n'; }

    Csv& comment(const std::string& text) {
        out_ << "# " << text << '\n';
        return *this;
    }
    Csv& header(const std::string& h) {
        out_ << h << '\n';
        return *this;
    }
    template <class... T>
    Csv& row(const T&... cells) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
        out_ << '\n';
        return *this;
    }
    [[nodiscard]] std::string str() const { return out_.str(); }

private:
    static std::string cell(double v) { return format_number(v); }
    static std::string cell(const std::string& s) { return s; }
    static std::string cell(const char* s) { return s; }
    static std::string cell(std::size_t v) { return std::to_string(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(long v) { return std::to_string(v); }
    static std::string cell(long long v) { return std::to_string(v); }
    static std::string cell(bool v) { return v ? "1" : "0"; }
    static std::string cell(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

    std::ostringstream out_;
};

json fit_json(const FitResult& f) {
    return {{"K", f.K},
            {"alpha", f.alpha},
            {"se_K", f.se_K},
            {"se_alpha", f.se_alpha},
            {"r_squared", f.r_squared},
            {"p_value_alpha", f.p_value_alpha},
            {"n_points", f.n_points},
            {"space", f.space == FitSpace::log_log ? "log_log" : "nonlinear"}};
}

json linear_json(const LinearFit& f) {
    return {{"a", f.slope},
            {"b", f.intercept},
            {"se_a", f.se_slope},
            {"se_b", f.se_intercept},
            {"r_squared", f.r_squared},
            {"p_value_a", f.p_value_slope},
            {"n_points", f.n_points}};
}

const char* sign_name(Sign s) { return s == Sign::Positive ? "pos" : "neg"; }

template <class F>
auto in_stage(Stage stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& ex) {
        throw StageError(stage, ex.what());
    }
}

struct Context {
    const RunManifest& m;
    ResolvedParams params;
    std::string hash;
    std::vector<ReplayLog> days;
    std::vector<LargeEvent> events;
    json summary;
    json skipped = json::array();
    Bundle bundle;

    void skip(Stage stage, const std::string& artifact, const std::string& reason) {
        skipped.push_back({{"stage", to_string(stage)}, {"artifact", artifact}, {"reason", reason}});
    }
};

void ingest(Context& c) {
    in_stage(Stage::ingestion, [&] {
        c.m.session.validate();
        if (c.m.inputs.empty()) throw Error(Errc::io_error, "no input files");
        c.hash = config_hash(c.m);
        std::vector<std::vector<OrderEvent>> events(c.m.inputs.size());
        ParseOptions po;
        po.ordering = c.m.ordering;
        for (std::size_t d = 0; d < events.size(); ++d) {
            try {
                events[d] = read_message_file(c.m.inputs[d], c.m.session, po);
            } catch (const Error& e) {
                throw Error(e.code(), c.m.inputs[d].string() + ": " + e.what());
            }
        }
        c.days.resize(events.size());
        ReplayOptions ro;
        ro.tick_size = c.m.session.tick_size;
        ro.cancel_policy = c.m.cancel_policy;
        parallel_for(events.size(), [&](std::size_t d) { c.days[d] = replay(events[d], ro); });
        std::size_t frames = 0, clamped = 0;
        for (const auto& d : c.days) {
            frames += d.size();
            clamped += d.clamped_cancellations();
        }
        c.summary["data"] = {{"days", c.days.size()}, {"frames", frames}, {"clamped_cancellations", clamped}};
    });
}

void detect(Context& c) {
    in_stage(Stage::detection, [&] {
        const auto& p = c.params.detection;
        const auto profile = compute_volatility_profile(c.days, p.delta_t, default_bucket_width(p.delta_t),
                                                        c.m.session, c.m.volatility_measure);
        const auto raw = detect_large_events(c.days, profile, p, c.m.session);
        c.events = decluster(raw, c.params.min_gap);

        Csv ev(c.hash);
        ev.header("window_start_us,delta_t_s,log_return,sign,trigger_index,day");
        std::size_t pos = 0;
        for (const auto& e : c.events) {
            ev.row(static_cast<long long>(e.window_start.count()), seconds(e.delta_t), e.log_return,
                   to_string(e.sign), e.trigger_index, e.day);
            if (e.sign == Sign::Positive) ++pos;
        }
        c.bundle["events.csv"] = ev.str();

        Csv vp(c.hash);
        vp.header("bucket_start_s,sigma,sample_count,filled");
        for (std::size_t b = 0; b < profile.sigma.size(); ++b)
            vp.row(seconds(profile.bucket_width * static_cast<long>(b)), profile.sigma[b], profile.sample_counts[b],
                   static_cast<bool>(profile.filled[b]));
        c.bundle["volatility_profile.csv"] = vp.str();

        c.summary["events"] = {{"candidates", raw.size()},
                               {"declustered", c.events.size()},
                               {"positive", pos},
                               {"negative", c.events.size() - pos},
                               {"bucket_width_s", seconds(profile.bucket_width)}};
    });
}

void flows(Context& c) {
    in_stage(Stage::flows, [&] {
        const FlowIndex index(c.days);
        FlowCurveParams fp;
        fp.range = c.m.flow_range;
        fp.subinterval = c.m.flow_subinterval;
        fp.at_best_only = c.m.flows_at_best_only;
        fp.averaging = c.m.flow_averaging;
        fp.min_events = c.m.min_events;

        json curves = json::object();
        for (BookSide side : {BookSide::Ask, BookSide::Bid}) {
            for (Sign sign : {Sign::Positive, Sign::Negative}) {
                const std::string name = std::string("flow_") + to_string(side) + "_" + sign_name(sign) + ".csv";
                try {
                    const auto curve = relative_flow_curve(index, c.events, side, sign, c.m.session, fp);
                    const json header{{"side", to_string(side)},
                                      {"event_sign", to_string(sign)},
                                      {"n_events", curve.n_events},
                                      {"at_best_only", curve.at_best_only},
                                      {"baseline_LO", curve.baseline_lo},
                                      {"baseline_MO", curve.baseline_mo},
                                      {"baseline_C", curve.baseline_c}};
                    Csv csv(c.hash);
                    csv.comment(header.dump());
                    csv.header("offset_s,r_LO,r_MO,r_C,se_LO,se_MO,se_C,count");
                    for (std::size_t k = 0; k < curve.offsets.size(); ++k)
                        csv.row(curve.offsets[k], curve.r_lo[k], curve.r_mo[k], curve.r_c[k], curve.se_lo[k],
                                curve.se_mo[k], curve.se_c[k], curve.counts[k]);
                    c.bundle[name] = csv.str();
                    curves[name] = header;
                } catch (const Error& e) {
                    if (e.code() != Errc::insufficient_sample) throw;
                    c.skip(Stage::flows, name, e.what());
                }
            }
        }
        c.summary["flow_curves"] = curves;

        json fits = json::object();
        for (BookSide side : {BookSide::Ask, BookSide::Bid}) {
            const std::string name = std::string("response_") + to_string(side) + ".csv";
            Csv csv(c.hash);
            csv.header("condition,bin_center,lower,upper,mean,se,bars,count");
            json side_fits = json::object();
            for (auto cond : {ResponseCondition::all, ResponseCondition::positive_events,
                              ResponseCondition::negative_events}) {
                const auto points = response_points(index, side, cond, c.events, c.params.detection.delta_t,
                                                    c.m.session, c.m.response_at_best_only);
                try {
                    const auto fit = response_fit(points, side, cond, c.m.response_bins);
                    side_fits[to_string(cond)] = linear_json(fit.fit);
                    const auto& b = fit.binned;
                    for (std::size_t k = 0; k < b.size(); ++k)
                        csv.row(to_string(cond), b.bin_centers[k], b.lower[k], b.upper[k], b.means[k], b.se[k],
                                b.bars[k], b.counts[k]);
                } catch (const Error& e) {
                    if (e.code() != Errc::fit_error && e.code() != Errc::insufficient_sample) throw;
                    c.skip(Stage::flows, name + ":" + to_string(cond), e.what());
                }
            }
            c.bundle[name] = csv.str();
            fits[to_string(side)] = side_fits;
        }
        c.summary["response_fits"] = fits;
    });
}

struct LiquidityState {
    BookNorm norm;
    std::vector<BookWindow> windows;
    bool ready = false;

    [[nodiscard]] double norm_for(BookSide side, bool per_side) const {
        if (!per_side) return norm.pooled;
        return side == BookSide::Ask ? norm.ask : norm.bid;
    }
};

void prepare_liquidity(Context& c, LiquidityState& s) {
    if (s.ready) return;
    s.norm = compute_norm(c.days, c.m.depth, c.m.norm_sampling);
    if (!(s.norm.pooled > 0.0)) throw Error(Errc::normalization_error, "average book volume is zero");
    s.windows = tile_windows(c.days, c.params.detection.delta_t, c.m.depth, c.m.session);
    s.ready = true;
}

void liquidity(Context& c, LiquidityState& s) {
    in_stage(Stage::liquidity, [&] {
        prepare_liquidity(c, s);
        c.summary["norm"] = {{"pooled", s.norm.pooled},
                             {"bid", s.norm.bid},
                             {"ask", s.norm.ask},
                             {"samples", s.norm.samples},
                             {"depth_n", c.m.depth},
                             {"per_side", c.m.per_side_norm}};

        // Profiles.
        struct Column {
            std::string name;
            std::optional<ProfileAverage> avg;
        };
        std::vector<Column> cols;
        for (BookSide side : {BookSide::Ask, BookSide::Bid}) {
            for (auto cond : {ProfileConditioning::unconditional, ProfileConditioning::pre_positive_event,
                              ProfileConditioning::pre_negative_event}) {
                const char* cname = cond == ProfileConditioning::unconditional        ? "unconditional"
                                    : cond == ProfileConditioning::pre_positive_event ? "pre_positive"
                                                                                      : "pre_negative";
                Column col{std::string(to_string(side)) + "_" + cname, std::nullopt};
                try {
                    col.avg = average_profile(c.days, side, cond, c.events, c.m.depth);
                } catch (const Error& e) {
                    if (e.code() != Errc::insufficient_sample) throw;
                    c.skip(Stage::liquidity, "profiles.csv:" + col.name, e.what());
                }
                cols.push_back(std::move(col));
            }
        }
        Csv prof(c.hash);
        std::string header = "distance";
        json counts = json::object();
        for (const auto& col : cols) {
            header += "," + col.name;
            counts[col.name] = col.avg ? col.avg->sample_count : 0;
        }
        prof.header(header);
        for (int k = 0; k < c.m.depth; ++k) {
            std::string line = std::to_string(k + 1);
            for (const auto& col : cols) {
                line += ",";
                if (col.avg) line += format_number(col.avg->mean_volume[static_cast<std::size_t>(k)]);
            }
            prof.header(line);
        }
        c.bundle["profiles.csv"] = prof.str();
        c.summary["profiles"] = {{"sample_counts", counts}};

        // Snapshots at window starts.
        Csv snap(c.hash);
        snap.header("timestamp_us,delta,L_A,L_B,L_imb,day");
        std::size_t undefined = 0;
        for (const auto& w : s.windows) {
            const double la = w.ask_profile.empty()
                                  ? 0.0
                                  : exponential_liquidity(w.ask_profile, c.m.delta, s.norm_for(BookSide::Ask, c.m.per_side_norm));
            const double lb = w.bid_profile.empty()
                                  ? 0.0
                                  : exponential_liquidity(w.bid_profile, c.m.delta, s.norm_for(BookSide::Bid, c.m.per_side_norm));
            const auto imb = liquidity_imbalance(lb, la);
            if (!imb) ++undefined;
            snap.row(static_cast<long long>(w.start.count()), c.m.delta, la, lb, imb, w.day);
        }
        c.bundle["liquidity_snapshots.csv"] = snap.str();
        c.summary["snapshots"] = {{"count", s.windows.size()}, {"undefined_imbalance", undefined}};
    });
}

void fit(Context& c, LiquidityState& s) {
    in_stage(Stage::fit, [&] {
        prepare_liquidity(c, s);
        // Return scale: standard deviation of every window return.
        double sum = 0.0, sum_sq = 0.0;
        std::size_t n = 0;
        for (const auto& w : s.windows) {
            if (!w.log_return) continue;
            sum += *w.log_return;
            sum_sq += *w.log_return * *w.log_return;
            ++n;
        }
        if (n < 2) throw Error(Errc::insufficient_sample, "fewer than two window returns");
        const double mean = sum / static_cast<double>(n);
        const double sigma = std::sqrt(std::max(0.0, (sum_sq - static_cast<double>(n) * mean * mean) /
                                                         static_cast<double>(n - 1)));
        if (!(sigma > 0.0)) throw Error(Errc::insufficient_sample, "window returns have zero variance");

        const auto deltas = scan_deltas(c.m);
        Csv scan_csv(c.hash);
        scan_csv.header("sign,delta,valid,r_squared,K,alpha,se_K,se_alpha,n_points");
        Csv cloud(c.hash);
        cloud.header("sign,L,r_sigma");
        Csv binned(c.hash);
        binned.header("sign,bin_center,lower,upper,mean,se,bars,count");
        json fits = json::object();
        for (Sign sign : {Sign::Positive, Sign::Negative}) {
            const BookSide side = sign == Sign::Positive ? BookSide::Ask : BookSide::Bid;
            const double norm = s.norm_for(side, c.m.per_side_norm);
            const auto scan = delta_scan(s.windows, deltas, sign, norm, sigma);
            for (const auto& e : scan.entries)
                scan_csv.row(sign_name(sign), e.delta, e.valid, e.r_squared, e.fit.K, e.fit.alpha, e.fit.se_K,
                             e.fit.se_alpha, e.fit.n_points);
            json entry;
            if (!scan.best_delta) {
                c.skip(Stage::fit, std::string("power_law:") + sign_name(sign), "no valid delta in the scan");
                fits[sign_name(sign)] = nullptr;
                continue;
            }
            entry["delta_star"] = *scan.best_delta;
            const auto points = liquidity_return_points(s.windows, *scan.best_delta, sign, norm, sigma);
            for (const auto& p : points) cloud.row(sign_name(sign), p.x, p.y);
            entry["fit"] = fit_json(power_law_fit(points, c.m.fit_space));
            try {
                const auto curve = log_binning(points, c.m.bins, c.m.min_bin_count);
                for (std::size_t k = 0; k < curve.size(); ++k)
                    binned.row(sign_name(sign), curve.bin_centers[k], curve.lower[k], curve.upper[k], curve.means[k],
                               curve.se[k], curve.bars[k], curve.counts[k]);
                entry["binning_warnings"] = curve.warnings;
            } catch (const Error& e) {
                if (e.code() != Errc::insufficient_sample) throw;
                c.skip(Stage::fit, std::string("liquidity_binned.csv:") + sign_name(sign), e.what());
            }
            fits[sign_name(sign)] = entry;
        }
        c.bundle["delta_scan.csv"] = scan_csv.str();
        c.bundle["liquidity_cloud.csv"] = cloud.str();
        c.bundle["liquidity_binned.csv"] = binned.str();

        // Imbalance conditionals at the configured δ.
        std::vector<ImbalanceSample> samples;
        for (const auto& w : s.windows) {
            if (!w.log_return) continue;
            const double la = w.ask_profile.empty() ? 0.0
                                                    : exponential_liquidity(w.ask_profile, c.m.delta,
                                                                            s.norm_for(BookSide::Ask, c.m.per_side_norm));
            const double lb = w.bid_profile.empty() ? 0.0
                                                    : exponential_liquidity(w.bid_profile, c.m.delta,
                                                                            s.norm_for(BookSide::Bid, c.m.per_side_norm));
            const auto imb = liquidity_imbalance(lb, la);
            if (imb) samples.push_back({*imb, *w.log_return});
        }
        Csv imb(c.hash);
        imb.header("bin_center,lower,upper,mean_return,se,bars,count,f_pos,f_zero,f_neg");
        json imb_summary{{"samples", samples.size()}, {"delta", c.m.delta}};
        if (samples.empty()) {
            c.skip(Stage::fit, "imbalance_conditionals.csv", "no window with a defined imbalance");
        } else {
            const auto ic = imbalance_conditionals(samples, c.m.bins, c.m.min_bin_count);
            const auto& mr = ic.mean_return;
            for (std::size_t k = 0; k < mr.size(); ++k)
                imb.row(mr.bin_centers[k], mr.lower[k], mr.upper[k], mr.means[k], mr.se[k], mr.bars[k], mr.counts[k],
                        ic.frequencies.positive[k], ic.frequencies.zero[k], ic.frequencies.negative[k]);
            imb_summary["warnings"] = mr.warnings;
        }
        c.bundle["imbalance_conditionals.csv"] = imb.str();

        c.summary["power_law"] = fits;
        c.summary["return_sigma"] = sigma;
        c.summary["imbalance"] = imb_summary;
    });
}

}  // namespace

Bundle build_bundle(const RunManifest& m, unsigned stages) {
    set_worker_threads(m.threads);
    Context c{m, {}, {}, {}, {}, json::object(), json::array(), {}};
    c.params = in_stage(Stage::usage, [&] {
        if (m.depth <= 0 || m.bins < 1 || !(m.delta > 0.0))
            throw Error(Errc::parameter_error, "depth, bins and delta must be positive");
        auto r = resolve(m);
        if (r.detection.delta_t <= Duration::zero() || r.min_gap < Duration::zero())
            throw Error(Errc::parameter_error, "delta_t must be positive and min_gap non-negative");
        return r;
    });

    ingest(c);
    detect(c);
    if (stages & stage_flows) flows(c);
    LiquidityState liq;
    if (stages & stage_liquidity) liquidity(c, liq);
    if (stages & stage_fit) fit(c, liq);

    c.summary["tool_version"] = kToolVersion;
    c.summary["config_hash"] = c.hash;
    c.summary["manifest"] = manifest_json(m);
    c.summary["skipped"] = c.skipped;
    c.bundle["summary.json"] = c.summary.dump(2) + "\n";
    return std::move(c.bundle);
}

void write_bundle(const Bundle& bundle, const fs::path& out) {
    std::vector<fs::path> written;
    try {
        fs::create_directories(out);
        for (const auto& [name, content] : bundle) {
            const fs::path target = out / name;
            const fs::path tmp = out / (name + ".tmp");
            {
                std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
                if (!f) throw Error(Errc::io_error, "cannot write " + tmp.string());
                f << content;
                f.close();
                if (!f) throw Error(Errc::io_error, "cannot write " + tmp.string());
            }
            fs::rename(tmp, target);
            written.push_back(target);
        }
    } catch (const std::exception& ex) {
        std::error_code ec;
        for (const auto& p : written) fs::remove(p, ec);
        for (const auto& [name, content] : bundle) fs::remove(out / (name + ".tmp"), ec);
        throw StageError(Stage::output, ex.what());
    }
}

Bundle run_pipeline(const RunManifest& m, unsigned stages) {
    if (m.out.empty()) throw StageError(Stage::usage, "no output directory");
    Bundle b = build_bundle(m, stages);
    write_bundle(b, m.out);
    return b;
}

}  // namespace lobliq
