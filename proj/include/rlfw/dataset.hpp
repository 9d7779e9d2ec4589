#pragma once

// Sliding-window supervised examples. A Now tick t yields one example whose
// window is the W = T_s / I_s samples ending at t and whose label looks at
// the left-open, right-closed horizon (t, t + T_p].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "rlfw/csv.hpp"
#include "rlfw/error.hpp"
#include "rlfw/trace.hpp"

namespace rlfw {

enum class SchemeKind : std::uint8_t { Full, Continuous, Spread };
enum class LabelMode : std::uint8_t { Binary, MultiInterval };

/// Which frames of the window enter the feature vector.
struct FrameScheme {
    SchemeKind kind = SchemeKind::Full;
    std::size_t k = 0;  ///< frame count for Continuous / Spread

    friend bool operator==(const FrameScheme&, const FrameScheme&) = default;
};

inline constexpr std::size_t kEventSlots = 5;  // MCGF NASR MNBH SCGM ENBH
inline constexpr double kStdFloor = 1e-6;
inline constexpr double kPadRsrp = kRsrpMin;
inline constexpr double kPadRsrq = kRsrqMin;

struct WindowSpec {
    double T_s = 3.0;
    double T_p = 2.0;
    double I_s = 0.1;
    std::size_t N = 3;
    FrameScheme scheme;
    LabelMode label_mode = LabelMode::Binary;
    std::size_t K = 0;  ///< sub-intervals for MultiInterval; 0 means one per second of T_p

    [[nodiscard]] std::size_t window_frames() const { return static_cast<std::size_t>(std::llround(T_s / I_s)); }
    [[nodiscard]] std::size_t horizon_ticks() const { return static_cast<std::size_t>(std::llround(T_p / I_s)); }
    [[nodiscard]] std::size_t intervals() const {
        return K != 0 ? K : static_cast<std::size_t>(std::max(1LL, std::llround(T_p)));
    }
    [[nodiscard]] std::size_t per_frame_dim() const { return 2 + 2 * N + 2 + kEventSlots; }
    [[nodiscard]] std::size_t continuous_per_frame() const { return 2 + 2 * N; }

    /// Offsets into the window (0 = oldest frame, W-1 = frame at Now), ascending.
    [[nodiscard]] std::vector<std::size_t> frame_offsets() const {
        const std::size_t W = window_frames();
        std::vector<std::size_t> out;
        switch (scheme.kind) {
            case SchemeKind::Full:
                for (std::size_t i = 0; i < W; ++i) out.push_back(i);
                break;
            case SchemeKind::Continuous:
                for (std::size_t i = W - scheme.k; i < W; ++i) out.push_back(i);
                break;
            case SchemeKind::Spread:
                if (scheme.k == 1) {
                    out.push_back(W - 1);
                } else {
                    for (std::size_t j = 0; j < scheme.k; ++j) out.push_back(j * (W - 1) / (scheme.k - 1));
                }
                break;
        }
        return out;
    }
    [[nodiscard]] std::size_t frames_used() const { return frame_offsets().size(); }
    [[nodiscard]] std::size_t feature_dim() const { return frames_used() * per_frame_dim(); }

    friend bool operator==(const WindowSpec&, const WindowSpec&) = default;
};

inline std::string to_string(const FrameScheme& s) {
    switch (s.kind) {
        case SchemeKind::Full: return "full";
        case SchemeKind::Continuous: return "continuous:" + std::to_string(s.k);
        case SchemeKind::Spread: return "spread:" + std::to_string(s.k);
    }
    return "full";
}

inline FrameScheme parse_scheme(std::string_view text) {
    if (text == "full") return {};
    const auto colon = text.find(':');
    if (colon != std::string_view::npos) {
        const auto k = csv::try_parse_int(text.substr(colon + 1));
        const auto kind = text.substr(0, colon);
        if (k && *k >= 1) {
            if (kind == "continuous") return {SchemeKind::Continuous, static_cast<std::size_t>(*k)};
            if (kind == "spread") return {SchemeKind::Spread, static_cast<std::size_t>(*k)};
        }
    }
    throw ConfigError("invalid scheme '" + std::string(text) + "' (expected full, continuous:k or spread:k)");
}

inline void validate(const WindowSpec& s) {
    auto multiple = [&](double v) {
        const double q = v / s.I_s;
        return v > 0.0 && std::abs(q - std::round(q)) < 1e-6;
    };
    if (!(s.I_s > 0.0)) throw ConfigError("I_s must be positive");
    if (!multiple(s.T_s)) throw ConfigError("T_s must be a positive multiple of I_s");
    if (!multiple(s.T_p)) throw ConfigError("T_p must be a positive multiple of I_s");
    if (s.N < 1) throw ConfigError("N must be at least 1");
    if (s.scheme.kind != SchemeKind::Full && (s.scheme.k < 1 || s.scheme.k > s.window_frames()))
        throw ConfigError("scheme k must lie in [1, W]");
    if (s.label_mode == LabelMode::MultiInterval && s.intervals() > s.horizon_ticks())
        throw ConfigError("K exceeds the number of ticks in the horizon");
}

struct Example {
    std::string trace_id;
    double now_t = 0.0;
    std::vector<double> features;
    int label = 0;  ///< 0/1, or the multi-interval class index 0..K

    [[nodiscard]] bool positive() const noexcept { return label > 0; }
    friend bool operator==(const Example&, const Example&) = default;
};

inline bool example_order(const Example& a, const Example& b) {
    return std::tie(a.trace_id, a.now_t) < std::tie(b.trace_id, b.now_t);
}

struct Normalization {
    std::vector<double> mean;
    std::vector<double> stddev;

    static Normalization identity(std::size_t dim) { return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)}; }

    [[nodiscard]] std::size_t dim() const noexcept { return mean.size(); }

    void apply(std::span<double> x) const {
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = (x[i] - mean[i]) / stddev[i];
    }

    friend bool operator==(const Normalization&, const Normalization&) = default;
};

struct Dataset {
    WindowSpec spec;
    std::vector<Example> examples;
    Normalization normalization;

    [[nodiscard]] std::size_t positives() const {
        return static_cast<std::size_t>(
            std::count_if(examples.begin(), examples.end(), [](const Example& e) { return e.positive(); }));
    }
    [[nodiscard]] std::size_t negatives() const { return examples.size() - positives(); }
};

/// Raw (un-normalized) per-frame vector; `prev` is the sample before `cur` in
/// the trace, or null at the trace start (both change flags read 0 then).
inline void append_frame_features(const RadioSample& cur, const RadioSample* prev, std::size_t N,
                                  std::vector<double>& out) {
    out.push_back(cur.serving_rsrp);
    out.push_back(cur.serving_rsrq);
    for (std::size_t j = 0; j < N; ++j) {
        if (j < cur.neighbors.size()) {
            out.push_back(cur.neighbors[j].rsrp);
            out.push_back(cur.neighbors[j].rsrq);
        } else {
            out.push_back(kPadRsrp);
            out.push_back(kPadRsrq);
        }
    }
    bool neighbor_change = false;
    bool serving_change = false;
    if (prev != nullptr) {
        auto ids = [N](const RadioSample& s) {
            std::vector<std::uint32_t> v;
            for (std::size_t j = 0; j < std::min(N, s.neighbors.size()); ++j) v.push_back(s.neighbors[j].cell_id);
            std::sort(v.begin(), v.end());
            return v;
        };
        neighbor_change = ids(cur) != ids(*prev);
        serving_change = cur.serving_cell != prev->serving_cell;
    }
    out.push_back(neighbor_change ? 1.0 : 0.0);
    out.push_back(serving_change ? 1.0 : 0.0);
    constexpr EventCode slots[kEventSlots] = {EventCode::MCGF, EventCode::NASR, EventCode::MNBH, EventCode::SCGM,
                                              EventCode::ENBH};
    for (auto e : slots) out.push_back(cur.event == e ? 1.0 : 0.0);
}

/// Feature vector for one full window of W samples. `before` is the sample
/// preceding the window in its trace (null at trace start).
inline std::vector<double> featurize(std::span<const RadioSample> window, const RadioSample* before,
                                     const WindowSpec& spec, const Normalization& norm) {
    if (window.size() != spec.window_frames()) throw Error("featurize: window length differs from W");
    std::vector<double> out;
    out.reserve(spec.feature_dim());
    for (std::size_t off : spec.frame_offsets()) {
        const RadioSample* prev = off == 0 ? before : &window[off - 1];
        append_frame_features(window[off], prev, spec.N, out);
    }
    norm.apply(out);
    return out;
}

/// Class index of the earliest RLF in (now, now + T_p]: 0 when none, else the
/// 1-based sub-interval (now + (j-1)T_p/K, now + jT_p/K] that contains it.
/// `rlf_times` must be ascending.
inline int multi_interval_label(double now_t, std::span<const double> rlf_times, double T_p, std::size_t K) {
    constexpr double eps = 1e-9;
    const auto it = std::upper_bound(rlf_times.begin(), rlf_times.end(), now_t + eps);
    if (it == rlf_times.end() || *it > now_t + T_p + eps) return 0;
    const double width = T_p / static_cast<double>(K);
    const auto j = static_cast<long long>(std::ceil((*it - now_t) / width - eps));
    return static_cast<int>(std::clamp<long long>(j, 1, static_cast<long long>(K)));
}

/// One example per Now tick with a complete window and a complete horizon.
/// Features are raw; normalization is fitted later on the training split.
inline std::vector<Example> build_examples(const Trace& trace, const WindowSpec& spec) {
    validate(spec);
    if (std::abs(trace.sample_interval - spec.I_s) > kTimeTolerance)
        throw ConfigError("trace " + trace.trace_id + ": sample interval differs from window spec I_s");
    const std::size_t n = trace.samples.size();
    const std::size_t W = spec.window_frames();
    const std::size_t P = spec.horizon_ticks();
    std::vector<Example> out;
    if (n < W + P) return out;

    const std::size_t F = spec.per_frame_dim();
    std::vector<double> frames;
    frames.reserve(n * F);
    for (std::size_t i = 0; i < n; ++i)
        append_frame_features(trace.samples[i], i ? &trace.samples[i - 1] : nullptr, spec.N, frames);

    // next_rlf[i]: first RLF tick strictly after i (n when none).
    std::vector<std::size_t> next_rlf(n, n);
    for (std::size_t i = n - 1; i-- > 0;) {
        next_rlf[i] = is_rlf(trace.samples[i + 1].event) ? i + 1 : next_rlf[i + 1];
    }
    const std::size_t K = spec.intervals();
    const auto offsets = spec.frame_offsets();

    out.reserve(n - W - P + 1);
    for (std::size_t i = W - 1; i + P <= n - 1; ++i) {
        Example ex;
        ex.trace_id = trace.trace_id;
        ex.now_t = trace.samples[i].t;
        ex.features.reserve(offsets.size() * F);
        const std::size_t first = i + 1 - W;
        for (std::size_t off : offsets) {
            const double* f = frames.data() + (first + off) * F;
            ex.features.insert(ex.features.end(), f, f + F);
        }
        const std::size_t e = next_rlf[i];
        if (e <= i + P) {
            ex.label = spec.label_mode == LabelMode::Binary
                           ? 1
                           : static_cast<int>(((e - i) * K + P - 1) / P);
        }
        out.push_back(std::move(ex));
    }
    return out;
}

/// Per-dimension statistics over `examples`; change flags and event one-hots
/// keep (0, 1) so they pass through unchanged.
inline Normalization fit_normalization(std::span<const Example> examples, const WindowSpec& spec) {
    const std::size_t dim = spec.feature_dim();
    Normalization norm = Normalization::identity(dim);
    if (examples.empty()) return norm;
    const std::size_t F = spec.per_frame_dim();
    const std::size_t C = spec.continuous_per_frame();
    const double n = static_cast<double>(examples.size());
    for (std::size_t d = 0; d < dim; ++d) {
        if (d % F >= C) continue;
        double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
        for (const auto& ex : examples) {
            const double v = ex.features[d];
            sum += v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const double mean = lo == hi ? lo : sum / n;
        double ss = 0.0;
        for (const auto& ex : examples) ss += (ex.features[d] - mean) * (ex.features[d] - mean);
        norm.mean[d] = mean;
        norm.stddev[d] = std::max(std::sqrt(ss / n), kStdFloor);
    }
    return norm;
}

inline void apply_normalization(std::vector<Example>& examples, const Normalization& norm) {
    for (auto& ex : examples) norm.apply(ex.features);
}

struct SplitFractions {
    double train = 0.7;
    double val = 0.15;
    double test = 0.15;
};

struct SplitResult {
    Dataset train;
    Dataset val;
    Dataset test;
    std::vector<std::string> warnings;
};

/// Chronological per-trace split. Examples whose window or horizon straddles a
/// cut are dropped from both sides; normalization is fitted on train only and
/// applied to all three outputs.
inline SplitResult chrono_split(std::vector<Example> examples, const WindowSpec& spec, SplitFractions fr = {},
                                bool check_stratification = true) {
    if (!(fr.train > 0 && fr.val > 0 && fr.test > 0) || std::abs(fr.train + fr.val + fr.test - 1.0) > 1e-9)
        throw ConfigError("split fractions must be positive and sum to 1");
    std::stable_sort(examples.begin(), examples.end(), example_order);

    SplitResult r;
    r.train.spec = r.val.spec = r.test.spec = spec;
    const double half_tick = spec.I_s / 2.0;
    const double horizon = spec.T_p;
    const double lookback = spec.T_s - spec.I_s;

    for (std::size_t begin = 0; begin < examples.size();) {
        std::size_t end = begin;
        while (end < examples.size() && examples[end].trace_id == examples[begin].trace_id) ++end;
        const std::size_t n = end - begin;
        const auto c1 = begin + static_cast<std::size_t>(std::llround(double(n) * fr.train));
        const auto c2 = begin + static_cast<std::size_t>(std::llround(double(n) * (fr.train + fr.val)));
        const double inf = std::numeric_limits<double>::infinity();
        const double cut1 = c1 < end ? examples[c1].now_t - half_tick : inf;
        const double cut2 = c2 < end ? examples[c2].now_t - half_tick : inf;
        for (std::size_t i = begin; i < end; ++i) {
            auto& ex = examples[i];
            const double lo = ex.now_t - lookback;
            const double hi = ex.now_t + horizon;
            if (i < c1) {
                if (hi < cut1) r.train.examples.push_back(std::move(ex));
            } else if (i < c2) {
                if (lo > cut1 && hi < cut2) r.val.examples.push_back(std::move(ex));
            } else {
                if (lo > cut2) r.test.examples.push_back(std::move(ex));
            }
        }
        begin = end;
    }

    const auto norm = fit_normalization(r.train.examples, spec);
    for (Dataset* d : {&r.train, &r.val, &r.test}) {
        d->normalization = norm;
        apply_normalization(d->examples, norm);
    }
    if (check_stratification) {
        for (auto [name, d] : {std::pair{"train", &r.train}, {"val", &r.val}, {"test", &r.test}}) {
            if (d->positives() == 0) r.warnings.push_back(std::string(name) + " split contains no positive examples");
        }
    }
    return r;
}

// Dataset CSV: trace_id,now_t,label,f0,f1,... with a `<stem>.norm.csv`
// sidecar holding dim,mean,std. Features and statistics are written
// losslessly.

inline std::filesystem::path norm_sidecar_path(const std::filesystem::path& p) {
    return p.parent_path() / (p.stem().string() + ".norm.csv");
}

inline std::string dataset_to_csv(const Dataset& d) {
    const std::size_t dim = d.spec.feature_dim();
    std::string out = "trace_id,now_t,label";
    for (std::size_t i = 0; i < dim; ++i) out += ",f" + std::to_string(i);
    out += '\n';
    for (const auto& ex : d.examples) {
        out += ex.trace_id + ',' + csv::fixed(ex.now_t) + ',' + std::to_string(ex.label);
        for (double v : ex.features) out += ',' + csv::exact(v);
        out += '\n';
    }
    return out;
}

inline std::string normalization_to_csv(const Normalization& n) {
    std::string out = "dim,mean,std\n";
    for (std::size_t i = 0; i < n.dim(); ++i)
        out += std::to_string(i) + ',' + csv::exact(n.mean[i]) + ',' + csv::exact(n.stddev[i]) + '\n';
    return out;
}

inline void save_dataset_csv(const Dataset& d, const std::filesystem::path& path) {
    csv::write_atomic(path, dataset_to_csv(d));
    csv::write_atomic(norm_sidecar_path(path), normalization_to_csv(d.normalization));
}

inline Normalization load_normalization_csv(const std::filesystem::path& path) {
    const auto lines = csv::read_lines(path);
    if (lines.empty() || lines[0] != "dim,mean,std") throw ParseError("malformed header at line 1 of " + path.string());
    Normalization n;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = csv::split(lines[i]);
        const auto dim = f.size() == 3 ? csv::try_parse_int(f[0]) : std::nullopt;
        const auto m = f.size() == 3 ? csv::try_parse_double(f[1]) : std::nullopt;
        const auto s = f.size() == 3 ? csv::try_parse_double(f[2]) : std::nullopt;
        if (!dim || !m || !s || *dim != std::int64_t(n.dim()))
            throw ParseError("malformed normalization row at line " + std::to_string(i + 1));
        n.mean.push_back(*m);
        n.stddev.push_back(*s);
    }
    return n;
}

/// Loads a dataset written by save_dataset_csv; the sidecar is optional
/// (identity normalization when absent).
inline Dataset load_dataset_csv(const std::filesystem::path& path, const WindowSpec& spec) {
    const auto lines = csv::read_lines(path);
    const std::size_t dim = spec.feature_dim();
    if (lines.empty()) throw ParseError("malformed header at line 1");
    const auto header = csv::split(lines[0]);
    if (header.size() != dim + 3 || header[0] != "trace_id" || header[1] != "now_t" || header[2] != "label")
        throw ParseError("malformed header at line 1: expected trace_id,now_t,label and " + std::to_string(dim) +
                         " feature columns");
    Dataset d;
    d.spec = spec;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = csv::split(lines[i]);
        auto fail = [&](const char* what) { return ParseError(std::string(what) + " at line " + std::to_string(i + 1)); };
        if (f.size() != dim + 3) throw fail("wrong field count");
        Example ex;
        ex.trace_id = std::string(f[0]);
        const auto now = csv::try_parse_double(f[1]);
        const auto label = csv::try_parse_int(f[2]);
        if (!now || !label || *label < 0) throw fail("invalid now_t or label");
        ex.now_t = *now;
        ex.label = static_cast<int>(*label);
        ex.features.reserve(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            const auto v = csv::try_parse_double(f[3 + j]);
            if (!v) throw fail("invalid feature value");
            ex.features.push_back(*v);
        }
        d.examples.push_back(std::move(ex));
    }
    const auto side = norm_sidecar_path(path);
    d.normalization = std::filesystem::exists(side) ? load_normalization_csv(side) : Normalization::identity(dim);
    if (d.normalization.dim() != dim) throw ParseError("normalization sidecar dimension mismatch");
    return d;
}

}  // namespace rlfw
