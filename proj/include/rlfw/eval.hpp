#pragma once

// Evaluation protocol: confusion metrics at a threshold, rank AUC, the
// nine-point F1 threshold sweep, grid reports, alarm hit policies, external
// prediction import and inference latency.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "rlfw/csv.hpp"
#include "rlfw/dataset.hpp"
#include "rlfw/error.hpp"
#include "rlfw/learners.hpp"

namespace rlfw {

struct Confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct MetricsReport {
    std::string model;
    double T_s = 0.0;
    double T_p = 0.0;
    std::string balance;
    double tau_star = 0.0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double auc = 0.0;
    Confusion counts;
    std::string error;  ///< non-empty when the cell could not be evaluated
};

namespace detail {

inline void check_scores(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw Error("scores and labels differ in length");
    if (scores.empty()) throw Error("no scores to evaluate");
    for (int y : labels)
        if (y != 0 && y != 1) throw Error("labels must be 0 or 1");
}

inline bool has_both_classes(std::span<const int> labels) {
    const auto pos = std::count(labels.begin(), labels.end(), 1);
    return pos > 0 && pos < static_cast<std::ptrdiff_t>(labels.size());
}

}  // namespace detail

/// Positive iff score >= tau. Precision is 0 when nothing is predicted
/// positive; recall is 0 when no positives exist.
inline MetricsReport metrics_at_threshold(std::span<const double> scores, std::span<const int> labels, double tau) {
    detail::check_scores(scores, labels);
    MetricsReport r;
    auto& c = r.counts;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] >= tau;
        if (labels[i] == 1) (pred ? c.tp : c.fn)++;
        else (pred ? c.fp : c.tn)++;
    }
    const double total = double(scores.size());
    r.accuracy = double(c.tp + c.tn) / total;
    r.precision = c.tp + c.fp ? double(c.tp) / double(c.tp + c.fp) : 0.0;
    r.recall = c.tp + c.fn ? double(c.tp) / double(c.tp + c.fn) : 0.0;
    r.f1 = r.precision + r.recall > 0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    r.tau_star = tau;
    return r;
}

/// Mann-Whitney AUC with tied pairs counted as one half.
inline double auc(std::span<const double> scores, std::span<const int> labels) {
    detail::check_scores(scores, labels);
    if (!detail::has_both_classes(labels)) throw Error("auc needs both classes present");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
    double rank_sum = 0.0;
    std::size_t npos = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * double(i + 1 + j);  // mean of ranks i+1..j
        for (std::size_t t = i; t < j; ++t)
            if (labels[order[t]] == 1) {
                rank_sum += avg_rank;
                ++npos;
            }
        i = j;
    }
    const double nneg = double(scores.size() - npos);
    const double u = rank_sum - double(npos) * double(npos + 1) / 2.0;
    return u / (double(npos) * nneg);
}

inline constexpr std::array<double, 9> kThresholdGrid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

/// F1-maximizing tau over {0.1, ..., 0.9}; ties go to the smallest tau.
inline double select_threshold(std::span<const double> val_scores, std::span<const int> val_labels) {
    detail::check_scores(val_scores, val_labels);
    if (!detail::has_both_classes(val_labels)) throw Error("threshold selection needs both classes in validation");
    double best_tau = kThresholdGrid.front();
    double best_f1 = -1.0;
    for (double tau : kThresholdGrid) {
        const double f1 = metrics_at_threshold(val_scores, val_labels, tau).f1;
        if (f1 > best_f1) {
            best_f1 = f1;
            best_tau = tau;
        }
    }
    return best_tau;
}

inline std::vector<int> binary_labels(std::span<const Example> examples) {
    std::vector<int> y;
    y.reserve(examples.size());
    for (const auto& e : examples) y.push_back(e.positive() ? 1 : 0);
    return y;
}

// ----------------------------------------------------------------------------
// Grid evaluation

/// Scores for one (model, T_s, T_p) cell; `error` set when inputs were missing.
struct CellScores {
    std::string model;
    double T_s = 0.0;
    double T_p = 0.0;
    std::string balance;
    std::vector<double> val_scores;
    std::vector<int> val_labels;
    std::vector<double> test_scores;
    std::vector<int> test_labels;
    std::string error;
};

/// tau* from validation, metrics and AUC on test.
inline MetricsReport evaluate_cell(const CellScores& cell) {
    MetricsReport r;
    if (cell.error.empty()) {
        try {
            const double tau = select_threshold(cell.val_scores, cell.val_labels);
            r = metrics_at_threshold(cell.test_scores, cell.test_labels, tau);
            r.auc = auc(cell.test_scores, cell.test_labels);
        } catch (const Error& e) {
            r = MetricsReport{};
            r.error = e.what();
        }
    } else {
        r.error = cell.error;
    }
    r.model = cell.model;
    r.T_s = cell.T_s;
    r.T_p = cell.T_p;
    r.balance = cell.balance;
    return r;
}

/// One report per cell, ordered by (model, T_s, T_p) regardless of input order.
inline std::vector<MetricsReport> evaluate_grid(std::span<const CellScores> cells) {
    std::vector<MetricsReport> out;
    out.reserve(cells.size());
    for (const auto& c : cells) out.push_back(evaluate_cell(c));
    std::stable_sort(out.begin(), out.end(), [](const MetricsReport& a, const MetricsReport& b) {
        return std::tie(a.model, a.T_s, a.T_p) < std::tie(b.model, b.T_s, b.T_p);
    });
    return out;
}

inline constexpr std::string_view kReportHeader =
    "model,T_s,T_p,balance,tau_star,accuracy,precision,recall,f1,auc,tp,fp,tn,fn";

/// Report CSV; cells that failed keep their key columns and leave metrics empty.
inline std::string report_csv(std::span<const MetricsReport> rows) {
    std::string out(kReportHeader);
    out += '\n';
    for (const auto& r : rows) {
        out += r.model + ',' + csv::fixed(r.T_s, 1) + ',' + csv::fixed(r.T_p, 1) + ',' + r.balance + ',';
        if (!r.error.empty()) {
            out += ",,,,,,,,,\n";
            continue;
        }
        out += csv::fixed(r.tau_star, 1) + ',' + csv::fixed(r.accuracy) + ',' + csv::fixed(r.precision) + ',' +
               csv::fixed(r.recall) + ',' + csv::fixed(r.f1) + ',' + csv::fixed(r.auc) + ',' +
               std::to_string(r.counts.tp) + ',' + std::to_string(r.counts.fp) + ',' + std::to_string(r.counts.tn) +
               ',' + std::to_string(r.counts.fn) + '\n';
    }
    return out;
}

// ----------------------------------------------------------------------------
// Hit policies

enum class HitKind : std::uint8_t { AnyK, ConsecutiveK };

struct HitPolicy {
    HitKind kind = HitKind::AnyK;
    std::size_t k = 1;
    friend bool operator==(const HitPolicy&, const HitPolicy&) = default;
};

inline std::string to_string(const HitPolicy& p) {
    return (p.kind == HitKind::AnyK ? "any_" : "consecutive_") + std::to_string(p.k);
}

/// The rows of the standard hit report, in display order.
inline std::vector<HitPolicy> standard_hit_policies() {
    return {{HitKind::AnyK, 1}, {HitKind::AnyK, 2}, {HitKind::AnyK, 3}, {HitKind::ConsecutiveK, 2},
            {HitKind::ConsecutiveK, 3}};
}

struct HitResult {
    HitPolicy policy;
    double T_p = 0.0;
    std::vector<bool> hits;  ///< one per event
    std::size_t hit_count = 0;
    std::size_t events = 0;
    double coverage = 0.0;

    [[nodiscard]] std::string fraction() const { return std::to_string(hit_count) + "/" + std::to_string(events); }
};

/// An event at t_e is a hit when the alarms in [t_e - T_p, t_e) satisfy the
/// policy: at least k of them (any_k), or k at consecutive ticks spaced I_s
/// apart (consecutive_k). Both inputs must be ascending.
inline HitResult hit_analysis(std::span<const double> alarm_times, std::span<const double> rlf_times, double T_p,
                              HitPolicy policy, double I_s) {
    if (rlf_times.empty()) throw Error("no events to analyze");
    if (policy.k < 1) throw ConfigError("hit policy k must be at least 1");
    constexpr double eps = 1e-9;
    HitResult r;
    r.policy = policy;
    r.T_p = T_p;
    r.events = rlf_times.size();
    for (double te : rlf_times) {
        const auto lo = std::lower_bound(alarm_times.begin(), alarm_times.end(), te - T_p - eps);
        const auto hi = std::lower_bound(alarm_times.begin(), alarm_times.end(), te - eps);
        bool hit = false;
        if (policy.kind == HitKind::AnyK) {
            hit = static_cast<std::size_t>(hi - lo) >= policy.k;
        } else {
            std::size_t run = 0;
            for (auto it = lo; it != hi && !hit; ++it) {
                run = (it != lo && std::abs((*it - *(it - 1)) - I_s) <= eps) ? run + 1 : 1;
                hit = run >= policy.k;
            }
        }
        r.hits.push_back(hit);
        r.hit_count += hit ? 1 : 0;
    }
    r.coverage = double(r.hit_count) / double(r.events);
    return r;
}

/// Now ticks whose score reaches tau, ascending.
inline std::vector<double> alarm_times(std::span<const double> now_ts, std::span<const double> scores, double tau) {
    std::vector<double> out;
    for (std::size_t i = 0; i < now_ts.size(); ++i)
        if (scores[i] >= tau) out.push_back(now_ts[i]);
    std::sort(out.begin(), out.end());
    return out;
}

/// Events whose whole hit window [t_e - T_p, t_e) falls on scored ticks in
/// [first_now, last_now]; others cannot be judged fairly.
inline std::vector<double> analyzable_events(std::span<const double> rlf_times, double first_now, double last_now,
                                             double T_p, double I_s) {
    constexpr double eps = 1e-9;
    std::vector<double> out;
    for (double te : rlf_times)
        if (te - T_p >= first_now - eps && te - I_s <= last_now + eps) out.push_back(te);
    return out;
}

inline constexpr std::string_view kHitHeader = "policy,k,T_p,hits,events,coverage,h_over_n";

inline std::string hit_report_csv(std::span<const HitResult> rows) {
    std::string out(kHitHeader);
    out += '\n';
    for (const auto& r : rows) {
        out += (r.policy.kind == HitKind::AnyK ? "any" : "consecutive");
        out += ',' + std::to_string(r.policy.k) + ',' + csv::fixed(r.T_p, 1) + ',' + std::to_string(r.hit_count) + ',' +
               std::to_string(r.events) + ',' + csv::fixed(r.coverage) + ',' + r.fraction() + '\n';
    }
    return out;
}

// ----------------------------------------------------------------------------
// Timeline

struct TimelineRow {
    double now_t = 0.0;
    double score = 0.0;
    bool alarm = false;
    bool rlf_event = false;
};

inline constexpr std::string_view kTimelineHeader = "now_t,score,alarm,rlf_event";

inline std::string timeline_csv(std::span<const TimelineRow> rows) {
    std::string out(kTimelineHeader);
    out += '\n';
    for (const auto& r : rows)
        out += csv::fixed(r.now_t) + ',' + csv::exact(r.score) + ',' + (r.alarm ? "1" : "0") + ',' +
               (r.rlf_event ? "1" : "0") + '\n';
    return out;
}

inline std::vector<TimelineRow> load_timeline_csv(const std::filesystem::path& path) {
    const auto lines = csv::read_lines(path);
    if (lines.empty() || lines[0] != kTimelineHeader) throw ParseError("malformed header at line 1 of " + path.string());
    std::vector<TimelineRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = csv::split(lines[i]);
        const auto t = f.size() == 4 ? csv::try_parse_double(f[0]) : std::nullopt;
        const auto s = f.size() == 4 ? csv::try_parse_double(f[1]) : std::nullopt;
        if (!t || !s || (f[2] != "0" && f[2] != "1") || (f[3] != "0" && f[3] != "1"))
            throw ParseError("malformed timeline row at line " + std::to_string(i + 1));
        rows.push_back({*t, *s, f[2] == "1", f[3] == "1"});
    }
    return rows;
}

// ----------------------------------------------------------------------------
// External predictions

/// Reads `trace_id,now_t,score` rows and aligns them to `dataset` order.
/// Every dataset example needs exactly one row (now_t matched within 1e-6).
inline std::vector<double> import_predictions(const std::filesystem::path& path, const Dataset& dataset) {
    constexpr double tol = 1e-6;
    const auto lines = csv::read_lines(path);
    if (lines.empty() || lines[0] != "trace_id,now_t,score") throw ParseError("malformed header at line 1");

    std::map<std::string, std::vector<std::pair<double, std::size_t>>, std::less<>> index;
    for (std::size_t i = 0; i < dataset.examples.size(); ++i)
        index[dataset.examples[i].trace_id].emplace_back(dataset.examples[i].now_t, i);
    for (auto& [id, v] : index) std::sort(v.begin(), v.end());

    auto key = [](std::string_view id, double t) { return "(" + std::string(id) + ", " + csv::fixed(t) + ")"; };
    std::vector<double> scores(dataset.examples.size(), 0.0);
    std::vector<bool> seen(dataset.examples.size(), false);
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (lines[li].empty()) continue;
        const auto f = csv::split(lines[li]);
        const auto t = f.size() == 3 ? csv::try_parse_double(f[1]) : std::nullopt;
        const auto s = f.size() == 3 ? csv::try_parse_double(f[2]) : std::nullopt;
        if (!t || !s) throw ParseError("malformed prediction row at line " + std::to_string(li + 1));
        if (!(*s >= 0.0 && *s <= 1.0)) throw Error("score outside [0, 1] for " + key(f[0], *t));
        const auto it = index.find(f[0]);
        std::optional<std::size_t> match;
        if (it != index.end()) {
            const auto& v = it->second;
            auto pos = std::lower_bound(v.begin(), v.end(), std::pair{*t - tol, std::size_t{0}});
            if (pos != v.end() && std::abs(pos->first - *t) <= tol) match = pos->second;
        }
        if (!match) throw Error("unmatched prediction row for " + key(f[0], *t));
        if (seen[*match]) throw Error("duplicate prediction row for " + key(f[0], *t));
        seen[*match] = true;
        scores[*match] = *s;
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i]) throw Error("missing prediction row for " + key(dataset.examples[i].trace_id, dataset.examples[i].now_t));
    return scores;
}

// ----------------------------------------------------------------------------
// Latency

struct LatencyProfile {
    double mean = 0.0;  ///< seconds per prediction
    double p50 = 0.0;
    double p95 = 0.0;
    std::size_t measurements = 0;
    std::size_t feature_dim = 0;
    std::size_t parameter_count = 0;
};

/// Times every single prediction over `repetitions` passes after one warm-up
/// pass. Must run on an otherwise idle thread.
inline LatencyProfile latency_profile(const TrainedModel& model, std::span<const std::vector<double>> rows,
                                      std::size_t repetitions) {
    if (rows.empty()) throw Error("latency profile needs at least one example");
    if (repetitions < 3) throw ConfigError("latency profile needs at least 3 repetitions");
    using clock = std::chrono::steady_clock;
    volatile double sink = 0.0;
    for (const auto& r : rows) sink = sink + model.predict(r);
    std::vector<double> samples;
    samples.reserve(rows.size() * repetitions);
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
        for (const auto& r : rows) {
            const auto t0 = clock::now();
            sink = sink + model.predict(r);
            const auto t1 = clock::now();
            samples.push_back(std::chrono::duration<double>(t1 - t0).count());
        }
    }
    LatencyProfile p;
    p.measurements = samples.size();
    p.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / double(samples.size());
    std::sort(samples.begin(), samples.end());
    auto quantile = [&](double q) {
        const auto idx = static_cast<std::size_t>(std::ceil(q * double(samples.size()))) - 1;
        return samples[std::min(idx, samples.size() - 1)];
    };
    p.p50 = quantile(0.5);
    p.p95 = quantile(0.95);
    p.feature_dim = model.input_dim;
    p.parameter_count = model.parameter_count();
    return p;
}

inline constexpr std::string_view kLatencyHeader = "label,mean_s,p50_s,p95_s,measurements,feature_dim,parameter_count";

inline std::string latency_csv(std::span<const std::pair<std::string, LatencyProfile>> rows) {
    std::string out(kLatencyHeader);
    out += '\n';
    for (const auto& [label, p] : rows)
        out += label + ',' + csv::exact(p.mean) + ',' + csv::exact(p.p50) + ',' + csv::exact(p.p95) + ',' +
               std::to_string(p.measurements) + ',' + std::to_string(p.feature_dim) + ',' +
               std::to_string(p.parameter_count) + '\n';
    return out;
}

}  // namespace rlfw
