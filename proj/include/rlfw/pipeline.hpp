#pragma once

// End-to-end helpers shared by the command-line tool and the benchmark
// suite: simulate a trace set, build and split one (T_s, T_p) cell, balance
// the training split, train, and score validation and test.

#include <string>
#include <vector>

#include "rlfw/balance.hpp"
#include "rlfw/dataset.hpp"
#include "rlfw/eval.hpp"
#include "rlfw/learners.hpp"
#include "rlfw/rng.hpp"
#include "rlfw/simulator.hpp"

namespace rlfw {

/// `count` traces whose seeds derive from `base.seed`; ids are trace_000, ...
inline std::vector<SimulationResult> simulate_traces(const ScenarioConfig& base, std::size_t count) {
    std::vector<SimulationResult> out;
    const Rng root = Rng(base.seed).substream("traces");
    for (std::size_t i = 0; i < count; ++i) {
        ScenarioConfig c = base;
        c.seed = root.substream(i).next_u64();
        std::string id = std::to_string(i);
        c.trace_id = "trace_" + std::string(3 - std::min<std::size_t>(3, id.size()), '0') + id;
        out.push_back(simulate_trace(c));
    }
    return out;
}

inline std::vector<Example> build_all(const std::vector<Trace>& traces, const WindowSpec& spec) {
    std::vector<Example> all;
    for (const auto& t : traces) {
        auto ex = build_examples(t, spec);
        all.insert(all.end(), std::make_move_iterator(ex.begin()), std::make_move_iterator(ex.end()));
    }
    return all;
}

struct CellRun {
    TrainedModel model;
    SplitResult split;
    ClassWeights weights;
    std::vector<double> val_scores;
    std::vector<double> test_scores;
    CellScores cell;
};

/// Runs one grid cell. Balancing touches the training split only, so
/// validation and test never contain synthetic rows.
inline CellRun run_cell(const std::vector<Trace>& traces, const WindowSpec& spec, const SplitFractions& fractions,
                        const BalanceConfig& balance, TrainConfig train_cfg) {
    CellRun r;
    r.split = chrono_split(build_all(traces, spec), spec, fractions);
    auto [train_set, weights] = apply_balance(r.split.train, balance);
    r.weights = weights;
    train_cfg.class_weights = weights;
    r.model = train(train_set, train_cfg);
    r.val_scores = predict_batch(r.model, r.split.val.examples);
    r.test_scores = predict_batch(r.model, r.split.test.examples);
    r.cell.model = to_string(train_cfg.kind);
    r.cell.T_s = spec.T_s;
    r.cell.T_p = spec.T_p;
    r.cell.balance = to_string(balance.method);
    r.cell.val_scores = r.val_scores;
    r.cell.val_labels = binary_labels(r.split.val.examples);
    r.cell.test_scores = r.test_scores;
    r.cell.test_labels = binary_labels(r.split.test.examples);
    return r;
}

/// Per-trace timelines for a scored dataset at operating point tau.
inline std::vector<std::pair<std::string, std::vector<TimelineRow>>> timelines(
    const Dataset& d, const std::vector<double>& scores, double tau, const std::vector<Trace>& traces) {
    std::vector<std::pair<std::string, std::vector<TimelineRow>>> out;
    for (std::size_t i = 0; i < d.examples.size(); ++i) {
        const auto& ex = d.examples[i];
        if (out.empty() || out.back().first != ex.trace_id) out.emplace_back(ex.trace_id, std::vector<TimelineRow>{});
        bool event = false;
        for (const auto& t : traces) {
            if (t.trace_id != ex.trace_id || t.samples.empty()) continue;
            const auto tick = static_cast<std::size_t>(std::llround((ex.now_t - t.samples.front().t) / t.sample_interval));
            event = tick < t.samples.size() && is_rlf(t.samples[tick].event);
        }
        out.back().second.push_back({ex.now_t, scores[i], scores[i] >= tau, event});
    }
    return out;
}

/// Standard hit report for one scored dataset, pooling analyzable events
/// across traces.
inline std::vector<HitResult> hit_report(const Dataset& d, const std::vector<double>& scores, double tau,
                                         const std::vector<Trace>& traces) {
    std::vector<HitResult> rows;
    const auto per_trace = timelines(d, scores, tau, traces);
    for (const auto& policy : standard_hit_policies()) {
        HitResult pooled;
        pooled.policy = policy;
        pooled.T_p = d.spec.T_p;
        for (const auto& [id, rows_t] : per_trace) {
            if (rows_t.empty()) continue;
            std::vector<double> now, sc;
            for (const auto& r : rows_t) {
                now.push_back(r.now_t);
                sc.push_back(r.score);
            }
            std::vector<double> rlf;
            for (const auto& t : traces)
                if (t.trace_id == id) rlf = rlf_timestamps(t);
            const auto events = analyzable_events(rlf, now.front(), now.back(), d.spec.T_p, d.spec.I_s);
            if (events.empty()) continue;
            const auto res = hit_analysis(alarm_times(now, sc, tau), events, d.spec.T_p, policy, d.spec.I_s);
            pooled.hits.insert(pooled.hits.end(), res.hits.begin(), res.hits.end());
            pooled.hit_count += res.hit_count;
            pooled.events += res.events;
        }
        pooled.coverage = pooled.events ? double(pooled.hit_count) / double(pooled.events) : 0.0;
        rows.push_back(std::move(pooled));
    }
    return rows;
}

}  // namespace rlfw
