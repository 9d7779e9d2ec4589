#pragma once

// Synthetic metro-line trace generator. A train shuttles along a straight
// track lined with cells; per-cell power follows log-distance path loss with
// AR(1) shadowing. RLFs arrive as a Poisson process with a refractory period
// and each is preceded by a linear RSRQ/RSRP decay of configurable length.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rlfw/csv.hpp"
#include "rlfw/error.hpp"
#include "rlfw/rng.hpp"
#include "rlfw/trace.hpp"

namespace rlfw {

struct ScenarioConfig {
    double duration = 1800.0;
    double sample_interval = 0.1;
    std::size_t cell_count = 12;
    std::vector<double> cell_positions;  ///< meters along track; empty means evenly spaced
    double cell_spacing = 400.0;
    double site_offset = 40.0;  ///< lateral distance from track to every site, meters
    double reference_power = -30.0;  ///< dBm at 1 m
    double pathloss_exponent = 3.2;
    double noise_power = -105.0;  ///< dBm, used for RSRQ
    double shadowing_sigma = 3.0;
    double shadowing_correlation = 0.98;
    double handover_hysteresis = 3.0;
    std::size_t neighbor_capacity = 3;
    double train_speed = 20.0;  ///< cruise speed, m/s
    double station_spacing = 1200.0;
    double station_dwell = 20.0;  ///< seconds stopped at each station
    double rlf_rate = 20.0;  ///< expected RLF events per 1000 s
    double rlf_refractory = 5.0;
    double mcgf_probability = 0.9;
    double scgm_probability = 0.2;
    double precursor_lead = 2.0;
    double precursor_depth = 12.0;  ///< dB of RSRQ decay over the lead
    std::uint64_t seed = 1;
    std::string trace_id = "sim";
};

struct Interval {
    double start = 0.0;
    double end = 0.0;
    friend bool operator==(const Interval&, const Interval&) = default;
};

struct GroundTruth {
    std::vector<double> rlf_times;
    std::vector<double> handover_times;
    std::vector<Interval> precursors;  ///< [start, end) before each RLF
};

struct SimulationResult {
    Trace trace;
    GroundTruth truth;  ///< as recorded during generation
};

inline void validate(const ScenarioConfig& c) {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(std::string("invalid scenario: ") + what);
    };
    require(c.duration > 0.0, "duration must be positive");
    require(c.sample_interval > 0.0, "sample_interval must be positive");
    require(c.duration >= c.sample_interval, "duration shorter than sample_interval");
    require(c.cell_count >= 2, "cell_count must be at least 2");
    require(c.cell_positions.empty() || c.cell_positions.size() == c.cell_count,
            "cell_positions length must equal cell_count");
    require(c.cell_spacing > 0.0, "cell_spacing must be positive");
    require(c.shadowing_sigma >= 0.0, "shadowing_sigma must be non-negative");
    require(c.shadowing_correlation >= 0.0 && c.shadowing_correlation < 1.0,
            "shadowing_correlation must lie in [0, 1)");
    require(c.handover_hysteresis >= 0.0, "handover_hysteresis must be non-negative");
    require(c.neighbor_capacity >= 1, "neighbor_capacity must be at least 1");
    require(c.neighbor_capacity < c.cell_count, "neighbor_capacity must be below cell_count");
    require(c.train_speed > 0.0, "train_speed must be positive");
    require(c.station_spacing > 0.0 && c.station_dwell >= 0.0, "invalid station profile");
    require(c.rlf_rate >= 0.0, "rlf_rate must be non-negative");
    require(c.rlf_refractory >= 0.0, "rlf_refractory must be non-negative");
    require(c.rlf_rate == 0.0 || 1000.0 / c.rlf_rate > c.rlf_refractory,
            "rlf_rate too high for the refractory period");
    require(c.mcgf_probability >= 0.0 && c.mcgf_probability <= 1.0, "mcgf_probability must lie in [0, 1]");
    require(c.scgm_probability >= 0.0 && c.scgm_probability <= 1.0, "scgm_probability must lie in [0, 1]");
    require(c.precursor_lead >= 0.0, "precursor_lead must be non-negative");
    require(c.precursor_depth >= 0.0, "precursor_depth must be non-negative");
}

namespace detail {

inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

// Shuttles between both ends of the track and dwells at every station.
class TrainMotion {
public:
    TrainMotion(double track_length, double speed, double station_spacing, double dwell)
        : length_(track_length), speed_(speed), spacing_(station_spacing), dwell_(dwell), dwell_left_(dwell) {}

    double position() const noexcept { return x_; }

    void advance(double dt) {
        double remaining = dt;
        while (remaining > 1e-12) {
            if (dwell_left_ > 0.0) {
                const double d = std::min(dwell_left_, remaining);
                dwell_left_ -= d;
                remaining -= d;
                continue;
            }
            const double target = next_stop();
            const double dist = std::abs(target - x_);
            const double reach = speed_ * remaining;
            if (reach < dist) {
                x_ += dir_ * reach;
                return;
            }
            x_ = target;
            remaining -= dist / speed_;
            dwell_left_ = dwell_;
            if (x_ >= length_ - 1e-9) dir_ = -1.0;
            if (x_ <= 1e-9) dir_ = 1.0;
        }
    }

private:
    double next_stop() const {
        const double k = x_ / spacing_;
        double stop = dir_ > 0 ? (std::floor(k + 1e-9) + 1.0) * spacing_ : (std::ceil(k - 1e-9) - 1.0) * spacing_;
        return std::clamp(stop, 0.0, length_);
    }

    double length_, speed_, spacing_, dwell_;
    double x_ = 0.0;
    double dir_ = 1.0;
    double dwell_left_ = 0.0;
};

}  // namespace detail

/// Deterministic in (config, config.seed).
inline SimulationResult simulate_trace(const ScenarioConfig& cfg) {
    validate(cfg);
    const double dt = cfg.sample_interval;
    const auto n_samples = static_cast<std::size_t>(std::llround(cfg.duration / dt)) + 1;
    const std::size_t n_cells = cfg.cell_count;

    std::vector<double> positions = cfg.cell_positions;
    if (positions.empty()) {
        for (std::size_t c = 0; c < n_cells; ++c) positions.push_back((double(c) + 0.5) * cfg.cell_spacing);
    }
    const double track_length = *std::max_element(positions.begin(), positions.end()) + 0.5 * cfg.cell_spacing;

    const Rng root(cfg.seed);
    Rng shadow_rng = root.substream("shadowing");
    Rng rlf_rng = root.substream("rlf");
    Rng event_rng = root.substream("events");

    // RLF schedule as tick indices.
    std::vector<std::size_t> rlf_ticks;
    if (cfg.rlf_rate > 0.0) {
        const double mean_gap = 1000.0 / cfg.rlf_rate;
        double t = 0.0;
        while (true) {
            t += cfg.rlf_refractory + rlf_rng.exponential(mean_gap - cfg.rlf_refractory);
            const auto tick = static_cast<std::size_t>(std::llround(t / dt));
            if (tick >= n_samples) break;
            if (!rlf_ticks.empty() && double(tick - rlf_ticks.back()) * dt < cfg.rlf_refractory - 1e-9) continue;
            rlf_ticks.push_back(tick);
        }
    }
    std::vector<EventCode> rlf_kind;
    for (std::size_t i = 0; i < rlf_ticks.size(); ++i) {
        rlf_kind.push_back(rlf_rng.bernoulli(cfg.mcgf_probability) ? EventCode::MCGF : EventCode::NASR);
    }

    const auto lead_ticks = static_cast<std::size_t>(std::llround(cfg.precursor_lead / dt));
    auto time_of = [&](std::size_t i) { return csv::quantize(double(i) * dt); };

    SimulationResult result;
    Trace& trace = result.trace;
    trace.trace_id = cfg.trace_id;
    trace.sample_interval = csv::quantize(dt);
    trace.neighbor_capacity = cfg.neighbor_capacity;
    trace.samples.reserve(n_samples);

    for (std::size_t r = 0; r < rlf_ticks.size(); ++r) {
        const double te = time_of(rlf_ticks[r]);
        result.truth.rlf_times.push_back(te);
        const std::size_t start_tick = rlf_ticks[r] >= lead_ticks ? rlf_ticks[r] - lead_ticks : 0;
        result.truth.precursors.push_back({time_of(start_tick), te});
    }

    detail::TrainMotion motion(track_length, cfg.train_speed, cfg.station_spacing, cfg.station_dwell);
    const double innovation = cfg.shadowing_sigma * std::sqrt(1.0 - cfg.shadowing_correlation * cfg.shadowing_correlation);
    std::vector<double> shadow(n_cells);
    for (auto& s : shadow) s = cfg.shadowing_sigma * shadow_rng.normal();

    std::vector<double> power(n_cells), power_mw(n_cells);
    const double noise_mw = detail::dbm_to_mw(cfg.noise_power);
    std::size_t serving = 0;
    std::size_t next_rlf = 0;
    constexpr std::size_t kNoTick = std::numeric_limits<std::size_t>::max();
    std::size_t scgm_tick = kNoTick;
    bool handover_pending = false;

    for (std::size_t i = 0; i < n_samples; ++i) {
        if (i > 0) motion.advance(dt);
        for (std::size_t c = 0; c < n_cells; ++c) {
            if (i > 0) shadow[c] = cfg.shadowing_correlation * shadow[c] + innovation * shadow_rng.normal();
            const double lateral = cfg.site_offset;
            const double along = motion.position() - positions[c];
            const double d = std::max(1.0, std::sqrt(along * along + lateral * lateral));
            power[c] = cfg.reference_power - 10.0 * cfg.pathloss_exponent * std::log10(d) + shadow[c];
            power_mw[c] = detail::dbm_to_mw(power[c]);
        }
        if (i == 0) serving = std::size_t(std::max_element(power.begin(), power.end()) - power.begin());

        while (next_rlf < rlf_ticks.size() && rlf_ticks[next_rlf] < i) ++next_rlf;
        const bool rlf_now = next_rlf < rlf_ticks.size() && rlf_ticks[next_rlf] == i;

        // Fractional progress through the precursor preceding the next RLF.
        double decay = 0.0;
        if (next_rlf < rlf_ticks.size() && lead_ticks > 0) {
            const std::size_t te = rlf_ticks[next_rlf];
            if (i < te && i + lead_ticks >= te) decay = double(i + lead_ticks - te) / double(lead_ticks);
        }
        const double rsrp_drop = 0.5 * cfg.precursor_depth * decay;
        const double rsrq_drop = cfg.precursor_depth * decay;

        std::size_t best = serving;
        for (std::size_t c = 0; c < n_cells; ++c) {
            if (c != serving && (best == serving || power[c] > power[best])) best = c;
        }
        const bool wants_handover =
            best != serving && power[best] > power[serving] - rsrp_drop + cfg.handover_hysteresis;

        EventCode event = EventCode::None;
        if (rlf_now) {
            event = rlf_kind[next_rlf];
            handover_pending = handover_pending || wants_handover;
        } else if (wants_handover || handover_pending) {
            if (wants_handover) serving = best;
            handover_pending = false;
            if (wants_handover) {
                event = (serving % 2 == 0) ? EventCode::MNBH : EventCode::ENBH;
                result.truth.handover_times.push_back(time_of(i));
                if (event_rng.bernoulli(cfg.scgm_probability)) {
                    scgm_tick = i + 1 + event_rng.below(static_cast<std::uint64_t>(std::max(1.0, std::round(1.0 / dt))));
                }
            }
        } else if (scgm_tick == i) {
            event = EventCode::SCGM;
        }
        if (scgm_tick != kNoTick && scgm_tick <= i) scgm_tick = kNoTick;

        auto rsrq_of = [&](std::size_t c, double drop) {
            double others = noise_mw;
            for (std::size_t o = 0; o < n_cells; ++o)
                if (o != c) others += power_mw[o];
            const double ratio = power_mw[c] / (power_mw[c] + others);
            return std::clamp(kRsrqMax - 5.0 + 10.0 * std::log10(ratio) - drop, kRsrqMin, kRsrqMax);
        };

        RadioSample s;
        s.t = time_of(i);
        s.serving_cell = static_cast<std::uint32_t>(serving);
        s.serving_rsrp = csv::quantize(std::clamp(power[serving] - rsrp_drop, kRsrpMin, kRsrpMax));
        s.serving_rsrq = csv::quantize(rsrq_of(serving, rsrq_drop));
        for (std::size_t c = 0; c < n_cells; ++c) {
            if (c == serving || power[c] < kRsrpMin) continue;
            s.neighbors.push_back({static_cast<std::uint32_t>(c), csv::quantize(std::min(power[c], kRsrpMax)),
                                   csv::quantize(rsrq_of(c, 0.0))});
        }
        std::sort(s.neighbors.begin(), s.neighbors.end(), neighbor_order);
        if (s.neighbors.size() > cfg.neighbor_capacity) s.neighbors.resize(cfg.neighbor_capacity);
        s.event = event;
        s.rlf = is_rlf(event);
        trace.samples.push_back(std::move(s));
    }
    return result;
}

/// Truths recoverable from the trace alone. Precursor intervals are
/// reconstructed only when the generating lead time is supplied.
inline GroundTruth ground_truth(const Trace& trace, std::optional<double> precursor_lead = std::nullopt) {
    GroundTruth g;
    g.rlf_times = rlf_timestamps(trace);
    for (const auto& s : trace.samples)
        if (is_handover(s.event)) g.handover_times.push_back(s.t);
    if (precursor_lead && !trace.samples.empty()) {
        const double dt = trace.sample_interval;
        const auto lead_ticks = std::llround(*precursor_lead / dt);
        const double t0 = trace.samples.front().t;
        for (double te : g.rlf_times) {
            const auto tick = std::llround((te - t0) / dt);
            const auto start = std::max<long long>(0, tick - lead_ticks);
            g.precursors.push_back({trace.samples[static_cast<std::size_t>(start)].t, te});
        }
    }
    return g;
}

inline std::string truth_to_csv(const GroundTruth& g) {
    struct Row {
        double start;
        int order;
        std::string text;
    };
    std::vector<Row> rows;
    for (double t : g.rlf_times) rows.push_back({t, 1, "RLF," + csv::fixed(t) + "," + csv::fixed(t)});
    for (double t : g.handover_times) rows.push_back({t, 2, "HANDOVER," + csv::fixed(t) + "," + csv::fixed(t)});
    for (const auto& p : g.precursors)
        rows.push_back({p.start, 0, "PRECURSOR," + csv::fixed(p.start) + "," + csv::fixed(p.end)});
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return a.start != b.start ? a.start < b.start : a.order < b.order;
    });
    std::string out = "kind,t_start,t_end\n";
    for (const auto& r : rows) out += r.text + '\n';
    return out;
}

inline GroundTruth load_truth_csv(const std::filesystem::path& path) {
    const auto lines = csv::read_lines(path);
    if (lines.empty() || lines[0] != "kind,t_start,t_end") throw ParseError("malformed header at line 1");
    GroundTruth g;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = csv::split(lines[i]);
        const auto a = f.size() == 3 ? csv::try_parse_double(f[1]) : std::nullopt;
        const auto b = f.size() == 3 ? csv::try_parse_double(f[2]) : std::nullopt;
        if (!a || !b) throw ParseError("malformed truth row at line " + std::to_string(i + 1));
        if (f[0] == "RLF") g.rlf_times.push_back(*a);
        else if (f[0] == "HANDOVER") g.handover_times.push_back(*a);
        else if (f[0] == "PRECURSOR") g.precursors.push_back({*a, *b});
        else throw ParseError("unknown truth kind at line " + std::to_string(i + 1));
    }
    return g;
}

}  // namespace rlfw
