#pragma once

// Telemetry data model: one 10 Hz radio frame per RadioSample, a Trace is an
// evenly spaced run of them. Trace CSV layout:
//
//   t,serving_pci,serving_rsrp,serving_rsrq,n1_pci,n1_rsrp,n1_rsrq,...,nN_pci,nN_rsrp,nN_rsrq,event,rlf
//
// Absent neighbor slots are written as three empty fields. Reals use six
// decimals.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rlfw/csv.hpp"
#include "rlfw/error.hpp"

namespace rlfw {

inline constexpr double kRsrpMin = -140.0;
inline constexpr double kRsrpMax = -44.0;
inline constexpr double kRsrqMin = -20.0;
inline constexpr double kRsrqMax = -3.0;
inline constexpr double kTimeTolerance = 1e-9;

enum class EventCode : std::uint8_t { None, MCGF, NASR, MNBH, SCGM, ENBH };

inline constexpr bool is_rlf(EventCode e) noexcept { return e == EventCode::MCGF || e == EventCode::NASR; }
inline constexpr bool is_handover(EventCode e) noexcept { return e == EventCode::MNBH || e == EventCode::ENBH; }

inline constexpr std::string_view to_string(EventCode e) noexcept {
    switch (e) {
        case EventCode::None: return "NONE";
        case EventCode::MCGF: return "MCGF";
        case EventCode::NASR: return "NASR";
        case EventCode::MNBH: return "MNBH";
        case EventCode::SCGM: return "SCGM";
        case EventCode::ENBH: return "ENBH";
    }
    return "NONE";
}

inline std::optional<EventCode> parse_event_code(std::string_view s) {
    for (auto e : {EventCode::None, EventCode::MCGF, EventCode::NASR, EventCode::MNBH, EventCode::SCGM,
                   EventCode::ENBH}) {
        if (to_string(e) == s) return e;
    }
    return std::nullopt;
}

struct NeighborEntry {
    std::uint32_t cell_id = 0;
    double rsrp = kRsrpMin;
    double rsrq = kRsrqMin;

    friend bool operator==(const NeighborEntry&, const NeighborEntry&) = default;
};

/// Strongest first; equal power falls back to the lower cell id.
inline bool neighbor_order(const NeighborEntry& a, const NeighborEntry& b) noexcept {
    if (a.rsrp != b.rsrp) return a.rsrp > b.rsrp;
    return a.cell_id < b.cell_id;
}

struct RadioSample {
    double t = 0.0;
    std::uint32_t serving_cell = 0;
    double serving_rsrp = kRsrpMin;
    double serving_rsrq = kRsrqMin;
    std::vector<NeighborEntry> neighbors;
    EventCode event = EventCode::None;
    bool rlf = false;

    friend bool operator==(const RadioSample&, const RadioSample&) = default;
};

struct Trace {
    std::string trace_id;
    double sample_interval = 0.1;
    std::size_t neighbor_capacity = 0;
    std::vector<RadioSample> samples;

    [[nodiscard]] double duration() const noexcept {
        return samples.empty() ? 0.0 : samples.back().t - samples.front().t;
    }

    friend bool operator==(const Trace&, const Trace&) = default;
};

struct Violation {
    std::size_t index = 0;  ///< sample index, 0-based
    std::string field;
    std::string message;
};

namespace detail {

inline bool in_range(double v, double lo, double hi) noexcept { return v >= lo && v <= hi; }

inline std::string range_text(double v, double lo, double hi) {
    return csv::fixed(v) + " outside [" + csv::fixed(lo, 0) + ", " + csv::fixed(hi, 0) + "]";
}

// Checks that only look at a single sample (and its predecessor for timing).
inline void check_sample(const RadioSample& s, const RadioSample* prev, double interval, std::size_t capacity,
                         std::size_t index, std::vector<Violation>& out) {
    auto add = [&](std::string field, std::string msg) {
        out.push_back({index, std::move(field), std::move(msg)});
    };
    if (!std::isfinite(s.t)) add("t", "non-finite timestamp");
    if (prev != nullptr && std::abs((s.t - prev->t) - interval) > kTimeTolerance) {
        add("t", "non-uniform timestamp");
    }
    if (!in_range(s.serving_rsrp, kRsrpMin, kRsrpMax))
        add("serving_rsrp", range_text(s.serving_rsrp, kRsrpMin, kRsrpMax));
    if (!in_range(s.serving_rsrq, kRsrqMin, kRsrqMax))
        add("serving_rsrq", range_text(s.serving_rsrq, kRsrqMin, kRsrqMax));
    if (s.neighbors.size() > capacity) add("neighbors", "more neighbors than capacity");
    for (std::size_t j = 0; j < s.neighbors.size(); ++j) {
        const auto& n = s.neighbors[j];
        const std::string slot = "n" + std::to_string(j + 1);
        if (!in_range(n.rsrp, kRsrpMin, kRsrpMax)) add(slot + "_rsrp", range_text(n.rsrp, kRsrpMin, kRsrpMax));
        if (!in_range(n.rsrq, kRsrqMin, kRsrqMax)) add(slot + "_rsrq", range_text(n.rsrq, kRsrqMin, kRsrqMax));
        if (j > 0 && !neighbor_order(s.neighbors[j - 1], n)) add(slot, "neighbors not strictly ordered by rsrp");
    }
    if (s.rlf != is_rlf(s.event)) {
        add("rlf", "rlf flag " + std::to_string(int(s.rlf)) + " inconsistent with event " +
                       std::string(to_string(s.event)));
    }
}

}  // namespace detail

/// Every invariant violation in the trace; empty iff the trace is valid.
inline std::vector<Violation> validate_trace(const Trace& trace) {
    std::vector<Violation> out;
    if (!(trace.sample_interval > 0.0)) out.push_back({0, "sample_interval", "sample interval must be positive"});
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
        detail::check_sample(trace.samples[i], i ? &trace.samples[i - 1] : nullptr, trace.sample_interval,
                             trace.neighbor_capacity, i, out);
    }
    return out;
}

inline std::vector<double> rlf_timestamps(const Trace& trace) {
    std::vector<double> out;
    for (const auto& s : trace.samples)
        if (is_rlf(s.event)) out.push_back(s.t);
    return out;
}

inline std::string trace_csv_header(std::size_t capacity) {
    std::string h = "t,serving_pci,serving_rsrp,serving_rsrq";
    for (std::size_t j = 1; j <= capacity; ++j) {
        const auto n = "n" + std::to_string(j);
        h += "," + n + "_pci," + n + "_rsrp," + n + "_rsrq";
    }
    h += ",event,rlf";
    return h;
}

inline std::string to_csv(const Trace& trace) {
    std::string out = trace_csv_header(trace.neighbor_capacity);
    out += '\n';
    for (const auto& s : trace.samples) {
        out += csv::fixed(s.t);
        out += ',' + std::to_string(s.serving_cell) + ',' + csv::fixed(s.serving_rsrp) + ',' +
               csv::fixed(s.serving_rsrq);
        for (std::size_t j = 0; j < trace.neighbor_capacity; ++j) {
            if (j < s.neighbors.size()) {
                const auto& n = s.neighbors[j];
                out += ',' + std::to_string(n.cell_id) + ',' + csv::fixed(n.rsrp) + ',' + csv::fixed(n.rsrq);
            } else {
                out += ",,,";
            }
        }
        out += ',';
        out += to_string(s.event);
        out += s.rlf ? ",1\n" : ",0\n";
    }
    return out;
}

inline void save_trace_csv(const Trace& trace, const std::filesystem::path& path) {
    csv::write_atomic(path, to_csv(trace));
}

/// Parses trace CSV text. Line numbers in errors are 1-based and count the header.
inline Trace parse_trace_csv(std::string_view text, std::string trace_id) {
    std::vector<std::string_view> lines;
    for (auto&& f : csv::split(text, '\n')) lines.push_back(f);
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty()) throw ParseError("malformed header at line 1: file is empty");
    for (auto& l : lines)
        if (!l.empty() && l.back() == '\r') l.remove_suffix(1);

    const auto header = csv::split(lines[0]);
    const std::size_t base_fields = 6;
    if (header.size() < base_fields || (header.size() - base_fields) % 3 != 0) {
        throw ParseError("malformed header at line 1");
    }
    const std::size_t capacity = (header.size() - base_fields) / 3;
    if (lines[0] != trace_csv_header(capacity)) throw ParseError("malformed header at line 1");

    Trace trace;
    trace.trace_id = std::move(trace_id);
    trace.neighbor_capacity = capacity;
    trace.samples.reserve(lines.size() - 1);

    for (std::size_t li = 1; li < lines.size(); ++li) {
        const std::size_t line_no = li + 1;
        auto fail = [&](const std::string& what) -> ParseError {
            return ParseError(what + " at line " + std::to_string(line_no));
        };
        const auto f = csv::split(lines[li]);
        if (f.size() != header.size()) throw fail("wrong field count");
        RadioSample s;
        auto real = [&](std::string_view v, const char* name) {
            auto d = csv::try_parse_double(v);
            if (!d || !std::isfinite(*d)) throw fail(std::string("invalid ") + name);
            return *d;
        };
        auto cell = [&](std::string_view v, const char* name) {
            auto d = csv::try_parse_int(v);
            if (!d || *d < 0 || *d > std::int64_t{UINT32_MAX}) throw fail(std::string("invalid ") + name);
            return static_cast<std::uint32_t>(*d);
        };
        s.t = real(f[0], "t");
        s.serving_cell = cell(f[1], "serving_pci");
        s.serving_rsrp = real(f[2], "serving_rsrp");
        s.serving_rsrq = real(f[3], "serving_rsrq");
        bool slot_gap = false;
        for (std::size_t j = 0; j < capacity; ++j) {
            const auto pci = f[4 + 3 * j], rsrp = f[5 + 3 * j], rsrq = f[6 + 3 * j];
            const bool absent = pci.empty() && rsrp.empty() && rsrq.empty();
            if (absent) {
                slot_gap = true;
                continue;
            }
            if (slot_gap) throw fail("neighbor slot after an empty slot");
            s.neighbors.push_back({cell(pci, "neighbor pci"), real(rsrp, "neighbor rsrp"), real(rsrq, "neighbor rsrq")});
        }
        const auto ev = parse_event_code(f[f.size() - 2]);
        if (!ev) throw fail("unknown event code '" + std::string(f[f.size() - 2]) + "'");
        s.event = *ev;
        const auto rlf = f.back();
        if (rlf != "0" && rlf != "1") throw fail("invalid rlf flag");
        s.rlf = rlf == "1";
        trace.samples.push_back(std::move(s));
    }

    if (trace.samples.size() >= 2) {
        trace.sample_interval = csv::quantize(trace.samples[1].t - trace.samples[0].t);
    }
    if (!(trace.sample_interval > 0.0)) throw ParseError("non-uniform timestamp at line 3");

    std::vector<Violation> v;
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
        detail::check_sample(trace.samples[i], i ? &trace.samples[i - 1] : nullptr, trace.sample_interval, capacity,
                             i, v);
        if (!v.empty()) {
            const auto& first = v.front();
            const std::string what = first.field == "t" ? first.message : first.field + " " + first.message;
            throw ParseError(what + " at line " + std::to_string(first.index + 2));
        }
    }
    return trace;
}

inline Trace load_trace_csv(const std::filesystem::path& path) {
    const auto lines = csv::read_lines(path);
    std::string text;
    for (const auto& l : lines) {
        text += l;
        text += '\n';
    }
    return parse_trace_csv(text, path.stem().string());
}

}  // namespace rlfw
