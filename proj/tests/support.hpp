#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "rlfw/rlfw.hpp"

namespace rlfw::test {

/// Flat trace on [0, duration] with events placed at the given ticks.
inline Trace flat_trace(double duration, double I_s = 0.1, std::vector<std::pair<double, EventCode>> events = {},
                        std::size_t capacity = 3, std::string id = "t") {
    Trace tr;
    tr.trace_id = std::move(id);
    tr.sample_interval = I_s;
    tr.neighbor_capacity = capacity;
    const auto n = static_cast<std::size_t>(std::llround(duration / I_s)) + 1;
    for (std::size_t i = 0; i < n; ++i) {
        RadioSample s;
        s.t = csv::quantize(double(i) * I_s);
        s.serving_cell = 1;
        s.serving_rsrp = -80.0;
        s.serving_rsrq = -10.0;
        for (std::size_t j = 0; j < capacity; ++j)
            s.neighbors.push_back({std::uint32_t(2 + j), -90.0 - 5.0 * double(j), -12.0 - double(j)});
        tr.samples.push_back(std::move(s));
    }
    for (const auto& [t, e] : events) {
        auto& s = tr.samples[static_cast<std::size_t>(std::llround(t / I_s))];
        s.event = e;
        s.rlf = is_rlf(e);
    }
    return tr;
}

/// Random but valid trace: random walk radio values, random neighbor counts
/// and random events with the given per-tick RLF probability.
inline Trace random_trace(Rng rng, std::size_t samples, double rlf_p = 0.01, std::size_t capacity = 3,
                          std::string id = "r") {
    Trace tr;
    tr.trace_id = std::move(id);
    tr.sample_interval = 0.1;
    tr.neighbor_capacity = capacity;
    for (std::size_t i = 0; i < samples; ++i) {
        RadioSample s;
        s.t = csv::quantize(double(i) * 0.1);
        s.serving_cell = static_cast<std::uint32_t>(rng.below(5));
        s.serving_rsrp = csv::quantize(-140.0 + 96.0 * rng.uniform());
        s.serving_rsrq = csv::quantize(-20.0 + 17.0 * rng.uniform());
        const auto k = rng.below(capacity + 1);
        double top = -44.0;
        for (std::size_t j = 0; j < k; ++j) {
            top = csv::quantize(top - 0.5 - 10.0 * rng.uniform());
            if (top < -140.0) break;
            s.neighbors.push_back({static_cast<std::uint32_t>(10 + j), top, csv::quantize(-20.0 + 17.0 * rng.uniform())});
        }
        const double u = rng.uniform();
        if (u < rlf_p) s.event = rng.bernoulli(0.9) ? EventCode::MCGF : EventCode::NASR;
        else if (u < rlf_p + 0.01) s.event = EventCode::MNBH;
        else if (u < rlf_p + 0.02) s.event = EventCode::ENBH;
        else if (u < rlf_p + 0.025) s.event = EventCode::SCGM;
        s.rlf = is_rlf(s.event);
        tr.samples.push_back(std::move(s));
    }
    return tr;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("rlfw_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace rlfw::test
