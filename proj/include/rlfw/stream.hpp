#pragma once

// Tick-by-tick replay: keeps the last W frames, scores each full window with
// the same featurization as the offline path and raises an alarm after
// confirm_m consecutive scores >= tau, at most once per cooldown.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rlfw/csv.hpp"
#include "rlfw/dataset.hpp"
#include "rlfw/error.hpp"
#include "rlfw/eval.hpp"
#include "rlfw/learners.hpp"
#include "rlfw/trace.hpp"

namespace rlfw {

enum class ActionHint : std::uint8_t { ActivateRedundancy, PrepareHandover };

inline std::string to_string(ActionHint h) {
    return h == ActionHint::ActivateRedundancy ? "activate_redundancy" : "prepare_handover";
}

inline ActionHint parse_action_hint(std::string_view s) {
    if (s == "activate_redundancy") return ActionHint::ActivateRedundancy;
    if (s == "prepare_handover") return ActionHint::PrepareHandover;
    throw ConfigError("unknown action hint '" + std::string(s) + "'");
}

struct AlarmConfig {
    double tau = 0.5;
    std::size_t confirm_m = 2;
    double cooldown = 1.0;  ///< seconds; may be infinite
    ActionHint action_hint = ActionHint::ActivateRedundancy;
};

inline void validate(const AlarmConfig& c) {
    if (!(c.tau > 0.0 && c.tau < 1.0)) throw ConfigError("alarm tau must lie in (0, 1)");
    if (c.confirm_m < 1) throw ConfigError("confirm_m must be at least 1");
    if (!(c.cooldown >= 0.0)) throw ConfigError("cooldown must be non-negative");
}

struct AlarmEvent {
    double t = 0.0;
    double score = 0.0;
    ActionHint action_hint = ActionHint::ActivateRedundancy;
};

class AlarmStream {
public:
    AlarmStream(const TrainedModel& model, const WindowSpec& spec, AlarmConfig cfg)
        : model_(model), spec_(spec), cfg_(cfg), offsets_(spec.frame_offsets()) {
        validate(cfg_);
        require_compatible(model_, spec_);
        ring_.resize(spec_.window_frames());
    }

    /// Feeds one sample; returns an alarm when confirmation completes.
    std::optional<AlarmEvent> push(const RadioSample& sample) {
        if (prev_ && std::abs((sample.t - prev_->t) - spec_.I_s) > kTimeTolerance) {
            throw Error("out-of-order or gapped timestamp " + csv::fixed(sample.t) + " after " + csv::fixed(prev_->t));
        }
        auto& slot = ring_[head_];
        slot.clear();
        append_frame_features(sample, prev_ ? &*prev_ : nullptr, spec_.N, slot);
        head_ = (head_ + 1) % ring_.size();
        filled_ = std::min(filled_ + 1, ring_.size());
        prev_ = sample;
        last_score_.reset();
        if (filled_ < ring_.size()) return std::nullopt;

        // Oldest frame sits at head_ once the ring is full.
        features_.clear();
        for (std::size_t off : offsets_) {
            const auto& f = ring_[(head_ + off) % ring_.size()];
            features_.insert(features_.end(), f.begin(), f.end());
        }
        model_.normalization.apply(features_);
        const double score = model_.predict(features_);
        last_score_ = score;

        consecutive_ = score >= cfg_.tau ? consecutive_ + 1 : 0;
        if (consecutive_ >= cfg_.confirm_m) {
            const bool cooled = !last_alarm_ || sample.t - *last_alarm_ >= cfg_.cooldown - kTimeTolerance;
            if (cooled) {
                consecutive_ = 0;
                last_alarm_ = sample.t;
                return AlarmEvent{sample.t, score, cfg_.action_hint};
            }
        }
        return std::nullopt;
    }

    /// Score of the most recent tick, absent during warm-up.
    [[nodiscard]] std::optional<double> last_score() const noexcept { return last_score_; }

private:
    const TrainedModel& model_;
    WindowSpec spec_;
    AlarmConfig cfg_;
    std::vector<std::size_t> offsets_;
    std::vector<std::vector<double>> ring_;
    std::size_t head_ = 0;
    std::size_t filled_ = 0;
    std::optional<RadioSample> prev_;
    std::vector<double> features_;
    std::optional<double> last_score_;
    std::size_t consecutive_ = 0;
    std::optional<double> last_alarm_;
};

struct AlarmRecord {
    AlarmEvent event;
    std::optional<double> lead_time;  ///< seconds to the next RLF within T_p
};

struct ReplayResult {
    std::vector<AlarmRecord> alarms;
    std::vector<TimelineRow> timeline;  ///< one row per scored tick
};

inline ReplayResult replay(const Trace& trace, const TrainedModel& model, const WindowSpec& spec,
                           const AlarmConfig& cfg) {
    if (!trace.samples.empty() && std::abs(trace.sample_interval - spec.I_s) > kTimeTolerance)
        throw ConfigError("trace sample interval differs from window spec I_s");
    AlarmStream stream(model, spec, cfg);
    ReplayResult r;
    const auto rlf = rlf_timestamps(trace);
    for (const auto& s : trace.samples) {
        const auto alarm = stream.push(s);
        if (const auto score = stream.last_score())
            r.timeline.push_back({s.t, *score, alarm.has_value(), is_rlf(s.event)});
        if (!alarm) continue;
        AlarmRecord rec{*alarm, std::nullopt};
        const auto next = std::upper_bound(rlf.begin(), rlf.end(), alarm->t + kTimeTolerance);
        if (next != rlf.end() && *next <= alarm->t + spec.T_p + kTimeTolerance) rec.lead_time = *next - alarm->t;
        r.alarms.push_back(rec);
    }
    return r;
}

inline constexpr std::string_view kAlarmHeader = "t,score,action_hint,lead_time_s,outcome";

inline std::string alarm_log_csv(const std::vector<AlarmRecord>& alarms) {
    std::string out(kAlarmHeader);
    out += '\n';
    for (const auto& a : alarms) {
        out += csv::fixed(a.event.t) + ',' + csv::fixed(a.event.score) + ',' + to_string(a.event.action_hint) + ',' +
               (a.lead_time ? csv::fixed(*a.lead_time) : std::string()) + ',' + (a.lead_time ? "hit" : "false") + '\n';
    }
    return out;
}

}  // namespace rlfw
