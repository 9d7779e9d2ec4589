#pragma once

// Flat `key = value` run configuration. Every key has a default; unknown keys
// are rejected. `resolved()` renders the full key set so a run can be
// reproduced from its echo alone.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "rlfw/balance.hpp"
#include "rlfw/csv.hpp"
#include "rlfw/dataset.hpp"
#include "rlfw/error.hpp"
#include "rlfw/learners.hpp"
#include "rlfw/simulator.hpp"
#include "rlfw/stream.hpp"

namespace rlfw {

class RunConfig {
public:
    RunConfig() : values_(defaults()) {}

    static const std::map<std::string, std::string>& defaults() {
        static const std::map<std::string, std::string> d = {
            {"sim.seed", "1"},
            {"sim.traces", "3"},
            {"sim.duration", "1200"},
            {"sim.sample_interval", "0.1"},
            {"sim.cell_count", "12"},
            {"sim.cell_positions", ""},
            {"sim.cell_spacing", "400"},
            {"sim.site_offset", "40"},
            {"sim.reference_power", "-30"},
            {"sim.pathloss_exponent", "3.2"},
            {"sim.noise_power", "-105"},
            {"sim.shadowing_sigma", "3"},
            {"sim.shadowing_correlation", "0.98"},
            {"sim.handover_hysteresis", "3"},
            {"sim.neighbor_capacity", "3"},
            {"sim.train_speed", "20"},
            {"sim.station_spacing", "1200"},
            {"sim.station_dwell", "20"},
            {"sim.rlf_rate", "20"},
            {"sim.rlf_refractory", "5"},
            {"sim.mcgf_probability", "0.9"},
            {"sim.scgm_probability", "0.2"},
            {"sim.precursor_lead", "2"},
            {"sim.precursor_depth", "12"},
            {"window.T_s", "3"},
            {"window.T_p", "2"},
            {"window.I_s", "0.1"},
            {"window.N", "3"},
            {"window.scheme", "full"},
            {"window.label_mode", "binary"},
            {"window.K", "0"},
            {"split.train", "0.7"},
            {"split.val", "0.15"},
            {"split.test", "0.15"},
            {"balance.method", "downsample"},
            {"balance.ratio", "30"},
            {"balance.smote_k", "5"},
            {"balance.seed", "7"},
            {"train.kind", "gbdt"},
            {"train.seed", "11"},
            {"logreg.learning_rate", "0.5"},
            {"logreg.epochs", "300"},
            {"mlp.learning_rate", "0.05"},
            {"mlp.epochs", "20"},
            {"mlp.hidden_units", "16"},
            {"mlp.batch_size", "128"},
            {"gbdt.learning_rate", "0.3"},
            {"gbdt.trees", "100"},
            {"gbdt.max_depth", "6"},
            {"gbdt.lambda", "1"},
            {"gbdt.gamma", "0"},
            {"gbdt.min_child_hessian", "1"},
            {"alarm.tau", "0.5"},
            {"alarm.confirm_m", "2"},
            {"alarm.cooldown", "1"},
            {"alarm.action_hint", "activate_redundancy"},
            {"sweep.models", "logreg,mlp,gbdt"},
            {"sweep.T_s", "1,2,3"},
            {"sweep.T_p", "1,2,3"},
            {"latency.repetitions", "5"},
        };
        return d;
    }

    void set(const std::string& key, std::string value) {
        if (!values_.contains(key)) throw ConfigError("unknown config key '" + key + "'");
        values_[key] = std::move(value);
    }

    /// Accepts "key=value" as given on the command line.
    void set_assignment(std::string_view text) {
        const auto eq = text.find('=');
        if (eq == std::string_view::npos) throw ConfigError("expected key=value, got '" + std::string(text) + "'");
        set(std::string(csv::trim(text.substr(0, eq))), std::string(csv::trim(text.substr(eq + 1))));
    }

    void load_text(std::string_view text) {
        std::size_t line_no = 0;
        for (auto line : csv::split(text, '\n')) {
            ++line_no;
            if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
            line = csv::trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) throw ConfigError("expected key = value at line " + std::to_string(line_no));
            const std::string key(csv::trim(line.substr(0, eq)));
            if (!values_.contains(key))
                throw ConfigError("unknown config key '" + key + "' at line " + std::to_string(line_no));
            values_[key] = std::string(csv::trim(line.substr(eq + 1)));
        }
    }

    void load_file(const std::filesystem::path& path) {
        std::string text;
        for (const auto& l : csv::read_lines(path)) text += l + '\n';
        load_text(text);
    }

    [[nodiscard]] const std::string& text(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
        return it->second;
    }

    [[nodiscard]] double real(const std::string& key) const {
        const auto v = csv::try_parse_double(text(key));
        if (!v) throw ConfigError("config key '" + key + "' is not a number: '" + text(key) + "'");
        return *v;
    }

    [[nodiscard]] std::size_t count(const std::string& key) const {
        const auto v = csv::try_parse_int(text(key));
        if (!v || *v < 0) throw ConfigError("config key '" + key + "' is not a non-negative integer");
        return static_cast<std::size_t>(*v);
    }

    [[nodiscard]] std::uint64_t seed(const std::string& key) const {
        const auto v = csv::try_parse_u64(text(key));
        if (!v) throw ConfigError("config key '" + key + "' is not a 64-bit seed");
        return *v;
    }

    [[nodiscard]] std::vector<std::string> list(const std::string& key) const {
        std::vector<std::string> out;
        if (text(key).empty()) return out;
        for (auto item : csv::split(text(key))) out.emplace_back(csv::trim(item));
        return out;
    }

    [[nodiscard]] std::vector<double> reals(const std::string& key) const {
        std::vector<double> out;
        for (const auto& item : list(key)) {
            const auto v = csv::try_parse_double(item);
            if (!v) throw ConfigError("config key '" + key + "' has a non-numeric entry '" + item + "'");
            out.push_back(*v);
        }
        return out;
    }

    /// Sorted `key = value` lines covering every key.
    [[nodiscard]] std::string resolved() const {
        std::string out;
        for (const auto& [k, v] : values_) out += k + " = " + v + '\n';
        return out;
    }

    [[nodiscard]] ScenarioConfig scenario() const {
        ScenarioConfig c;
        c.duration = real("sim.duration");
        c.sample_interval = real("sim.sample_interval");
        c.cell_count = count("sim.cell_count");
        c.cell_positions = reals("sim.cell_positions");
        c.cell_spacing = real("sim.cell_spacing");
        c.site_offset = real("sim.site_offset");
        c.reference_power = real("sim.reference_power");
        c.pathloss_exponent = real("sim.pathloss_exponent");
        c.noise_power = real("sim.noise_power");
        c.shadowing_sigma = real("sim.shadowing_sigma");
        c.shadowing_correlation = real("sim.shadowing_correlation");
        c.handover_hysteresis = real("sim.handover_hysteresis");
        c.neighbor_capacity = count("sim.neighbor_capacity");
        c.train_speed = real("sim.train_speed");
        c.station_spacing = real("sim.station_spacing");
        c.station_dwell = real("sim.station_dwell");
        c.rlf_rate = real("sim.rlf_rate");
        c.rlf_refractory = real("sim.rlf_refractory");
        c.mcgf_probability = real("sim.mcgf_probability");
        c.scgm_probability = real("sim.scgm_probability");
        c.precursor_lead = real("sim.precursor_lead");
        c.precursor_depth = real("sim.precursor_depth");
        c.seed = seed("sim.seed");
        validate(c);
        return c;
    }

    [[nodiscard]] WindowSpec window() const {
        WindowSpec s;
        s.T_s = real("window.T_s");
        s.T_p = real("window.T_p");
        s.I_s = real("window.I_s");
        s.N = count("window.N");
        s.scheme = parse_scheme(text("window.scheme"));
        const auto& mode = text("window.label_mode");
        if (mode == "binary") s.label_mode = LabelMode::Binary;
        else if (mode == "multi_interval") s.label_mode = LabelMode::MultiInterval;
        else throw ConfigError("window.label_mode must be binary or multi_interval");
        s.K = count("window.K");
        validate(s);
        return s;
    }

    [[nodiscard]] SplitFractions split() const {
        return {real("split.train"), real("split.val"), real("split.test")};
    }

    [[nodiscard]] BalanceConfig balance() const {
        BalanceConfig b;
        b.method = parse_balance_method(text("balance.method"));
        b.ratio = real("balance.ratio");
        b.smote_k = count("balance.smote_k");
        b.seed = seed("balance.seed");
        return b;
    }

    [[nodiscard]] TrainConfig train(ModelKind kind) const {
        TrainConfig t;
        t.kind = kind;
        t.seed = seed("train.seed");
        switch (kind) {
            case ModelKind::LogReg:
                t.learning_rate = real("logreg.learning_rate");
                t.epochs = count("logreg.epochs");
                break;
            case ModelKind::Mlp:
                t.learning_rate = real("mlp.learning_rate");
                t.epochs = count("mlp.epochs");
                t.hidden_units = count("mlp.hidden_units");
                t.batch_size = count("mlp.batch_size");
                break;
            case ModelKind::Gbdt:
                t.learning_rate = real("gbdt.learning_rate");
                t.trees = count("gbdt.trees");
                t.max_depth = count("gbdt.max_depth");
                t.lambda = real("gbdt.lambda");
                t.gamma = real("gbdt.gamma");
                t.min_child_hessian = real("gbdt.min_child_hessian");
                break;
        }
        validate(t);
        return t;
    }
    [[nodiscard]] TrainConfig train() const { return train(parse_model_kind(text("train.kind"))); }

    [[nodiscard]] AlarmConfig alarm() const {
        AlarmConfig a;
        a.tau = real("alarm.tau");
        a.confirm_m = count("alarm.confirm_m");
        a.cooldown = real("alarm.cooldown");
        a.action_hint = parse_action_hint(text("alarm.action_hint"));
        validate(a);
        return a;
    }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace rlfw
