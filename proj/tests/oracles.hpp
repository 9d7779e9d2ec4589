#pragma once

// Slow reference implementations used to cross-check the library.

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "rlfw/rlfw.hpp"

namespace rlfw::oracle {

struct Split {
    double gain = -1e300;
    int feature = -1;
    double threshold = 0.0;
};

/// Best split of `rows` by enumerating every (feature, midpoint) pair and
/// summing gradients from scratch. Gains within `tie` of each other count as
/// equal and resolve to the lowest feature, then the lowest threshold.
inline Split best_split(const std::vector<std::vector<double>>& x, const std::vector<double>& g,
                        const std::vector<double>& h, const std::vector<std::size_t>& rows, double lambda,
                        double gamma, double tie = 1e-9) {
    Split best;
    double G = 0.0, H = 0.0;
    for (auto i : rows) {
        G += g[i];
        H += h[i];
    }
    const std::size_t dim = x.empty() ? 0 : x[0].size();
    for (std::size_t f = 0; f < dim; ++f) {
        std::set<double> values;
        for (auto i : rows) values.insert(x[i][f]);
        std::vector<double> v(values.begin(), values.end());
        for (std::size_t k = 0; k + 1 < v.size(); ++k) {
            double thr = 0.5 * (v[k] + v[k + 1]);
            if (!(thr > v[k])) thr = v[k + 1];
            double GL = 0.0, HL = 0.0;
            for (auto i : rows)
                if (x[i][f] < thr) {
                    GL += g[i];
                    HL += h[i];
                }
            const double gain = split_gain(GL, HL, G - GL, H - HL, lambda, gamma);
            if (gain > best.gain + tie * std::max(1.0, std::abs(best.gain))) best = {gain, int(f), thr};
        }
    }
    return best;
}

/// Depth-first exact greedy tree; returns the margin contribution for every
/// training row.
inline void grow(const std::vector<std::vector<double>>& x, const std::vector<double>& g, const std::vector<double>& h,
                 const std::vector<std::size_t>& rows, std::size_t depth, const TrainConfig& cfg,
                 std::vector<double>& out, std::vector<Split>* splits = nullptr) {
    double G = 0.0, H = 0.0;
    for (auto i : rows) {
        G += g[i];
        H += h[i];
    }
    if (depth < cfg.max_depth && H >= cfg.min_child_hessian) {
        const auto s = best_split(x, g, h, rows, cfg.lambda, cfg.gamma);
        if (s.feature >= 0 && s.gain > 0.0) {
            if (splits) splits->push_back(s);
            std::vector<std::size_t> left, right;
            for (auto i : rows) (x[i][std::size_t(s.feature)] < s.threshold ? left : right).push_back(i);
            grow(x, g, h, left, depth + 1, cfg, out, splits);
            grow(x, g, h, right, depth + 1, cfg, out, splits);
            return;
        }
    }
    const double value = -G / (H + cfg.lambda) * cfg.learning_rate;
    for (auto i : rows) out[i] = value;
}

/// Margins after one boosting round from the weighted log-odds base score.
inline std::vector<double> first_round_margins(const Dataset& d, const TrainConfig& cfg,
                                               std::vector<Split>* splits = nullptr) {
    std::vector<std::vector<double>> x;
    std::vector<double> y, c;
    double wpos = 0.0, wneg = 0.0;
    for (const auto& e : d.examples) {
        x.push_back(e.features);
        y.push_back(e.positive() ? 1.0 : 0.0);
        c.push_back(e.positive() ? cfg.class_weights.positive : cfg.class_weights.negative);
        (e.positive() ? wpos : wneg) += c.back();
    }
    const double base = std::log(wpos / wneg);
    const double p = 1.0 / (1.0 + std::exp(-base));
    std::vector<double> g, h;
    for (std::size_t i = 0; i < x.size(); ++i) {
        g.push_back(c[i] * (p - y[i]));
        h.push_back(c[i] * p * (1.0 - p));
    }
    std::vector<std::size_t> rows(x.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    std::vector<double> out(x.size(), 0.0);
    grow(x, g, h, rows, 0, cfg, out, splits);
    for (auto& v : out) v += base;
    return out;
}

/// Confusion counts and metrics straight from the definitions.
struct Metrics {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double accuracy = 0, precision = 0, recall = 0, f1 = 0;
};

inline Metrics metrics(const std::vector<double>& s, const std::vector<int>& y, double tau) {
    Metrics m;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const bool p = s[i] >= tau;
        if (p && y[i] == 1) ++m.tp;
        if (p && y[i] == 0) ++m.fp;
        if (!p && y[i] == 0) ++m.tn;
        if (!p && y[i] == 1) ++m.fn;
    }
    m.accuracy = double(m.tp + m.tn) / double(s.size());
    m.precision = m.tp + m.fp ? double(m.tp) / double(m.tp + m.fp) : 0.0;
    m.recall = m.tp + m.fn ? double(m.tp) / double(m.tp + m.fn) : 0.0;
    m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
}

/// Pairwise Mann-Whitney AUC.
inline double auc(const std::vector<double>& s, const std::vector<int>& y) {
    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (y[i] != 1) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[j] != 0) continue;
            pairs += 1.0;
            wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
    }
    return wins / pairs;
}

inline double select_threshold(const std::vector<double>& s, const std::vector<int>& y) {
    double best_tau = 0.1, best_f1 = -1.0;
    for (int k = 1; k <= 9; ++k) {
        const double tau = k / 10.0;
        const double f1 = metrics(s, y, tau).f1;
        if (f1 > best_f1) {
            best_f1 = f1;
            best_tau = tau;
        }
    }
    return best_tau;
}

/// Hit rule from the definition: count alarms in [t_e - T_p, t_e), then look
/// for a run of k ticks spaced exactly I_s.
inline bool hit(const std::vector<double>& alarms, double te, double T_p, bool consecutive, std::size_t k,
                double I_s) {
    std::vector<double> in;
    for (double a : alarms)
        if (a >= te - T_p - 1e-9 && a < te - 1e-9) in.push_back(a);
    if (!consecutive) return in.size() >= k;
    std::size_t run = in.empty() ? 0 : 1, best = run;
    for (std::size_t i = 1; i < in.size(); ++i) {
        run = std::abs(in[i] - in[i - 1] - I_s) <= 1e-9 ? run + 1 : 1;
        best = std::max(best, run);
    }
    return best >= k;
}

}  // namespace rlfw::oracle
