#pragma once

// Class-imbalance countermeasures applied to the training split only.
//
// Draw order (fixed so results are reproducible):
//   downsample: partial Fisher-Yates over negatives in dataset order, one
//               below() draw per kept negative.
//   smote:      per synthetic point, below(minority) picks x, below(k) picks
//               the neighbor, uniform() picks u.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "rlfw/dataset.hpp"
#include "rlfw/error.hpp"
#include "rlfw/rng.hpp"

namespace rlfw {

enum class BalanceMethod : std::uint8_t { None, Downsample, Smote, ClassWeights };

struct BalanceConfig {
    BalanceMethod method = BalanceMethod::Downsample;
    double ratio = 30.0;         ///< negatives per positive after downsampling / SMOTE
    std::size_t smote_k = 5;
    std::uint64_t seed = 7;
};

inline constexpr const char* kSyntheticTraceId = "synthetic";

inline std::string to_string(BalanceMethod m) {
    switch (m) {
        case BalanceMethod::None: return "none";
        case BalanceMethod::Downsample: return "downsample";
        case BalanceMethod::Smote: return "smote";
        case BalanceMethod::ClassWeights: return "class_weights";
    }
    return "none";
}

inline BalanceMethod parse_balance_method(std::string_view s) {
    for (auto m : {BalanceMethod::None, BalanceMethod::Downsample, BalanceMethod::Smote, BalanceMethod::ClassWeights})
        if (to_string(m) == s) return m;
    throw ConfigError("unknown balance method '" + std::string(s) + "'");
}

/// Keeps every positive and min(neg, ratio * pos) uniformly chosen negatives.
inline Dataset downsample(const Dataset& in, double ratio, std::uint64_t seed) {
    if (ratio < 1.0) throw ConfigError("downsample ratio must be at least 1");
    const std::size_t pos = in.positives();
    if (pos == 0) throw Error("cannot downsample with no minority samples");

    std::vector<std::size_t> neg;
    for (std::size_t i = 0; i < in.examples.size(); ++i)
        if (!in.examples[i].positive()) neg.push_back(i);
    const auto keep = std::min<std::size_t>(neg.size(), static_cast<std::size_t>(std::floor(ratio * double(pos))));

    Rng rng = Rng(seed).substream("downsample");
    for (std::size_t i = 0; i < keep; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(neg.size() - i));
        std::swap(neg[i], neg[j]);
    }
    std::vector<bool> selected(in.examples.size(), false);
    for (std::size_t i = 0; i < keep; ++i) selected[neg[i]] = true;

    Dataset out;
    out.spec = in.spec;
    out.normalization = in.normalization;
    for (std::size_t i = 0; i < in.examples.size(); ++i)
        if (in.examples[i].positive() || selected[i]) out.examples.push_back(in.examples[i]);
    std::stable_sort(out.examples.begin(), out.examples.end(), example_order);
    return out;
}

namespace detail {

inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace detail

/// k nearest minority neighbors of each minority example (by index into
/// `points`); ties go to the lower index.
inline std::vector<std::vector<std::size_t>> minority_neighbors(const std::vector<const std::vector<double>*>& points,
                                                                std::size_t k) {
    const std::size_t m = points.size();
    std::vector<std::vector<std::size_t>> nn(m);
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t i = 0; i < m; ++i) {
        dist.clear();
        for (std::size_t j = 0; j < m; ++j)
            if (j != i) dist.emplace_back(detail::squared_distance(*points[i], *points[j]), j);
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
        for (std::size_t t = 0; t < k; ++t) nn[i].push_back(dist[t].second);
    }
    return nn;
}

/// SMOTE: interpolates minority examples toward one of their k nearest
/// minority neighbors until positives >= ceil(negatives / target_ratio).
/// Synthetic rows carry trace_id "synthetic" and now_t = -1.
inline Dataset smote(const Dataset& in, std::size_t k, double target_ratio, std::uint64_t seed) {
    if (target_ratio < 1.0) throw ConfigError("smote target_ratio must be at least 1");
    std::vector<const std::vector<double>*> minority;
    for (const auto& ex : in.examples)
        if (ex.positive()) minority.push_back(&ex.features);
    if (minority.size() < 2) throw Error("smote needs at least 2 minority examples");
    if (k < 1 || k > minority.size() - 1)
        throw ConfigError("smote k must lie in [1, " + std::to_string(minority.size() - 1) + "]");

    Dataset out = in;
    std::stable_sort(out.examples.begin(), out.examples.end(), example_order);
    const auto need = static_cast<std::size_t>(std::ceil(double(in.negatives()) / target_ratio));
    if (minority.size() >= need) return out;

    const auto nn = minority_neighbors(minority, k);
    Rng rng = Rng(seed).substream("smote");
    const std::size_t count = need - minority.size();
    for (std::size_t s = 0; s < count; ++s) {
        const auto xi = static_cast<std::size_t>(rng.below(minority.size()));
        const auto zi = nn[xi][static_cast<std::size_t>(rng.below(k))];
        const double u = rng.uniform();
        const auto& x = *minority[xi];
        const auto& z = *minority[zi];
        Example ex;
        ex.trace_id = kSyntheticTraceId;
        ex.now_t = -1.0;
        ex.label = 1;
        ex.features.resize(x.size());
        for (std::size_t d = 0; d < x.size(); ++d) ex.features[d] = x[d] + u * (z[d] - x[d]);
        out.examples.push_back(std::move(ex));
    }
    std::stable_sort(out.examples.begin(), out.examples.end(), example_order);
    return out;
}

struct ClassWeights {
    double negative = 1.0;
    double positive = 1.0;
    friend bool operator==(const ClassWeights&, const ClassWeights&) = default;
};

inline ClassWeights class_weights(const Dataset& d) {
    const auto pos = d.positives();
    const auto neg = d.negatives();
    if (pos == 0 || neg == 0) throw Error("class_weights needs both classes present");
    return {1.0, double(neg) / double(pos)};
}

/// Applies the configured method; weights stay (1, 1) unless the method is
/// ClassWeights.
inline std::pair<Dataset, ClassWeights> apply_balance(const Dataset& d, const BalanceConfig& cfg) {
    switch (cfg.method) {
        case BalanceMethod::None: return {d, {}};
        case BalanceMethod::Downsample: return {downsample(d, cfg.ratio, cfg.seed), {}};
        case BalanceMethod::Smote: return {smote(d, cfg.smote_k, cfg.ratio, cfg.seed), {}};
        case BalanceMethod::ClassWeights: return {d, class_weights(d)};
    }
    return {d, {}};
}

}  // namespace rlfw
