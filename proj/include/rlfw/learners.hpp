#pragma once

// Binary classifiers over Dataset feature vectors. All three produce
// sigmoid(margin) in [0, 1] and are deterministic in (dataset order, config).
//
// Loss for logreg / mlp is the class-weighted logistic loss averaged by total
// weight:  L = sum_i c_i * (softplus(z_i) - y_i z_i) / sum_i c_i.
// GBDT uses the unnormalized per-example gradients g = c(p - y) and
// hessians h = c p (1 - p) with exact greedy split search.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "rlfw/balance.hpp"
#include "rlfw/csv.hpp"
#include "rlfw/dataset.hpp"
#include "rlfw/error.hpp"
#include "rlfw/rng.hpp"

namespace rlfw {

enum class ModelKind : std::uint8_t { LogReg, Mlp, Gbdt };

inline std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::LogReg: return "logreg";
        case ModelKind::Mlp: return "mlp";
        case ModelKind::Gbdt: return "gbdt";
    }
    return "gbdt";
}

inline ModelKind parse_model_kind(std::string_view s) {
    for (auto k : {ModelKind::LogReg, ModelKind::Mlp, ModelKind::Gbdt})
        if (to_string(k) == s) return k;
    throw ConfigError("unknown model kind '" + std::string(s) + "'");
}

struct TrainConfig {
    ModelKind kind = ModelKind::Gbdt;
    double learning_rate = 0.3;
    std::size_t epochs = 300;
    std::size_t hidden_units = 16;  // mlp
    std::size_t batch_size = 128;   // mlp
    std::size_t trees = 100;        // gbdt
    std::size_t max_depth = 6;
    double lambda = 1.0;
    double gamma = 0.0;
    double min_child_hessian = 1.0;
    ClassWeights class_weights;
    std::uint64_t seed = 11;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

inline void validate(const TrainConfig& c) {
    if (!(c.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (c.kind == ModelKind::Gbdt) {
        if (c.trees < 1) throw ConfigError("trees must be at least 1");
        if (c.max_depth < 1) throw ConfigError("max_depth must be at least 1");
        if (c.lambda < 0.0 || c.gamma < 0.0) throw ConfigError("lambda and gamma must be non-negative");
    }
    if (c.kind == ModelKind::Mlp && (c.hidden_units < 1 || c.batch_size < 1))
        throw ConfigError("hidden_units and batch_size must be at least 1");
    if (c.class_weights.negative < 0.0 || c.class_weights.positive < 0.0)
        throw ConfigError("class weights must be non-negative");
}

struct TreeNode {
    int feature = -1;  ///< -1 marks a leaf
    double threshold = 0.0;  ///< x[feature] < threshold goes left
    int left = -1;
    int right = -1;
    double value = 0.0;  ///< leaf output, already scaled by the learning rate

    [[nodiscard]] bool is_leaf() const noexcept { return feature < 0; }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
    std::vector<TreeNode> nodes;  ///< nodes[0] is the root

    [[nodiscard]] double evaluate(std::span<const double> x) const {
        std::size_t i = 0;
        while (!nodes[i].is_leaf()) {
            const auto& n = nodes[i];
            i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right);
        }
        return nodes[i].value;
    }
    friend bool operator==(const Tree&, const Tree&) = default;
};

struct LogRegParams {
    std::vector<double> weights;
    double bias = 0.0;
    friend bool operator==(const LogRegParams&, const LogRegParams&) = default;
};

struct MlpParams {
    std::size_t inputs = 0;
    std::size_t hidden = 0;
    std::vector<double> w1;  ///< hidden x inputs, row-major
    std::vector<double> b1;
    std::vector<double> w2;
    double b2 = 0.0;
    friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

struct GbdtParams {
    double base_score = 0.0;
    std::vector<Tree> trees;
    friend bool operator==(const GbdtParams&, const GbdtParams&) = default;
};

inline double sigmoid(double z) noexcept { return 1.0 / (1.0 + std::exp(-z)); }
inline double softplus(double z) noexcept { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

namespace detail {

inline double logreg_margin(const LogRegParams& p, std::span<const double> x) {
    double z = p.bias;
    for (std::size_t i = 0; i < x.size(); ++i) z += p.weights[i] * x[i];
    return z;
}

inline double mlp_margin(const MlpParams& p, std::span<const double> x, std::vector<double>* hidden = nullptr) {
    double z = p.b2;
    for (std::size_t h = 0; h < p.hidden; ++h) {
        double a = p.b1[h];
        const double* row = p.w1.data() + h * p.inputs;
        for (std::size_t i = 0; i < p.inputs; ++i) a += row[i] * x[i];
        a = std::max(0.0, a);
        if (hidden) (*hidden)[h] = a;
        z += p.w2[h] * a;
    }
    return z;
}

inline double gbdt_margin(const GbdtParams& p, std::span<const double> x) {
    double z = p.base_score;
    for (const auto& t : p.trees) z += t.evaluate(x);
    return z;
}

}  // namespace detail

struct TrainedModel {
    ModelKind kind = ModelKind::Gbdt;
    std::size_t input_dim = 0;
    std::variant<LogRegParams, MlpParams, GbdtParams> params;
    Normalization normalization;
    WindowSpec spec;
    TrainConfig config;

    [[nodiscard]] double margin(std::span<const double> x) const {
        return std::visit(
            [&](const auto& p) -> double {
                using P = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<P, LogRegParams>) return detail::logreg_margin(p, x);
                else if constexpr (std::is_same_v<P, MlpParams>) return detail::mlp_margin(p, x);
                else return detail::gbdt_margin(p, x);
            },
            params);
    }

    /// Score in [0, 1]; x must already be normalized.
    [[nodiscard]] double predict(std::span<const double> x) const {
        if (x.size() != input_dim)
            throw Error("feature dimension " + std::to_string(x.size()) + " does not match model input " +
                        std::to_string(input_dim));
        return sigmoid(margin(x));
    }

    /// Number of stored parameters (weights, or tree nodes x 3 for gbdt).
    [[nodiscard]] std::size_t parameter_count() const {
        if (auto* p = std::get_if<LogRegParams>(&params)) return p->weights.size() + 1;
        if (auto* p = std::get_if<MlpParams>(&params)) return p->w1.size() + p->b1.size() + p->w2.size() + 1;
        std::size_t n = 1;
        for (const auto& t : std::get<GbdtParams>(params).trees) n += 3 * t.nodes.size();
        return n;
    }
};

inline std::vector<double> predict_batch(const TrainedModel& model, std::span<const std::vector<double>> rows) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(model.predict(r));
    return out;
}

inline std::vector<double> predict_batch(const TrainedModel& model, std::span<const Example> rows) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(model.predict(r.features));
    return out;
}

/// Refuses a model whose recorded window spec differs from the pipeline's.
inline void require_compatible(const TrainedModel& model, const WindowSpec& spec) {
    if (!(model.spec == spec))
        throw ConfigError("model was trained under a different window spec (T_s=" + csv::exact(model.spec.T_s) +
                          ", T_p=" + csv::exact(model.spec.T_p) + ", scheme=" + to_string(model.spec.scheme) + ")");
}

// ----------------------------------------------------------------------------
// Split gain

/// Second-order gain of splitting a node into (G_L, H_L) and (G_R, H_R).
inline double split_gain(double G_L, double H_L, double G_R, double H_R, double lambda, double gamma) {
    const double dl = H_L + lambda, dr = H_R + lambda, dp = H_L + H_R + lambda;
    if (!(dl > 0.0) || !(dr > 0.0) || !(dp > 0.0))
        throw NumericError("split_gain: hessian + lambda must be positive");
    const double G = G_L + G_R;
    return 0.5 * (G_L * G_L / dl + G_R * G_R / dr - G * G / dp) - gamma;
}

// ----------------------------------------------------------------------------
// Weighted logistic loss helpers shared by logreg / mlp and the gradient check.

struct WeightedRows {
    std::vector<std::span<const double>> x;
    std::vector<double> y;
    std::vector<double> c;  ///< per-row class weight
    double total_weight = 0.0;
};

inline WeightedRows weighted_rows(const Dataset& d, const ClassWeights& w) {
    WeightedRows r;
    for (const auto& ex : d.examples) {
        r.x.emplace_back(ex.features);
        r.y.push_back(ex.positive() ? 1.0 : 0.0);
        r.c.push_back(ex.positive() ? w.positive : w.negative);
        r.total_weight += r.c.back();
    }
    return r;
}

/// Loss and gradient (w..., b) of a logistic-regression parameter point.
inline double logreg_loss_grad(const LogRegParams& p, const WeightedRows& rows, std::vector<double>* grad) {
    const std::size_t d = p.weights.size();
    if (grad) grad->assign(d + 1, 0.0);
    double loss = 0.0;
    const double norm = rows.total_weight > 0 ? rows.total_weight : 1.0;
    for (std::size_t i = 0; i < rows.x.size(); ++i) {
        const double z = detail::logreg_margin(p, rows.x[i]);
        loss += rows.c[i] * (softplus(z) - rows.y[i] * z);
        if (grad) {
            const double dz = rows.c[i] * (sigmoid(z) - rows.y[i]) / norm;
            for (std::size_t j = 0; j < d; ++j) (*grad)[j] += dz * rows.x[i][j];
            (*grad)[d] += dz;
        }
    }
    return loss / norm;
}

/// Flattened parameter order: w1, b1, w2, b2.
inline double mlp_loss_grad(const MlpParams& p, const WeightedRows& rows, std::span<const std::size_t> batch,
                            std::vector<double>* grad) {
    const std::size_t H = p.hidden, D = p.inputs;
    if (grad) grad->assign(H * D + H + H + 1, 0.0);
    double wsum = 0.0;
    for (auto i : batch) wsum += rows.c[i];
    const double norm = wsum > 0 ? wsum : 1.0;
    std::vector<double> hidden(H);
    double loss = 0.0;
    for (auto i : batch) {
        const auto x = rows.x[i];
        const double z = detail::mlp_margin(p, x, &hidden);
        loss += rows.c[i] * (softplus(z) - rows.y[i] * z);
        if (!grad) continue;
        const double dz = rows.c[i] * (sigmoid(z) - rows.y[i]) / norm;
        auto& g = *grad;
        const std::size_t off_b1 = H * D, off_w2 = off_b1 + H, off_b2 = off_w2 + H;
        g[off_b2] += dz;
        for (std::size_t h = 0; h < H; ++h) {
            g[off_w2 + h] += dz * hidden[h];
            if (hidden[h] <= 0.0) continue;
            const double da = dz * p.w2[h];
            g[off_b1 + h] += da;
            double* row = g.data() + h * D;
            for (std::size_t j = 0; j < D; ++j) row[j] += da * x[j];
        }
    }
    return loss / norm;
}

namespace detail {

inline std::vector<double*> mlp_param_refs(MlpParams& p) {
    std::vector<double*> refs;
    for (auto& v : p.w1) refs.push_back(&v);
    for (auto& v : p.b1) refs.push_back(&v);
    for (auto& v : p.w2) refs.push_back(&v);
    refs.push_back(&p.b2);
    return refs;
}

inline MlpParams mlp_init(std::size_t inputs, std::size_t hidden, Rng rng) {
    MlpParams p;
    p.inputs = inputs;
    p.hidden = hidden;
    p.w1.resize(hidden * inputs);
    p.b1.assign(hidden, 0.0);
    p.w2.resize(hidden);
    const double s1 = std::sqrt(2.0 / double(std::max<std::size_t>(1, inputs)));
    const double s2 = std::sqrt(1.0 / double(hidden));
    for (auto& w : p.w1) w = s1 * rng.normal();
    for (auto& w : p.w2) w = s2 * rng.normal();
    return p;
}

inline void require_two_classes(const Dataset& d) {
    if (d.examples.empty()) throw Error("cannot train on an empty dataset");
    if (d.positives() == 0 || d.negatives() == 0) throw Error("cannot train on a single-class dataset");
}

inline LogRegParams train_logreg(const Dataset& d, const TrainConfig& cfg, std::vector<double>* history) {
    const auto rows = weighted_rows(d, cfg.class_weights);
    LogRegParams p;
    p.weights.assign(d.spec.feature_dim(), 0.0);
    std::vector<double> grad;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double loss = logreg_loss_grad(p, rows, &grad);
        if (!std::isfinite(loss)) throw NumericError("non-finite loss at epoch " + std::to_string(epoch));
        if (history) history->push_back(loss);
        for (std::size_t j = 0; j < p.weights.size(); ++j) p.weights[j] -= cfg.learning_rate * grad[j];
        p.bias -= cfg.learning_rate * grad.back();
    }
    return p;
}

inline MlpParams train_mlp(const Dataset& d, const TrainConfig& cfg, std::vector<double>* history) {
    const auto rows = weighted_rows(d, cfg.class_weights);
    const Rng root(cfg.seed);
    MlpParams p = mlp_init(d.spec.feature_dim(), cfg.hidden_units, root.substream("mlp-init"));
    Rng shuffle = root.substream("mlp-shuffle");
    std::vector<std::size_t> order(rows.x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> grad;
    auto refs = mlp_param_refs(p);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const auto len = std::min(cfg.batch_size, order.size() - start);
            const double loss = mlp_loss_grad(p, rows, std::span(order).subspan(start, len), &grad);
            if (!std::isfinite(loss)) throw NumericError("non-finite loss at epoch " + std::to_string(epoch));
            for (std::size_t j = 0; j < refs.size(); ++j) *refs[j] -= cfg.learning_rate * grad[j];
        }
        if (history) history->push_back(mlp_loss_grad(p, rows, order, nullptr));
    }
    return p;
}

// Exact greedy tree growth, level by level over presorted feature columns.
class GbdtBuilder {
public:
    GbdtBuilder(const Dataset& d, const TrainConfig& cfg)
        : cfg_(cfg), data_(d), n_(d.examples.size()), dim_(d.spec.feature_dim()) {
        sorted_.resize(dim_);
        std::vector<std::uint32_t> idx(n_);
        for (std::size_t f = 0; f < dim_; ++f) {
            std::iota(idx.begin(), idx.end(), 0u);
            std::stable_sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
                return d.examples[a].features[f] < d.examples[b].features[f];
            });
            auto& s = sorted_[f];
            s.resize(n_);
            for (std::size_t k = 0; k < n_; ++k) s[k] = {d.examples[idx[k]].features[f], idx[k]};
        }
        y_.resize(n_);
        c_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            const bool pos = d.examples[i].positive();
            y_[i] = pos ? 1.0 : 0.0;
            c_[i] = pos ? cfg.class_weights.positive : cfg.class_weights.negative;
        }
    }

    GbdtParams fit(std::vector<double>* history) {
        double wpos = 0.0, wneg = 0.0;
        for (std::size_t i = 0; i < n_; ++i) (y_[i] > 0 ? wpos : wneg) += c_[i];
        if (!(wpos > 0.0) || !(wneg > 0.0)) throw Error("gbdt needs positive total weight in both classes");
        GbdtParams p;
        p.base_score = std::log(wpos / wneg);
        margin_.assign(n_, p.base_score);
        gh_.resize(n_);
        for (std::size_t t = 0; t < cfg_.trees; ++t) {
            for (std::size_t i = 0; i < n_; ++i) {
                const double pr = sigmoid(margin_[i]);
                gh_[i] = {c_[i] * (pr - y_[i]), c_[i] * pr * (1.0 - pr)};
            }
            Tree tree = grow();
            for (std::size_t i = 0; i < n_; ++i) margin_[i] += tree.nodes[static_cast<std::size_t>(leaf_of_[i])].value;
            const double loss = current_loss();
            if (!std::isfinite(loss)) throw NumericError("non-finite loss at tree " + std::to_string(t));
            if (history) history->push_back(loss);
            p.trees.push_back(std::move(tree));
        }
        return p;
    }

    double current_loss() const {
        double loss = 0.0, w = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            loss += c_[i] * (softplus(margin_[i]) - y_[i] * margin_[i]);
            w += c_[i];
        }
        return loss / w;
    }

private:
    struct Candidate {
        double gain = -std::numeric_limits<double>::infinity();
        int feature = -1;
        double threshold = 0.0;
    };
    struct Open {
        int node;
        double G, H;
    };

    Tree grow() {
        Tree tree;
        tree.nodes.emplace_back();
        leaf_of_.assign(n_, 0);
        double G = 0.0, H = 0.0;
        for (const auto& [g, h] : gh_) {
            G += g;
            H += h;
        }
        std::vector<Open> level{{0, G, H}};
        for (std::size_t depth = 0; !level.empty(); ++depth) {
            // Nodes that may still split get a slot; the rest become leaves now.
            std::vector<int> slot_of(tree.nodes.size(), -1);
            std::vector<Open> splittable;
            for (const auto& o : level) {
                if (depth < cfg_.max_depth && o.H >= cfg_.min_child_hessian) {
                    slot_of[static_cast<std::size_t>(o.node)] = static_cast<int>(splittable.size());
                    splittable.push_back(o);
                } else {
                    make_leaf(tree, o);
                }
            }
            if (splittable.empty()) break;
            const auto best = search(splittable, slot_of);

            std::vector<Open> next;
            std::vector<int> left_of(tree.nodes.size(), -1);
            for (std::size_t s = 0; s < splittable.size(); ++s) {
                const auto& o = splittable[s];
                if (best[s].feature < 0 || !(best[s].gain > 0.0)) {
                    make_leaf(tree, o);
                    continue;
                }
                const int l = static_cast<int>(tree.nodes.size());
                tree.nodes.emplace_back();
                tree.nodes.emplace_back();
                auto& node = tree.nodes[static_cast<std::size_t>(o.node)];
                node.feature = best[s].feature;
                node.threshold = best[s].threshold;
                node.left = l;
                node.right = l + 1;
                left_of[static_cast<std::size_t>(o.node)] = l;
            }
            std::vector<double> cg(tree.nodes.size(), 0.0), ch(tree.nodes.size(), 0.0);
            for (std::size_t i = 0; i < n_; ++i) {
                const auto parent = static_cast<std::size_t>(leaf_of_[i]);
                if (parent >= left_of.size() || left_of[parent] < 0) continue;
                const auto& node = tree.nodes[parent];
                const double x = data_.examples[i].features[static_cast<std::size_t>(node.feature)];
                const int child = x < node.threshold ? node.left : node.right;
                leaf_of_[i] = child;
                cg[static_cast<std::size_t>(child)] += gh_[i].g;
                ch[static_cast<std::size_t>(child)] += gh_[i].h;
            }
            for (std::size_t s = 0; s < splittable.size(); ++s) {
                const int l = left_of[static_cast<std::size_t>(splittable[s].node)];
                if (l < 0) continue;
                next.push_back({l, cg[static_cast<std::size_t>(l)], ch[static_cast<std::size_t>(l)]});
                next.push_back({l + 1, cg[static_cast<std::size_t>(l + 1)], ch[static_cast<std::size_t>(l + 1)]});
            }
            level = std::move(next);
        }
        return tree;
    }

    void make_leaf(Tree& tree, const Open& o) const {
        tree.nodes[static_cast<std::size_t>(o.node)].value = -o.G / (o.H + cfg_.lambda) * cfg_.learning_rate;
    }

    std::vector<Candidate> search(const std::vector<Open>& open, const std::vector<int>& slot_of) const {
        struct Scan {
            double GL = 0.0, HL = 0.0, last = 0.0;
            bool seen = false;
        };
        std::vector<Candidate> best(open.size());
        std::vector<Scan> scan(open.size());
        for (std::size_t f = 0; f < dim_; ++f) {
            std::fill(scan.begin(), scan.end(), Scan{});
            for (const auto& [x, i] : sorted_[f]) {
                const auto node = static_cast<std::size_t>(leaf_of_[i]);
                if (node >= slot_of.size()) continue;
                const int slot = slot_of[node];
                if (slot < 0) continue;
                auto& st = scan[static_cast<std::size_t>(slot)];
                if (st.seen && x > st.last) {
                    const auto& o = open[static_cast<std::size_t>(slot)];
                    const double gain = split_gain(st.GL, st.HL, o.G - st.GL, o.H - st.HL, cfg_.lambda, cfg_.gamma);
                    auto& b = best[static_cast<std::size_t>(slot)];
                    if (gain > b.gain) {
                        double thr = 0.5 * (st.last + x);
                        if (!(thr > st.last)) thr = x;
                        b = {gain, static_cast<int>(f), thr};
                    }
                }
                st.GL += gh_[i].g;
                st.HL += gh_[i].h;
                st.last = x;
                st.seen = true;
            }
        }
        return best;
    }

    struct Entry {
        double value;
        std::uint32_t index;
    };
    struct GradHess {
        double g, h;
    };

    const TrainConfig& cfg_;
    const Dataset& data_;
    std::size_t n_, dim_;
    std::vector<std::vector<Entry>> sorted_;  ///< per feature, ascending value then index
    std::vector<double> y_, c_, margin_;
    std::vector<GradHess> gh_;
    std::vector<int> leaf_of_;
};

}  // namespace detail

/// Trains the configured learner. `loss_history`, when given, receives the
/// training loss after every epoch (logreg: before each step) or boosting round.
inline TrainedModel train(const Dataset& d, const TrainConfig& cfg, std::vector<double>* loss_history = nullptr) {
    validate(cfg);
    detail::require_two_classes(d);
    TrainedModel m;
    m.kind = cfg.kind;
    m.input_dim = d.spec.feature_dim();
    m.normalization = d.normalization;
    m.spec = d.spec;
    m.config = cfg;
    for (const auto& ex : d.examples)
        if (ex.features.size() != m.input_dim) throw Error("example feature length differs from window spec");
    switch (cfg.kind) {
        case ModelKind::LogReg: m.params = detail::train_logreg(d, cfg, loss_history); break;
        case ModelKind::Mlp: m.params = detail::train_mlp(d, cfg, loss_history); break;
        case ModelKind::Gbdt: m.params = detail::GbdtBuilder(d, cfg).fit(loss_history); break;
    }
    return m;
}

// ----------------------------------------------------------------------------
// Finite-difference gradient check

/// Max over parameters of |analytic - numeric| / max(1, |numeric|) at a
/// seeded random parameter point, using central differences with step 1e-5.
inline double numeric_gradient_check(ModelKind kind, const Dataset& probe, const TrainConfig& cfg) {
    if (kind == ModelKind::Gbdt) throw ConfigError("gradient check applies to logreg and mlp only");
    if (probe.examples.size() > 64 || probe.spec.feature_dim() > 20)
        throw ConfigError("gradient check probe must have at most 64 examples and 20 dims");
    constexpr double step = 1e-5;
    const auto rows = weighted_rows(probe, cfg.class_weights);
    Rng rng = Rng(cfg.seed).substream("gradient-check");
    const std::size_t dim = probe.spec.feature_dim();

    double worst = 0.0;
    auto compare = [&](const std::vector<double*>& refs, auto&& loss_fn, const std::vector<double>& analytic) {
        for (std::size_t j = 0; j < refs.size(); ++j) {
            const double saved = *refs[j];
            *refs[j] = saved + step;
            const double up = loss_fn();
            *refs[j] = saved - step;
            const double down = loss_fn();
            *refs[j] = saved;
            const double numeric = (up - down) / (2.0 * step);
            worst = std::max(worst, std::abs(analytic[j] - numeric) / std::max(1.0, std::abs(numeric)));
        }
    };

    if (kind == ModelKind::LogReg) {
        LogRegParams p;
        p.weights.resize(dim);
        for (auto& w : p.weights) w = 0.5 * rng.normal();
        p.bias = 0.5 * rng.normal();
        std::vector<double> grad;
        logreg_loss_grad(p, rows, &grad);
        std::vector<double*> refs;
        for (auto& w : p.weights) refs.push_back(&w);
        refs.push_back(&p.bias);
        compare(refs, [&] { return logreg_loss_grad(p, rows, nullptr); }, grad);
    } else {
        MlpParams p = detail::mlp_init(dim, cfg.hidden_units, rng.substream("init"));
        for (auto& b : p.b1) b = 0.1 * rng.normal();
        p.b2 = 0.1 * rng.normal();
        std::vector<std::size_t> all(rows.x.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        std::vector<double> grad;
        mlp_loss_grad(p, rows, all, &grad);
        compare(detail::mlp_param_refs(p), [&] { return mlp_loss_grad(p, rows, all, nullptr); }, grad);
    }
    return worst;
}

// ----------------------------------------------------------------------------
// Model files
//
//   RLFW-MODEL 1
//   kind gbdt
//   input_dim 450
//   spec <T_s> <T_p> <I_s> <N> <scheme> <label_mode> <K>
//   config <learning_rate> <epochs> <hidden_units> <batch_size> <trees> <max_depth> <lambda> <gamma> <min_child_hessian> <w_neg> <w_pos> <seed>
//   normalization <dim>
//   <mean> <std>            (dim lines)
//   params ...              (kind-specific, see below)
//   end
//
// Reals use the shortest representation that reads back exactly.

inline constexpr std::string_view kModelMagic = "RLFW-MODEL";
inline constexpr int kModelVersion = 1;

inline std::string model_to_text(const TrainedModel& m) {
    std::ostringstream o;
    const auto x = [](double v) { return csv::exact(v); };
    o << kModelMagic << ' ' << kModelVersion << '\n';
    o << "kind " << to_string(m.kind) << '\n';
    o << "input_dim " << m.input_dim << '\n';
    o << "spec " << x(m.spec.T_s) << ' ' << x(m.spec.T_p) << ' ' << x(m.spec.I_s) << ' ' << m.spec.N << ' '
      << to_string(m.spec.scheme) << ' ' << (m.spec.label_mode == LabelMode::Binary ? "binary" : "multi_interval")
      << ' ' << m.spec.K << '\n';
    const auto& c = m.config;
    o << "config " << x(c.learning_rate) << ' ' << c.epochs << ' ' << c.hidden_units << ' ' << c.batch_size << ' '
      << c.trees << ' ' << c.max_depth << ' ' << x(c.lambda) << ' ' << x(c.gamma) << ' ' << x(c.min_child_hessian)
      << ' ' << x(c.class_weights.negative) << ' ' << x(c.class_weights.positive) << ' ' << c.seed << '\n';
    o << "normalization " << m.normalization.dim() << '\n';
    for (std::size_t i = 0; i < m.normalization.dim(); ++i)
        o << x(m.normalization.mean[i]) << ' ' << x(m.normalization.stddev[i]) << '\n';
    if (auto* p = std::get_if<LogRegParams>(&m.params)) {
        o << "params logreg " << p->weights.size() << '\n' << x(p->bias) << '\n';
        for (double w : p->weights) o << x(w) << '\n';
    } else if (auto* p = std::get_if<MlpParams>(&m.params)) {
        o << "params mlp " << p->inputs << ' ' << p->hidden << '\n' << x(p->b2) << '\n';
        for (std::size_t h = 0; h < p->hidden; ++h) {
            o << x(p->b1[h]) << ' ' << x(p->w2[h]);
            for (std::size_t i = 0; i < p->inputs; ++i) o << ' ' << x(p->w1[h * p->inputs + i]);
            o << '\n';
        }
    } else {
        const auto& g = std::get<GbdtParams>(m.params);
        o << "params gbdt " << g.trees.size() << '\n' << x(g.base_score) << '\n';
        for (const auto& t : g.trees) {
            o << "tree " << t.nodes.size() << '\n';
            for (const auto& n : t.nodes) {
                if (n.is_leaf()) o << "leaf " << x(n.value) << '\n';
                else o << "split " << n.feature << ' ' << x(n.threshold) << ' ' << n.left << ' ' << n.right << '\n';
            }
        }
    }
    o << "end\n";
    return o.str();
}

namespace detail {

class TokenReader {
public:
    explicit TokenReader(std::string_view text) {
        std::size_t i = 0;
        while (i < text.size()) {
            while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
            const std::size_t start = i;
            while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
            if (i > start) tokens_.push_back(text.substr(start, i - start));
        }
    }
    std::string_view word() {
        if (pos_ >= tokens_.size()) throw ParseError("model file is truncated");
        return tokens_[pos_++];
    }
    void expect(std::string_view w) {
        const auto got = word();
        if (got != w) throw ParseError("model file: expected '" + std::string(w) + "', got '" + std::string(got) + "'");
    }
    double real() {
        const auto w = word();
        const auto v = csv::try_parse_double(w);
        if (!v) throw ParseError("model file: invalid number '" + std::string(w) + "'");
        return *v;
    }
    std::int64_t integer() {
        const auto w = word();
        const auto v = csv::try_parse_int(w);
        if (!v) throw ParseError("model file: invalid integer '" + std::string(w) + "'");
        return *v;
    }
    std::size_t count() {
        const auto v = integer();
        if (v < 0 || v > (1LL << 32)) throw ParseError("model file: invalid count");
        return static_cast<std::size_t>(v);
    }
    std::uint64_t u64() {
        const auto w = word();
        const auto v = csv::try_parse_u64(w);
        if (!v) throw ParseError("model file: invalid integer '" + std::string(w) + "'");
        return *v;
    }

private:
    std::vector<std::string_view> tokens_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline TrainedModel model_from_text(std::string_view text) {
    detail::TokenReader r(text);
    if (r.word() != kModelMagic) throw ParseError("not a model file (wrong magic)");
    if (const auto v = r.integer(); v != kModelVersion)
        throw ParseError("unsupported model version " + std::to_string(v));
    TrainedModel m;
    r.expect("kind");
    m.kind = parse_model_kind(r.word());
    r.expect("input_dim");
    m.input_dim = r.count();
    r.expect("spec");
    m.spec.T_s = r.real();
    m.spec.T_p = r.real();
    m.spec.I_s = r.real();
    m.spec.N = r.count();
    m.spec.scheme = parse_scheme(r.word());
    const auto mode = r.word();
    if (mode != "binary" && mode != "multi_interval") throw ParseError("model file: invalid label mode");
    m.spec.label_mode = mode == "binary" ? LabelMode::Binary : LabelMode::MultiInterval;
    m.spec.K = r.count();
    r.expect("config");
    auto& c = m.config;
    c.kind = m.kind;
    c.learning_rate = r.real();
    c.epochs = r.count();
    c.hidden_units = r.count();
    c.batch_size = r.count();
    c.trees = r.count();
    c.max_depth = r.count();
    c.lambda = r.real();
    c.gamma = r.real();
    c.min_child_hessian = r.real();
    c.class_weights.negative = r.real();
    c.class_weights.positive = r.real();
    c.seed = r.u64();
    r.expect("normalization");
    const auto nd = r.count();
    for (std::size_t i = 0; i < nd; ++i) {
        m.normalization.mean.push_back(r.real());
        m.normalization.stddev.push_back(r.real());
    }
    r.expect("params");
    r.expect(to_string(m.kind));
    if (m.kind == ModelKind::LogReg) {
        LogRegParams p;
        const auto n = r.count();
        p.bias = r.real();
        for (std::size_t i = 0; i < n; ++i) p.weights.push_back(r.real());
        m.params = std::move(p);
    } else if (m.kind == ModelKind::Mlp) {
        MlpParams p;
        p.inputs = r.count();
        p.hidden = r.count();
        p.b2 = r.real();
        p.w1.resize(p.inputs * p.hidden);
        for (std::size_t h = 0; h < p.hidden; ++h) {
            p.b1.push_back(r.real());
            p.w2.push_back(r.real());
            for (std::size_t i = 0; i < p.inputs; ++i) p.w1[h * p.inputs + i] = r.real();
        }
        m.params = std::move(p);
    } else {
        GbdtParams p;
        const auto trees = r.count();
        p.base_score = r.real();
        for (std::size_t t = 0; t < trees; ++t) {
            r.expect("tree");
            Tree tree;
            const auto nodes = r.count();
            for (std::size_t k = 0; k < nodes; ++k) {
                TreeNode n;
                const auto tag = r.word();
                if (tag == "leaf") {
                    n.value = r.real();
                } else if (tag == "split") {
                    n.feature = static_cast<int>(r.integer());
                    n.threshold = r.real();
                    n.left = static_cast<int>(r.integer());
                    n.right = static_cast<int>(r.integer());
                    const auto limit = static_cast<int>(nodes);
                    if (n.feature < 0 || std::size_t(n.feature) >= m.input_dim || n.left <= int(k) ||
                        n.right <= int(k) || n.left >= limit || n.right >= limit)
                        throw ParseError("model file: invalid tree node");
                } else {
                    throw ParseError("model file: unknown node tag '" + std::string(tag) + "'");
                }
                tree.nodes.push_back(n);
            }
            if (tree.nodes.empty()) throw ParseError("model file: empty tree");
            p.trees.push_back(std::move(tree));
        }
        m.params = std::move(p);
    }
    r.expect("end");
    if (m.normalization.dim() != m.input_dim) throw ParseError("model file: normalization dimension mismatch");
    return m;
}

inline void save_model(const TrainedModel& m, const std::filesystem::path& path) {
    csv::write_atomic(path, model_to_text(m));
}

inline TrainedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return model_from_text(ss.str());
}

}  // namespace rlfw
