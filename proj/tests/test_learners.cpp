#include <gtest/gtest.h>

#include <limits>

#include "oracles.hpp"
#include "support.hpp"

using namespace rlfw;

namespace {

// Smallest spec: one frame of 11 values.
WindowSpec tiny_spec() {
    WindowSpec s;
    s.T_s = 0.1;
    s.T_p = 0.1;
    s.N = 1;
    return s;
}

Dataset make(const std::vector<std::vector<double>>& x, const std::vector<int>& y) {
    Dataset d;
    d.spec = tiny_spec();
    const auto dim = d.spec.feature_dim();
    for (std::size_t i = 0; i < x.size(); ++i) {
        Example e{"a", double(i) * 0.1, x[i], y[i]};
        e.features.resize(dim, 0.0);
        d.examples.push_back(std::move(e));
    }
    d.normalization = Normalization::identity(dim);
    return d;
}

Dataset random_dataset(Rng rng, std::size_t n, std::size_t informative = 3, double round_to = 0.0) {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> row(11);
        for (auto& v : row) {
            v = rng.normal();
            if (round_to > 0) v = std::round(v / round_to) * round_to;
        }
        double z = 0.0;
        for (std::size_t k = 0; k < informative; ++k) z += row[k];
        y.push_back(z + 0.5 * rng.normal() > 0.3 ? 1 : 0);
        x.push_back(row);
    }
    return make(x, y);
}

TrainConfig cfg_of(ModelKind k) {
    TrainConfig c;
    c.kind = k;
    return c;
}

}  // namespace

TEST(SplitGain, Examples) {
    EXPECT_DOUBLE_EQ(split_gain(2, 4, -2, 4, 1, 0), 0.8);
    EXPECT_DOUBLE_EQ(split_gain(0, 3, 0, 5, 1, 0.25), -0.25);
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        const double a = rng.normal(), b = rng.uniform(), c = rng.normal(), d = rng.uniform();
        EXPECT_DOUBLE_EQ(split_gain(a, b, c, d, 1, 0.1), split_gain(c, d, a, b, 1, 0.1));
    }
    EXPECT_THROW(split_gain(1, 0, 1, 0, 0, 0), NumericError);
}

TEST(Logreg, SeparableToyHasPerfectF1) {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (int i = -10; i < 10; ++i) {
        const double v = i < 0 ? i : i + 1;
        x.push_back({v / 10.0});
        y.push_back(v > 0 ? 1 : 0);
    }
    const auto d = make(x, y);
    const auto m = train(d, cfg_of(ModelKind::LogReg));
    const auto s = predict_batch(m, d.examples);
    EXPECT_EQ(metrics_at_threshold(s, binary_labels(d.examples), 0.5).f1, 1.0);
}

TEST(Logreg, LossStrictlyDecreasesAtSmallStep) {
    auto c = cfg_of(ModelKind::LogReg);
    c.learning_rate = 1e-3;
    c.epochs = 200;
    std::vector<double> h;
    train(random_dataset(Rng(2), 64), c, &h);
    ASSERT_GT(h.size(), 2u);
    for (std::size_t i = 1; i < h.size(); ++i) EXPECT_LT(h[i], h[i - 1]);
}

TEST(Gbdt, FourPointStump) {
    const auto d = make({{0}, {1}, {2}, {3}}, {0, 0, 1, 1});
    auto c = cfg_of(ModelKind::Gbdt);
    c.trees = 1;
    c.max_depth = 1;
    c.lambda = 1;
    c.min_child_hessian = 0;
    const auto m = train(d, c);
    const auto& tree = std::get<GbdtParams>(m.params).trees.at(0);
    ASSERT_EQ(tree.nodes.size(), 3u);
    EXPECT_EQ(tree.nodes[0].feature, 0);
    EXPECT_GT(tree.nodes[0].threshold, 1.0);
    EXPECT_LE(tree.nodes[0].threshold, 2.0);
}

TEST(Gbdt, MatchesExhaustiveReference) {
    const Rng root(31);
    for (std::uint64_t k = 0; k < 20; ++k) {
        const auto d = random_dataset(root.substream(k), 40 + 8 * k, 3, k % 2 ? 0.5 : 0.0);
        auto c = cfg_of(ModelKind::Gbdt);
        c.trees = 1;
        c.max_depth = 1 + k % 3;
        c.learning_rate = 0.5;
        c.min_child_hessian = 0.5;
        c.class_weights = {1.0, 1.0 + double(k % 4)};
        const auto m = train(d, c);
        std::vector<oracle::Split> splits;
        const auto expect = oracle::first_round_margins(d, c, &splits);
        const auto& tree = std::get<GbdtParams>(m.params).trees.at(0);
        ASSERT_FALSE(splits.empty());
        EXPECT_EQ(tree.nodes[0].feature, splits[0].feature) << "instance " << k;
        EXPECT_EQ(tree.nodes[0].threshold, splits[0].threshold) << "instance " << k;
        for (std::size_t i = 0; i < d.examples.size(); ++i)
            EXPECT_NEAR(m.margin(d.examples[i].features), expect[i], 1e-12) << "instance " << k;
    }
}

TEST(Gbdt, LossNonIncreasing) {
    auto c = cfg_of(ModelKind::Gbdt);
    c.trees = 40;
    c.gamma = 0.0;
    for (double lr : {0.1, 0.5, 1.0}) {
        c.learning_rate = lr;
        std::vector<double> h;
        train(random_dataset(Rng(5), 300), c, &h);
        ASSERT_EQ(h.size(), 40u);
        for (std::size_t i = 1; i < h.size(); ++i) EXPECT_LE(h[i], h[i - 1] + 1e-12) << lr;
    }
}

TEST(Gbdt, BaseScoreIsWeightedLogOdds) {
    const auto d = random_dataset(Rng(6), 100);
    auto c = cfg_of(ModelKind::Gbdt);
    c.class_weights = {1.0, 3.0};
    c.trees = 1;
    const auto m = train(d, c);
    const double pos = double(d.positives()), neg = double(d.negatives());
    EXPECT_NEAR(std::get<GbdtParams>(m.params).base_score, std::log(3.0 * pos / neg), 1e-12);
}

TEST(GradientCheck, LogregAndMlp) {
    const auto probe = random_dataset(Rng(7), 64);
    auto c = cfg_of(ModelKind::LogReg);
    EXPECT_LT(numeric_gradient_check(ModelKind::LogReg, probe, c), 1e-6);
    c.class_weights = {1.0, 7.5};
    EXPECT_LT(numeric_gradient_check(ModelKind::LogReg, probe, c), 1e-6);
    c.kind = ModelKind::Mlp;
    c.hidden_units = 6;
    EXPECT_LT(numeric_gradient_check(ModelKind::Mlp, probe, c), 1e-4);
    c.class_weights = {1.0, 1.0};
    EXPECT_LT(numeric_gradient_check(ModelKind::Mlp, probe, c), 1e-4);
    EXPECT_THROW(numeric_gradient_check(ModelKind::Gbdt, probe, c), ConfigError);
}

TEST(GradientCheck, ZeroWeightDropsAClass) {
    const auto probe = random_dataset(Rng(8), 40);
    Dataset positives = probe;
    std::erase_if(positives.examples, [](const Example& e) { return !e.positive(); });
    LogRegParams p;
    p.weights.assign(11, 0.1);
    p.bias = -0.2;
    std::vector<double> g_zero, g_only;
    const double l_zero = logreg_loss_grad(p, weighted_rows(probe, {0.0, 1.0}), &g_zero);
    const double l_only = logreg_loss_grad(p, weighted_rows(positives, {1.0, 1.0}), &g_only);
    EXPECT_NEAR(l_zero, l_only, 1e-12);
    ASSERT_EQ(g_zero.size(), g_only.size());
    for (std::size_t i = 0; i < g_zero.size(); ++i) EXPECT_NEAR(g_zero[i], g_only[i], 1e-12);
}

TEST(Predict, DegenerateModels) {
    TrainedModel lr;
    lr.kind = ModelKind::LogReg;
    lr.input_dim = 3;
    lr.params = LogRegParams{{0, 0, 0}, 0.0};
    EXPECT_EQ(lr.predict(std::vector<double>{5, -1, 2}), 0.5);
    TrainedModel gb;
    gb.input_dim = 2;
    GbdtParams p;
    p.trees.push_back(Tree{{TreeNode{}}});
    gb.params = p;
    EXPECT_EQ(gb.predict(std::vector<double>{1e9, -3}), 0.5);
    EXPECT_THROW((void)gb.predict(std::vector<double>{1.0}), Error);
}

TEST(Predict, BatchEqualsSingleAndRange) {
    const auto d = random_dataset(Rng(9), 200);
    for (auto k : {ModelKind::LogReg, ModelKind::Mlp, ModelKind::Gbdt}) {
        auto c = cfg_of(k);
        c.epochs = 30;
        c.trees = 20;
        const auto m = train(d, c);
        const auto batch = predict_batch(m, d.examples);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            EXPECT_EQ(batch[i], m.predict(d.examples[i].features));
            EXPECT_GE(batch[i], 0.0);
            EXPECT_LE(batch[i], 1.0);
        }
        std::vector<double> extreme(11, 1e6);
        const double s = m.predict(extreme);
        EXPECT_TRUE(s >= 0.0 && s <= 1.0);
    }
}

TEST(Train, RejectsSingleClassAndBadConfig) {
    const auto d = make({{0}, {1}}, {0, 0});
    EXPECT_THROW(train(d, cfg_of(ModelKind::LogReg)), Error);
    auto c = cfg_of(ModelKind::Gbdt);
    c.trees = 0;
    EXPECT_THROW(train(random_dataset(Rng(1), 20), c), ConfigError);
    c = cfg_of(ModelKind::LogReg);
    c.learning_rate = 0;
    EXPECT_THROW(train(random_dataset(Rng(1), 20), c), ConfigError);
}

TEST(Train, NonFiniteLossNamesTheEpoch) {
    auto c = cfg_of(ModelKind::LogReg);
    c.learning_rate = std::numeric_limits<double>::infinity();
    c.epochs = 5;
    try {
        train(random_dataset(Rng(1), 50), c);
        FAIL() << "expected a numeric error";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
    }
}

TEST(Train, DeterministicModelFiles) {
    const auto d = random_dataset(Rng(10), 150);
    for (auto k : {ModelKind::LogReg, ModelKind::Mlp, ModelKind::Gbdt}) {
        auto c = cfg_of(k);
        c.epochs = 10;
        c.trees = 10;
        EXPECT_EQ(model_to_text(train(d, c)), model_to_text(train(d, c)));
    }
}

TEST(ModelFile, RoundTrip) {
    const auto d = random_dataset(Rng(11), 150);
    const auto dir = rlfw::test::scratch_dir("models");
    for (auto k : {ModelKind::LogReg, ModelKind::Mlp, ModelKind::Gbdt}) {
        auto c = cfg_of(k);
        c.epochs = 10;
        c.trees = 15;
        auto m = train(d, c);
        m.normalization.mean[0] = 0.1 + 1.0 / 3.0;
        m.normalization.stddev[1] = 2.0 / 7.0;
        const auto path = dir / (to_string(k) + ".txt");
        save_model(m, path);
        const auto back = load_model(path);
        EXPECT_EQ(back.kind, m.kind);
        EXPECT_EQ(back.spec, m.spec);
        EXPECT_EQ(back.normalization.mean, m.normalization.mean);
        EXPECT_EQ(back.normalization.stddev, m.normalization.stddev);
        EXPECT_TRUE(back.params == m.params);
        const auto a = predict_batch(m, d.examples), b = predict_batch(back, d.examples);
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
        EXPECT_EQ(model_to_text(back), model_to_text(m));
    }
}

TEST(ModelFile, Rejections) {
    auto c = cfg_of(ModelKind::LogReg);
    c.epochs = 2;
    const auto text = model_to_text(train(random_dataset(Rng(12), 30), c));
    EXPECT_THROW(model_from_text("NOT-A-MODEL 1\n" + text.substr(text.find('\n') + 1)), ParseError);
    EXPECT_THROW(model_from_text("RLFW-MODEL 2\n" + text.substr(text.find('\n') + 1)), ParseError);
    EXPECT_THROW(model_from_text(text.substr(0, text.size() / 2)), ParseError);
    EXPECT_THROW(load_model("/nonexistent/model.txt"), Error);

    const auto m = model_from_text(text);
    EXPECT_NO_THROW(require_compatible(m, tiny_spec()));
    auto other = tiny_spec();
    other.T_p = 0.2;
    EXPECT_THROW(require_compatible(m, other), ConfigError);
}
