#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>

#include "hit_cases.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace rlfw;

TEST(Metrics, HandConfusion) {
    const std::vector<double> s{0.9, 0.8, 0.2};
    const std::vector<int> y{1, 0, 0};
    const auto m = metrics_at_threshold(s, y, 0.5);
    EXPECT_EQ(m.counts.tp, 1u);
    EXPECT_EQ(m.counts.fp, 1u);
    EXPECT_EQ(m.counts.tn, 1u);
    EXPECT_EQ(m.counts.fn, 0u);
    EXPECT_DOUBLE_EQ(m.precision, 0.5);
    EXPECT_DOUBLE_EQ(m.recall, 1.0);
    EXPECT_DOUBLE_EQ(m.f1, 2.0 / 3.0);
}

TEST(Metrics, PerfectAndDegenerate) {
    const std::vector<double> s{0.9, 0.1, 0.8};
    const std::vector<int> y{1, 0, 1};
    const auto p = metrics_at_threshold(s, y, 0.5);
    EXPECT_EQ(p.accuracy, 1.0);
    EXPECT_EQ(p.precision, 1.0);
    EXPECT_EQ(p.recall, 1.0);
    EXPECT_EQ(p.f1, 1.0);
    const auto none = metrics_at_threshold(s, y, 1.1);
    EXPECT_EQ(none.precision, 0.0);
    EXPECT_EQ(none.recall, 0.0);
    EXPECT_EQ(none.f1, 0.0);
    EXPECT_THROW(metrics_at_threshold(s, std::vector<int>{1, 0}, 0.5), Error);
}

TEST(Metrics, MatchBruteForceAndMonotoneInTau) {
    Rng rng(3);
    for (int k = 0; k < 300; ++k) {
        const auto n = 1 + rng.below(60);
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = std::round(rng.uniform() * 20.0) / 20.0;
            y[i] = rng.bernoulli(0.3) ? 1 : 0;
        }
        Confusion prev{n + 1, n + 1, 0, 0};
        for (double tau : kThresholdGrid) {
            const auto a = metrics_at_threshold(s, y, tau);
            const auto b = oracle::metrics(s, y, tau);
            ASSERT_EQ(a.counts.tp, b.tp);
            ASSERT_EQ(a.counts.fp, b.fp);
            ASSERT_EQ(a.counts.tn, b.tn);
            ASSERT_EQ(a.counts.fn, b.fn);
            ASSERT_DOUBLE_EQ(a.f1, b.f1);
            ASSERT_DOUBLE_EQ(a.accuracy, b.accuracy);
            EXPECT_LE(a.counts.tp, prev.tp);
            EXPECT_LE(a.counts.fp, prev.fp);
            EXPECT_GE(a.counts.tn, prev.tn);
            EXPECT_GE(a.counts.fn, prev.fn);
            prev = a.counts;
        }
    }
}

TEST(Auc, Examples) {
    EXPECT_DOUBLE_EQ(auc(std::vector<double>{0.9, 0.8, 0.7, 0.1}, std::vector<int>{1, 0, 1, 0}), 0.75);
    EXPECT_DOUBLE_EQ(auc(std::vector<double>{0.9, 0.2, 0.8}, std::vector<int>{1, 0, 1}), 1.0);
    EXPECT_DOUBLE_EQ(auc(std::vector<double>{0.4, 0.4, 0.4, 0.4}, std::vector<int>{1, 0, 1, 0}), 0.5);
    EXPECT_THROW(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), Error);
}

TEST(Auc, MatchesPairwiseAndIsRankInvariant) {
    Rng rng(4);
    for (int k = 0; k < 300; ++k) {
        const auto n = 2 + rng.below(80);
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = std::round(rng.uniform() * 10.0) / 10.0;
            y[i] = int(i % 2);
        }
        const double a = auc(s, y);
        ASSERT_NEAR(a, oracle::auc(s, y), 1e-12);
        auto cubed = s;
        for (auto& v : cubed) v = v * v * v;
        ASSERT_NEAR(auc(cubed, y), a, 1e-12);
    }
}

TEST(SelectThreshold, GridAndTieBreak) {
    const std::vector<double> s{0.35, 0.32, 0.25, 0.15, 0.05};
    const std::vector<int> y{1, 1, 0, 0, 0};
    EXPECT_DOUBLE_EQ(select_threshold(s, y), 0.3);
    const std::vector<double> flat{0.95, 0.95, 0.01};
    EXPECT_DOUBLE_EQ(select_threshold(flat, std::vector<int>{1, 0, 0}), 0.1);

    Rng rng(5);
    for (int k = 0; k < 500; ++k) {
        std::vector<double> v(30);
        std::vector<int> l(30);
        for (std::size_t i = 0; i < 30; ++i) {
            v[i] = rng.uniform();
            l[i] = i < 5 ? 1 : int(rng.bernoulli(0.1));
        }
        const double tau = select_threshold(v, l);
        ASSERT_EQ(tau, oracle::select_threshold(v, l));
        ASSERT_NE(std::find(kThresholdGrid.begin(), kThresholdGrid.end(), tau), kThresholdGrid.end());
    }
}

TEST(Grid, CardinalityOrderAndErrors) {
    std::vector<CellScores> cells;
    const std::vector<double> vs{0.9, 0.1, 0.6, 0.2};
    const std::vector<int> vl{1, 0, 1, 0};
    for (const char* m : {"mlp", "gbdt"})
        for (double ts : {3.0, 1.0, 2.0})
            for (double tp : {2.0, 3.0, 1.0}) cells.push_back({m, ts, tp, "downsample", vs, vl, vs, vl, ""});
    cells[4].error = "missing inputs";
    cells[5].test_labels = {0, 0, 0, 0};
    const auto rows = evaluate_grid(cells);
    ASSERT_EQ(rows.size(), 18u);
    for (std::size_t i = 1; i < rows.size(); ++i)
        EXPECT_LT(std::tie(rows[i - 1].model, rows[i - 1].T_s, rows[i - 1].T_p),
                  std::tie(rows[i].model, rows[i].T_s, rows[i].T_p));
    EXPECT_EQ(std::count_if(rows.begin(), rows.end(), [](const auto& r) { return !r.error.empty(); }), 2);
    const auto csv_text = report_csv(rows);
    EXPECT_EQ(csv_text.substr(0, csv_text.find('\n')), kReportHeader);
    EXPECT_EQ(csv_text, report_csv(evaluate_grid(cells)));
    EXPECT_NE(csv_text.find("\nmlp,1.0,3.0,downsample" + std::string(10, ',') + "\n"), std::string::npos);
}

TEST(Hits, HandWorkedCases) {
    for (const auto& c : rlfw::cases::hit_cases()) {
        const std::vector<double> ev{c.event};
        const auto r = hit_analysis(c.alarms, ev, c.T_p, c.policy, 0.1);
        EXPECT_EQ(r.hit_count == 1, c.hit) << c.name;
        EXPECT_EQ(oracle::hit(c.alarms, c.event, c.T_p, c.policy.kind == HitKind::ConsecutiveK, c.policy.k, 0.1),
                  c.hit)
            << c.name;
    }
}

TEST(Hits, EmptyAlarmsAndEvents) {
    const std::vector<double> ev{3.0, 9.0, 15.0};
    const auto r = hit_analysis({}, ev, 2.0, {HitKind::AnyK, 1}, 0.1);
    EXPECT_EQ(r.fraction(), "0/3");
    EXPECT_EQ(r.coverage, 0.0);
    try {
        hit_analysis(std::vector<double>{1.0}, {}, 2.0, {HitKind::AnyK, 1}, 0.1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "no events to analyze");
    }
}

TEST(Hits, CoverageMonotonicity) {
    Rng rng(6);
    for (int k = 0; k < 300; ++k) {
        std::vector<double> alarms, events;
        for (int t = 0; t < 600; ++t)
            if (rng.bernoulli(0.15)) alarms.push_back(csv::quantize(t * 0.1));
        for (int e = 0; e < 6; ++e) events.push_back(csv::quantize(double(30 + rng.below(570)) * 0.1));
        std::sort(events.begin(), events.end());
        for (double T_p : {1.0, 2.0, 3.0}) {
            auto cov = [&](HitKind kind, std::size_t kk) {
                return hit_analysis(alarms, events, T_p, {kind, kk}, 0.1).coverage;
            };
            EXPECT_GE(cov(HitKind::AnyK, 1), cov(HitKind::AnyK, 2));
            EXPECT_GE(cov(HitKind::AnyK, 2), cov(HitKind::AnyK, 3));
            EXPECT_LE(cov(HitKind::ConsecutiveK, 2), cov(HitKind::AnyK, 2));
            EXPECT_LE(cov(HitKind::ConsecutiveK, 3), cov(HitKind::AnyK, 3));
        }
    }
}

TEST(Hits, ReportLayout) {
    std::vector<HitResult> rows;
    const std::vector<double> ev{10.0};
    for (const auto& p : standard_hit_policies()) rows.push_back(hit_analysis(std::vector<double>{9.1, 9.3}, ev, 2.0, p, 0.1));
    const auto text = hit_report_csv(rows);
    EXPECT_EQ(text,
              "policy,k,T_p,hits,events,coverage,h_over_n\n"
              "any,1,2.0,1,1,1.000000,1/1\n"
              "any,2,2.0,1,1,1.000000,1/1\n"
              "any,3,2.0,0,1,0.000000,0/1\n"
              "consecutive,2,2.0,0,1,0.000000,0/1\n"
              "consecutive,3,2.0,0,1,0.000000,0/1\n");
}

TEST(Hits, AnalyzableEvents) {
    const std::vector<double> ev{1.0, 5.0, 9.95, 12.0};
    EXPECT_EQ(analyzable_events(ev, 2.9, 10.0, 2.0, 0.1), (std::vector<double>{5.0, 9.95}));
    EXPECT_EQ(analyzable_events(ev, 2.9, 9.8, 2.0, 0.1), (std::vector<double>{5.0}));
    EXPECT_EQ(analyzable_events(ev, 2.9, 11.9, 2.0, 0.1), (std::vector<double>{5.0, 9.95, 12.0}));
}

TEST(Timeline, RoundTrip) {
    const std::vector<TimelineRow> rows{{2.9, 0.25, false, false}, {3.0, 0.75, true, true}};
    const auto dir = rlfw::test::scratch_dir("timeline");
    csv::write_atomic(dir / "t.csv", timeline_csv(rows));
    const auto back = load_timeline_csv(dir / "t.csv");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].now_t, 3.0);
    EXPECT_EQ(back[1].score, 0.75);
    EXPECT_TRUE(back[1].alarm);
    EXPECT_TRUE(back[1].rlf_event);
    EXPECT_EQ(timeline_csv(rows).substr(0, kTimelineHeader.size()), kTimelineHeader);
}

namespace {

Dataset tiny_dataset() {
    Dataset d;
    d.examples = {{"a", 2.9, {}, 0}, {"a", 3.0, {}, 1}, {"b", 2.9, {}, 0}};
    return d;
}

void write(const std::filesystem::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

std::string import_error(const std::string& body) {
    const auto dir = rlfw::test::scratch_dir("import");
    write(dir / "p.csv", "trace_id,now_t,score\n" + body);
    try {
        import_predictions(dir / "p.csv", tiny_dataset());
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(ImportPredictions, AlignsToDatasetOrder) {
    const auto dir = rlfw::test::scratch_dir("import_ok");
    write(dir / "p.csv", "trace_id,now_t,score\nb,2.9,0.3\na,3.0000004,0.9\na,2.9,0.1\n");
    EXPECT_EQ(import_predictions(dir / "p.csv", tiny_dataset()), (std::vector<double>{0.1, 0.9, 0.3}));
}

TEST(ImportPredictions, Errors) {
    EXPECT_EQ(import_error("a,2.9,0.1\na,3.0,0.9\n"), "missing prediction row for (b, 2.900000)");
    EXPECT_EQ(import_error("a,2.9,0.1\na,2.9,0.2\na,3.0,0.9\nb,2.9,0.3\n"), "duplicate prediction row for (a, 2.900000)");
    EXPECT_EQ(import_error("a,2.9,0.1\na,3.0,0.9\nb,2.9,0.3\nc,1.0,0.5\n"), "unmatched prediction row for (c, 1.000000)");
    EXPECT_EQ(import_error("a,2.9,1.5\n"), "score outside [0, 1] for (a, 2.900000)");
}

TEST(Latency, ProfileShape) {
    TrainedModel m;
    m.kind = ModelKind::LogReg;
    m.input_dim = 4;
    m.params = LogRegParams{{0.1, 0.2, 0.3, 0.4}, 0.0};
    const std::vector<std::vector<double>> x(50, std::vector<double>(4, 1.0));
    const auto p = latency_profile(m, x, 3);
    EXPECT_EQ(p.measurements, 150u);
    EXPECT_EQ(p.feature_dim, 4u);
    EXPECT_EQ(p.parameter_count, 5u);
    EXPECT_GT(p.mean, 0.0);
    EXPECT_LE(p.p50, p.p95);
    EXPECT_THROW(latency_profile(m, {}, 3), Error);
    EXPECT_THROW(latency_profile(m, x, 2), ConfigError);
    const std::vector<std::pair<std::string, LatencyProfile>> rows{{"logreg", p}};
    EXPECT_EQ(latency_csv(rows).substr(0, kLatencyHeader.size()), kLatencyHeader);
}
