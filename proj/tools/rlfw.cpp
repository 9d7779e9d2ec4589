// rlfw: command-line front end.
//
//   rlfw simulate     --out DIR
//   rlfw build        --traces DIR --out DIR
//   rlfw balance      --in train.csv --out DIR
//   rlfw train        --in train.csv --out DIR
//   rlfw eval         --model model.txt --val val.csv --test test.csv --out DIR [--latency]
//   rlfw sweep        [--traces DIR] --out DIR
//   rlfw hits         --model model.txt --val val.csv --test test.csv --traces DIR --out DIR
//   rlfw stream       --model model.txt --trace trace.csv --out DIR
//   rlfw import-preds --name NAME --val val.csv --val-preds P --test test.csv --test-preds P --out DIR
//
// Every subcommand accepts --config FILE and repeatable --set key=value
// (applied after the file) and writes resolved.cfg into its output directory.
// Exit status: 0 success, 1 domain error, 2 usage error.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "rlfw/rlfw.hpp"

namespace fs = std::filesystem;
using namespace rlfw;

namespace {

struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "key = value config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", c.sets, "override one key, key=value (repeatable)");
    cmd->add_option("--out", c.out, "output directory")->required();
}

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

RunConfig resolve(const Common& c) {
    RunConfig rc;
    try {
        if (!c.config.empty()) rc.load_file(c.config);
        for (const auto& s : c.sets) rc.set_assignment(s);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    return rc;
}

fs::path prepare_out(const Common& c, const RunConfig& rc) {
    const fs::path out(c.out);
    fs::create_directories(out);
    csv::write_atomic(out / "resolved.cfg", rc.resolved());
    return out;
}

std::string seconds_tag(double v) {
    auto s = csv::fixed(v, 1);
    if (s.ends_with(".0")) s.resize(s.size() - 2);
    return s;
}

std::string cell_tag(const std::string& model, double T_s, double T_p) {
    return model + "_Ts" + seconds_tag(T_s) + "_Tp" + seconds_tag(T_p);
}

std::vector<Trace> load_trace_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error("trace directory not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
        if (name.ends_with(".truth.csv") || name.ends_with(".norm.csv")) continue;
        files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error("no trace CSV files in " + dir.string());
    std::vector<Trace> traces;
    for (const auto& f : files) traces.push_back(load_trace_csv(f));
    return traces;
}

void warn(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

void write_timelines(const fs::path& dir, const Dataset& d, const std::vector<double>& scores, double tau,
                     const std::vector<Trace>& traces) {
    fs::create_directories(dir);
    for (const auto& [id, rows] : timelines(d, scores, tau, traces))
        csv::write_atomic(dir / (id + ".csv"), timeline_csv(rows));
}

// ----------------------------------------------------------------------------

void run_simulate(const Common& c) {
    const auto rc = resolve(c);
    const auto scenario = rc.scenario();
    const auto out = prepare_out(c, rc);
    for (const auto& sim : simulate_traces(scenario, rc.count("sim.traces"))) {
        save_trace_csv(sim.trace, out / (sim.trace.trace_id + ".csv"));
        csv::write_atomic(out / (sim.trace.trace_id + ".truth.csv"), truth_to_csv(sim.truth));
    }
}

void run_build(const Common& c, const std::string& trace_dir) {
    const auto rc = resolve(c);
    const auto spec = rc.window();
    const auto traces = load_trace_dir(trace_dir);
    auto split = chrono_split(build_all(traces, spec), spec, rc.split());
    const auto out = prepare_out(c, rc);
    save_dataset_csv(split.train, out / "train.csv");
    save_dataset_csv(split.val, out / "val.csv");
    save_dataset_csv(split.test, out / "test.csv");
    warn(split.warnings);
}

void run_balance(const Common& c, const std::string& in) {
    const auto rc = resolve(c);
    const auto d = load_dataset_csv(in, rc.window());
    const auto [balanced, weights] = apply_balance(d, rc.balance());
    const auto out = prepare_out(c, rc);
    save_dataset_csv(balanced, out / "balanced.csv");
    csv::write_atomic(out / "class_weights.csv",
                      "w_neg,w_pos\n" + csv::exact(weights.negative) + ',' + csv::exact(weights.positive) + '\n');
}

void run_train(const Common& c, const std::string& in) {
    const auto rc = resolve(c);
    const auto d = load_dataset_csv(in, rc.window());
    auto cfg = rc.train();
    if (rc.balance().method == BalanceMethod::ClassWeights) cfg.class_weights = class_weights(d);
    std::vector<double> history;
    const auto model = train(d, cfg, &history);
    const auto out = prepare_out(c, rc);
    save_model(model, out / "model.txt");
    std::string loss = "step,loss\n";
    for (std::size_t i = 0; i < history.size(); ++i) loss += std::to_string(i) + ',' + csv::exact(history[i]) + '\n';
    csv::write_atomic(out / "loss.csv", loss);
}

struct Scored {
    TrainedModel model;
    Dataset val, test;
    std::vector<double> val_scores, test_scores;
};

Scored score_model(const RunConfig& rc, const std::string& model_path, const std::string& val,
                   const std::string& test) {
    Scored s;
    const auto spec = rc.window();
    s.model = load_model(model_path);
    require_compatible(s.model, spec);
    s.val = load_dataset_csv(val, spec);
    s.test = load_dataset_csv(test, spec);
    s.val_scores = predict_batch(s.model, s.val.examples);
    s.test_scores = predict_batch(s.model, s.test.examples);
    return s;
}

CellScores cell_of(const RunConfig& rc, const std::string& model, const Scored& s) {
    CellScores cell;
    cell.model = model;
    cell.T_s = s.val.spec.T_s;
    cell.T_p = s.val.spec.T_p;
    cell.balance = rc.text("balance.method");
    cell.val_scores = s.val_scores;
    cell.val_labels = binary_labels(s.val.examples);
    cell.test_scores = s.test_scores;
    cell.test_labels = binary_labels(s.test.examples);
    return cell;
}

void run_eval(const Common& c, const std::string& model_path, const std::string& val, const std::string& test,
              bool latency) {
    const auto rc = resolve(c);
    const auto s = score_model(rc, model_path, val, test);
    const std::vector<MetricsReport> rows{evaluate_cell(cell_of(rc, to_string(s.model.kind), s))};
    const auto out = prepare_out(c, rc);
    csv::write_atomic(out / "report.csv", report_csv(rows));
    if (latency) {
        std::vector<std::vector<double>> x;
        for (const auto& ex : s.test.examples) x.push_back(ex.features);
        const std::vector<std::pair<std::string, LatencyProfile>> prof{
            {to_string(s.model.kind), latency_profile(s.model, x, rc.count("latency.repetitions"))}};
        csv::write_atomic(out / "latency.csv", latency_csv(prof));
    }
}

void run_hits(const Common& c, const std::string& model_path, const std::string& val, const std::string& test,
              const std::string& trace_dir) {
    const auto rc = resolve(c);
    const auto s = score_model(rc, model_path, val, test);
    const auto traces = load_trace_dir(trace_dir);
    const double tau = select_threshold(s.val_scores, binary_labels(s.val.examples));
    const auto out = prepare_out(c, rc);
    csv::write_atomic(out / "hits.csv", hit_report_csv(hit_report(s.test, s.test_scores, tau, traces)));
    write_timelines(out / "timelines", s.test, s.test_scores, tau, traces);
}

void run_sweep(const Common& c, const std::string& trace_dir) {
    const auto rc = resolve(c);
    std::vector<Trace> traces;
    if (trace_dir.empty()) {
        for (auto& sim : simulate_traces(rc.scenario(), rc.count("sim.traces"))) traces.push_back(std::move(sim.trace));
    } else {
        traces = load_trace_dir(trace_dir);
    }
    const auto models = rc.list("sweep.models");
    const auto Ts = rc.reals("sweep.T_s");
    const auto Tp = rc.reals("sweep.T_p");
    if (models.empty() || Ts.empty() || Tp.empty()) throw ConfigError("sweep grid is empty");
    const auto out = prepare_out(c, rc);

    std::vector<CellScores> cells;
    for (const auto& name : models) {
        const auto kind = parse_model_kind(name);
        for (double ts : Ts) {
            for (double tp : Tp) {
                RunConfig cell_rc = rc;
                cell_rc.set("window.T_s", csv::exact(ts));
                cell_rc.set("window.T_p", csv::exact(tp));
                const auto tag = cell_tag(name, ts, tp);
                CellScores cell;
                cell.model = name;
                cell.T_s = ts;
                cell.T_p = tp;
                cell.balance = rc.text("balance.method");
                try {
                    const auto spec = cell_rc.window();
                    auto run = run_cell(traces, spec, rc.split(), rc.balance(), cell_rc.train(kind));
                    for (const auto& w : run.split.warnings) std::cerr << "warning: " << tag << ": " << w << '\n';
                    cell = run.cell;
                    const auto report = evaluate_cell(cell);
                    if (report.error.empty()) {
                        write_timelines(out / "timelines" / tag, run.split.test, run.test_scores, report.tau_star,
                                        traces);
                        csv::write_atomic(out / "hits" / (tag + ".csv"),
                                          hit_report_csv(hit_report(run.split.test, run.test_scores,
                                                                                report.tau_star, traces)));
                    }
                } catch (const Error& e) {
                    cell.error = e.what();
                    std::cerr << "warning: " << tag << ": " << e.what() << '\n';
                }
                cells.push_back(std::move(cell));
            }
        }
    }
    csv::write_atomic(out / "report.csv", report_csv(evaluate_grid(cells)));
}

void run_stream(const Common& c, const std::string& model_path, const std::string& trace_path) {
    const auto rc = resolve(c);
    const auto spec = rc.window();
    const auto model = load_model(model_path);
    require_compatible(model, spec);
    const auto trace = load_trace_csv(trace_path);
    const auto r = replay(trace, model, spec, rc.alarm());
    const auto out = prepare_out(c, rc);
    csv::write_atomic(out / "alarms.csv", alarm_log_csv(r.alarms));
    csv::write_atomic(out / "timeline.csv", timeline_csv(r.timeline));
}

void run_import(const Common& c, const std::string& name, const std::string& val, const std::string& val_preds,
                const std::string& test, const std::string& test_preds) {
    const auto rc = resolve(c);
    const auto spec = rc.window();
    Scored s;
    s.val = load_dataset_csv(val, spec);
    s.test = load_dataset_csv(test, spec);
    s.val_scores = import_predictions(val_preds, s.val);
    s.test_scores = import_predictions(test_preds, s.test);
    const std::vector<MetricsReport> rows{evaluate_cell(cell_of(rc, name, s))};
    const auto out = prepare_out(c, rc);
    csv::write_atomic(out / "report.csv", report_csv(rows));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Radio link failure early-warning toolkit"};
    app.require_subcommand(1);

    Common sim_c, build_c, bal_c, train_c, eval_c, sweep_c, hits_c, stream_c, imp_c;
    std::string traces, in, model, val, test, trace, name, val_preds, test_preds;
    bool latency = false;

    auto* sim = app.add_subcommand("simulate", "generate synthetic traces and truth sidecars");
    add_common(sim, sim_c);

    auto* build = app.add_subcommand("build", "window traces into train/val/test datasets");
    add_common(build, build_c);
    build->add_option("--traces", traces, "directory of trace CSVs")->required();

    auto* bal = app.add_subcommand("balance", "rebalance a training dataset");
    add_common(bal, bal_c);
    bal->add_option("--in", in, "dataset CSV")->required()->check(CLI::ExistingFile);

    auto* tr = app.add_subcommand("train", "train one learner");
    add_common(tr, train_c);
    tr->add_option("--in", in, "training dataset CSV")->required()->check(CLI::ExistingFile);

    auto* ev = app.add_subcommand("eval", "select tau on validation, report on test");
    add_common(ev, eval_c);
    ev->add_option("--model", model)->required()->check(CLI::ExistingFile);
    ev->add_option("--val", val)->required()->check(CLI::ExistingFile);
    ev->add_option("--test", test)->required()->check(CLI::ExistingFile);
    ev->add_flag("--latency", latency, "also write a per-prediction latency profile");

    auto* sw = app.add_subcommand("sweep", "run the model x T_s x T_p grid");
    add_common(sw, sweep_c);
    sw->add_option("--traces", traces, "directory of trace CSVs (default: simulate from config)");

    auto* hi = app.add_subcommand("hits", "hit-policy analysis on the test split");
    add_common(hi, hits_c);
    hi->add_option("--model", model)->required()->check(CLI::ExistingFile);
    hi->add_option("--val", val)->required()->check(CLI::ExistingFile);
    hi->add_option("--test", test)->required()->check(CLI::ExistingFile);
    hi->add_option("--traces", traces, "directory of trace CSVs")->required();

    auto* st = app.add_subcommand("stream", "replay a trace through the alarm engine");
    add_common(st, stream_c);
    st->add_option("--model", model)->required()->check(CLI::ExistingFile);
    st->add_option("--trace", trace)->required()->check(CLI::ExistingFile);

    auto* im = app.add_subcommand("import-preds", "evaluate externally produced scores");
    add_common(im, imp_c);
    im->add_option("--name", name, "model label for the report")->required();
    im->add_option("--val", val)->required()->check(CLI::ExistingFile);
    im->add_option("--val-preds", val_preds)->required()->check(CLI::ExistingFile);
    im->add_option("--test", test)->required()->check(CLI::ExistingFile);
    im->add_option("--test-preds", test_preds)->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (*sim) run_simulate(sim_c);
        else if (*build) run_build(build_c, traces);
        else if (*bal) run_balance(bal_c, in);
        else if (*tr) run_train(train_c, in);
        else if (*ev) run_eval(eval_c, model, val, test, latency);
        else if (*sw) run_sweep(sweep_c, traces);
        else if (*hi) run_hits(hits_c, model, val, test, traces);
        else if (*st) run_stream(stream_c, model, trace);
        else if (*im) run_import(imp_c, name, val, val_preds, test, test_preds);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
