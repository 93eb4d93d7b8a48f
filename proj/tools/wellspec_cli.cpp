// Command-line front end: analyze (multisplit well-specification report),
// simulate (benchmark suites with graph-derived ground truth), and codec
// (raw dependence statistics / FOCI).

#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wellspec/json_io.hpp"
#include "wellspec/pipeline.hpp"
#include "wellspec/scmlab.hpp"

namespace ws = wellspec;

namespace {

struct CommonOpts {
    std::string mode = "anm";
    std::string g = "auto";  // auto: absolute for anm, identity for lsnm
    std::size_t splits = 25;
    double alpha = 0.05;
    double alpha_tilde = 0.01;
    std::uint64_t seed = 1;
    std::size_t perms = 500;
    std::size_t jobs = 1;
    std::size_t hsic_max_n = 1024;
    std::string hsic_calibration = "permutation";
    double gamma_min = 0.05;
    double big = 1e6;
    bool standardize = false;
    std::string regressor = "boosted_trees";
    int max_rounds = 500;
    double learning_rate = 0.1;
    int max_depth = 3;
    int min_leaf = 5;
    int patience = 20;
    int knn_k = 10;

    ws::ResidualMode residual_mode() const {
        if (mode == "anm") return ws::ResidualMode::kAnm;
        if (mode == "lsnm") return ws::ResidualMode::kLsnm;
        throw ws::input_error("unknown mode '" + mode + "' (anm|lsnm)");
    }

    ws::GMode g_mode() const {
        if (g == "auto") return residual_mode() == ws::ResidualMode::kAnm ? ws::GMode::kAbsolute : ws::GMode::kIdentity;
        if (g == "absolute") return ws::GMode::kAbsolute;
        if (g == "identity") return ws::GMode::kIdentity;
        throw ws::input_error("unknown transform '" + g + "' (absolute|identity)");
    }

    ws::RegressorSpec regressor_spec() const {
        ws::RegressorSpec r;
        if (regressor == "boosted_trees") r.kind = ws::RegressorKind::kBoostedTrees;
        else if (regressor == "knn") r.kind = ws::RegressorKind::kKnn;
        else if (regressor == "constant_mean") r.kind = ws::RegressorKind::kConstantMean;
        else throw ws::input_error("unknown regressor '" + regressor + "'");
        r.max_rounds = max_rounds;
        r.learning_rate = learning_rate;
        r.max_depth = max_depth;
        r.min_leaf = min_leaf;
        r.early_stop_patience = patience;
        r.k = knn_k;
        r.validate();
        return r;
    }

    ws::PipelineOptions pipeline_options() const {
        ws::PipelineOptions o;
        if (perms < 19) throw ws::input_error("--perms must be at least 19");
        o.n_perm = perms;
        o.hsic_max_n = hsic_max_n;
        if (hsic_calibration == "permutation") o.hsic_calibration = ws::HsicCalibration::kPermutation;
        else if (hsic_calibration == "gamma") o.hsic_calibration = ws::HsicCalibration::kGamma;
        else throw ws::input_error("unknown hsic calibration '" + hsic_calibration + "'");
        if (!(gamma_min > 0.0 && gamma_min < 1.0)) throw ws::input_error("--gamma-min must be in (0,1)");
        if (!(big > 0.0)) throw ws::input_error("--big must be positive");
        o.gamma_min = gamma_min;
        o.big = big;
        o.standardize_foci = standardize;
        return o;
    }

    void attach(CLI::App* cmd, bool with_mode = true) {
        if (with_mode) cmd->add_option("--mode", mode, "residual model: anm|lsnm");
        cmd->add_option("--g", g, "residual transform for FOCI: absolute|identity (default per mode)");
        cmd->add_option("--splits", splits, "number of split pairs B (2B evaluations)");
        cmd->add_option("--alpha", alpha, "level for the global test");
        cmd->add_option("--alpha-tilde", alpha_tilde, "level for the per-variable proportion tests");
        cmd->add_option("--seed", seed, "master seed");
        cmd->add_option("--perms", perms, "HSIC permutations per split");
        cmd->add_option("--jobs", jobs, "worker threads (never changes results)");
        cmd->add_option("--hsic-max-n", hsic_max_n, "subsample cap for the HSIC test (0 = off)");
        cmd->add_option("--hsic-calibration", hsic_calibration, "permutation|gamma");
        cmd->add_option("--gamma-min", gamma_min, "lower quantile bound for p-value aggregation");
        cmd->add_option("--big", big, "LSNM fallback residual magnitude");
        cmd->add_flag("--standardize", standardize, "standardize columns before FOCI distances");
        cmd->add_option("--regressor", regressor, "boosted_trees|knn|constant_mean");
        cmd->add_option("--max-rounds", max_rounds, "boosting rounds cap");
        cmd->add_option("--learning-rate", learning_rate, "boosting learning rate");
        cmd->add_option("--max-depth", max_depth, "tree depth cap");
        cmd->add_option("--min-leaf", min_leaf, "minimum rows per leaf");
        cmd->add_option("--patience", patience, "early stopping patience (rounds)");
        cmd->add_option("--knn-k", knn_k, "neighbor count for the knn regressor");
    }
};

std::string utc_timestamp() {
    char buf[32];
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

void write_output(const std::string& out_path, const std::string& payload) {
    if (out_path.empty()) {
        std::cout << payload;
        return;
    }
    std::ofstream out(out_path);
    if (!out) throw ws::input_error("cannot write output file: " + out_path);
    out << payload;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

int cmd_analyze(const CommonOpts& opts, const std::string& input, const std::string& target,
                const std::string& out_path, bool verbose) {
    const ws::Dataset ds = ws::load_csv(input, target);
    const ws::WellSpecReport rep =
        ws::alg3_multisplit(ds, opts.regressor_spec(), opts.g_mode(), opts.splits, opts.alpha,
                            opts.alpha_tilde, opts.residual_mode(), opts.seed, opts.jobs,
                            opts.pipeline_options());
    ws::ordered_json j = ws::report_to_json(rep, opts.jobs, verbose);
    j["config"]["input"] = input;
    j["timestamp"] = utc_timestamp();
    write_output(out_path, j.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimRow {
    std::size_t run;
    std::string m;
    double p0;
    std::string w_hat;
    std::string w_true;
    bool global_ok;
    std::optional<double> amp;
};

std::string join_names(const ws::ScmSpec& spec, const std::vector<int>& nodes) {
    std::string out;
    for (int v : nodes) {
        if (!out.empty()) out += '-';
        out += spec.dag.names[static_cast<std::size_t>(v)];
    }
    return out;
}

int cmd_simulate(CommonOpts& opts, const std::string& suite, std::size_t n, std::size_t runs,
                 const std::string& out_path) {
    if (n < 8) throw ws::input_error("--n must be at least 8");
    if (runs < 1) throw ws::input_error("--runs must be at least 1");

    bool is_fig2 = suite == "fig2";
    bool is_lsnm = suite == "lsnm";
    ws::ScmSpec custom_spec;
    if (!is_fig2 && !is_lsnm) {
        if (suite.rfind("custom:", 0) != 0)
            throw ws::input_error("unknown suite '" + suite + "' (fig2|lsnm|custom:<spec.json>)");
        const std::string path = suite.substr(7);
        std::ifstream in(path);
        if (!in) throw ws::input_error("cannot open spec file: " + path);
        ws::ordered_json j;
        try {
            in >> j;
        } catch (const std::exception& e) {
            throw ws::input_error("cannot parse spec json: " + std::string(e.what()));
        }
        custom_spec = ws::scm_from_json(j);
    }
    if (is_lsnm && opts.mode == "anm") opts.mode = "lsnm";  // suite implies the residual model

    const ws::ResidualMode mode = opts.residual_mode();
    const ws::GMode g = opts.g_mode();
    const ws::RegressorSpec reg = opts.regressor_spec();
    const ws::PipelineOptions popt = opts.pipeline_options();

    std::vector<SimRow> rows;
    std::vector<ws::EvalRun> eval_runs;

    auto run_one = [&](const ws::ScmSpec& spec, std::size_t run, std::size_t variant) {
        const std::uint64_t sample_seed = ws::RngStream(opts.seed, {0xD0u, run, variant}).next_u64();
        const std::uint64_t alg_seed = ws::RngStream(opts.seed, {0xD1u, run, variant}).next_u64();
        const ws::SampleResult sample = ws::sample_scm(spec, n, ws::RngStream(sample_seed));
        const ws::GroundTruth gt = ws::ground_truth_w(spec);
        const ws::WellSpecReport rep = ws::alg3_multisplit(
            sample.data, reg, g, opts.splits, opts.alpha, opts.alpha_tilde, mode, alg_seed, opts.jobs, popt);

        // report indices are positions in spec.observed; map back to node ids
        std::vector<int> w_hat_nodes;
        for (int j : rep.w_hat) w_hat_nodes.push_back(spec.observed[static_cast<std::size_t>(j)]);

        SimRow row;
        row.run = run;
        row.m = join_names(spec, spec.observed);
        row.p0 = rep.p0;
        row.w_hat = join_names(spec, w_hat_nodes);
        row.w_true = join_names(spec, gt.w_true);
        row.global_ok = gt.global_ok;

        if (is_lsnm) {
            // average misposition of one split's estimated residuals against
            // the quadrature ground truth
            const ws::SplitPlan plan = ws::make_split(n, alg_seed, 0);
            const auto [f1, f2] = ws::fit_moments(reg, sample.data.x.select_rows(plan.half_a),
                                                  ws::select(sample.data.y, plan.half_a),
                                                  sample.data.x.select_rows(plan.half_b),
                                                  ws::select(sample.data.y, plan.half_b));
            const ws::Residuals res = ws::residualize_lsnm(f1, f2, sample.data.x.select_rows(plan.half_b),
                                                           ws::select(sample.data.y, plan.half_b), popt.big);
            std::vector<double> x1_b, h_b;
            for (std::size_t i : plan.half_b) {
                x1_b.push_back(sample.data.x(i, 0));
                h_b.push_back(sample.hidden(i, 0));
            }
            row.amp = ws::amp(ws::LsnmSuite::true_residuals(x1_b, h_b), res.eps_hat);
        }
        rows.push_back(row);

        if (!gt.global_ok) {
            ws::EvalRun er;
            er.variables = spec.observed;
            er.w_true = gt.w_true;
            er.w_hat = w_hat_nodes;
            eval_runs.push_back(er);
        }
    };

    for (std::size_t run = 0; run < runs; ++run) {
        if (is_fig2) {
            const ws::Fig2Suite suite_gen(opts.seed);
            ws::ScmSpec spec = suite_gen.spec_for_run(run);
            const auto subsets = ws::Fig2Suite::observed_subsets();
            for (std::size_t si = 0; si < subsets.size(); ++si) {
                spec.observed = subsets[si];
                run_one(spec, run, si);
            }
        } else if (is_lsnm) {
            run_one(ws::lsnm_suite(opts.seed), run, 0);
        } else {
            run_one(custom_spec, run, 0);
        }
    }

    std::ostringstream csv;
    csv << "row_type,run,m,p0,w_hat,w_true,global_ok,amp,fpr,fpr_den,tpr,tpr_den\n";
    for (const auto& r : rows) {
        csv << "run," << r.run << ',' << r.m << ',' << fmt_double(r.p0) << ',' << r.w_hat << ','
            << r.w_true << ',' << (r.global_ok ? 1 : 0) << ',' << (r.amp ? fmt_double(*r.amp) : "")
            << ",,,,\n";
    }
    if (!eval_runs.empty()) {
        const ws::RatePair rates = ws::fpr_tpr(eval_runs);
        csv << "summary,,,,,,,," << (rates.fpr_den ? fmt_double(rates.fpr) : "") << ',' << rates.fpr_den
            << ',' << (rates.tpr_den ? fmt_double(rates.tpr) : "") << ',' << rates.tpr_den << '\n';
    } else {
        csv << "summary,,,,,,,,,0,,0\n";
    }
    write_output(out_path, csv.str());
    return 0;
}

// ---------------------------------------------------------------------------
// codec
// ---------------------------------------------------------------------------

int cmd_codec(const std::string& input, const std::string& response, const std::string& predictors,
              const std::string& g, std::uint64_t seed, bool run_foci, const std::string& out_path) {
    const ws::Dataset ds = ws::load_csv(input, response);
    std::vector<int> cols;
    std::stringstream ss(predictors);
    std::string name;
    while (std::getline(ss, name, ',')) {
        bool found = false;
        for (std::size_t j = 0; j < ds.names.size(); ++j)
            if (ds.names[j] == name) {
                cols.push_back(static_cast<int>(j));
                found = true;
                break;
            }
        if (!found) throw ws::input_error("unknown predictor column: " + name);
    }
    if (cols.empty()) throw ws::input_error("no predictor columns given");

    ws::GMode gm = ws::GMode::kIdentity;
    if (g == "absolute") gm = ws::GMode::kAbsolute;
    else if (g != "identity") throw ws::input_error("unknown transform '" + g + "' (absolute|identity)");

    const std::vector<double> y = ws::transform_g(ds.y, gm);
    const ws::Matrix x = ds.x.select_cols(cols);
    const ws::DependenceStat stat = ws::codec_t(y, x, ws::RngStream(seed, {0xC0u}));

    ws::ordered_json j;
    j["q_n"] = stat.q_n;
    j["s_n"] = stat.s_n;
    if (stat.defined) j["t_n"] = stat.t_n;
    else j["t_n"] = nullptr;
    j["defined"] = stat.defined;
    j["response"] = response;
    j["g"] = g;
    if (run_foci) {
        const ws::FociResult res = ws::foci_select(y, x, ws::RngStream(seed, {0xC1u}));
        ws::ordered_json sel = ws::ordered_json::array();
        for (int c : res.selected) sel.push_back(ds.names[static_cast<std::size_t>(cols[static_cast<std::size_t>(c)])]);
        j["selected"] = sel;
        j["foci_undefined"] = res.undefined;
    }
    write_output(out_path, j.dump(2) + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Causal well-specification diagnostics for additive and location-scale noise models"};
    app.require_subcommand(1);

    CommonOpts a_opts;
    std::string a_input, a_target, a_out;
    bool a_verbose = false;
    CLI::App* analyze = app.add_subcommand("analyze", "multisplit well-specification report for a CSV dataset");
    analyze->add_option("--input", a_input, "CSV file with a header row")->required();
    analyze->add_option("--target", a_target, "name of the response column")->required();
    analyze->add_option("--out", a_out, "write the JSON report here instead of stdout");
    analyze->add_flag("--verbose", a_verbose, "include per-split diagnostics in the report");
    a_opts.attach(analyze);

    CommonOpts s_opts;
    std::string s_suite, s_out;
    std::size_t s_n = 1000, s_runs = 1;
    CLI::App* simulate = app.add_subcommand("simulate", "run a benchmark suite and score against ground truth");
    simulate->add_option("--suite", s_suite, "fig2 | lsnm | custom:<spec.json>")->required();
    simulate->add_option("--n", s_n, "sample size per run");
    simulate->add_option("--runs", s_runs, "number of simulation runs");
    simulate->add_option("--out", s_out, "write the metrics CSV here instead of stdout");
    s_opts.attach(simulate);

    std::string c_input, c_response, c_predictors, c_g = "identity", c_out;
    std::uint64_t c_seed = 1;
    bool c_foci = false;
    CLI::App* codec = app.add_subcommand("codec", "dependence statistic (and FOCI selection) for CSV columns");
    codec->add_option("--input", c_input, "CSV file")->required();
    codec->add_option("--response", c_response, "response column")->required();
    codec->add_option("--predictors", c_predictors, "comma-separated predictor columns")->required();
    codec->add_option("--g", c_g, "transform applied to the response: absolute|identity");
    codec->add_option("--seed", c_seed, "seed for neighbor tie resolution");
    codec->add_flag("--foci", c_foci, "also run greedy FOCI selection");
    codec->add_option("--out", c_out, "write JSON here instead of stdout");

    try {
        app.parse(argc, argv);
        if (analyze->parsed()) return cmd_analyze(a_opts, a_input, a_target, a_out, a_verbose);
        if (simulate->parsed()) return cmd_simulate(s_opts, s_suite, s_n, s_runs, s_out);
        if (codec->parsed()) return cmd_codec(c_input, c_response, c_predictors, c_g, c_seed, c_foci, c_out);
        return 2;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ws::input_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
