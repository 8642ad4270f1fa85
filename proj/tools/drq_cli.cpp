// drq: worst-case rates and thresholds for the observable M/M/1 queue under
// traffic uncertainty.
//
// Exit codes: 0 ok, 2 bad input, 3 solver failure, 4 oracle mismatch.

#include "drq/data_driven.hpp"
#include "drq/experiments.hpp"
#include "drq/mad_closed_form.hpp"
#include "drq/moment_oracle.hpp"
#include "drq/wasserstein.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace {

using nlohmann::json;
using namespace drq;

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitSolver = 3;
constexpr int kExitMismatch = 4;

struct Options {
    std::string objective = "social";
    std::string model = "mad";
    double R = 10.0, C = 1.0, mu = 1.0;
    std::string support = "0,2";
    int n = 0;
    std::optional<double> mean, mad;
    std::string samples;
    double delta = 0.05;
    std::optional<double> epsilon;
    std::size_t grid_size = 2001;
    double tol = 1e-3;
    std::string config, out_dir = ".";
    std::optional<unsigned> threads;
};

Interval parse_support(const std::string& text) {
    const auto comma = text.find(',');
    require(comma != std::string::npos, "--support expects a,b");
    std::size_t used_a = 0, used_b = 0;
    double a = 0.0, b = 0.0;
    try {
        a = std::stod(text.substr(0, comma), &used_a);
        b = std::stod(text.substr(comma + 1), &used_b);
    } catch (const std::exception&) {
        fail(ErrorKind::InvalidArgument, "--support expects two numbers a,b, got '" + text + "'");
    }
    require(used_a == comma && used_b == text.size() - comma - 1, "--support expects a,b, got '" + text + "'");
    require(std::isfinite(a) && std::isfinite(b) && a >= 0.0 && a < b, "--support needs 0 <= a < b");
    return {a, b};
}

// A solve request after validation: which ambiguity set and its data.
struct Problem {
    Objective objective = Objective::Social;
    QueueParams params{10.0, 1.0, 1.0};
    Interval support{0.0, 2.0};
    enum class Kind { Mad, DataDriven, Wasserstein } kind = Kind::Mad;
    std::optional<MomentSpec> spec;
    std::optional<SampleSet> samples;
    double epsilon = 0.0;
};

Problem build_problem(const Options& o) {
    Problem p;
    p.objective = parse_objective(o.objective);
    p.params = QueueParams(o.R, o.C, o.mu);
    p.support = parse_support(o.support);
    const double a = p.support.lo, b = p.support.hi;
    if (o.model == "mad") {
        p.kind = Problem::Kind::Mad;
        require(o.mean && o.mad, "--model mad needs --mean and --mad");
        const double m = *o.mean, d = *o.mad;
        require(std::isfinite(m) && m >= a && m <= b,
                "--mean " + std::to_string(m) + " lies outside the support [" + std::to_string(a) + ", " +
                    std::to_string(b) + "]");
        const double cap = max_mad(a, b, m);
        require(std::isfinite(d) && d >= 0.0, "--mad must be nonnegative");
        if (d > cap * (1.0 + 1e-12) + 1e-15) {
            std::ostringstream msg;
            msg << "--mad " << d << " exceeds the largest MAD attainable with mean " << m << " on [" << a << ", " << b
                << "]: d_bar = 2(m-a)(b-m)/(b-a) = " << cap;
            fail(ErrorKind::InvalidArgument, msg.str());
        }
        p.spec = MomentSpec::exact(a, b, m, std::min(d, cap));
    } else if (o.model == "dd-mad") {
        p.kind = Problem::Kind::DataDriven;
        require(!o.samples.empty(), "--model dd-mad needs --samples FILE");
        p.samples = read_samples(o.samples, p.support);
        p.spec = confidence_intervals(*p.samples, o.delta).spec(a, b);
    } else if (o.model == "wasserstein") {
        p.kind = Problem::Kind::Wasserstein;
        require(!o.samples.empty(), "--model wasserstein needs --samples FILE");
        require(o.epsilon.has_value(), "--model wasserstein needs --epsilon");
        p.samples = read_samples(o.samples, p.support);
        p.epsilon = *o.epsilon;
        WassersteinBall check(*p.samples, p.epsilon);  // validates the radius
    } else {
        fail(ErrorKind::InvalidArgument, "unknown model '" + o.model + "' (mad, dd-mad, wasserstein)");
    }
    return p;
}

WorstCaseResult solve(const Problem& p, Threshold n) {
    switch (p.kind) {
    case Problem::Kind::Mad: return worst_case_mad(p.objective, p.params, n, *p.spec);
    case Problem::Kind::DataDriven: return worst_case_dd(p.objective, p.params, n, *p.spec);
    case Problem::Kind::Wasserstein: return worst_case_wass(p.objective, p.params, n, WassersteinBall(*p.samples, p.epsilon));
    }
    fail(ErrorKind::InvalidArgument, "unknown model");
}

ThresholdSolution threshold(const Problem& p) {
    switch (p.kind) {
    case Problem::Kind::Mad: return optimal_threshold(p.objective, p.params, *p.spec);
    case Problem::Kind::DataDriven: return dd_threshold(p.objective, p.params, *p.spec);
    case Problem::Kind::Wasserstein: return wass_threshold(p.objective, p.params, WassersteinBall(*p.samples, p.epsilon));
    }
    fail(ErrorKind::InvalidArgument, "unknown model");
}

double oracle_value(const Problem& p, Threshold n, std::size_t grid_size) {
    const Loss loss = [&](double x) { return rate(p.objective, p.params, n, x); };
    if (p.kind == Problem::Kind::Wasserstein)
        return worst_case_wasserstein_grid(loss, p.samples->values(), p.epsilon, p.support.lo, p.support.hi, grid_size)
            .value;
    return worst_case_grid(loss, *p.spec, grid_size).value;
}

int cmd_solve(const Options& o) {
    const Problem p = build_problem(o);
    const auto r = solve(p, Threshold(o.n));
    json out;
    out["value"] = r.value;
    out["method"] = to_string(r.method);
    out["extremal_points"] = r.extremal.points();
    out["extremal_probs"] = r.extremal.probs();
    out["gap"] = r.gap;
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << out.dump(2) << '\n';
    return kExitOk;
}

int cmd_threshold(const Options& o) {
    if (o.objective == "individual") {
        const QueueParams params(o.R, o.C, o.mu);
        std::cout << json{{"n_e", individual_threshold(params).value()}}.dump(2) << '\n';
        return kExitOk;
    }
    const auto sol = threshold(build_problem(o));
    json out;
    out["n_hat"] = sol.n_hat;
    out["n_e"] = sol.n_e;
    out["values"] = sol.values;
    std::cout << out.dump(2) << '\n';
    return kExitOk;
}

int cmd_oracle(const Options& o) {
    require(o.grid_size >= 3, "--grid-size must be at least 3");
    require(o.tol > 0.0, "--tol must be positive");
    const Problem p = build_problem(o);
    const Threshold n(o.n);
    const double solver = solve(p, n).value;
    const double oracle = oracle_value(p, n, o.grid_size);
    const double gap = std::abs(solver - oracle);
    json out;
    out["solver_value"] = solver;
    out["oracle_value"] = oracle;
    out["abs_gap"] = gap;
    out["rel_gap"] = gap / std::max(std::abs(oracle), 1e-12);
    std::cout << out.dump(2) << '\n';
    if (gap > o.tol) {
        std::cerr << "oracle mismatch: |" << solver << " - " << oracle << "| = " << gap << " > " << o.tol << '\n';
        return kExitMismatch;
    }
    return kExitOk;
}

int cmd_fit(const Options& o) {
    const Interval support = parse_support(o.support);
    require(!o.samples.empty(), "fit needs --samples FILE");
    const auto s = read_samples(o.samples, support);
    const auto em = empirical_moments(s);
    const auto ci = confidence_intervals(s, o.delta);
    json out;
    out["N"] = s.size();
    out["mean"] = em.mean;
    out["mad"] = em.mad;
    out["delta"] = o.delta;
    out["mean_interval"] = {ci.mean.lo, ci.mean.hi};
    out["mad_interval"] = {ci.mad.lo, ci.mad.hi};
    out["clipped"] = ci.clipped;
    std::cout << out.dump(2) << '\n';
    return kExitOk;
}

int cmd_experiment(const Options& o) {
    std::ifstream in(o.config);
    if (!in) fail(ErrorKind::InvalidArgument, "cannot open config " + o.config);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::InvalidArgument, "config " + o.config + " is not valid JSON: " + e.what());
    }
    ExperimentConfig cfg = config_from_json(j);
    if (o.threads) cfg.threads = *o.threads;
    cfg.validate();

    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(o.out_dir, ec);
    if (ec) fail(ErrorKind::InvalidArgument, "cannot create output directory " + o.out_dir + ": " + ec.message());

    const auto result = run_section5(cfg);
    for (const auto& obj : result.objectives) {
        const std::string stem = (fs::path(o.out_dir) / objective_name(obj.objective)).string();
        std::ofstream trials(stem + "_trials.csv", std::ios::binary), summary(stem + "_summary.csv", std::ios::binary);
        if (!trials || !summary) fail(ErrorKind::InvalidArgument, "cannot write CSVs under " + o.out_dir);
        write_trials_csv(trials, obj.records);
        write_summary_csv(summary, obj.summary);
        for (const auto& r : obj.records)
            if (!r.ok())
                std::cerr << "trial failed: " << objective_name(obj.objective) << ' ' << to_string(r.model)
                          << " N=" << r.sample_size << " trial=" << r.trial << ": " << r.error << '\n';
        std::cout << "# " << objective_name(obj.objective) << '\n';
        write_summary_csv(std::cout, obj.summary);
    }
    return kExitOk;
}

void add_problem_flags(CLI::App& sub, Options& o, bool with_n) {
    sub.add_option("--objective", o.objective, "social or revenue")->capture_default_str();
    sub.add_option("--model", o.model, "mad, dd-mad or wasserstein")->capture_default_str();
    sub.add_option("--R", o.R, "reward per service")->capture_default_str();
    sub.add_option("--C", o.C, "waiting cost per unit time")->capture_default_str();
    sub.add_option("--mu", o.mu, "service rate")->capture_default_str();
    sub.add_option("--support", o.support, "traffic support a,b")->capture_default_str();
    if (with_n) sub.add_option("--n", o.n, "threshold")->required();
    sub.add_option("--mean", o.mean, "mean traffic (mad model)");
    sub.add_option("--mad", o.mad, "mean absolute deviation (mad model)");
    sub.add_option("--samples", o.samples, "sample file, one value per line");
    sub.add_option("--delta", o.delta, "confidence parameter (dd-mad)")->capture_default_str();
    sub.add_option("--epsilon", o.epsilon, "Wasserstein radius");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Worst-case rates and thresholds for an observable queue with uncertain traffic"};
    app.require_subcommand(1);
    Options o;

    auto* solve_cmd = app.add_subcommand("solve", "worst-case rate at one threshold");
    add_problem_flags(*solve_cmd, o, true);
    auto* thr_cmd = app.add_subcommand("threshold", "robust threshold (or n_e with --objective individual)");
    add_problem_flags(*thr_cmd, o, false);
    auto* oracle_cmd = app.add_subcommand("oracle", "compare the solver with the grid LP");
    add_problem_flags(*oracle_cmd, o, true);
    oracle_cmd->add_option("--grid-size", o.grid_size, "grid points")->capture_default_str();
    oracle_cmd->add_option("--tol", o.tol, "largest accepted absolute gap")->capture_default_str();
    auto* fit_cmd = app.add_subcommand("fit", "empirical moments and confidence intervals");
    fit_cmd->add_option("--samples", o.samples, "sample file")->required();
    fit_cmd->add_option("--support", o.support, "traffic support a,b")->capture_default_str();
    fit_cmd->add_option("--delta", o.delta, "confidence parameter")->capture_default_str();
    auto* exp_cmd = app.add_subcommand("experiment", "run the out-of-sample experiment");
    exp_cmd->add_option("config", o.config, "JSON config")->required();
    exp_cmd->add_option("--out", o.out_dir, "output directory")->capture_default_str();
    exp_cmd->add_option("--threads", o.threads, "worker threads (overrides the config)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvalid;
    }

    try {
        if (*solve_cmd) return cmd_solve(o);
        if (*thr_cmd) return cmd_threshold(o);
        if (*oracle_cmd) return cmd_oracle(o);
        if (*fit_cmd) return cmd_fit(o);
        return cmd_experiment(o);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        const bool input = e.is_validation() || e.kind() == ErrorKind::Infeasible ||
                           e.kind() == ErrorKind::PreconditionViolated;
        return input ? kExitInvalid : kExitSolver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitSolver;
    }
}
