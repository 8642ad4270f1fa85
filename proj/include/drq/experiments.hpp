#pragma once

// Out-of-sample comparison of threshold policies fitted by SAA, the exact MAD
// model on empirical moments, the data-driven MAD model and the Wasserstein
// model, with robustness constants picked by k-fold cross-validation.

#include "drq/data_driven.hpp"
#include "drq/mad_closed_form.hpp"
#include "drq/queue_econ.hpp"
#include "drq/random.hpp"
#include "drq/threshold.hpp"
#include "drq/wasserstein.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

namespace drq {

enum class Model { SAA, MAD, DDMAD, Wasserstein };

inline const char* to_string(Model m) {
    switch (m) {
    case Model::SAA: return "SAA";
    case Model::MAD: return "MAD";
    case Model::DDMAD: return "DD-MAD";
    case Model::Wasserstein: return "Wasserstein";
    }
    return "unknown";
}

inline Model parse_model(const std::string& s) {
    if (s == "SAA" || s == "saa") return Model::SAA;
    if (s == "MAD" || s == "mad") return Model::MAD;
    if (s == "DD-MAD" || s == "dd-mad") return Model::DDMAD;
    if (s == "Wasserstein" || s == "wasserstein") return Model::Wasserstein;
    fail(ErrorKind::InvalidArgument, "unknown model '" + s + "'");
}

inline Objective parse_objective(const std::string& s) {
    if (s == "social") return Objective::Social;
    if (s == "revenue") return Objective::Revenue;
    fail(ErrorKind::InvalidArgument, "unknown objective '" + s + "'");
}

inline const char* objective_name(Objective o) { return o == Objective::Social ? "social" : "revenue"; }

struct ExperimentConfig {
    QueueParams params{10.0, 1.0, 1.0};
    Interval support{0.0, 2.0};
    BetaLaw law;
    std::vector<std::size_t> sample_sizes{2, 4, 6, 8, 10, 20, 40, 60, 80, 100};
    std::size_t trials = 20;
    std::size_t test_size = 10000;
    std::vector<double> cv_constants{5, 1, 0.5, 0.1, 0.05, 0.01};
    double delta = 0.05;
    bool cross_validation = true;
    std::uint64_t master_seed = 20240517;
    std::vector<Objective> objectives{Objective::Social, Objective::Revenue};
    std::vector<Model> models{Model::SAA, Model::MAD, Model::DDMAD, Model::Wasserstein};
    unsigned threads = 1;
    bool record_runtime = false;

    void validate() const {
        require(support.lo >= 0.0 && support.lo < support.hi, "support needs 0 <= a < b");
        require(support.lo == 0.0 && law.scale <= support.hi, "samples scale * Beta must lie inside the support");
        require(!sample_sizes.empty(), "no sample sizes");
        for (auto n : sample_sizes) require(n >= 1, "sample sizes must be positive");
        require(trials >= 1, "need at least one trial");
        require(test_size >= 1, "test set must be nonempty");
        require(!cv_constants.empty(), "no cross-validation constants");
        for (double c : cv_constants) require(c > 0.0 && std::isfinite(c), "constants must be positive");
        require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
        require(!objectives.empty() && !models.empty(), "nothing to run");
        require(std::find(models.begin(), models.end(), Model::SAA) != models.end(),
                "SAA must be among the models: improvements are measured against it");
        require(threads >= 1, "threads must be positive");
    }
};

/// Every field optional; unknown keys are rejected.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    require(j.is_object(), "experiment config must be a JSON object");
    double reward = c.params.reward(), cost = c.params.wait_cost(), mu = c.params.service_rate();
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "R") reward = v.get<double>();
            else if (key == "C") cost = v.get<double>();
            else if (key == "mu") mu = v.get<double>();
            else if (key == "support") {
                const auto s = v.get<std::vector<double>>();
                require(s.size() == 2, "support must be [a, b]");
                c.support = {s[0], s[1]};
            } else if (key == "beta_shape") {
                const auto s = v.get<std::vector<double>>();
                require(s.size() == 2, "beta_shape must be [p, q]");
                c.law.p = s[0];
                c.law.q = s[1];
            } else if (key == "scale") c.law.scale = v.get<double>();
            else if (key == "sample_sizes") c.sample_sizes = v.get<std::vector<std::size_t>>();
            else if (key == "trials") c.trials = v.get<std::size_t>();
            else if (key == "test_size") c.test_size = v.get<std::size_t>();
            else if (key == "cv_constants") c.cv_constants = v.get<std::vector<double>>();
            else if (key == "delta") c.delta = v.get<double>();
            else if (key == "cross_validation") c.cross_validation = v.get<bool>();
            else if (key == "master_seed") c.master_seed = v.get<std::uint64_t>();
            else if (key == "threads") c.threads = v.get<unsigned>();
            else if (key == "record_runtime") c.record_runtime = v.get<bool>();
            else if (key == "objectives") {
                c.objectives.clear();
                for (const auto& s : v.get<std::vector<std::string>>()) c.objectives.push_back(parse_objective(s));
            } else if (key == "models") {
                c.models.clear();
                for (const auto& s : v.get<std::vector<std::string>>()) c.models.push_back(parse_model(s));
            } else {
                fail(ErrorKind::InvalidArgument, "unknown config key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::InvalidArgument, std::string("bad config value: ") + e.what());
    }
    c.params = QueueParams(reward, cost, mu);
    c.validate();
    return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["R"] = c.params.reward();
    j["C"] = c.params.wait_cost();
    j["mu"] = c.params.service_rate();
    j["support"] = {c.support.lo, c.support.hi};
    j["beta_shape"] = {c.law.p, c.law.q};
    j["scale"] = c.law.scale;
    j["sample_sizes"] = c.sample_sizes;
    j["trials"] = c.trials;
    j["test_size"] = c.test_size;
    j["cv_constants"] = c.cv_constants;
    j["delta"] = c.delta;
    j["cross_validation"] = c.cross_validation;
    j["master_seed"] = c.master_seed;
    std::vector<std::string> objs, models;
    for (auto o : c.objectives) objs.push_back(objective_name(o));
    for (auto m : c.models) models.push_back(to_string(m));
    j["objectives"] = objs;
    j["models"] = models;
    j["threads"] = c.threads;
    j["record_runtime"] = c.record_runtime;
    return j;
}

// ---------------------------------------------------------------------------
// Single-model building blocks

/// argmax_n of the sample-average rate.
inline ThresholdSolution saa_threshold(Objective objective, const QueueParams& params,
                                       const std::vector<double>& samples, std::optional<int> max_n = {}) {
    require(!samples.empty(), "SAA needs at least one sample");
    return search_thresholds(
        params,
        [&](Threshold n) {
            WorstCaseResult r;
            for (double x : samples) r.value += rate(objective, params, n, x);
            r.value /= static_cast<double>(samples.size());
            r.extremal = DiscreteDistribution::uniform(samples);
            r.method = Method::Enumeration;
            return r;
        },
        max_n);
}

inline double out_of_sample_eval(Objective objective, const QueueParams& params, Threshold n,
                                 const std::vector<double>& test) {
    require(!test.empty(), "test set is empty");
    double s = 0.0;
    for (double x : test) s += rate(objective, params, n, x);
    return s / static_cast<double>(test.size());
}

/// Threshold chosen by `model` on `train`. `constant` scales the data-driven
/// half-widths (C / sqrt(N) for the mean, 3 C / sqrt(N) for the MAD) or the
/// Wasserstein radius (C / sqrt(N)); it is ignored by SAA and MAD.
inline ThresholdSolution fit_threshold(Model model, Objective objective, const QueueParams& params,
                                       const SampleSet& train, double constant) {
    const double root_n = std::sqrt(static_cast<double>(train.size()));
    switch (model) {
    case Model::SAA: return saa_threshold(objective, params, train.values());
    case Model::MAD: {
        const auto em = empirical_moments(train);
        const double d = std::min(em.mad, max_mad(train.a(), train.b(), em.mean));
        return optimal_threshold(objective, params, MomentSpec::exact(train.a(), train.b(), em.mean, d));
    }
    case Model::DDMAD: {
        const auto ci = intervals_with_half_widths(train, constant / root_n, 3.0 * constant / root_n);
        return dd_threshold(objective, params, ci.spec(train.a(), train.b()));
    }
    case Model::Wasserstein: return wass_threshold(objective, params, WassersteinBall(train, constant / root_n));
    }
    fail(ErrorKind::InvalidArgument, "unknown model");
}

inline std::size_t cv_folds(std::size_t sample_count) { return std::min<std::size_t>(sample_count, 5); }

/// k-fold cross-validation with k = cv_folds(N) over contiguous folds. Returns the
/// constant with the best mean validation rate, preferring the larger constant
/// on ties; with fewer than two samples the median constant is returned.
inline double cross_validate(Objective objective, Model model, const QueueParams& params, const SampleSet& samples,
                             std::vector<double> constants) {
    require(!constants.empty(), "no constants to choose from");
    std::sort(constants.begin(), constants.end());
    const std::size_t n = samples.size();
    if (n < 2) return constants[constants.size() / 2];
    const std::size_t k = cv_folds(n);

    double best_c = constants.back();
    double best_score = 0.0;
    for (auto it = constants.rbegin(); it != constants.rend(); ++it) {
        double score = 0.0;
        for (std::size_t f = 0; f < k; ++f) {
            const std::size_t lo = f * n / k, hi = (f + 1) * n / k;
            std::vector<double> fit, hold;
            for (std::size_t i = 0; i < n; ++i) (i >= lo && i < hi ? hold : fit).push_back(samples.values()[i]);
            const auto sol = fit_threshold(model, objective, params, SampleSet(fit, samples.support()), *it);
            score += out_of_sample_eval(objective, params, Threshold(sol.n_hat), hold);
        }
        score /= static_cast<double>(k);
        if (it == constants.rbegin() || score > best_score + 1e-12 * std::max(1.0, std::abs(best_score))) {
            best_score = score;
            best_c = *it;
        }
    }
    return best_c;
}

// ---------------------------------------------------------------------------
// Full protocol

struct TrialRecord {
    Model model = Model::SAA;
    std::size_t sample_size = 0;
    std::size_t trial = 0;
    std::optional<double> constant;
    int n_hat = 0;  // 0 when the fit failed
    double oos_rate = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> runtime_s;
    std::string error;

    bool ok() const { return n_hat > 0; }
};

struct SummaryRow {
    Model model = Model::SAA;
    std::size_t sample_size = 0;
    std::size_t trials = 0;
    double mean_oos_rate = 0.0;
    double mean_improvement = 0.0;
    double p95_improvement = 0.0;
    double stderr_improvement = 0.0;
};

struct ObjectiveResult {
    Objective objective = Objective::Social;
    std::vector<TrialRecord> records;
    std::vector<SummaryRow> summary;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<ObjectiveResult> objectives;
};

enum class StreamRole : std::uint64_t { Train = 1, Test = 2 };

/// Streams are shared by all models of a trial so that improvements are paired.
inline std::uint64_t trial_seed(std::uint64_t master, std::size_t sample_size, std::size_t trial, StreamRole role) {
    return derive_seed(master, {static_cast<std::uint64_t>(sample_size), static_cast<std::uint64_t>(trial),
                                static_cast<std::uint64_t>(role)});
}

/// Linear interpolation between order statistics (R type 7).
inline double percentile(std::vector<double> v, double q) {
    require(!v.empty(), "percentile of an empty set");
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

namespace detail {

inline std::vector<TrialRecord> run_trial(const ExperimentConfig& cfg, Objective objective, std::size_t size,
                                          std::size_t trial) {
    const SampleSet train(sample_traffic(cfg.law, size, trial_seed(cfg.master_seed, size, trial, StreamRole::Train)),
                          cfg.support);
    const auto test = sample_traffic(cfg.law, cfg.test_size, trial_seed(cfg.master_seed, size, trial, StreamRole::Test));
    const int n_e = individual_threshold(cfg.params).value();
    std::vector<double> test_rate(static_cast<std::size_t>(n_e));
    for (int n = 1; n <= n_e; ++n)
        test_rate[static_cast<std::size_t>(n - 1)] = out_of_sample_eval(objective, cfg.params, Threshold(n), test);

    std::vector<double> sorted = cfg.cv_constants;
    std::sort(sorted.begin(), sorted.end());
    std::vector<TrialRecord> out;
    for (Model model : cfg.models) {
        TrialRecord rec;
        rec.model = model;
        rec.sample_size = size;
        rec.trial = trial;
        const auto start = std::chrono::steady_clock::now();
        try {
            double c = 0.0;
            ThresholdSolution sol;
            if (model == Model::DDMAD && !cfg.cross_validation) {
                const auto ci = confidence_intervals(train, cfg.delta);
                sol = dd_threshold(objective, cfg.params, ci.spec(train.a(), train.b()));
            } else {
                if (model == Model::DDMAD || model == Model::Wasserstein) {
                    c = cfg.cross_validation ? cross_validate(objective, model, cfg.params, train, cfg.cv_constants)
                                             : sorted[sorted.size() / 2];
                    rec.constant = c;
                }
                sol = fit_threshold(model, objective, cfg.params, train, c);
            }
            rec.n_hat = sol.n_hat;
            rec.oos_rate = test_rate[static_cast<std::size_t>(sol.n_hat - 1)];
        } catch (const Error& e) {
            rec.error = e.what();
        }
        if (cfg.record_runtime)
            rec.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out.push_back(std::move(rec));
    }
    return out;
}

inline std::vector<SummaryRow> summarize(const ExperimentConfig& cfg, const std::vector<TrialRecord>& records) {
    std::vector<SummaryRow> rows;
    for (Model model : cfg.models) {
        for (std::size_t size : cfg.sample_sizes) {
            SummaryRow row;
            row.model = model;
            row.sample_size = size;
            std::vector<double> rates, gains;
            for (std::size_t t = 0; t < cfg.trials; ++t) {
                const TrialRecord* mine = nullptr;
                const TrialRecord* saa = nullptr;
                for (const auto& r : records) {
                    if (r.sample_size != size || r.trial != t) continue;
                    if (r.model == model) mine = &r;
                    if (r.model == Model::SAA) saa = &r;
                }
                if (!mine || !mine->ok()) continue;
                rates.push_back(mine->oos_rate);
                if (saa && saa->ok()) gains.push_back(mine->oos_rate - saa->oos_rate);
            }
            row.trials = rates.size();
            if (!rates.empty()) {
                double s = 0.0;
                for (double v : rates) s += v;
                row.mean_oos_rate = s / static_cast<double>(rates.size());
            }
            if (!gains.empty()) {
                double s = 0.0;
                for (double v : gains) s += v;
                const double mean = s / static_cast<double>(gains.size());
                row.mean_improvement = mean;
                row.p95_improvement = percentile(gains, 0.95);
                if (gains.size() > 1) {
                    double ss = 0.0;
                    for (double v : gains) ss += (v - mean) * (v - mean);
                    row.stderr_improvement =
                        std::sqrt(ss / static_cast<double>(gains.size() - 1) / static_cast<double>(gains.size()));
                }
            }
            rows.push_back(row);
        }
    }
    return rows;
}

} // namespace detail

/// Runs every (objective, sample size, trial) job, on `config.threads` workers.
/// Output order and content do not depend on the thread count.
inline ExperimentResult run_section5(const ExperimentConfig& config) {
    config.validate();
    struct Job {
        Objective objective;
        std::size_t size;
        std::size_t trial;
    };
    std::vector<Job> jobs;
    for (auto o : config.objectives)
        for (auto s : config.sample_sizes)
            for (std::size_t t = 0; t < config.trials; ++t) jobs.push_back({o, s, t});

    std::vector<std::vector<TrialRecord>> results(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t j; (j = next.fetch_add(1)) < jobs.size();)
            results[j] = detail::run_trial(config, jobs[j].objective, jobs[j].size, jobs[j].trial);
    };
    const unsigned workers = std::min<unsigned>(config.threads, static_cast<unsigned>(jobs.size()));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    ExperimentResult out;
    out.config = config;
    std::size_t j = 0;
    for (auto o : config.objectives) {
        ObjectiveResult res;
        res.objective = o;
        for (std::size_t k = 0; k < config.sample_sizes.size() * config.trials; ++k, ++j)
            for (auto& r : results[j]) res.records.push_back(std::move(r));
        res.summary = detail::summarize(config, res.records);
        out.objectives.push_back(std::move(res));
    }
    return out;
}

namespace detail {

inline std::string fmt(double v) {
    if (std::isnan(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

} // namespace detail

inline void write_trials_csv(std::ostream& os, const std::vector<TrialRecord>& records) {
    os << "model,N,trial,constant,n_hat,oos_rate,runtime_s\n";
    for (const auto& r : records) {
        os << to_string(r.model) << ',' << r.sample_size << ',' << r.trial << ','
           << (r.constant ? detail::fmt(*r.constant) : "") << ',' << (r.ok() ? std::to_string(r.n_hat) : "") << ','
           << (r.ok() ? detail::fmt(r.oos_rate) : "") << ',' << (r.runtime_s ? detail::fmt(*r.runtime_s) : "")
           << '\n';
    }
}

inline void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
    os << "model,N,trials,mean_oos_rate,mean_improvement,p95_improvement,stderr_improvement\n";
    for (const auto& r : rows) {
        os << to_string(r.model) << ',' << r.sample_size << ',' << r.trials << ',' << detail::fmt(r.mean_oos_rate)
           << ',' << detail::fmt(r.mean_improvement) << ',' << detail::fmt(r.p95_improvement) << ','
           << detail::fmt(r.stderr_improvement) << '\n';
    }
}

} // namespace drq
