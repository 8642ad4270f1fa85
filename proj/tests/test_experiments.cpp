#include "drq/experiments.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace drq;

namespace {

const QueueParams kBase(10.0, 1.0, 1.0);
const Interval kSupport{0.0, 2.0};

ExperimentConfig small_config() {
    ExperimentConfig c;
    c.sample_sizes = {2, 5};
    c.trials = 3;
    c.test_size = 2000;
    c.objectives = {Objective::Social};
    return c;
}

std::string csv_of(const ExperimentResult& r) {
    std::ostringstream os;
    for (const auto& o : r.objectives) {
        write_trials_csv(os, o.records);
        write_summary_csv(os, o.summary);
    }
    return os.str();
}

} // namespace

TEST(SaaThreshold, SingleSampleIsPointwiseArgmax) {
    const auto sol = saa_threshold(Objective::Social, kBase, {0.5});
    int best = 1;
    for (int n = 2; n <= 10; ++n)
        if (social_rate(kBase, Threshold(n), 0.5) > social_rate(kBase, Threshold(best), 0.5)) best = n;
    EXPECT_EQ(sol.n_hat, best);
    EXPECT_EQ(sol.values.size(), 10u);
}

TEST(SaaThreshold, EqualSamplesMatchPointMassMad) {
    for (double m : {0.2, 0.7, 1.4}) {
        for (auto obj : {Objective::Social, Objective::Revenue}) {
            const auto saa = saa_threshold(obj, kBase, std::vector<double>(6, m));
            const auto mad = optimal_threshold(obj, kBase, MomentSpec::exact(0.0, 2.0, m, 0.0));
            EXPECT_EQ(saa.n_hat, mad.n_hat) << m;
            for (std::size_t k = 0; k < saa.values.size(); ++k) EXPECT_NEAR(saa.values[k], mad.values[k], 1e-9);
        }
    }
}

TEST(SaaThreshold, BoundedByIndividualThreshold) {
    const auto xs = sample_traffic(BetaLaw{}, 200, 4);
    for (auto obj : {Objective::Social, Objective::Revenue}) {
        const auto sol = saa_threshold(obj, kBase, xs);
        EXPECT_GE(sol.n_hat, 1);
        EXPECT_LE(sol.n_hat, individual_threshold(kBase).value());
    }
}

TEST(CrossValidate, FoldCount) {
    EXPECT_EQ(cv_folds(2), 2u);
    EXPECT_EQ(cv_folds(3), 3u);
    EXPECT_EQ(cv_folds(5), 5u);
    EXPECT_EQ(cv_folds(100), 5u);
}

TEST(CrossValidate, TiesGoToLargestConstant) {
    const SampleSet s(sample_traffic(BetaLaw{}, 12, 5), kSupport);
    const std::vector<double> cs{0.01, 1, 5, 0.1};
    // SAA and MAD ignore the constant, so every candidate scores the same.
    EXPECT_DOUBLE_EQ(cross_validate(Objective::Social, Model::SAA, kBase, s, cs), 5.0);
    EXPECT_DOUBLE_EQ(cross_validate(Objective::Revenue, Model::MAD, kBase, s, cs), 5.0);
}

TEST(CrossValidate, SingleSampleReturnsMedianConstant) {
    const SampleSet s({0.4}, kSupport);
    EXPECT_DOUBLE_EQ(cross_validate(Objective::Social, Model::DDMAD, kBase, s, {5, 1, 0.5, 0.1, 0.05, 0.01}), 0.5);
    EXPECT_DOUBLE_EQ(cross_validate(Objective::Social, Model::Wasserstein, kBase, s, {3, 1, 2}), 2.0);
}

TEST(CrossValidate, DeterministicAndFromTheCandidateSet) {
    const std::vector<double> cs{5, 1, 0.5, 0.1, 0.05, 0.01};
    for (std::uint64_t seed : {21u, 22u}) {
        const SampleSet s(sample_traffic(BetaLaw{}, 10, seed), kSupport);
        for (auto model : {Model::DDMAD, Model::Wasserstein}) {
            const double c1 = cross_validate(Objective::Social, model, kBase, s, cs);
            const double c2 = cross_validate(Objective::Social, model, kBase, s, cs);
            EXPECT_EQ(c1, c2);
            EXPECT_NE(std::find(cs.begin(), cs.end(), c1), cs.end());
        }
    }
}

TEST(CrossValidate, PicksBestAverageValidationRate) {
    // Recompute every constant's fold score independently and compare.
    const std::vector<double> cs{5, 1, 0.5, 0.1, 0.05, 0.01};
    const SampleSet s(sample_traffic(BetaLaw{}, 7, 31), kSupport);
    const auto& v = s.values();
    double best = -1.0, best_c = 0.0;
    for (double c : cs) {
        double score = 0.0;
        for (std::size_t f = 0; f < 5; ++f) {
            std::vector<double> fit, hold;
            for (std::size_t i = 0; i < v.size(); ++i) (i * 5 / v.size() == f ? hold : fit).push_back(v[i]);
            const auto sol = fit_threshold(Model::Wasserstein, Objective::Social, kBase, SampleSet(fit, kSupport), c);
            score += out_of_sample_eval(Objective::Social, kBase, Threshold(sol.n_hat), hold) / 5.0;
        }
        if (score > best + 1e-12 || (std::abs(score - best) <= 1e-12 && c > best_c)) {
            best = score;
            best_c = c;
        }
    }
    EXPECT_DOUBLE_EQ(cross_validate(Objective::Social, Model::Wasserstein, kBase, s, cs), best_c);
}

TEST(OutOfSample, Examples) {
    EXPECT_DOUBLE_EQ(out_of_sample_eval(Objective::Revenue, kBase, Threshold(4), std::vector<double>(50, 0.0)), 0.0);
    const std::vector<double> test{0.2, 0.9, 1.3};
    const double expect =
        (social_rate(kBase, Threshold(3), 0.2) + social_rate(kBase, Threshold(3), 0.9) + social_rate(kBase, Threshold(3), 1.3)) /
        3.0;
    EXPECT_NEAR(out_of_sample_eval(Objective::Social, kBase, Threshold(3), test), expect, 1e-14);
    EXPECT_THROW(out_of_sample_eval(Objective::Social, kBase, Threshold(3), {}), Error);
}

TEST(Percentile, TypeSevenInterpolation) {
    EXPECT_DOUBLE_EQ(percentile({5.0}, 0.95), 5.0);
    EXPECT_NEAR(percentile({4, 1, 3, 2}, 0.95), 3.85, 1e-12);
    EXPECT_DOUBLE_EQ(percentile({4, 1, 3, 2}, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(percentile({4, 1, 3, 2}, 1.0), 4.0);
    EXPECT_DOUBLE_EQ(percentile({0, 10}, 0.5), 5.0);
}

TEST(TrialSeed, StreamsAreDistinct) {
    EXPECT_NE(trial_seed(1, 10, 0, StreamRole::Train), trial_seed(1, 10, 0, StreamRole::Test));
    EXPECT_NE(trial_seed(1, 10, 0, StreamRole::Train), trial_seed(1, 10, 1, StreamRole::Train));
    EXPECT_NE(trial_seed(1, 10, 0, StreamRole::Train), trial_seed(1, 20, 0, StreamRole::Train));
    const auto train = sample_traffic(BetaLaw{}, 100, trial_seed(1, 10, 0, StreamRole::Train));
    const auto test = sample_traffic(BetaLaw{}, 100, trial_seed(1, 10, 0, StreamRole::Test));
    for (double x : train) EXPECT_EQ(std::count(test.begin(), test.end(), x), 0);
}

TEST(ExperimentConfig, JsonRoundTrip) {
    const auto j = nlohmann::json::parse(R"({"R": 12, "C": 2, "sample_sizes": [3, 7], "trials": 4,
        "models": ["SAA", "DD-MAD"], "objectives": ["revenue"], "master_seed": 9, "cross_validation": false})");
    const auto c = config_from_json(j);
    EXPECT_DOUBLE_EQ(c.params.reward(), 12.0);
    EXPECT_EQ(c.sample_sizes, (std::vector<std::size_t>{3, 7}));
    EXPECT_EQ(c.models, (std::vector<Model>{Model::SAA, Model::DDMAD}));
    EXPECT_EQ(c.objectives, (std::vector<Objective>{Objective::Revenue}));
    EXPECT_FALSE(c.cross_validation);
    EXPECT_EQ(config_to_json(config_from_json(config_to_json(c))), config_to_json(c));
    const auto d = config_from_json(nlohmann::json::object());
    EXPECT_EQ(d.trials, 20u);
    EXPECT_EQ(d.test_size, 10000u);
    EXPECT_EQ(d.cv_constants, (std::vector<double>{5, 1, 0.5, 0.1, 0.05, 0.01}));
}

TEST(ExperimentConfig, RejectsBadInput) {
    auto bad = [](const char* text) {
        try {
            config_from_json(nlohmann::json::parse(text));
        } catch (const Error& e) {
            return e.kind() == ErrorKind::InvalidArgument;
        }
        return false;
    };
    EXPECT_TRUE(bad(R"({"trails": 3})"));
    EXPECT_TRUE(bad(R"({"models": ["MAD"]})"));
    EXPECT_TRUE(bad(R"({"models": ["SAA", "ridge"]})"));
    EXPECT_TRUE(bad(R"({"cv_constants": [1, -1]})"));
    EXPECT_TRUE(bad(R"({"sample_sizes": [0]})"));
    EXPECT_TRUE(bad(R"({"trials": "many"})"));
    EXPECT_TRUE(bad(R"({"delta": 1.5})"));
    EXPECT_TRUE(bad(R"([1, 2])"));
}

TEST(RunExperiment, ShapeAndSelfComparison) {
    const auto cfg = small_config();
    const auto res = run_section5(cfg);
    ASSERT_EQ(res.objectives.size(), 1u);
    const auto& o = res.objectives[0];
    EXPECT_EQ(o.records.size(), cfg.models.size() * cfg.sample_sizes.size() * cfg.trials);
    EXPECT_EQ(o.summary.size(), cfg.models.size() * cfg.sample_sizes.size());
    for (const auto& r : o.records) {
        EXPECT_TRUE(r.ok()) << r.error;
        EXPECT_GE(r.n_hat, 1);
        EXPECT_LE(r.n_hat, 10);
        EXPECT_FALSE(r.runtime_s.has_value());
        const bool tuned = r.model == Model::DDMAD || r.model == Model::Wasserstein;
        EXPECT_EQ(r.constant.has_value(), tuned);
    }
    for (const auto& row : o.summary) {
        EXPECT_EQ(row.trials, cfg.trials);
        if (row.model == Model::SAA) {
            EXPECT_EQ(row.mean_improvement, 0.0);
            EXPECT_EQ(row.p95_improvement, 0.0);
            EXPECT_EQ(row.stderr_improvement, 0.0);
        }
    }
}

TEST(RunExperiment, IdenticalThresholdsGiveIdenticalRates) {
    const auto res = run_section5(small_config());
    const auto& recs = res.objectives[0].records;
    for (const auto& a : recs)
        for (const auto& b : recs)
            if (a.sample_size == b.sample_size && a.trial == b.trial && a.n_hat == b.n_hat) {
                EXPECT_EQ(a.oos_rate, b.oos_rate);
            }
}

TEST(RunExperiment, OutputIsReproducibleAcrossThreadCounts) {
    auto cfg = small_config();
    const std::string once = csv_of(run_section5(cfg));
    EXPECT_EQ(once, csv_of(run_section5(cfg)));
    cfg.threads = 3;
    EXPECT_EQ(once, csv_of(run_section5(cfg)));
    cfg.master_seed += 1;
    EXPECT_NE(once, csv_of(run_section5(cfg)));
}

TEST(RunExperiment, RuntimeColumnWhenRequested) {
    auto cfg = small_config();
    cfg.sample_sizes = {3};
    cfg.trials = 1;
    cfg.cross_validation = false;
    cfg.record_runtime = true;
    const auto res = run_section5(cfg);
    for (const auto& r : res.objectives[0].records) {
        ASSERT_TRUE(r.runtime_s.has_value());
        EXPECT_GE(*r.runtime_s, 0.0);
        if (r.model == Model::Wasserstein) {
            EXPECT_DOUBLE_EQ(*r.constant, 0.5);  // upper median of the sorted candidates
        }
        if (r.model == Model::DDMAD) {
            EXPECT_FALSE(r.constant.has_value());
        }
    }
    std::ostringstream os;
    write_trials_csv(os, res.objectives[0].records);
    std::istringstream in(os.str());
    std::string header, line;
    std::getline(in, header);
    EXPECT_EQ(header, "model,N,trial,constant,n_hat,oos_rate,runtime_s");
    while (std::getline(in, line)) EXPECT_NE(line.back(), ',');
}

TEST(Summary, FailedTrialsAreSkipped) {
    ExperimentConfig cfg;
    cfg.sample_sizes = {4};
    cfg.trials = 3;
    cfg.models = {Model::SAA, Model::DDMAD};
    std::vector<TrialRecord> recs;
    for (std::size_t t = 0; t < 3; ++t) {
        TrialRecord saa;
        saa.model = Model::SAA;
        saa.sample_size = 4;
        saa.trial = t;
        saa.n_hat = 2;
        saa.oos_rate = 1.0;
        recs.push_back(saa);
        TrialRecord dd = saa;
        dd.model = Model::DDMAD;
        dd.oos_rate = 1.0 + 0.1 * static_cast<double>(t);
        if (t == 1) {
            dd.n_hat = 0;
            dd.error = "boom";
        }
        recs.push_back(dd);
    }
    const auto rows = detail::summarize(cfg, recs);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1].trials, 2u);
    EXPECT_NEAR(rows[1].mean_improvement, 0.1, 1e-12);
    EXPECT_NEAR(rows[1].p95_improvement, 0.19, 1e-12);
    EXPECT_NEAR(rows[1].stderr_improvement, std::sqrt(0.02) / std::sqrt(2.0), 1e-12);
}
