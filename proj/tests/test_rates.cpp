#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "bia/rates.hpp"

namespace bia {
namespace {

PowerProfile make_profile(std::vector<double> powers, double noise, std::size_t n) {
  PowerProfile p;
  p.layer_powers = std::move(powers);
  p.noise = noise;
  p.n = n;
  p.total_power = std::accumulate(p.layer_powers.begin(), p.layer_powers.end(), 0.0);
  return p;
}

TEST(LayerRate, HandComputedValues) {
  const auto profile = make_profile({3.0, 2.0, 1.0}, 1.0, 6);
  // Layer 1: (1/12) log2(1 + 3/4); layer 2: (2/12) log2(1 + 2/2); layer 3: (3/12) log2(2).
  EXPECT_NEAR(layer_rate(1, profile, 6), std::log2(1.75) / 12.0, 1e-15);
  EXPECT_NEAR(layer_rate(2, profile, 6), 2.0 / 12.0, 1e-15);
  EXPECT_NEAR(layer_rate(3, profile, 6), 3.0 / 12.0, 1e-15);
}

TEST(LayerRate, SingleLayerIsHalfTheLog) {
  const auto profile = make_profile({7.0}, 1.0, 2);
  EXPECT_NEAR(layer_rate(1, profile, 2), 0.25 * 3.0, 1e-15);
}

TEST(LayerRate, RejectsBadIndex) {
  const auto profile = make_profile({1.0, 1.0}, 1.0, 4);
  EXPECT_THROW(layer_rate(0, profile, 4), ParameterError);
  EXPECT_THROW(layer_rate(3, profile, 4), ParameterError);
  EXPECT_THROW(layer_rate(1, profile, 6), ParameterError);
}

// Reference values from an independent script (exhaustive enumeration of
// boundary patterns, then the closed form and the rate sum).
TEST(AvgRate, OperatingPointGolden) {
  const auto wf = WeightFunction::for_channel(20, 0.9);
  const auto profile = layer_powers(wf, 1.0, 100.0, 20);
  const std::vector<double> expected = {0.11734767728853826, 0.04745191275545072,
                                        0.039235395474312325, 0.03395690357545019,
                                        0.019069811752823008, 0, 0, 0, 0, 0};
  const auto rates = layer_rates(profile);
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(rates[i], expected[i], 1e-12) << i;
  EXPECT_NEAR(avg_rate_analytic(profile, wf, 20, 1.0), 0.21184643977109496, 1e-12);
}

TEST(AvgRate, NeverDecodableGivesZero) {
  const auto wf = WeightFunction::for_channel(20, 1.0);
  const auto profile = layer_powers(wf, 1.0, 100.0, 20);
  EXPECT_EQ(avg_rate_analytic(profile, wf, 20, 1.0), 0.0);
}

TEST(AvgRate, AlwaysDecodableSumsLayerRates) {
  const auto wf = WeightFunction::for_channel(20, 0.0);
  const auto profile = layer_powers(wf, 1.0, 100.0, 20);
  const auto rates = layer_rates(profile);
  const double sum = std::accumulate(rates.begin(), rates.end(), 0.0);
  EXPECT_NEAR(avg_rate_analytic(profile, wf, 20, 1.0), sum, 1e-14);
  EXPECT_NEAR(sum, 0.45216, 1e-5);
}

TEST(AvgRate, MismatchRejected) {
  const auto wf = WeightFunction::for_channel(20, 0.5);
  const auto profile = layer_powers(wf, 1.0, 100.0, 20);
  EXPECT_THROW(avg_rate_analytic(profile, wf, 20, 2.0), ParameterError);
  EXPECT_THROW(avg_rate_analytic(profile, WeightFunction::for_channel(8, 0.5), 8, 1.0),
               ParameterError);
}

TEST(Baseline, Value) {
  EXPECT_NEAR(perfect_csi_baseline(100.0, 1.0), 3.3291057413758973, 1e-14);
  EXPECT_EQ(perfect_csi_baseline(0.0, 1.0), 0.0);
  EXPECT_THROW(perfect_csi_baseline(1.0, 0.0), ParameterError);
}

TEST(AvgRate, BelowBaselineAndMonotone) {
  for (std::size_t n : {8u, 20u}) {
    for (double pt : {1.0, 10.0, 100.0, 1e3, 1e4}) {
      double prev = 1e300;
      for (int k = 0; k <= 10; ++k) {
        const auto wf = WeightFunction::for_channel(n, k / 10.0);
        const double r = avg_rate_analytic(layer_powers(wf, 1.0, pt, n), wf, n, 1.0);
        EXPECT_LT(r, perfect_csi_baseline(pt, 1.0));
        EXPECT_LE(r, prev + 1e-15) << n << ' ' << pt << ' ' << k;
        prev = r;
      }
    }
  }
}

TEST(AvgRate, IncreasesWithPower) {
  const auto wf = WeightFunction::for_channel(20, 0.6);
  double prev = 0.0;
  for (double pt = 1.0; pt <= 1e4; pt *= 3.0) {
    const double r = avg_rate_analytic(layer_powers(wf, 1.0, pt, 20), wf, 20, 1.0);
    EXPECT_GT(r, prev) << pt;
    prev = r;
  }
}

TEST(AvgRate, ContinuousApproximationTightensWithBlockLength) {
  double prev_gap = 1e300;
  for (std::size_t n : {20u, 80u, 320u}) {
    const auto wf = WeightFunction::for_channel(n, 0.9);
    const double discrete = avg_rate_analytic(layer_powers(wf, 1.0, 100.0, n), wf, n, 1.0);
    const double continuous = avg_rate_continuous(wf, 1.0, 100.0, 20000);
    const double gap = std::abs(discrete - continuous);
    EXPECT_LT(gap, prev_gap) << n;
    prev_gap = gap;
  }
}

TEST(Realization, EndpointsOfLongestRun) {
  ExperimentConfig cfg;
  cfg.trials = 1;
  const auto wf = WeightFunction::for_channel(20, 0.0);
  const auto profile = layer_powers(wf, 1.0, 100.0, 20);
  const auto rates = layer_rates(profile);

  cfg.p_direct = 1.0;  // one run of length n: nothing decodable
  auto r = simulate_realization(cfg, profile, 0);
  EXPECT_EQ(r.longest_run, 20u);
  EXPECT_EQ(r.decodable_layers, 0u);
  EXPECT_EQ(r.rate, 0.0);

  cfg.p_direct = 0.0;  // every symbol changes: all n/2 layers decodable
  r = simulate_realization(cfg, profile, 0);
  EXPECT_EQ(r.longest_run, 1u);
  EXPECT_EQ(r.decodable_layers, 10u);
  EXPECT_NEAR(r.rate, std::accumulate(rates.begin(), rates.end(), 0.0), 1e-15);
}

TEST(MonteCarlo, HistogramMatchesDecodabilityLaw) {
  ExperimentConfig cfg;
  cfg.p_direct = 0.7;
  cfg.trials = 100000;
  const auto wf = WeightFunction::for_channel(20, 0.7);
  const auto report = monte_carlo_avg_rate(cfg, layer_powers(wf, 1.0, 100.0, 20));
  const double count = static_cast<double>(cfg.trials);
  for (std::size_t l = 0; l <= 10; ++l) {
    const double prob = wf.at(l) - (l < 10 ? wf.at(l + 1) : 0.0);
    const double sigma = std::sqrt(prob * (1.0 - prob) / count);
    EXPECT_NEAR(report.decodable_layer_histogram[l] / count, prob, 5.0 * sigma + 1e-12) << l;
  }
}

TEST(MonteCarlo, AgreesWithAnalytic) {
  ExperimentConfig cfg;
  cfg.trials = 100000;
  const auto wf = WeightFunction::for_channel(20, 0.9);
  const auto report = monte_carlo_avg_rate(cfg, layer_powers(wf, 1.0, 100.0, 20));
  EXPECT_GT(report.model_stderr, 0.0);
  EXPECT_LE(std::abs(report.empirical_avg_rate - report.analytic_avg_rate),
            3.0 * report.model_stderr);
  EXPECT_NEAR(report.empirical_stderr, report.model_stderr, 0.05 * report.model_stderr);
}

TEST(MonteCarlo, SingleTrialDeterministic) {
  ExperimentConfig cfg;
  cfg.trials = 1;
  cfg.base_seed = 77;
  const auto profile = layer_powers(WeightFunction::for_channel(20, 0.9), 1.0, 100.0, 20);
  const auto a = monte_carlo_avg_rate(cfg, profile);
  const auto b = monte_carlo_avg_rate(cfg, profile);
  EXPECT_EQ(a.empirical_avg_rate, b.empirical_avg_rate);
  EXPECT_EQ(a.empirical_avg_rate, simulate_realization(cfg, profile, 0).rate);
  EXPECT_EQ(a.empirical_stderr, 0.0);
}

TEST(MonteCarlo, ThreadCountDoesNotChangeResult) {
  ExperimentConfig cfg;
  cfg.trials = 5003;
  cfg.p_direct = 0.5;
  const auto profile = layer_powers(WeightFunction::for_channel(20, 0.5), 1.0, 100.0, 20);
  const auto one = to_json(monte_carlo_avg_rate(cfg, profile, {1, false})).dump();
  const auto four = to_json(monte_carlo_avg_rate(cfg, profile, {4, false})).dump();
  const auto seven = to_json(monte_carlo_avg_rate(cfg, profile, {7, false})).dump();
  EXPECT_EQ(one, four);
  EXPECT_EQ(one, seven);
}

TEST(MonteCarlo, FullPipelineRankAndNulling) {
  ExperimentConfig cfg;
  cfg.trials = 2000;
  cfg.p_direct = 0.6;
  const auto profile = layer_powers(WeightFunction::for_channel(20, 0.6), 1.0, 100.0, 20);
  const auto report = monte_carlo_avg_rate(cfg, profile, {1, true});
  ASSERT_TRUE(report.pipeline.has_value());
  EXPECT_GE(static_cast<double>(report.pipeline->rank_matches),
            0.999 * static_cast<double>(cfg.trials));
  EXPECT_LE(report.pipeline->max_relative_interference, 1e-8);
  const auto fast = monte_carlo_avg_rate(cfg, profile, {1, false});
  EXPECT_EQ(report.empirical_avg_rate, fast.empirical_avg_rate);
}

TEST(MonteCarlo, InvalidConfigRejected) {
  ExperimentConfig cfg;
  cfg.trials = 0;
  const auto profile = layer_powers(WeightFunction::for_channel(20, 0.9), 1.0, 100.0, 20);
  EXPECT_THROW(monte_carlo_avg_rate(cfg, profile), ParameterError);
  cfg.trials = 10;
  cfg.n = 8;
  EXPECT_THROW(monte_carlo_avg_rate(cfg, profile), ParameterError);
}

TEST(RateCsv, RowFormat) {
  RateReport r;
  r.analytic_avg_rate = 0.25;
  r.empirical_avg_rate = 1.0 / 3.0;
  r.empirical_stderr = 0.0;
  r.baseline_perfect_csi = 3.3291057413758973;
  EXPECT_EQ(rate_csv_row(0.2, 100.0, r), "0.2,100,0.25,0.333333333333,0,3.32910574138");
}

}  // namespace
}  // namespace bia
