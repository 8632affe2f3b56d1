#pragma once

// Successive-decoding layer rates, the average rate weighted by the
// decodability law, and its Monte Carlo counterpart.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "bia/alignment.hpp"
#include "bia/coherence.hpp"
#include "bia/error.hpp"
#include "bia/powalloc.hpp"
#include "bia/random.hpp"

namespace bia {

struct ExperimentConfig {
  std::size_t n = 20;
  std::size_t users = 3;
  double p_direct = 0.9;
  /// Cross links stay constant over the block by default.
  double p_cross = 1.0;
  double total_power = 100.0;
  double noise = 1.0;
  std::size_t trials = 100000;
  std::uint64_t base_seed = 1;
  MagnitudeBounds bounds{};

  void validate() const {
    if (n < 2 || n % 2 != 0) throw ParameterError("n must be even and >= 2");
    if (users < 1) throw ParameterError("at least one user is required");
    detail::check_probability(p_direct, "p_direct");
    detail::check_probability(p_cross, "p_cross");
    detail::check_power_args(noise, total_power);
    if (trials < 1) throw ParameterError("trials must be >= 1");
    detail::check_bounds(bounds);
  }
};

/// Aggregate checks from full-pipeline realizations.
struct PipelineStats {
  std::size_t realizations = 0;
  /// rank(D H11 V) == l_s
  std::size_t rank_matches = 0;
  /// Largest max|D H V x| / max|H V x| over all interferers; only collected
  /// when the cross links are constant.
  double max_relative_interference = 0.0;
};

struct RateReport {
  double analytic_avg_rate = 0.0;
  double empirical_avg_rate = 0.0;
  /// Sample standard deviation of the realized rate over sqrt(trials).
  double empirical_stderr = 0.0;
  /// Exact standard error of the Monte Carlo mean under the decodability law.
  double model_stderr = 0.0;
  std::vector<double> per_layer_rates;
  /// histogram[l] counts realizations with l decodable layers, l = 0..n/2.
  std::vector<std::size_t> decodable_layer_histogram;
  double baseline_perfect_csi = 0.0;
  std::size_t trials = 0;
  std::optional<PipelineStats> pipeline;
};

/// R_i = (i / (2n)) log2(1 + P_i / (N + sum_{j>i} P_j)), bits per channel use.
/// The factor i is the number of interference-free dimensions layer i sees.
inline double layer_rate(std::size_t i, const PowerProfile& profile, std::size_t n) {
  const std::size_t m = profile.layer_powers.size();
  if (i < 1 || i > m) throw ParameterError("layer index out of range");
  if (n != profile.n) throw ParameterError("block length does not match the power profile");
  double residual = profile.noise;
  for (std::size_t j = i; j < m; ++j) residual += profile.layer_powers[j];
  const double sinr = profile.layer_powers[i - 1] / residual;
  return static_cast<double>(i) / (2.0 * static_cast<double>(n)) * std::log2(1.0 + sinr);
}

inline std::vector<double> layer_rates(const PowerProfile& profile) {
  std::vector<double> rates(profile.layer_powers.size());
  for (std::size_t i = 1; i <= rates.size(); ++i) rates[i - 1] = layer_rate(i, profile, profile.n);
  return rates;
}

/// sum_i R_i G(i).
inline double avg_rate_analytic(const PowerProfile& profile, const WeightFunction& wf,
                                std::size_t n, double noise) {
  if (n != profile.n || n != wf.n()) throw ParameterError("dimension mismatch");
  if (noise != profile.noise) throw ParameterError("noise does not match the power profile");
  double total = 0.0;
  for (std::size_t i = 1; i <= wf.layers(); ++i) total += layer_rate(i, profile, n) * wf.at(i);
  return total;
}

/// (1/2) log2(1 + P_t/N): half the degrees of freedom at matched SNR with
/// unit channel gains.
inline double perfect_csi_baseline(double total_power, double noise) {
  if (!(noise > 0.0)) throw ParameterError("noise power must be positive");
  if (!(total_power >= 0.0)) throw ParameterError("total power must be non-negative");
  return 0.5 * std::log2(1.0 + total_power / noise);
}

/// Continuous approximation of the average rate,
///   (1/(2 ln 2)) int_0^{1/2} z (-dP_Z(z)) F_Z(1/2 - z) / (N + P_Z(z)),
/// evaluated as a Stieltjes sum on `points` cells. The cap jump at z = 0 has
/// zero weight. Approaches the discrete average rate as n grows.
inline double avg_rate_continuous(const WeightFunction& wf, double noise, double total_power,
                                  std::size_t points) {
  if (points < 1) throw ParameterError("points must be positive");
  const double dz = 0.5 / static_cast<double>(points);
  double total = 0.0;
  double prev = cumulative_power(dz * 1e-6, wf, noise, total_power);
  for (std::size_t k = 0; k < points; ++k) {
    const double hi = std::min(0.5, dz * static_cast<double>(k + 1));
    const double next = cumulative_power(hi, wf, noise, total_power);
    const double drop = prev - next;
    if (drop > 0.0) {
      const double mid = dz * (static_cast<double>(k) + 0.5);
      const double p_mid = cumulative_power(mid, wf, noise, total_power);
      total += mid * drop * wf.reflected(mid) / (noise + p_mid);
    }
    prev = next;
  }
  return total / (2.0 * std::numbers::ln2);
}

struct Realization {
  std::size_t decodable_layers = 0;
  double rate = 0.0;
  std::size_t longest_run = 0;
  // Full-pipeline diagnostics.
  std::optional<std::size_t> zero_forced_rank;
  std::optional<double> relative_interference;
};

namespace detail {

inline std::vector<double> cumulative_rates(const PowerProfile& profile) {
  const auto rates = layer_rates(profile);
  std::vector<double> cum(rates.size() + 1, 0.0);
  for (std::size_t i = 0; i < rates.size(); ++i) cum[i + 1] = cum[i] + rates[i];
  return cum;
}

inline Realization realize(const ExperimentConfig& cfg, const std::vector<double>& cum_rates,
                           std::size_t trial) {
  const auto trace = gen_trace(cfg.n, cfg.p_direct, cfg.bounds, cfg.base_seed + trial);
  Realization r;
  r.longest_run = longest_constant_run(trace);
  r.decodable_layers = free_interference_dims(cfg.n, r.longest_run);
  r.rate = cum_rates[r.decodable_layers];
  return r;
}

enum SeedStream : std::uint64_t { kPrecoderStream = 1, kCrossStream = 2, kSymbolStream = 3 };

}  // namespace detail

/// One channel realization for receiver 1: the direct-link trace uses seed
/// base_seed + trial, and layers 1..l_s are decoded.
inline Realization simulate_realization(const ExperimentConfig& cfg, const PowerProfile& profile,
                                        std::size_t trial) {
  cfg.validate();
  if (profile.n != cfg.n) throw ParameterError("block length does not match the power profile");
  return detail::realize(cfg, detail::cumulative_rates(profile), trial);
}

/// The shared precoder of an experiment, derived from its base seed.
inline Precoder experiment_precoder(const ExperimentConfig& cfg) {
  return gen_precoder(cfg.n, cfg.total_power, derive_seed(cfg.base_seed, detail::kPrecoderStream));
}

/// simulate_realization plus the signal-space checks: builds D from the
/// shared precoder, draws K-1 cross links and checks that zero-forcing
/// removes them, and measures rank(D H11 V).
inline Realization simulate_realization_full(const ExperimentConfig& cfg,
                                             const PowerProfile& profile, const Precoder& prec,
                                             const ZeroForcer& zf, std::size_t trial) {
  auto r = simulate_realization(cfg, profile, trial);
  const auto direct = DiagonalChannel::from_trace(
      gen_trace(cfg.n, cfg.p_direct, cfg.bounds, cfg.base_seed + trial));
  r.zero_forced_rank = numerical_rank(zf.D * direct.apply(prec.V));

  const std::uint64_t trial_seed = cfg.base_seed + trial;
  Rng symbols(derive_seed(trial_seed, detail::kSymbolStream));
  CVector x(static_cast<Eigen::Index>(prec.layers()));
  double worst = 0.0;
  for (std::size_t j = 1; j < cfg.users; ++j) {
    const auto cross = DiagonalChannel::from_trace(gen_trace(
        cfg.n, cfg.p_cross, cfg.bounds, derive_seed(trial_seed, detail::kCrossStream + 16 * j)));
    for (auto& s : x) s = symbols.complex_normal();
    const double scale = (cross.diag.asDiagonal() * (prec.V * x)).cwiseAbs().maxCoeff();
    worst = std::max(worst, check_interference_nulled(zf, cross, prec, x) / scale);
  }
  r.relative_interference = worst;
  return r;
}

struct MonteCarloOptions {
  std::size_t threads = 1;
  bool full_pipeline = false;
};

/// Averages simulate_realization over cfg.trials trials. Per-trial results
/// are stored by index and reduced in order, so the report does not depend
/// on the thread count.
inline RateReport monte_carlo_avg_rate(const ExperimentConfig& cfg, const PowerProfile& profile,
                                       const MonteCarloOptions& opts = {}) {
  cfg.validate();
  if (profile.n != cfg.n) throw ParameterError("block length does not match the power profile");
  const std::size_t m = cfg.n / 2;
  const auto cum = detail::cumulative_rates(profile);

  std::optional<Precoder> prec;
  std::optional<ZeroForcer> zf;
  if (opts.full_pipeline) {
    prec = experiment_precoder(cfg);
    zf = zero_forcing_matrix(*prec);
  }

  std::vector<Realization> results(cfg.trials);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      results[t] = opts.full_pipeline ? simulate_realization_full(cfg, profile, *prec, *zf, t)
                                      : detail::realize(cfg, cum, t);
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(opts.threads, 1, cfg.trials);
  if (threads == 1) {
    work(0, cfg.trials);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (cfg.trials + threads - 1) / threads;
    for (std::size_t b = 0; b < cfg.trials; b += chunk) {
      pool.emplace_back(work, b, std::min(cfg.trials, b + chunk));
    }
  }

  RateReport report;
  report.trials = cfg.trials;
  report.per_layer_rates = layer_rates(profile);
  report.decodable_layer_histogram.assign(m + 1, 0);
  report.baseline_perfect_csi = perfect_csi_baseline(cfg.total_power, cfg.noise);
  const auto wf = WeightFunction::for_channel(cfg.n, cfg.p_direct);
  report.analytic_avg_rate = avg_rate_analytic(profile, wf, cfg.n, cfg.noise);

  double sum = 0.0;
  for (const auto& r : results) {
    ++report.decodable_layer_histogram[r.decodable_layers];
    sum += r.rate;
  }
  const double count = static_cast<double>(cfg.trials);
  report.empirical_avg_rate = sum / count;
  if (cfg.trials > 1) {
    double ss = 0.0;
    for (const auto& r : results) {
      const double d = r.rate - report.empirical_avg_rate;
      ss += d * d;
    }
    report.empirical_stderr = std::sqrt(ss / (count - 1.0) / count);
  }

  // P(l_s = l) = G(l) - G(l+1).
  double second = 0.0;
  for (std::size_t l = 0; l <= m; ++l) {
    const double prob = wf.at(l) - (l < m ? wf.at(l + 1) : 0.0);
    second += prob * cum[l] * cum[l];
  }
  const double var =
      std::max(0.0, second - report.analytic_avg_rate * report.analytic_avg_rate);
  report.model_stderr = std::sqrt(var / count);

  if (opts.full_pipeline) {
    PipelineStats stats;
    stats.realizations = cfg.trials;
    for (const auto& r : results) {
      if (r.zero_forced_rank == r.decodable_layers) ++stats.rank_matches;
      if (cfg.p_cross == 1.0) {
        stats.max_relative_interference =
            std::max(stats.max_relative_interference, r.relative_interference.value_or(0.0));
      }
    }
    report.pipeline = stats;
  }
  return report;
}

inline nlohmann::json to_json(const RateReport& report) {
  nlohmann::json j = {{"analytic_avg_rate", report.analytic_avg_rate},
                      {"empirical_avg_rate", report.empirical_avg_rate},
                      {"empirical_stderr", report.empirical_stderr},
                      {"model_stderr", report.model_stderr},
                      {"per_layer_rates", report.per_layer_rates},
                      {"decodable_layer_histogram", report.decodable_layer_histogram},
                      {"baseline_perfect_csi", report.baseline_perfect_csi},
                      {"trials", report.trials}};
  if (report.pipeline) {
    j["pipeline"] = {{"realizations", report.pipeline->realizations},
                     {"rank_matches", report.pipeline->rank_matches},
                     {"max_relative_interference", report.pipeline->max_relative_interference}};
  }
  return j;
}

/// Fixed 12-significant-digit rendering used for every CSV cell.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline constexpr const char* kRateCsvHeader = "p,P_t,analytic,empirical,stderr,baseline";

inline std::string rate_csv_row(double p, double total_power, const RateReport& report) {
  return format_number(p) + ',' + format_number(total_power) + ',' +
         format_number(report.analytic_avg_rate) + ',' + format_number(report.empirical_avg_rate) +
         ',' + format_number(report.empirical_stderr) + ',' +
         format_number(report.baseline_perfect_csi);
}

}  // namespace bia
