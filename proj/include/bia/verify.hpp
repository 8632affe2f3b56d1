#pragma once

// Self-check suites shared by the `verify` subcommand and the acceptance
// tests. Each suite returns a pass flag plus machine-readable details.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "bia/alignment.hpp"
#include "bia/coherence.hpp"
#include "bia/error.hpp"
#include "bia/powalloc.hpp"

namespace bia {

struct SuiteResult {
  std::string name;
  bool passed = false;
  nlohmann::json details;
};

struct VerifyOptions {
  std::size_t lemma_trials = 1000;
  std::size_t nulling_instances = 1000;
  std::uint64_t seed = 1;
  double rank_tol = kDefaultRankTolerance;
};

inline constexpr double kPmfTolerance = 1e-12;
inline constexpr double kRankPassFraction = 0.999;
inline constexpr double kProjectorTolerance = 1e-10;
inline constexpr double kNullingTolerance = 1e-8;

/// DP law of the longest run against exhaustive enumeration, n <= 14 and
/// p = 0, 0.1, ..., 1.
inline SuiteResult verify_dp_oracle(std::size_t max_n = 14) {
  double worst = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    for (int k = 0; k <= 10; ++k) {
      const double p = k / 10.0;
      const auto dp = run_length_pmf(n, p);
      const auto oracle = enumerate_runlength_oracle(n, p);
      for (std::size_t f = 0; f <= n; ++f) worst = std::max(worst, std::abs(dp[f] - oracle[f]));
    }
  }
  return {"dp_oracle", worst <= kPmfTolerance,
          {{"max_abs_diff", worst}, {"tolerance", kPmfTolerance}, {"max_n", max_n}}};
}

/// The longest-run values F in {1, ceil(n/4), ceil(n/2), ceil(3n/4), n}.
inline std::vector<std::size_t> lemma_run_grid(std::size_t n) {
  std::set<std::size_t> runs = {1, (n + 3) / 4, (n + 1) / 2, (3 * n + 3) / 4, n};
  return {runs.begin(), runs.end()};
}

inline SuiteResult verify_lemma1_grid(const VerifyOptions& opts,
                                      const std::vector<std::size_t>& sizes = {4, 8, 16, 20, 32}) {
  SuiteResult result{"lemma1", true, {{"points", nlohmann::json::array()}}};
  std::uint64_t seed = opts.seed;
  for (std::size_t n : sizes) {
    for (std::size_t f : lemma_run_grid(n)) {
      const auto report = verify_lemma1(n, n / 2, f, opts.lemma_trials, seed, opts.rank_tol);
      seed += opts.lemma_trials;
      const bool ok = report.pass_fraction() >= kRankPassFraction;
      result.passed = result.passed && ok;
      result.details["points"].push_back({{"n", n},
                                          {"d_v", n / 2},
                                          {"F", f},
                                          {"predicted_rank", report.predicted},
                                          {"pass_fraction", report.pass_fraction()},
                                          {"passed", ok}});
    }
  }
  result.details["rank_tol"] = opts.rank_tol;
  return result;
}

struct ProjectorErrors {
  double idempotence = 0.0;
  double hermitian = 0.0;
  double annihilation = 0.0;
};

inline ProjectorErrors projector_errors(const ZeroForcer& zf, const Precoder& prec) {
  const CMatrix& d = zf.D;
  return {(d * d - d).cwiseAbs().maxCoeff(), (d - d.adjoint()).cwiseAbs().maxCoeff(),
          (d * prec.V).cwiseAbs().maxCoeff()};
}

/// Projector identities for n up to 64 and interference nulling through
/// constant cross channels at n = 20.
inline SuiteResult verify_projector(const VerifyOptions& opts) {
  SuiteResult result{"projector", true, {}};
  ProjectorErrors worst;
  std::size_t rank_failures = 0;
  std::uint64_t seed = opts.seed;
  for (std::size_t n = 2; n <= 64; n += 2) {
    for (int rep = 0; rep < 4; ++rep) {
      const auto prec = gen_precoder(n, 100.0, seed++);
      const auto zf = zero_forcing_matrix(prec);
      const auto e = projector_errors(zf, prec);
      worst.idempotence = std::max(worst.idempotence, e.idempotence);
      worst.hermitian = std::max(worst.hermitian, e.hermitian);
      worst.annihilation = std::max(worst.annihilation, e.annihilation);
      if (numerical_rank(zf.D, opts.rank_tol) != n / 2) ++rank_failures;
    }
  }

  double worst_nulling = 0.0;
  const std::size_t n = 20;
  for (std::size_t i = 0; i < opts.nulling_instances; ++i) {
    Rng rng(derive_seed(opts.seed, i));
    const auto prec = gen_precoder(n, 100.0, derive_seed(opts.seed + 1, i));
    const auto zf = zero_forcing_matrix(prec);
    const auto cross = DiagonalChannel::constant(n, std::polar(rng.uniform(0.5, 2.0),
                                                               rng.uniform(0.0, 2.0 * std::numbers::pi)));
    CVector x(static_cast<Eigen::Index>(n / 2));
    for (auto& s : x) s = rng.complex_normal();
    const double scale = (cross.diag.asDiagonal() * (prec.V * x)).cwiseAbs().maxCoeff();
    worst_nulling = std::max(worst_nulling, check_interference_nulled(zf, cross, prec, x) / scale);
  }

  result.passed = worst.idempotence <= kProjectorTolerance &&
                  worst.hermitian <= kProjectorTolerance &&
                  worst.annihilation <= kProjectorTolerance && rank_failures == 0 &&
                  worst_nulling <= kNullingTolerance;
  result.details = {{"max_idempotence_error", worst.idempotence},
                    {"max_hermitian_error", worst.hermitian},
                    {"max_annihilation_error", worst.annihilation},
                    {"rank_failures", rank_failures},
                    {"max_relative_interference", worst_nulling},
                    {"nulling_instances", opts.nulling_instances}};
  return result;
}

inline constexpr std::size_t kEulerGrids[] = {250, 500, 1000, 2000};
// Halving the spacing must shrink the residual by at least 2^-0.8.
inline constexpr double kEulerMinOrder = 0.8;

/// Euler residual of the closed-form allocation at (n=20, p=0.9, N=1,
/// P_t=100) across grid refinements.
inline SuiteResult verify_euler(std::size_t n = 20, double p = 0.9, double noise = 1.0,
                                double total_power = 100.0) {
  const auto wf = WeightFunction::for_channel(n, p);
  SuiteResult result{"euler", true, {{"residuals", nlohmann::json::array()}}};
  double previous = 0.0;
  for (std::size_t grid : kEulerGrids) {
    const auto r = euler_lagrange_residual(wf, noise, total_power, n, grid);
    result.details["residuals"].push_back(
        {{"grid", grid}, {"max_residual", r.max_residual}, {"points", r.points}});
    if (!r.applicable) result.passed = false;
    if (previous > 0.0) {
      const double order = std::log2(previous / r.max_residual);
      if (!(order >= kEulerMinOrder)) result.passed = false;
    }
    previous = r.max_residual;
  }
  result.details["min_order"] = kEulerMinOrder;
  return result;
}

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"dp_oracle", "lemma1", "projector", "euler"};
  return names;
}

inline std::vector<SuiteResult> run_suites(const std::vector<std::string>& selection,
                                           const VerifyOptions& opts) {
  if (selection.empty()) throw ParameterError("no verification suite selected");
  std::vector<SuiteResult> results;
  for (const auto& name : selection) {
    if (name == "dp_oracle") {
      results.push_back(verify_dp_oracle());
    } else if (name == "lemma1") {
      results.push_back(verify_lemma1_grid(opts));
    } else if (name == "projector") {
      results.push_back(verify_projector(opts));
    } else if (name == "euler") {
      results.push_back(verify_euler());
    } else {
      throw ParameterError("unknown suite '" + name + "'");
    }
  }
  return results;
}

}  // namespace bia
