#pragma once

// Figure-data generators. Each returns the full CSV text so callers can hash
// or compare it before it touches the filesystem.

#include <cstddef>
#include <string>

#include "bia/coherence.hpp"
#include "bia/config.hpp"
#include "bia/powalloc.hpp"
#include "bia/rates.hpp"

namespace bia {

/// Rows (z, F_Z(1/2 - z)) = (i/n, G(i)) for i = 0..n/2.
inline std::string fz_csv(std::size_t n, double p) {
  const auto g = free_dim_ccdf(run_length_pmf(n, p));
  std::string out = "z,F_Z\n";
  for (std::size_t i = 0; i < g.size(); ++i) {
    out += format_number(static_cast<double>(i) / static_cast<double>(n)) + ',' +
           format_number(g[i]) + '\n';
  }
  return out;
}

inline constexpr std::size_t kPowerCurvePoints = 200;

/// P_Z(z) on an evenly spaced grid over [0, 1/2], endpoints included.
inline std::string power_curve_csv(const WeightFunction& wf, double noise, double total_power,
                                   std::size_t points = kPowerCurvePoints) {
  std::string out = "z,P_Z\n";
  for (std::size_t k = 0; k < points; ++k) {
    const double z = k + 1 == points ? 0.5 : 0.5 * static_cast<double>(k) /
                                                 static_cast<double>(points - 1);
    out += format_number(z) + ',' + format_number(cumulative_power(z, wf, noise, total_power)) +
           '\n';
  }
  return out;
}

inline std::string power_layers_csv(const PowerProfile& profile) {
  std::string out = "layer,power\n";
  for (std::size_t j = 0; j < profile.layer_powers.size(); ++j) {
    out += std::to_string(j + 1) + ',' + format_number(profile.layer_powers[j]) + '\n';
  }
  return out;
}

/// One row per (p, P_t) sweep point, p-major.
inline std::string rates_csv(const RatesSweep& sweep, std::size_t threads) {
  std::string out = std::string(kRateCsvHeader) + '\n';
  for (double p : sweep.p_values) {
    const auto wf = WeightFunction::for_channel(sweep.base.n, p);
    for (double pt : sweep.power_values) {
      ExperimentConfig cfg = sweep.base;
      cfg.p_direct = p;
      cfg.total_power = pt;
      const auto profile = layer_powers(wf, cfg.noise, pt, cfg.n);
      const auto report = monte_carlo_avg_rate(cfg, profile, {threads, false});
      out += rate_csv_row(p, pt, report) + '\n';
    }
  }
  return out;
}

}  // namespace bia
