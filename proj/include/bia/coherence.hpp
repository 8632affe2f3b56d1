#pragma once

// Block-fading links with random coherence times and the exact law of their
// longest constant run.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bia/error.hpp"
#include "bia/random.hpp"

namespace bia {

struct MagnitudeBounds {
  double min = 0.5;
  double max = 2.0;
};

/// One diagonal fading link observed over a block of n snapshots.
///
/// `altering_points` holds the 1-based snapshot indices at which a run
/// starts. Index 1 is always present, so its size is the number of runs.
struct ChannelTrace {
  std::vector<std::complex<double>> values;
  std::vector<std::size_t> altering_points;
  double retain_prob = 0.0;

  std::size_t n() const noexcept { return values.size(); }

  /// Runs per snapshot; tends to the channel variation rate as n grows.
  double variation_rate() const noexcept {
    return values.empty() ? 0.0
                          : static_cast<double>(altering_points.size()) /
                                static_cast<double>(values.size());
  }
};

/// Exact distribution of the longest constant run for given (n, p).
///
/// pmf[f] is P(F = f) for f in 1..n; pmf[0] is always zero.
struct RunLengthDistribution {
  std::size_t n = 0;
  double retain_prob = 0.0;
  std::vector<double> pmf;

  double operator[](std::size_t f) const { return f < pmf.size() ? pmf[f] : 0.0; }
};

namespace detail {

inline void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ParameterError(std::string(what) + " must lie in [0, 1]");
  }
}

inline void check_bounds(const MagnitudeBounds& b) {
  if (!(b.min > 0.0 && b.min <= b.max && std::isfinite(b.max))) {
    throw ParameterError("magnitude bounds must satisfy 0 < min <= max < inf");
  }
}

inline std::complex<double> draw_gain(Rng& rng, const MagnitudeBounds& b) {
  const double mag = rng.uniform(b.min, b.max);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return std::polar(mag, phase);
}

}  // namespace detail

/// Draws a block-fading trace: every one of the n-1 snapshot boundaries keeps
/// the previous value with probability p, otherwise a fresh gain is drawn.
inline ChannelTrace gen_trace(std::size_t n, double p, const MagnitudeBounds& bounds,
                              std::uint64_t seed) {
  if (n == 0) throw ParameterError("block length must be positive");
  detail::check_probability(p, "retain probability");
  detail::check_bounds(bounds);

  Rng rng(seed);
  ChannelTrace trace;
  trace.retain_prob = p;
  trace.values.reserve(n);
  trace.values.push_back(detail::draw_gain(rng, bounds));
  trace.altering_points.push_back(1);
  for (std::size_t t = 2; t <= n; ++t) {
    // The uniform draw is consumed for every boundary so the stream layout
    // does not depend on p.
    if (rng.uniform() < p) {
      trace.values.push_back(trace.values.back());
    } else {
      trace.values.push_back(detail::draw_gain(rng, bounds));
      trace.altering_points.push_back(t);
    }
  }
  return trace;
}

/// Builds a trace with the given run lengths, left to right, drawing one
/// fresh gain per run.
inline ChannelTrace trace_from_runs(std::span<const std::size_t> runs,
                                    const MagnitudeBounds& bounds, Rng& rng) {
  detail::check_bounds(bounds);
  ChannelTrace trace;
  std::size_t start = 1;
  for (std::size_t len : runs) {
    if (len == 0) throw ParameterError("run lengths must be positive");
    const auto gain = detail::draw_gain(rng, bounds);
    trace.altering_points.push_back(start);
    trace.values.insert(trace.values.end(), len, gain);
    start += len;
  }
  if (trace.values.empty()) throw ParameterError("a trace needs at least one run");
  return trace;
}

/// Deterministic run pattern of total length n whose longest run is exactly
/// `longest`: one run of that length followed by runs of length longest-1
/// (the last one possibly shorter).
inline std::vector<std::size_t> runs_with_longest(std::size_t n, std::size_t longest) {
  if (longest < 1 || longest > n) {
    throw ParameterError("longest run must lie in [1, n]");
  }
  std::vector<std::size_t> runs{longest};
  std::size_t left = n - longest;
  const std::size_t chunk = longest > 1 ? longest - 1 : 1;
  while (left > 0) {
    const std::size_t len = std::min(chunk, left);
    runs.push_back(len);
    left -= len;
  }
  return runs;
}

/// F(H): the largest gap between consecutive altering points, with n+1 as
/// the terminal sentinel.
inline std::size_t longest_constant_run(const ChannelTrace& trace) {
  const auto& pts = trace.altering_points;
  std::size_t best = 0;
  for (std::size_t l = 0; l < pts.size(); ++l) {
    const std::size_t next = l + 1 < pts.size() ? pts[l + 1] : trace.n() + 1;
    best = std::max(best, next - pts[l]);
  }
  return best;
}

/// Exact law of the longest run among n snapshots whose n-1 boundaries
/// retain independently with probability p.
///
/// Dynamic program over (current run length, running maximum); O(n^2) states
/// and O(n^3) time.
inline RunLengthDistribution run_length_pmf(std::size_t n, double p) {
  if (n == 0) throw ParameterError("block length must be positive");
  detail::check_probability(p, "retain probability");

  const std::size_t w = n + 1;
  // state[r * w + m]: probability that the current run has length r and the
  // longest run so far is m (r <= m).
  std::vector<double> state(w * w, 0.0), next(w * w, 0.0);
  state[1 * w + 1] = 1.0;
  for (std::size_t t = 1; t < n; ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t r = 1; r <= t; ++r) {
      for (std::size_t m = r; m <= t; ++m) {
        const double v = state[r * w + m];
        if (v == 0.0) continue;
        next[(r + 1) * w + std::max(m, r + 1)] += p * v;
        next[1 * w + m] += (1.0 - p) * v;
      }
    }
    state.swap(next);
  }

  RunLengthDistribution dist{n, p, std::vector<double>(n + 1, 0.0)};
  for (std::size_t r = 1; r <= n; ++r) {
    for (std::size_t m = r; m <= n; ++m) dist.pmf[m] += state[r * w + m];
  }
  return dist;
}

inline constexpr std::size_t kOracleMaxBlock = 24;

/// Brute-force law of the longest run: enumerates all 2^(n-1) retain/change
/// boundary patterns.
inline RunLengthDistribution enumerate_runlength_oracle(std::size_t n, double p) {
  if (n == 0) throw ParameterError("block length must be positive");
  if (n > kOracleMaxBlock) {
    throw CapacityError("enumeration oracle supports n <= " + std::to_string(kOracleMaxBlock));
  }
  detail::check_probability(p, "retain probability");

  const std::size_t boundaries = n - 1;
  std::vector<double> weight(boundaries + 1);
  for (std::size_t k = 0; k <= boundaries; ++k) {
    weight[k] = std::pow(p, static_cast<double>(k)) *
                std::pow(1.0 - p, static_cast<double>(boundaries - k));
  }

  RunLengthDistribution dist{n, p, std::vector<double>(n + 1, 0.0)};
  const std::uint64_t patterns = std::uint64_t{1} << boundaries;
  for (std::uint64_t mask = 0; mask < patterns; ++mask) {
    std::size_t run = 1, longest = 1, retained = 0;
    for (std::size_t b = 0; b < boundaries; ++b) {
      if ((mask >> b) & 1U) {
        ++retained;
        longest = std::max(longest, ++run);
      } else {
        run = 1;
      }
    }
    dist.pmf[longest] += weight[retained];
  }
  return dist;
}

/// G(i) = P(min(n/2, n - F) >= i) for i = 0..n/2: the probability that at
/// least i layers are decodable.
inline std::vector<double> free_dim_ccdf(const RunLengthDistribution& dist) {
  const std::size_t n = dist.n;
  if (n == 0 || n % 2 != 0) throw ParameterError("free_dim_ccdf requires an even block length");
  const std::size_t m = n / 2;

  // For 1 <= i <= n/2, min(n/2, n-F) >= i  <=>  F <= n - i.
  std::vector<double> cdf(n + 1, 0.0);
  for (std::size_t f = 1; f <= n; ++f) cdf[f] = cdf[f - 1] + dist[f];

  std::vector<double> g(m + 1);
  g[0] = 1.0;
  for (std::size_t i = 1; i <= m; ++i) g[i] = std::min(g[i - 1], cdf[n - i]);
  return g;
}

inline nlohmann::json to_json(const RunLengthDistribution& dist) {
  nlohmann::json pmf = nlohmann::json::array();
  for (std::size_t f = 1; f < dist.pmf.size(); ++f) pmf.push_back({f, dist.pmf[f]});
  return {{"n", dist.n}, {"p", dist.retain_prob}, {"pmf", std::move(pmf)}};
}

inline RunLengthDistribution run_length_from_json(const nlohmann::json& j) {
  RunLengthDistribution dist;
  dist.n = j.at("n").get<std::size_t>();
  dist.retain_prob = j.at("p").get<double>();
  dist.pmf.assign(dist.n + 1, 0.0);
  for (const auto& entry : j.at("pmf")) {
    const auto f = entry.at(0).get<std::size_t>();
    if (f < 1 || f > dist.n) throw ParameterError("pmf entry outside 1..n");
    dist.pmf[f] = entry.at(1).get<double>();
  }
  return dist;
}

}  // namespace bia
