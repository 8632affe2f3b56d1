#pragma once

// Closed-form multi-layer power allocation and its stationarity check.
//
// Notation used throughout: M = n/2 layers, G(i) = P(at least i layers are
// decodable) for i = 0..M. In the continuous picture z = i/n in [0, 1/2] and
// u = 1/2 - z; the weight function is F_Z(u) with F_Z(1/2 - z) = G(floor(n z)).
// P(u) is the power cumulated over the top of the layer stack (increasing in
// u) and P_Z(z) = P(1/2 - z) is its decreasing reparameterization.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bia/coherence.hpp"
#include "bia/error.hpp"

namespace bia {

class WeightFunction {
 public:
  WeightFunction(std::size_t n, std::vector<double> ccdf) : n_(n), g_(std::move(ccdf)) {
    if (n_ < 2 || n_ % 2 != 0) throw ParameterError("weight function needs an even n >= 2");
    if (g_.size() != n_ / 2 + 1) throw ParameterError("weight grid must have n/2 + 1 entries");
    if (g_[0] != 1.0) throw ParameterError("weight grid must start at exactly 1");
    for (std::size_t i = 1; i < g_.size(); ++i) {
      if (!(g_[i] >= 0.0 && g_[i] <= g_[i - 1])) {
        throw ParameterError("weight grid must be non-negative and non-increasing");
      }
    }
  }

  static WeightFunction from_distribution(const RunLengthDistribution& dist) {
    return {dist.n, free_dim_ccdf(dist)};
  }

  static WeightFunction for_channel(std::size_t n, double retain_prob) {
    return from_distribution(run_length_pmf(n, retain_prob));
  }

  std::size_t n() const noexcept { return n_; }
  std::size_t layers() const noexcept { return n_ / 2; }
  const std::vector<double>& grid() const noexcept { return g_; }

  /// G(i) = F_I(n/2 - i).
  double at(std::size_t i) const { return g_.at(i); }

  /// Grid index floor(n z), robust to z = i/n being rounded just below i.
  std::size_t index_of(double z) const {
    const double s = static_cast<double>(n_) * z;
    auto k = static_cast<std::size_t>(std::floor(s));
    if (s - static_cast<double>(k) > 1.0 - 1e-9) ++k;
    return std::min(k, layers());
  }

  /// F_Z(1/2 - z), the step function.
  double reflected(double z) const { return g_[index_of(z)]; }

  /// F_Z(0) = G(M): probability that every layer is decodable.
  double at_origin() const noexcept { return g_.back(); }

 private:
  std::size_t n_;
  std::vector<double> g_;
};

struct PowerProfile {
  std::vector<double> layer_powers;
  double total_power = 0.0;
  double noise = 0.0;
  std::size_t n = 0;
  /// Largest grid index j with P_Z(j/n) at the cap. Layers 1..j carry no
  /// power and layer j+1 receives the remainder of the cap.
  std::size_t saturation_index = 0;

  double sum() const {
    double s = 0.0;
    for (double p : layer_powers) s += p;
    return s;
  }
};

namespace detail {

inline void check_power_args(double noise, double total_power) {
  if (!(noise > 0.0) || !std::isfinite(noise)) throw ParameterError("noise power must be positive");
  if (!(total_power > 0.0) || !std::isfinite(total_power)) {
    throw ParameterError("total power must be positive");
  }
}

// Closed form N F_Z(0) / (2 z F_Z(1/2 - z)) - N at a point z inside grid
// cell k, clamped to [0, P_t]. A zero weight means the
// layer is never decodable and gets no power.
inline double closed_form_clamped(const WeightFunction& wf, double z, std::size_t k,
                                  double noise, double total_power) {
  const double g = wf.at(k);
  if (g == 0.0) return 0.0;
  // Ratio first so that z = 1/2 (k = M) yields exactly N - N = 0.
  const double v = noise * (wf.at_origin() / g) / (2.0 * z) - noise;
  return std::clamp(v, 0.0, total_power);
}

}  // namespace detail

/// P_Z(z) for z in [0, 1/2].
///
/// The clamped closed form is taken through a running maximum in u = 1/2 - z
/// (i.e. over all z' >= z), which applies the cap rule "once P(u0) >= P_t,
/// P(u) = P_t for u > u0" and keeps P_Z non-increasing. Within one grid cell
/// the closed form decreases in z, so the supremum over later cells is
/// attained at their left ends.
inline double cumulative_power(double z, const WeightFunction& wf, double noise,
                               double total_power) {
  if (!(z >= 0.0 && z <= 0.5)) throw ParameterError("z must lie in [0, 1/2]");
  detail::check_power_args(noise, total_power);
  if (z == 0.0) return total_power;

  const std::size_t k = wf.index_of(z);
  double value = detail::closed_form_clamped(wf, z, k, noise, total_power);
  const double n = static_cast<double>(wf.n());
  for (std::size_t j = k + 1; j <= wf.layers(); ++j) {
    value = std::max(value, detail::closed_form_clamped(wf, static_cast<double>(j) / n, j, noise,
                                                        total_power));
  }
  return value;
}

/// P_Z evaluated on the layer grid z = j/n, j = 0..M.
inline std::vector<double> cumulative_power_grid(const WeightFunction& wf, double noise,
                                                 double total_power) {
  detail::check_power_args(noise, total_power);
  const std::size_t m = wf.layers();
  const double n = static_cast<double>(wf.n());
  std::vector<double> pz(m + 1);
  pz[0] = total_power;
  for (std::size_t j = 1; j <= m; ++j) {
    pz[j] = detail::closed_form_clamped(wf, static_cast<double>(j) / n, j, noise, total_power);
  }
  for (std::size_t j = m; j-- > 1;) pz[j] = std::max(pz[j], pz[j + 1]);
  return pz;
}

/// P_j = P_Z((j-1)/n) - P_Z(j/n), j = 1..M. Telescopes to P_t.
inline PowerProfile layer_powers(const WeightFunction& wf, double noise, double total_power,
                                 std::size_t n) {
  if (n != wf.n()) throw ParameterError("block length does not match the weight function");
  const auto pz = cumulative_power_grid(wf, noise, total_power);

  PowerProfile profile;
  profile.total_power = total_power;
  profile.noise = noise;
  profile.n = n;
  profile.layer_powers.resize(wf.layers());
  for (std::size_t j = 1; j <= wf.layers(); ++j) {
    profile.layer_powers[j - 1] = pz[j - 1] - pz[j];
  }
  for (std::size_t j = 0; j < pz.size() && pz[j] == total_power; ++j) {
    profile.saturation_index = j;
  }
  return profile;
}

inline nlohmann::json to_json(const PowerProfile& profile) {
  return {{"n", profile.n},
          {"N", profile.noise},
          {"Pt", profile.total_power},
          {"layers", profile.layer_powers}};
}

inline PowerProfile power_profile_from_json(const nlohmann::json& j) {
  PowerProfile profile;
  profile.n = j.at("n").get<std::size_t>();
  profile.noise = j.at("N").get<double>();
  profile.total_power = j.at("Pt").get<double>();
  profile.layer_powers = j.at("layers").get<std::vector<double>>();
  if (profile.layer_powers.size() != profile.n / 2) {
    throw ParameterError("power profile must list n/2 layers");
  }
  return profile;
}

/// Monotone cubic (Fritsch-Carlson) interpolant of F_Z through the grid
/// nodes u_k = 1/2 - k/n. C^1, so the Euler residual below converges at
/// first order in the grid spacing.
class MonotoneWeight {
 public:
  explicit MonotoneWeight(const WeightFunction& wf) {
    const std::size_t m = wf.layers();
    const double n = static_cast<double>(wf.n());
    for (std::size_t k = m + 1; k-- > 0;) {
      x_.push_back(0.5 - static_cast<double>(k) / n);
      y_.push_back(wf.at(k));
    }
    x_.front() = 0.0;
    x_.back() = 0.5;
    slopes();
  }

  double value(double u) const { return eval(u).first; }
  double derivative(double u) const { return eval(u).second; }

  std::pair<double, double> eval(double u) const {
    const std::size_t k = segment(u);
    const double h = x_[k + 1] - x_[k];
    const double t = (u - x_[k]) / h;
    const double t2 = t * t, t3 = t2 * t;
    const double v = (2 * t3 - 3 * t2 + 1) * y_[k] + (t3 - 2 * t2 + t) * h * d_[k] +
                     (-2 * t3 + 3 * t2) * y_[k + 1] + (t3 - t2) * h * d_[k + 1];
    const double dv = (6 * t2 - 6 * t) / h * y_[k] + (3 * t2 - 4 * t + 1) * d_[k] +
                      (-6 * t2 + 6 * t) / h * y_[k + 1] + (3 * t2 - 2 * t) * d_[k + 1];
    return {v, dv};
  }

 private:
  std::size_t segment(double u) const {
    auto it = std::upper_bound(x_.begin(), x_.end(), u);
    auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - x_.begin()) - 1));
    return std::min(k, x_.size() - 2);
  }

  void slopes() {
    const std::size_t count = x_.size();
    std::vector<double> h(count - 1), delta(count - 1);
    for (std::size_t k = 0; k + 1 < count; ++k) {
      h[k] = x_[k + 1] - x_[k];
      delta[k] = (y_[k + 1] - y_[k]) / h[k];
    }
    d_.assign(count, 0.0);
    if (count == 2) {
      d_[0] = d_[1] = delta[0];
      return;
    }
    for (std::size_t k = 1; k + 1 < count; ++k) {
      if (delta[k - 1] * delta[k] <= 0.0) continue;
      const double w1 = 2 * h[k] + h[k - 1];
      const double w2 = h[k] + 2 * h[k - 1];
      d_[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
    }
    d_[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d_[count - 1] = end_slope(h[count - 2], h[count - 3], delta[count - 2], delta[count - 3]);
  }

  static double end_slope(double h0, double h1, double m0, double m1) {
    double d = ((2 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if (d * m0 <= 0.0) return 0.0;
    if (m0 * m1 <= 0.0 && std::abs(d) > 3 * std::abs(m0)) return 3 * m0;
    return d;
  }

  std::vector<double> x_, y_, d_;
};

struct EulerResidual {
  bool applicable = false;
  double max_residual = 0.0;
  std::size_t points = 0;
};

/// Stationarity residual of a power profile P(u) on the unsaturated region
/// 0 < P < P_t, for the integrand
///   D(P, P', u) = (1/(2 ln 2)) (1/2 - u) P'(u) F(u) / (N + P(u)).
///
/// The residual is D_P - dD_{P'}/du with dD_{P'}/du taken as the explicit
/// u-derivative at fixed P, i.e. (1/(2 ln 2)) (-F + (1/2 - u) f) / (N + P).
/// That is the condition the closed form integrates to. (With the total
/// derivative the P' terms cancel and the Euler equation no longer involves
/// P at all.) P' is a central difference with step equal to the sample
/// spacing 1/(2 grid_size).
template <class Profile>
EulerResidual euler_residual_of(const Profile& power, const MonotoneWeight& weight,
                                double noise, double total_power, std::size_t grid_size) {
  if (grid_size < 2) throw ParameterError("grid_size must be at least 2");
  const double h = 0.5 / static_cast<double>(grid_size);
  const double scale = 1.0 / (2.0 * std::numbers::ln2);
  auto unsaturated = [&](double p) { return p > 0.0 && p < total_power && std::isfinite(p); };

  EulerResidual out;
  for (std::size_t k = 0; k < grid_size; ++k) {
    const double u = (static_cast<double>(k) + 0.5) * h;
    if (u - h < 0.0 || u + h >= 0.5) continue;
    const double lo = power(u - h), mid = power(u), hi = power(u + h);
    if (!unsaturated(lo) || !unsaturated(mid) || !unsaturated(hi)) continue;

    const auto [f_val, f_der] = weight.eval(u);
    const double rho = (hi - lo) / (2.0 * h);
    const double a = 0.5 - u;
    const double denom = noise + mid;
    const double d_p = -a * rho * f_val / (denom * denom);
    const double d_dp_du = (-f_val + a * f_der) / denom;
    out.max_residual = std::max(out.max_residual, scale * std::abs(d_p - d_dp_du));
    ++out.points;
  }
  out.applicable = out.points > 0;
  return out;
}

/// Closed-form P(u) = C / ((1/2 - u) F(u)) - N with C = N F(0) / 2, using the
/// smooth interpolant of F. Not capped.
inline auto closed_form_increasing(const MonotoneWeight& weight, double noise) {
  const double c = noise * weight.value(0.0) / 2.0;
  return [&weight, noise, c](double u) {
    const double denom = (0.5 - u) * weight.value(u);
    return denom > 0.0 ? c / denom - noise : std::numeric_limits<double>::infinity();
  };
}

/// Euler residual of the closed-form allocation; not applicable when the
/// profile is saturated (or zero) everywhere.
inline EulerResidual euler_lagrange_residual(const WeightFunction& wf, double noise,
                                             double total_power, std::size_t n,
                                             std::size_t grid_size) {
  if (n != wf.n()) throw ParameterError("block length does not match the weight function");
  detail::check_power_args(noise, total_power);
  if (wf.at_origin() == 0.0) return {};
  const MonotoneWeight weight(wf);
  return euler_residual_of(closed_form_increasing(weight, noise), weight, noise, total_power,
                           grid_size);
}

}  // namespace bia
