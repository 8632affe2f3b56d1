#pragma once

// Flat "key = value" experiment files. '#' starts a comment; list values are
// comma-separated.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bia/error.hpp"
#include "bia/rates.hpp"

namespace bia {

class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in) {
    KeyValueConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto text = trim(line);
      if (text.empty()) continue;
      const auto eq = text.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError("line " + std::to_string(lineno), "expected 'key = value'");
      }
      const std::string key(trim(text.substr(0, eq)));
      const std::string value(trim(text.substr(eq + 1)));
      if (key.empty()) throw ConfigError("line " + std::to_string(lineno), "empty key");
      if (!cfg.values_.emplace(key, value).second) throw ConfigError(key, "duplicate key");
    }
    return cfg;
  }

  static KeyValueConfig parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open config file");
    return parse(in);
  }

  bool has(const std::string& key) const { return values_.contains(key); }

  /// Throws on the first key outside `allowed`.
  void restrict_to(const std::set<std::string>& allowed) const {
    for (const auto& [key, value] : values_) {
      if (!allowed.contains(key)) throw ConfigError(key, "unknown key");
    }
  }

  double get_double(const std::string& key) const { return to_double(key, raw(key)); }

  std::size_t get_size(const std::string& key) const { return to_integer<std::size_t>(key, raw(key)); }

  std::uint64_t get_u64(const std::string& key) const {
    return to_integer<std::uint64_t>(key, raw(key));
  }

  std::vector<double> get_list(const std::string& key) const {
    std::vector<double> out;
    std::string_view rest = raw(key);
    while (true) {
      const auto comma = rest.find(',');
      const auto item = trim(rest.substr(0, comma));
      out.push_back(to_double(key, item));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    return out;
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

 private:
  const std::string& raw(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(key, "missing");
    return it->second;
  }

  static std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
  }

  static double to_double(const std::string& key, std::string_view text) {
    // strtod is locale-dependent; from_chars is not.
    double v = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end || !std::isfinite(v)) {
      throw ConfigError(key, "not a number: '" + std::string(text) + "'");
    }
    return v;
  }

  template <class T>
  static T to_integer(const std::string& key, std::string_view text) {
    T v{};
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end) {
      throw ConfigError(key, "not a non-negative integer: '" + std::string(text) + "'");
    }
    return v;
  }

  std::map<std::string, std::string> values_;
};

/// A rate sweep: the base experiment plus the p_direct and P_t grids.
struct RatesSweep {
  ExperimentConfig base;
  std::vector<double> p_values;
  std::vector<double> power_values;
};

inline std::vector<double> log_grid(double lo, double hi, std::size_t points) {
  if (!(lo > 0.0 && hi >= lo) || points < 1) throw ParameterError("invalid log grid");
  if (points == 1) return {lo};
  std::vector<double> grid(points);
  const double step = std::log10(hi / lo) / static_cast<double>(points - 1);
  for (std::size_t k = 0; k < points; ++k) {
    grid[k] = lo * std::pow(10.0, step * static_cast<double>(k));
  }
  grid.back() = hi;
  return grid;
}

inline const std::set<std::string>& rates_config_keys() {
  static const std::set<std::string> keys = {"n",     "k",       "p_direct", "p_cross",
                                             "p_t",   "p_t_min", "p_t_max",  "p_t_points",
                                             "noise", "trials",  "seed",     "h_min",
                                             "h_max"};
  return keys;
}

/// Builds a sweep from a parsed file. Every failure names the offending key.
///
/// p_t may list explicit powers; otherwise the log grid p_t_min..p_t_max with
/// p_t_points points is used (defaults 1, 10^4, 9).
inline RatesSweep rates_sweep_from(const KeyValueConfig& cfg) {
  cfg.restrict_to(rates_config_keys());
  RatesSweep sweep;
  auto& base = sweep.base;

  auto checked = [](const std::string& key, auto&& fn) {
    try {
      fn();
    } catch (const ParameterError& e) {
      throw ConfigError(key, e.what());
    }
  };

  if (cfg.has("n")) base.n = cfg.get_size("n");
  if (base.n < 2 || base.n % 2 != 0) throw ConfigError("n", "must be even and >= 2");
  if (cfg.has("k")) base.users = cfg.get_size("k");
  if (base.users < 1) throw ConfigError("k", "must be >= 1");
  if (cfg.has("trials")) base.trials = cfg.get_size("trials");
  if (base.trials < 1) throw ConfigError("trials", "must be >= 1");
  if (cfg.has("seed")) base.base_seed = cfg.get_u64("seed");
  if (cfg.has("noise")) base.noise = cfg.get_double("noise");
  if (!(base.noise > 0.0)) throw ConfigError("noise", "must be positive");
  if (cfg.has("p_cross")) base.p_cross = cfg.get_double("p_cross");
  checked("p_cross", [&] { detail::check_probability(base.p_cross, "p_cross"); });
  if (cfg.has("h_min")) base.bounds.min = cfg.get_double("h_min");
  if (cfg.has("h_max")) base.bounds.max = cfg.get_double("h_max");
  checked("h_min", [&] { detail::check_bounds(base.bounds); });

  sweep.p_values = cfg.has("p_direct") ? cfg.get_list("p_direct") : std::vector<double>{0.9};
  for (double p : sweep.p_values) {
    checked("p_direct", [&] { detail::check_probability(p, "p_direct"); });
  }
  base.p_direct = sweep.p_values.front();

  if (cfg.has("p_t")) {
    sweep.power_values = cfg.get_list("p_t");
  } else {
    const double lo = cfg.has("p_t_min") ? cfg.get_double("p_t_min") : 1.0;
    const double hi = cfg.has("p_t_max") ? cfg.get_double("p_t_max") : 1e4;
    const std::size_t points = cfg.has("p_t_points") ? cfg.get_size("p_t_points") : 9;
    checked("p_t_min", [&] { sweep.power_values = log_grid(lo, hi, points); });
  }
  for (double pt : sweep.power_values) {
    if (!(pt > 0.0)) throw ConfigError("p_t", "powers must be positive");
  }
  base.total_power = sweep.power_values.front();
  return sweep;
}

}  // namespace bia
