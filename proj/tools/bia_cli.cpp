// Experiment runner: figure data, rate sweeps and self-verification.
//
// Exit codes: 0 success, 1 verification failure, 2 usage/config/I-O error.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bia/alignment.hpp"
#include "bia/config.hpp"
#include "bia/error.hpp"
#include "bia/experiments.hpp"
#include "bia/powalloc.hpp"
#include "bia/verify.hpp"
#include "manifest.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

enum ExitCode { kOk = 0, kVerifyFailed = 1, kUsage = 2 };

struct Globals {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
};

struct ChannelArgs {
  std::size_t n = 20;
  double p = 0.9;
  double noise = 1.0;
  double total_power = 100.0;
};

// Flags given on the command line win; otherwise values come from --config.
void fill_from_config(const Globals& g, ChannelArgs& args, const CLI::App& sub) {
  if (g.config_path.empty()) return;
  const auto cfg = bia::KeyValueConfig::load(g.config_path);
  cfg.restrict_to(bia::rates_config_keys());
  if (sub.count("--n") == 0 && cfg.has("n")) args.n = cfg.get_size("n");
  if (sub.count("--p") == 0 && cfg.has("p_direct")) args.p = cfg.get_list("p_direct").front();
  if (sub.get_option_no_throw("--noise") && sub.count("--noise") == 0 && cfg.has("noise")) {
    args.noise = cfg.get_double("noise");
  }
  if (sub.get_option_no_throw("--pt") && sub.count("--pt") == 0 && cfg.has("p_t")) {
    args.total_power = cfg.get_list("p_t").front();
  }
}

std::filesystem::path prepare_out_dir(const Globals& g) {
  std::filesystem::path dir(g.out_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void finish(const bia::tools::RunManifest& manifest, const std::filesystem::path& dir,
            std::chrono::steady_clock::time_point start) {
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!manifest.validate()) throw std::runtime_error("output hash mismatch after run");
  std::ofstream out(dir / "manifest.json");
  out << manifest.to_json(kVersion, seconds).dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write manifest");
}

int run_fz(const Globals& g, ChannelArgs args, const CLI::App& sub) {
  const auto start = std::chrono::steady_clock::now();
  fill_from_config(g, args, sub);
  const auto dir = prepare_out_dir(g);
  bia::tools::RunManifest manifest("fz", {{"n", args.n}, {"p", args.p}});
  manifest.write(dir / "fz.csv", bia::fz_csv(args.n, args.p));
  finish(manifest, dir, start);
  return kOk;
}

int run_power(const Globals& g, ChannelArgs args, const CLI::App& sub) {
  const auto start = std::chrono::steady_clock::now();
  fill_from_config(g, args, sub);
  const auto dir = prepare_out_dir(g);
  const auto wf = bia::WeightFunction::for_channel(args.n, args.p);
  const auto profile = bia::layer_powers(wf, args.noise, args.total_power, args.n);
  bia::tools::RunManifest manifest(
      "power", {{"n", args.n}, {"p", args.p}, {"noise", args.noise}, {"p_t", args.total_power}});
  manifest.write(dir / "power_curve.csv", bia::power_curve_csv(wf, args.noise, args.total_power));
  manifest.write(dir / "power_layers.csv", bia::power_layers_csv(profile));
  manifest.write(dir / "power_profile.json", bia::to_json(profile).dump(2) + '\n');
  finish(manifest, dir, start);
  return kOk;
}

int run_rates(const Globals& g) {
  const auto start = std::chrono::steady_clock::now();
  if (g.config_path.empty()) throw bia::ConfigError("--config", "rates requires a config file");
  auto cfg = bia::KeyValueConfig::load(g.config_path);
  if (g.seed) cfg.set("seed", std::to_string(*g.seed));
  const auto sweep = bia::rates_sweep_from(cfg);
  const auto dir = prepare_out_dir(g);

  nlohmann::json echo = {{"n", sweep.base.n},
                         {"k", sweep.base.users},
                         {"p_direct", sweep.p_values},
                         {"p_cross", sweep.base.p_cross},
                         {"p_t", sweep.power_values},
                         {"noise", sweep.base.noise},
                         {"trials", sweep.base.trials},
                         {"seed", sweep.base.base_seed}};
  bia::tools::RunManifest manifest("rates", echo);
  manifest.write(dir / "rates.csv", bia::rates_csv(sweep, g.threads));
  finish(manifest, dir, start);
  return kOk;
}

int run_verify(const Globals& g, const std::string& suites, double rank_tol, std::size_t trials) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::string> selection;
  std::stringstream ss(suites);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) selection.push_back(item);
  }
  bia::VerifyOptions opts;
  opts.rank_tol = rank_tol;
  opts.lemma_trials = trials;
  if (g.seed) opts.seed = *g.seed;
  const auto results = bia::run_suites(selection, opts);

  bool all = true;
  nlohmann::json report = {{"suites", nlohmann::json::array()}};
  for (const auto& r : results) {
    all = all && r.passed;
    report["suites"].push_back({{"name", r.name}, {"passed", r.passed}, {"details", r.details}});
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << '\n';
  }
  report["passed"] = all;

  const auto dir = prepare_out_dir(g);
  bia::tools::RunManifest manifest(
      "verify", {{"suites", selection}, {"rank_tol", rank_tol}, {"trials", trials}, {"seed", opts.seed}});
  manifest.write(dir / "verify.json", report.dump(2) + '\n');
  finish(manifest, dir, start);
  return all ? kOk : kVerifyFailed;
}

int run_lemma1(const Globals& g, std::size_t n, std::size_t dv, std::size_t f, std::size_t trials,
               double rank_tol) {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t seed = g.seed.value_or(1);
  const auto report = bia::verify_lemma1(n, dv, f, trials, seed, rank_tol);
  const bool ok = report.pass_fraction() >= bia::kRankPassFraction;
  const nlohmann::json out = {{"n", n},
                              {"d_v", dv},
                              {"F", f},
                              {"trials", trials},
                              {"predicted_rank", report.predicted},
                              {"agreements", report.agreements},
                              {"pass_fraction", report.pass_fraction()},
                              {"passed", ok}};
  std::cout << out.dump() << '\n';
  const auto dir = prepare_out_dir(g);
  bia::tools::RunManifest manifest(
      "lemma1", {{"n", n}, {"d_v", dv}, {"F", f}, {"trials", trials}, {"seed", seed}});
  manifest.write(dir / "lemma1.json", out.dump(2) + '\n');
  finish(manifest, dir, start);
  return ok ? kOk : kVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blind interference alignment experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kVersion);

  Globals g;
  app.add_option("--config", g.config_path, "Flat key = value experiment file");
  app.add_option("--out-dir", g.out_dir, "Directory for output files");
  app.add_option("--seed", g.seed, "Base seed (overrides the config)");
  app.add_option("--threads", g.threads, "Monte Carlo worker threads")->check(CLI::PositiveNumber);

  ChannelArgs fz_args;
  auto* fz = app.add_subcommand("fz", "Decodability weight F_Z on the layer grid");
  fz->add_option("--n", fz_args.n, "Block length (even)");
  fz->add_option("--p", fz_args.p, "Direct-link retain probability");

  ChannelArgs power_args;
  auto* power = app.add_subcommand("power", "Cumulative power curve and per-layer powers");
  power->add_option("--n", power_args.n, "Block length (even)");
  power->add_option("--p", power_args.p, "Direct-link retain probability");
  power->add_option("--noise", power_args.noise, "Noise power N");
  power->add_option("--pt", power_args.total_power, "Total power P_t");

  auto* rates = app.add_subcommand("rates", "Average-rate sweep over p and P_t (needs --config)");

  std::string suites = "dp_oracle,lemma1,projector,euler";
  double rank_tol = bia::kDefaultRankTolerance;
  std::size_t verify_trials = 1000;
  auto* verify = app.add_subcommand("verify", "Run the self-check suites");
  verify->add_option("--suites", suites, "Comma-separated suite names");
  verify->add_option("--rank-tol", rank_tol, "Relative singular-value threshold factor");
  verify->add_option("--trials", verify_trials, "Trials per rank-identity grid point");

  std::size_t l_n = 8, l_dv = 4, l_f = 2, l_trials = 1000;
  double l_tol = bia::kDefaultRankTolerance;
  auto* lemma = app.add_subcommand("lemma1", "Check the rank identity at one (n, d_v, F)");
  lemma->add_option("--n", l_n, "Block length");
  lemma->add_option("--dv", l_dv, "Precoder columns d_v");
  lemma->add_option("--f", l_f, "Longest constant run F");
  lemma->add_option("--trials", l_trials, "Number of random trials");
  lemma->add_option("--rank-tol", l_tol, "Relative singular-value threshold factor");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*fz) return run_fz(g, fz_args, *fz);
    if (*power) return run_power(g, power_args, *power);
    if (*rates) return run_rates(g);
    if (*verify) return run_verify(g, suites, rank_tol, verify_trials);
    if (*lemma) return run_lemma1(g, l_n, l_dv, l_f, l_trials, l_tol);
  } catch (const bia::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const bia::ParameterError& e) {
    std::cerr << "parameter error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
