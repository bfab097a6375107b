// Command-line front end: transforms, sample, verify, free-energy, sweep.
//
// Exit codes: 0 success, 1 a requested check failed, 2 configuration or usage error.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ssg/checks.hpp"
#include "ssg/config.hpp"
#include "ssg/csv.hpp"
#include "ssg/estimators.hpp"
#include "ssg/parallel.hpp"
#include "ssg/sampler.hpp"
#include "ssg/transforms.hpp"

namespace fs = std::filesystem;
using namespace ssg;

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;
constexpr const char* kOutEnv = "SSG_OUT";

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::string> out;
  std::vector<std::string> overrides;
};

// Everything a subcommand writes goes through here and hits disk in one place.
struct Collector {
  fs::path dir;
  std::vector<std::string> artifacts;

  void csv(const std::string& name, const CsvTable& table) {
    table.write((dir / name).string());
    artifacts.push_back(name);
  }

  void text(const std::string& name, const std::string& body) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + (dir / name).string() + "'");
    out << body;
    artifacts.push_back(name);
  }
};

ExperimentConfig load(const Flags& flags) {
  if (flags.config.empty()) throw ConfigError("--config is required");
  auto root = read_json_file(flags.config);
  for (const auto& o : flags.overrides) apply_override(root, o);
  if (flags.seed) root["seed"] = *flags.seed;
  if (flags.jobs) root["jobs"] = *flags.jobs;
  if (flags.out) root["output"] = *flags.out;
  auto cfg = parse_config(root);
  if (cfg.output.empty()) {
    const char* env = std::getenv(kOutEnv);
    cfg.output = env != nullptr && *env != '\0' ? env : "ssg_out";
  }
  cfg.chain.seed = cfg.seed;
  return cfg;
}

std::string theta_label(std::size_t k) { return "t" + std::to_string(k); }

void require_region(const TransformContext& ctx, double theta) {
  if (theta != 0.0 && !ctx.in_high_temp_region(theta))
    throw ConfigError("theta = " + format_number(theta) + " is outside T_rho " + ctx.region_text());
}

double limit_v(const TransformContext& ctx, double theta) {
  return theta == 0.0 ? ctx.r_extended(0.0) : ctx.v_of_theta(theta);
}

std::vector<std::size_t> tracked_coords(const ExperimentConfig& cfg, std::size_t n) {
  if (!cfg.tracked.empty()) return cfg.tracked;
  return {0, n - 1};
}

int cmd_transforms(const ExperimentConfig& cfg, const TransformContext& ctx, Collector& out) {
  std::vector<double> gammas = cfg.gammas;
  if (gammas.empty()) {
    if (ctx.measure().density()) {
      for (int k = 0; k <= 4; ++k) gammas.push_back(ctx.gamma_max() * k / 4.0);
    } else {
      for (const auto& a : ctx.measure().atoms()) gammas.push_back(a.location);
    }
  }
  CsvTable table({"theta", "v", "f_limit", "gamma", "sigma2"});
  for (double theta : cfg.thetas) {
    require_region(ctx, theta);
    const double v = limit_v(ctx, theta);
    const double f = ctx.free_energy_limit(theta);
    for (double gamma : gammas) table.add(theta, v, f, gamma, theta == 0.0 ? 1.0 : ctx.sigma2(theta, gamma));
  }
  out.csv("transforms.csv", table);
  return 0;
}

int cmd_sample(const ExperimentConfig& cfg, const TransformContext& ctx, Collector& out) {
  struct Job {
    std::size_t theta_index;
    std::size_t n;
    std::size_t chain;
  };
  std::vector<Job> jobs;
  for (std::size_t k = 0; k < cfg.thetas.size(); ++k)
    for (auto n : cfg.sizes)
      for (std::size_t c = 0; c < cfg.chain.n_chains; ++c) jobs.push_back({k, n, c});

  // one model per (theta, N); the T_rho warning is printed once each
  std::map<std::pair<std::size_t, std::size_t>, ModelInstance> models;
  for (std::size_t k = 0; k < cfg.thetas.size(); ++k)
    for (auto n : cfg.sizes)
      models.emplace(std::pair{k, n},
                     ModelInstance::from_context(ctx, n, cfg.thetas[k], ModelInstance::ThetaCheck::warn));

  auto results = parallel_map(jobs.size(), cfg.jobs, [&](std::size_t i) {
    const auto& job = jobs[i];
    ChainConfig chain = cfg.chain;
    chain.tracked_coords = tracked_coords(cfg, job.n);
    return gibbs_chain(models.at({job.theta_index, job.n}), chain, job.chain);
  });

  std::size_t i = 0;
  for (std::size_t k = 0; k < cfg.thetas.size(); ++k) {
    for (auto n : cfg.sizes) {
      const auto coords = tracked_coords(cfg, n);
      const std::string stem = "sample_N" + std::to_string(n) + "_" + theta_label(k);
      std::vector<ChainResult> chains(results.begin() + static_cast<std::ptrdiff_t>(i),
                                      results.begin() + static_cast<std::ptrdiff_t>(i + cfg.chain.n_chains));
      i += cfg.chain.n_chains;
      for (std::size_t c = 0; c < chains.size(); ++c) {
        std::vector<std::string> header{"sweep", "h_N", "norm_sq"};
        for (auto d : coords) header.push_back("g_" + std::to_string(d));
        CsvTable table(header);
        const auto& r = chains[c];
        for (std::size_t t = 0; t < r.length(); ++t) {
          std::vector<std::string> row{csv_field(cfg.chain.burn_in_sweeps + (t + 1) * cfg.chain.thin),
                                       csv_field(r.energy_trace[t]), csv_field(r.norm_sq_trace[t])};
          for (auto d : coords) row.push_back(csv_field(r.coord_trace(d)[t]));
          table.add_raw(row);
        }
        out.csv(stem + "_chain" + std::to_string(c) + ".csv", table);
      }
      const auto diag = diagnostics(chains);
      const auto pooled = pool(chains);
      std::string summary;
      auto kv = [&summary](const std::string& key, const std::string& value) { summary += key + "=" + value + "\n"; };
      kv("N", csv_field(n));
      kv("theta", csv_field(cfg.thetas[k]));
      kv("n_chains", csv_field(chains.size()));
      kv("retained_per_chain", csv_field(chains.front().length()));
      kv("mean_h", csv_field(estimate_mean(pooled.energy_trace, pooled.segments).value));
      kv("ess_energy", csv_field(diag.ess));
      kv("rhat_energy", csv_field(diag.rhat));
      kv("acceptance_rate", csv_field(pooled.acceptance_rate));
      for (std::size_t c = 0; c < chains.size(); ++c) {
        kv("chain" + std::to_string(c) + ".acceptance_rate", csv_field(chains[c].acceptance_rate));
        kv("chain" + std::to_string(c) + ".final_step_size", csv_field(chains[c].final_step_size));
      }
      out.text(stem + "_summary.txt", summary);
    }
  }
  return 0;
}

int cmd_verify(const ExperimentConfig& cfg, const TransformContext& ctx, Collector& out) {
  if (cfg.checks.empty()) throw ConfigError("verify.checks is empty; name at least one check");
  for (double theta : cfg.thetas) {
    require_region(ctx, theta);
    const bool variance = std::find(cfg.checks.begin(), cfg.checks.end(), "variance_scaling") != cfg.checks.end();
    if (variance && !variance_regime(ctx.gamma_max(), theta))
      throw ConfigError("variance_scaling needs 2(9+sqrt17) gamma_max |theta| < 1; theta = " + format_number(theta) +
                        ", gamma_max = " + format_number(ctx.gamma_max()));
  }
  CsvTable table({"check_name", "N", "theta", "value", "std_error", "reference", "pass"});
  std::vector<std::string> failures;
  for (double theta : cfg.thetas) {
    Experiment e;
    e.ctx = &ctx;
    e.theta = theta;
    e.sizes = cfg.sizes;
    e.chain = cfg.chain;
    e.tracked = cfg.tracked;
    e.function = cfg.sample_function;
    e.jobs = cfg.jobs;
    for (const auto& name : cfg.checks) {
      CheckResult res;
      try {
        res = run_check(name, e);
      } catch (const std::invalid_argument& err) {
        throw ConfigError(name + ": " + err.what());
      } catch (const std::exception& err) {
        res = {name, false, err.what(), {}};
        res.rows.push_back({name, 0, theta, std::numeric_limits<double>::quiet_NaN(),
                            std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(),
                            false});
      }
      for (const auto& r : res.rows) table.add(r.check, r.n, r.theta, r.value, r.std_error, r.reference, r.pass);
      std::cout << (res.pass ? "PASS " : "FAIL ") << name << " theta=" << format_number(theta) << "\n";
      if (!res.pass) failures.push_back(name + " (theta=" + format_number(theta) + "): " + res.message);
    }
  }
  out.csv("verify.csv", table);
  for (const auto& f : failures) std::cerr << "check failed: " << f << "\n";
  return failures.empty() ? 0 : kExitCheckFailed;
}

int cmd_free_energy(const ExperimentConfig& cfg, const TransformContext& ctx, Collector& out) {
  for (double theta : cfg.thetas) require_region(ctx, theta);
  for (auto n : cfg.sizes) {
    CsvTable table({"theta", "f_est", "f_limit", "err"});
    for (std::size_t k = 0; k < cfg.thetas.size(); ++k) {
      const double theta = cfg.thetas[k];
      const auto grid = thermo_grid(theta);
      const auto inst = ModelInstance::from_context(ctx, n, theta);
      ChainConfig chain = cfg.chain;
      // disjoint seed blocks per theta
      chain.seed = cfg.seed + k * grid.size() * cfg.chain.n_chains;
      const auto res = thermo_integrate(inst, ctx, grid, chain, cfg.jobs);
      for (std::size_t j = 0; j < grid.size(); ++j)
        table.add(grid[j], res.f_path[j].value, ctx.free_energy_limit(grid[j]), res.f_path[j].std_error);
    }
    out.csv("free_energy_N" + std::to_string(n) + ".csv", table);
  }
  return 0;
}

int cmd_sweep(const ExperimentConfig& cfg, const TransformContext& ctx, Collector& out) {
  for (double theta : cfg.thetas) require_region(ctx, theta);
  const auto f = cfg.sample_function;
  struct Leg {
    std::size_t theta_index;
    std::size_t n;
  };
  std::vector<Leg> legs;
  for (std::size_t k = 0; k < cfg.thetas.size(); ++k)
    for (auto n : cfg.sizes) legs.push_back({k, n});
  auto results = parallel_map(legs.size(), cfg.jobs, [&](std::size_t i) {
    ChainConfig chain = cfg.chain;
    chain.seed = cfg.seed + i * cfg.chain.n_chains;
    chain.sample_functions = {f};
    const auto inst = ModelInstance::from_context(ctx, legs[i].n, cfg.thetas[legs[i].theta_index]);
    return run_gibbs(inst, chain);
  });
  CsvTable table({"N", "theta", "v", "mean_h", "mean_h_se", "a_N", "a_N_se", "function", "F_limit", "mean_F",
                  "mean_F_se", "var_F", "ess_energy", "rhat_energy", "acceptance_rate"});
  for (std::size_t i = 0; i < legs.size(); ++i) {
    const double theta = cfg.thetas[legs[i].theta_index];
    const double v = limit_v(ctx, theta);
    const auto m = estimate_energy_moments(results[i], v);
    const auto s = empirical_sample_mean(results[i], f);
    const double limit = sample_mean_limit(ctx, theta, [f](double x) { return apply(f, x); });
    table.add(legs[i].n, theta, v, m.mean_h.value, m.mean_h.std_error, m.a_n.value, m.a_n.std_error, to_string(f),
              limit, s.mean.value, s.mean.std_error, s.variance, results[i].ess_energy, results[i].rhat_energy,
              results[i].acceptance_rate);
  }
  out.csv("sweep.csv", table);
  return 0;
}

int run(const std::string& sub, const Flags& flags) {
  ExperimentConfig cfg;
  std::optional<TransformContext> ctx;
  Collector out;
  try {
    cfg = load(flags);
    ctx.emplace(make_context(cfg));
    out.dir = cfg.output;
    std::error_code ec;
    fs::create_directories(out.dir, ec);
    if (ec || !fs::is_directory(out.dir)) throw ConfigError("cannot create output directory '" + cfg.output + "'");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  int code = 0;
  try {
    if (sub == "transforms") code = cmd_transforms(cfg, *ctx, out);
    else if (sub == "sample") code = cmd_sample(cfg, *ctx, out);
    else if (sub == "verify") code = cmd_verify(cfg, *ctx, out);
    else if (sub == "free-energy") code = cmd_free_energy(cfg, *ctx, out);
    else if (sub == "sweep") code = cmd_sweep(cfg, *ctx, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << sub << " failed: " << e.what() << "\n";
    return kExitCheckFailed;
  }

  auto manifest = to_json(cfg);
  manifest["manifest"] = {{"version", kVersion}, {"subcommand", sub}, {"artifacts", out.artifacts}};
  std::ofstream(out.dir / "manifest.json", std::ios::binary | std::ios::trunc) << manifest.dump(2) << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symmetric spherical spin glass: transforms, sampling and verification"};
  app.require_subcommand(1);
  Flags flags;
  const std::vector<std::pair<std::string, std::string>> subs{
      {"transforms", "Tabulate v(theta), the free-energy limit and sigma^2_gamma"},
      {"sample", "Run Gibbs chains and write traces"},
      {"verify", "Run the configured checks"},
      {"free-energy", "Thermodynamic integration against the limit"},
      {"sweep", "Per-N energy and sample-mean statistics"}};
  for (const auto& [name, help] : subs) {
    auto* cmd = app.add_subcommand(name, help);
    cmd->add_option("--config", flags.config, "Experiment config (JSON)")->required();
    cmd->add_option("--seed", flags.seed, "Override the config seed");
    cmd->add_option("--jobs", flags.jobs, "Concurrent chain legs")->check(CLI::PositiveNumber);
    cmd->add_option("--out", flags.out, std::string("Output directory (default: $") + kOutEnv + " or ssg_out)");
    cmd->add_option("--override", flags.overrides, "Set section.key=value; repeatable");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  return run(app.get_subcommands().front()->get_name(), flags);
}
