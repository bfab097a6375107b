#pragma once

// Experiment configuration: a JSON document with one section per module.
//
//   {
//     "measure":     {"name": "two_atom", "params": {"weight": 0.5}}   or {"atoms": [[0, 0.5], [1, 0.5]]}
//     "model":       {"theta": 0.5 | [..], "N": 400 | "N_list": [..], "tracked": "auto" | [..],
//                     "sample_function": "tanh"}
//     "chain":       {"n_sweeps", "burn_in_sweeps", "thin", "step_size", "adapt", "n_chains"}
//     "transforms":  {"root_tolerance", "bracket_cap", "edge_divergence_ratio", "gammas": "auto" | [..]}
//     "verify":      {"checks": [..]}
//     "seed": 0, "jobs": 1, "output": "dir"
//   }
//
// Unknown keys anywhere are errors. A "manifest" section, written by the CLI
// next to its outputs, is accepted and ignored so a manifest can be fed back
// as a config.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssg/checks.hpp"
#include "ssg/sampler.hpp"
#include "ssg/spectra.hpp"
#include "ssg/transforms.hpp"

namespace ssg {

inline constexpr const char* kVersion = "0.1.0";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MeasureSpec {
  std::string name;  // empty when atoms are given
  std::map<std::string, double> params;
  std::vector<Atom> atoms;
  std::size_t density_nodes = 512;
};

struct ExperimentConfig {
  MeasureSpec measure;
  std::vector<double> thetas{0.5};
  bool theta_is_grid = false;
  std::vector<std::size_t> sizes{400};
  bool sizes_is_list = false;
  std::vector<std::size_t> tracked;  // empty: auto
  SampleFunction sample_function = SampleFunction::tanh;
  ChainConfig chain;
  TransformOptions transforms;
  std::vector<double> gammas;  // empty: auto
  std::vector<std::string> checks;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string output;
};

namespace config_detail {

using nlohmann::json;

inline void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : obj.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* x) { return k == x; }))
      throw ConfigError("unknown key '" + (where.empty() ? k : where + "." + k) + "'");
  }
}

template <typename T>
T get(const json& obj, const std::string& where, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

inline std::size_t get_count(const json& obj, const std::string& where, const char* key, std::size_t fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_unsigned()) throw ConfigError(where + "." + key + " must be a non-negative integer");
  return v.get<std::size_t>();
}

inline std::vector<std::size_t> count_list(const json& v, const std::string& what) {
  if (!v.is_array() || v.empty()) throw ConfigError(what + " must be a non-empty array of integers");
  std::vector<std::size_t> out;
  for (const auto& x : v) {
    if (!x.is_number_unsigned()) throw ConfigError(what + " must contain non-negative integers");
    out.push_back(x.get<std::size_t>());
  }
  return out;
}

inline std::vector<double> real_list(const json& v, const std::string& what) {
  if (!v.is_array() || v.empty()) throw ConfigError(what + " must be a non-empty array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ConfigError(what + " must contain numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace config_detail

/// Parse and validate. Nothing is computed here beyond building the measure
/// name lookups.
inline ExperimentConfig parse_config(const nlohmann::json& root) {
  using namespace config_detail;
  only_keys(root, "", {"measure", "model", "chain", "transforms", "verify", "seed", "jobs", "output", "manifest"});
  ExperimentConfig cfg;

  if (!root.contains("measure")) throw ConfigError("missing section 'measure'");
  const auto& m = root.at("measure");
  only_keys(m, "measure", {"name", "params", "atoms", "density_nodes"});
  cfg.measure.density_nodes = get_count(m, "measure", "density_nodes", 512);
  if (m.contains("atoms") == m.contains("name")) throw ConfigError("measure needs exactly one of 'name' or 'atoms'");
  if (m.contains("name")) {
    cfg.measure.name = get<std::string>(m, "measure", "name", "");
    if (m.contains("params")) {
      const auto& p = m.at("params");
      if (!p.is_object()) throw ConfigError("measure.params must be an object");
      for (const auto& [k, v] : p.items()) {
        if (!v.is_number()) throw ConfigError("measure.params." + k + " must be a number");
        cfg.measure.params[k] = v.get<double>();
      }
    }
  } else {
    if (m.contains("params")) throw ConfigError("measure.params only applies to named measures");
    const auto& atoms = m.at("atoms");
    if (!atoms.is_array() || atoms.empty()) throw ConfigError("measure.atoms must be a non-empty array");
    for (const auto& a : atoms) {
      if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number())
        throw ConfigError("measure.atoms entries must be [location, weight]");
      cfg.measure.atoms.push_back({a[0].get<double>(), a[1].get<double>()});
    }
  }

  const json model = root.value("model", json::object());
  only_keys(model, "model", {"theta", "N", "N_list", "tracked", "sample_function"});
  if (model.contains("theta")) {
    const auto& t = model.at("theta");
    if (t.is_number()) {
      cfg.thetas = {t.get<double>()};
    } else {
      cfg.thetas = real_list(t, "model.theta");
      cfg.theta_is_grid = true;
    }
  }
  for (double t : cfg.thetas)
    if (!std::isfinite(t)) throw ConfigError("model.theta must be finite");
  if (model.contains("N") && model.contains("N_list")) throw ConfigError("model takes 'N' or 'N_list', not both");
  if (model.contains("N")) cfg.sizes = {get_count(model, "model", "N", 0)};
  if (model.contains("N_list")) {
    cfg.sizes = count_list(model.at("N_list"), "model.N_list");
    cfg.sizes_is_list = true;
  }
  for (auto n : cfg.sizes)
    if (n < 2) throw ConfigError("model N must be at least 2");
  if (model.contains("tracked")) {
    const auto& t = model.at("tracked");
    if (t.is_string()) {
      if (t.get<std::string>() != "auto") throw ConfigError("model.tracked must be \"auto\" or an index array");
    } else {
      cfg.tracked = count_list(t, "model.tracked");
      for (auto d : cfg.tracked)
        for (auto n : cfg.sizes)
          if (d >= n) throw ConfigError("model.tracked index " + std::to_string(d) + " >= N = " + std::to_string(n));
    }
  }
  try {
    cfg.sample_function = parse_sample_function(get<std::string>(model, "model", "sample_function", "tanh"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model.sample_function: ") + e.what());
  }

  const json chain = root.value("chain", json::object());
  only_keys(chain, "chain", {"n_sweeps", "burn_in_sweeps", "thin", "step_size", "adapt", "n_chains"});
  cfg.chain.n_sweeps = get_count(chain, "chain", "n_sweeps", cfg.chain.n_sweeps);
  cfg.chain.burn_in_sweeps = get_count(chain, "chain", "burn_in_sweeps", cfg.chain.burn_in_sweeps);
  cfg.chain.thin = get_count(chain, "chain", "thin", cfg.chain.thin);
  cfg.chain.step_size = get<double>(chain, "chain", "step_size", cfg.chain.step_size);
  cfg.chain.adapt = get<bool>(chain, "chain", "adapt", cfg.chain.adapt);
  cfg.chain.n_chains = get_count(chain, "chain", "n_chains", cfg.chain.n_chains);
  try {
    cfg.chain.validate(cfg.sizes.front());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("chain: ") + e.what());
  }

  const json tr = root.value("transforms", json::object());
  only_keys(tr, "transforms", {"root_tolerance", "bracket_cap", "edge_divergence_ratio", "gammas"});
  cfg.transforms.root_tolerance = get<double>(tr, "transforms", "root_tolerance", cfg.transforms.root_tolerance);
  cfg.transforms.bracket_cap = get<double>(tr, "transforms", "bracket_cap", cfg.transforms.bracket_cap);
  cfg.transforms.edge_divergence_ratio =
      get<double>(tr, "transforms", "edge_divergence_ratio", cfg.transforms.edge_divergence_ratio);
  if (!(cfg.transforms.root_tolerance > 0.0) || !(cfg.transforms.bracket_cap > 0.0) ||
      !(cfg.transforms.edge_divergence_ratio > 0.0))
    throw ConfigError("transforms tolerances must be positive");
  if (tr.contains("gammas")) {
    const auto& g = tr.at("gammas");
    if (g.is_string()) {
      if (g.get<std::string>() != "auto") throw ConfigError("transforms.gammas must be \"auto\" or a number array");
    } else {
      cfg.gammas = real_list(g, "transforms.gammas");
    }
  }

  const json verify = root.value("verify", json::object());
  only_keys(verify, "verify", {"checks"});
  if (verify.contains("checks")) {
    const auto& c = verify.at("checks");
    if (!c.is_array()) throw ConfigError("verify.checks must be an array of names");
    for (const auto& x : c) {
      if (!x.is_string()) throw ConfigError("verify.checks must contain strings");
      const auto name = x.get<std::string>();
      const auto& known = check_names();
      if (std::find(known.begin(), known.end(), name) == known.end()) {
        std::string list;
        for (const auto& k : known) list += (list.empty() ? "" : ", ") + k;
        throw ConfigError("unknown check '" + name + "' (known: " + list + ")");
      }
      cfg.checks.push_back(name);
    }
  }

  if (root.contains("seed")) {
    if (!root.at("seed").is_number_unsigned()) throw ConfigError("seed must be a non-negative integer");
    cfg.seed = root.at("seed").get<std::uint64_t>();
  }
  cfg.jobs = get_count(root, "", "jobs", 1);
  if (cfg.jobs == 0) throw ConfigError("jobs must be positive");
  cfg.output = get<std::string>(root, "", "output", "");
  return cfg;
}

/// Fully resolved config, every default spelled out. parse_config(to_json(c)) == c.
inline nlohmann::json to_json(const ExperimentConfig& cfg) {
  using nlohmann::json;
  json measure = json::object();
  if (cfg.measure.atoms.empty()) {
    measure["name"] = cfg.measure.name;
    json params = json::object();
    for (const auto& [k, v] : cfg.measure.params) params[k] = v;
    measure["params"] = params;
  } else {
    json atoms = json::array();
    for (const auto& a : cfg.measure.atoms) atoms.push_back({a.location, a.weight});
    measure["atoms"] = atoms;
  }
  measure["density_nodes"] = cfg.measure.density_nodes;

  json model = json::object();
  model["theta"] = cfg.theta_is_grid ? json(cfg.thetas) : json(cfg.thetas.front());
  if (cfg.sizes_is_list)
    model["N_list"] = cfg.sizes;
  else
    model["N"] = cfg.sizes.front();
  model["tracked"] = cfg.tracked.empty() ? json("auto") : json(cfg.tracked);
  model["sample_function"] = to_string(cfg.sample_function);

  json chain = {{"n_sweeps", cfg.chain.n_sweeps},   {"burn_in_sweeps", cfg.chain.burn_in_sweeps},
                {"thin", cfg.chain.thin},           {"step_size", cfg.chain.step_size},
                {"adapt", cfg.chain.adapt},         {"n_chains", cfg.chain.n_chains}};
  json transforms = {{"root_tolerance", cfg.transforms.root_tolerance},
                     {"bracket_cap", cfg.transforms.bracket_cap},
                     {"edge_divergence_ratio", cfg.transforms.edge_divergence_ratio},
                     {"gammas", cfg.gammas.empty() ? json("auto") : json(cfg.gammas)}};
  return json{{"measure", measure},
              {"model", model},
              {"chain", chain},
              {"transforms", transforms},
              {"verify", {{"checks", cfg.checks}}},
              {"seed", cfg.seed},
              {"jobs", cfg.jobs},
              {"output", cfg.output}};
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  try {
    return nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

/// Apply "a.b.c=value". The value is read as JSON when it parses as JSON
/// and as a plain string otherwise; null removes the key.
inline void apply_override(nlohmann::json& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  auto value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  nlohmann::json* node = &root;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ConfigError("override key '" + path + "' has an empty component");
    parts.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) throw ConfigError("override key '" + path + "' descends into a non-object");
    node = &(*node)[parts[i]];
    if (node->is_null()) *node = nlohmann::json::object();
  }
  if (!node->is_object()) throw ConfigError("override key '" + path + "' descends into a non-object");
  if (value.is_null())
    node->erase(parts.back());
  else
    (*node)[parts.back()] = value;
}

inline SpectralMeasure make_measure(const MeasureSpec& spec) {
  try {
    if (!spec.atoms.empty()) return atomic_measure(spec.atoms);
    return builtin_measure(spec.name, spec.params, spec.density_nodes);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("measure: ") + e.what());
  }
}

inline TransformContext make_context(const ExperimentConfig& cfg) {
  try {
    return TransformContext(make_measure(cfg.measure), cfg.transforms);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("measure: ") + e.what());
  }
}

}  // namespace ssg
