#ifndef LGCP_IO_CONFIG_HPP
#define LGCP_IO_CONFIG_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lgcp/error.hpp"

namespace lgcp::io {

enum class KeyType { integer, real, boolean, text, real_list, text_list };

struct KeySpec {
  std::string name;
  KeyType type;
  std::string fallback;  // empty: no default
  std::string help;
};

/// Every accepted key. Anything else is rejected.
inline const std::vector<KeySpec>& schema() {
  static const std::vector<KeySpec> keys = {
      {"run.seed", KeyType::integer, "1", "master RNG seed"},
      {"run.input", KeyType::text, "", "point pattern CSV (x,y[,mark][,t])"},
      {"run.output", KeyType::text, "out", "output directory"},

      {"grid.xmin", KeyType::real, "0", "window"},
      {"grid.ymin", KeyType::real, "0", "window"},
      {"grid.xmax", KeyType::real, "", "window"},
      {"grid.ymax", KeyType::real, "", "window"},
      {"grid.nx", KeyType::integer, "32", "cells along x"},
      {"grid.ny", KeyType::integer, "32", "cells along y"},
      {"grid.extension", KeyType::real, "2", "torus extension factor (>= 2)"},

      {"cov.family", KeyType::text, "exponential", "exponential | matern"},
      {"cov.sigma", KeyType::real, "1", "field standard deviation"},
      {"cov.phi", KeyType::real, "10", "correlation range"},
      {"cov.kappa", KeyType::real, "0.5", "Matern shape"},
      {"cov.rho", KeyType::real, "0", "temporal correlation per step (spacetime)"},

      {"model.kind", KeyType::text, "unitype", "unitype | multitype | aggregated | spacetime"},
      {"model.beta0", KeyType::real_list, "", "intercept(s); one per type for multitype"},
      {"model.beta", KeyType::real_list, "", "covariate coefficients (simulate)"},
      {"model.covariates", KeyType::text_list, "", "per-cell covariate rasters"},
      {"model.covariate_names", KeyType::text_list, "", "names for the covariates"},
      {"model.offset", KeyType::text, "", "offset raster d(x)"},
      {"model.regions", KeyType::text, "", "region map raster (0 = outside)"},
      {"model.counts", KeyType::text, "", "region counts CSV (region_id,count)"},
      {"model.types", KeyType::integer, "2", "number of types (multitype)"},
      {"model.steps", KeyType::integer, "1", "time steps (spacetime)"},
      {"model.per_type_cov", KeyType::boolean, "false", "separate (sigma, phi) per type"},
      {"model.field", KeyType::boolean, "true", "false fits a Poisson model"},

      {"mcmc.burnin", KeyType::integer, "1000", ""},
      {"mcmc.iters", KeyType::integer, "10000", ""},
      {"mcmc.thin", KeyType::integer, "10", ""},
      {"mcmc.seed", KeyType::integer, "", "overrides run.seed for the chains"},
      {"mcmc.target_accept", KeyType::real, "0.574", ""},
      {"mcmc.c", KeyType::real, "0.4", "theta-block scaling factor"},
      {"mcmc.adapt_a", KeyType::real, "0.3", "Robbins-Monro gain"},
      {"mcmc.h0", KeyType::real, "1", "initial global scale"},
      {"mcmc.chains", KeyType::integer, "1", "independent chains"},
      {"mcmc.init", KeyType::text, "moments", "moments | config"},

      {"prior.log_sigma_mean", KeyType::real, "0", ""},
      {"prior.log_sigma_var", KeyType::real, "0.15", "a variance"},
      {"prior.log_phi_mean", KeyType::real, "2.302585092994046", "log 10"},
      {"prior.log_phi_var", KeyType::real, "0.15", "a variance"},
      {"prior.beta_mean", KeyType::real, "0", ""},
      {"prior.beta_var", KeyType::real, "1000000", ""},

      {"kfit.u0", KeyType::real, "", "upper limit; default a quarter of the shorter side"},
      {"kfit.c", KeyType::real, "0.25", "power in the discrepancy"},
      {"kfit.weight_power", KeyType::real, "0", "w(u) = u^p"},
      {"kfit.n_bins", KeyType::integer, "100", "K-hat grid steps up to u0"},

      {"mcmle.sims", KeyType::integer, "1000", ""},
      {"mcmle.pilot", KeyType::integer, "4000", ""},
      {"mcmle.theta0", KeyType::real_list, "", "beta,sigma,phi"},
      {"mcmle.reanchor", KeyType::integer, "0", ""},
      {"mcmle.box_beta", KeyType::real, "2", ""},
      {"mcmle.box_prior_sds", KeyType::real, "2", ""},

      {"predict.chain", KeyType::text, "", "directory written by fit"},
      {"predict.functional", KeyType::text, "intensity", "intensity | exp_s | relative_risk"},
      {"predict.percentile", KeyType::real_list, "", "quantile levels"},
      {"predict.exceed", KeyType::real_list, "", "exceedance thresholds"},
      {"predict.direction", KeyType::text, "above", "above | below"},
      {"predict.segregation_c", KeyType::real, "0.8", ""},
      {"predict.segregation_q", KeyType::real_list, "0.6,0.7,0.8,0.9", ""},
      {"predict.risk_threshold", KeyType::real, "1.1", ""},
      {"predict.min_samples", KeyType::integer, "100", ""},
      {"predict.csv", KeyType::boolean, "false", "also write ix,iy,value CSVs"},
  };
  return keys;
}

inline const KeySpec* find_key(const std::string& name) {
  for (const auto& k : schema())
    if (k.name == name) return &k;
  return nullptr;
}

namespace detail {
inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline double parse_real(const std::string& s, const std::string& ctx) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InvalidInput(ctx + ": '" + s + "' is not a number");
  }
}

inline long long parse_integer(const std::string& s, const std::string& ctx) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InvalidInput(ctx + ": '" + s + "' is not an integer");
  }
}

inline bool parse_bool(const std::string& s, const std::string& ctx) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw InvalidInput(ctx + ": '" + s + "' is not a boolean");
}

inline void check_type(const KeySpec& k, const std::string& v, const std::string& ctx) {
  switch (k.type) {
    case KeyType::integer: parse_integer(v, ctx); break;
    case KeyType::real: parse_real(v, ctx); break;
    case KeyType::boolean: parse_bool(v, ctx); break;
    case KeyType::real_list:
      for (const auto& p : split(v, ',')) parse_real(p, ctx);
      break;
    case KeyType::text:
    case KeyType::text_list: break;
  }
}
}  // namespace detail

/// Flat `section.key = value` settings validated against schema().
class Config {
 public:
  /// Parse text; `source` names the file in error messages.
  static Config parse(const std::string& text, const std::string& source = "config") {
    Config c;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      const std::string ctx = source + ":" + std::to_string(lineno);
      if (eq == std::string::npos) throw InvalidInput(ctx + ": expected 'section.key = value'");
      c.set(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)), ctx);
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  void set(const std::string& key, const std::string& value, const std::string& ctx = "setting") {
    const KeySpec* k = find_key(key);
    if (!k) throw InvalidInput(ctx + ": unknown key '" + key + "'");
    detail::check_type(*k, value, ctx + " (" + key + ")");
    values_[key] = value;
  }

  /// Parse "key=value" as given on the command line.
  void set_assignment(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InvalidInput("--set expects key=value, got '" + kv + "'");
    set(detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)), "--set");
  }

  bool has(const std::string& key) const {
    require_known(key);
    return values_.count(key) > 0;
  }

  /// Explicit value, else the schema default, else empty.
  std::string raw(const std::string& key) const {
    const KeySpec* k = require_known(key);
    auto it = values_.find(key);
    return it != values_.end() ? it->second : k->fallback;
  }

  bool present(const std::string& key) const { return !raw(key).empty(); }

  std::string text(const std::string& key) const { return raw(key); }

  double real(const std::string& key) const {
    return detail::parse_real(require(key), key);
  }
  long long integer(const std::string& key) const {
    return detail::parse_integer(require(key), key);
  }
  bool boolean(const std::string& key) const {
    return detail::parse_bool(require(key), key);
  }
  std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    const std::string v = raw(key);
    if (v.empty()) return out;
    for (const auto& p : detail::split(v, ',')) out.push_back(detail::parse_real(p, key));
    return out;
  }
  std::vector<std::string> texts(const std::string& key) const {
    const std::string v = raw(key);
    if (v.empty()) return {};
    return detail::split(v, ',');
  }

  /// Every key with its effective value, in schema order.
  std::string snapshot() const {
    std::ostringstream os;
    for (const auto& k : schema()) {
      const std::string v = raw(k.name);
      if (!v.empty()) os << k.name << " = " << v << "\n";
    }
    return os.str();
  }

  std::map<std::string, std::string> effective() const {
    std::map<std::string, std::string> out;
    for (const auto& k : schema()) {
      const std::string v = raw(k.name);
      if (!v.empty()) out[k.name] = v;
    }
    return out;
  }

 private:
  const KeySpec* require_known(const std::string& key) const {
    const KeySpec* k = find_key(key);
    if (!k) throw InvalidInput("internal: unknown config key '" + key + "'");
    return k;
  }
  std::string require(const std::string& key) const {
    const std::string v = raw(key);
    if (v.empty()) throw InvalidInput("missing required setting '" + key + "'");
    return v;
  }

  std::map<std::string, std::string> values_;
};

}  // namespace lgcp::io

#endif  // LGCP_IO_CONFIG_HPP
