#ifndef LGCP_IO_COMMANDS_HPP
#define LGCP_IO_COMMANDS_HPP

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "lgcp/covariance.hpp"
#include "lgcp/error.hpp"
#include "lgcp/grid.hpp"
#include "lgcp/io/config.hpp"
#include "lgcp/io/csv.hpp"
#include "lgcp/io/manifest.hpp"
#include "lgcp/mc_likelihood.hpp"
#include "lgcp/mcmc.hpp"
#include "lgcp/models.hpp"
#include "lgcp/prediction.hpp"
#include "lgcp/raster.hpp"
#include "lgcp/summary_stats.hpp"
#include "lgcp/targets.hpp"

namespace lgcp::io {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Building blocks from a config

enum class Kind { unitype, multitype, aggregated, spacetime };

inline Kind model_kind(const Config& c) {
  const std::string k = c.text("model.kind");
  if (k == "unitype") return Kind::unitype;
  if (k == "multitype") return Kind::multitype;
  if (k == "aggregated") return Kind::aggregated;
  if (k == "spacetime") return Kind::spacetime;
  throw InvalidInput("model.kind: '" + k + "' is not one of unitype, multitype, aggregated, spacetime");
}

inline Window window_of(const Config& c) {
  return Window{c.real("grid.xmin"), c.real("grid.ymin"), c.real("grid.xmax"), c.real("grid.ymax")};
}

inline GridSpec grid_of(const Config& c) {
  return GridSpec::build(window_of(c), static_cast<int>(c.integer("grid.nx")),
                         static_cast<int>(c.integer("grid.ny")), c.real("grid.extension"));
}

inline CovarianceModel cov_of(const Config& c) {
  const double sigma = c.real("cov.sigma");
  if (!(sigma >= 0.0)) throw InvalidInput("cov.sigma must be >= 0");
  CovarianceModel m;
  m.family = parse_family(c.text("cov.family"));
  m.sigma2 = sigma * sigma;
  m.phi = c.real("cov.phi");
  m.kappa = m.family == Family::exponential ? 0.5 : c.real("cov.kappa");
  m.validate();
  return m;
}

inline std::uint64_t seed_of(const Config& c, bool chains = false) {
  const long long s = chains && c.present("mcmc.seed") ? c.integer("mcmc.seed") : c.integer("run.seed");
  return static_cast<std::uint64_t>(s);
}

inline Raster conforming_raster(const std::string& path, const GridSpec& g, const std::string& what) {
  Raster r = read_esri_ascii(path);
  check_conforms(r, g, what + " '" + path + "'");
  return r;
}

/// Design matrix with an intercept column and one column per covariate
/// raster; missing covariate values are errors unless the cell is outside
/// the data.
inline Matrix design_of(const Config& c, const GridSpec& g,
                        const std::vector<std::uint8_t>* observed = nullptr) {
  const auto paths = c.texts("model.covariates");
  Matrix z = Matrix::Ones(static_cast<Eigen::Index>(g.n_obs()), static_cast<Eigen::Index>(paths.size() + 1));
  for (std::size_t j = 0; j < paths.size(); ++j) {
    const Raster r = conforming_raster(paths[j], g, "covariate");
    for (std::size_t k = 0; k < g.n_obs(); ++k) {
      double v = r.values[k];
      if (!std::isfinite(v)) {
        if (observed && !(*observed)[k]) v = 0.0;
        else throw InvalidInput("covariate '" + paths[j] + "': no value in cell " + std::to_string(k));
      }
      z(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j + 1)) = v;
    }
  }
  return z;
}

inline std::vector<std::string> covariate_names_of(const Config& c) {
  auto names = c.texts("model.covariate_names");
  const auto paths = c.texts("model.covariates");
  if (names.empty())
    for (const auto& p : paths) names.push_back(fs::path(p).stem().string());
  if (names.size() != paths.size())
    throw InvalidInput("model.covariate_names must name every covariate");
  return names;
}

inline Vector offset_of(const Config& c, const GridSpec& g) {
  Vector d = Vector::Ones(static_cast<Eigen::Index>(g.n_obs()));
  if (!c.present("model.offset")) return d;
  const Raster r = conforming_raster(c.text("model.offset"), g, "offset");
  for (std::size_t k = 0; k < g.n_obs(); ++k) {
    const double v = r.values[k];
    if (std::isfinite(v) && v < 0.0) throw InvalidInput("offset: negative value in cell " + std::to_string(k));
    d[static_cast<Eigen::Index>(k)] = std::isfinite(v) ? v : 0.0;
  }
  return d;
}

inline std::vector<int> region_map_of(const Config& c, const GridSpec& g) {
  const Raster r = conforming_raster(c.text("model.regions"), g, "region map");
  std::vector<int> ids(g.n_obs(), 0);
  for (std::size_t k = 0; k < g.n_obs(); ++k) {
    const double v = r.values[k];
    if (!std::isfinite(v)) continue;
    if (v < 0 || v != std::floor(v))
      throw InvalidInput("region map: cell " + std::to_string(k) + " holds '" + lgcp::detail::fmt17(v) +
                         "', expected a non-negative integer id");
    ids[k] = static_cast<int>(v);
  }
  return ids;
}

inline std::vector<double> beta0_of(const Config& c, std::size_t n, const char* what) {
  auto b = c.reals("model.beta0");
  if (b.empty()) throw InvalidInput(std::string(what) + ": model.beta0 is required");
  if (b.size() == 1 && n > 1) b.assign(n, b[0]);
  if (b.size() != n)
    throw InvalidInput(std::string(what) + ": model.beta0 needs " + std::to_string(n) + " values");
  return b;
}

inline Raster raster_from(const GridSpec& g, const Vector& obs_values) {
  Raster r = Raster::on(g);
  for (std::size_t k = 0; k < g.n_obs(); ++k) r.values[k] = obs_values[static_cast<Eigen::Index>(k)];
  return r;
}

inline Raster raster_from_ext(const GridSpec& g, const Vector& ext) {
  Raster r = Raster::on(g);
  for (std::size_t k = 0; k < g.n_obs(); ++k) r.values[k] = ext[static_cast<Eigen::Index>(g.ext_of_obs(k))];
  return r;
}

inline std::string num_label(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline fs::path output_dir(const Config& c) {
  fs::path d = c.text("run.output");
  fs::create_directories(d);
  return d;
}

// ---------------------------------------------------------------------------
// simulate

/// Forward simulation under the configured model. Writes pattern.csv, the
/// true field(s) and intensities as rasters, counts.csv for aggregated
/// models, run.cfg and manifest.json.
inline int cmd_simulate(const Config& c) {
  const fs::path out = output_dir(c);
  const std::uint64_t seed = seed_of(c);
  RunManifest man("simulate", seed, c.snapshot());
  const GridSpec g = grid_of(c);
  const CovarianceModel cov = cov_of(c);
  FftWorkspace ws(g.ext_ny(), g.ext_nx());
  Rng rng = make_stream(seed, "simulate");
  const Kind kind = model_kind(c);
  Simulation sim;
  std::vector<std::string> field_names;
  std::vector<Raster> intensities;

  if (kind == Kind::unitype || kind == Kind::aggregated) {
    UnitypeModel m = UnitypeModel::intercept_only(g, cov, beta0_of(c, 1, "simulate")[0]);
    m.field = c.boolean("model.field");
    m.design = design_of(c, g);
    const auto bz = c.reals("model.beta");
    if (static_cast<Eigen::Index>(bz.size()) != m.design.cols() - 1)
      throw InvalidInput("model.beta needs one coefficient per covariate");
    m.beta.conservativeResize(m.design.cols());
    for (std::size_t j = 0; j < bz.size(); ++j) m.beta[static_cast<Eigen::Index>(j + 1)] = bz[j];
    m.offset = offset_of(c, g);
    for (const auto& p : c.texts("model.covariates")) man.input(p);
    if (c.present("model.offset")) man.input(c.text("model.offset"));
    sim = simulate(m, rng, ws);
    field_names.push_back("truth_S");
    Raster lam = Raster::on(g);
    for (std::size_t k = 0; k < g.n_obs(); ++k) lam.values[k] = sim.mu[0][static_cast<Eigen::Index>(k)] / g.cell_area();
    intensities.push_back(std::move(lam));
    if (kind == Kind::aggregated) {
      const std::vector<int> ids = region_map_of(c, g);
      man.input(c.text("model.regions"));
      int m_regions = 0;
      for (int id : ids) m_regions = std::max(m_regions, id);
      std::vector<long> totals(static_cast<std::size_t>(m_regions), 0);
      const CellCounts cc = bin_points(sim.pattern, g);
      const auto y = observation_counts(cc, g);
      for (std::size_t k = 0; k < g.n_obs(); ++k)
        if (ids[k] > 0) totals[static_cast<std::size_t>(ids[k] - 1)] += static_cast<long>(y[k]);
      man.output(out, "counts.csv", region_counts_to_csv(totals));
    }
  } else if (kind == Kind::multitype) {
    const int m_types = static_cast<int>(c.integer("model.types"));
    const auto b = beta0_of(c, static_cast<std::size_t>(m_types), "simulate");
    MultitypeModel m;
    m.grid = g;
    m.covs.assign(c.boolean("model.per_type_cov") ? static_cast<std::size_t>(m_types) : 1, cov);
    m.beta = Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size()));
    sim = simulate_multitype(m, rng, ws);
    for (int k = 1; k <= m_types; ++k) {
      field_names.push_back("truth_S_" + std::to_string(k));
      Raster lam = Raster::on(g);
      for (std::size_t i = 0; i < g.n_obs(); ++i)
        lam.values[i] = sim.mu[static_cast<std::size_t>(k - 1)][static_cast<Eigen::Index>(i)] / g.cell_area();
      intensities.push_back(std::move(lam));
    }
  } else {
    const int steps = static_cast<int>(c.integer("model.steps"));
    SeparableSTCovariance st{cov, c.real("cov.rho")};
    STModel m = STModel::uniform(g, steps, st, std::exp(beta0_of(c, 1, "simulate")[0]));
    sim = simulate_st(m, rng, ws);
    for (int t = 0; t < steps; ++t) {
      field_names.push_back("truth_S_t" + std::to_string(t));
      Raster lam = Raster::on(g);
      for (std::size_t i = 0; i < g.n_obs(); ++i)
        lam.values[i] = sim.mu[static_cast<std::size_t>(t)][static_cast<Eigen::Index>(i)] / g.cell_area();
      intensities.push_back(std::move(lam));
    }
  }

  man.output(out, "pattern.csv", pattern_to_csv(sim.pattern));
  for (std::size_t f = 0; f < sim.fields.size(); ++f) {
    man.output(out, field_names[f] + ".asc", to_esri_ascii(raster_from_ext(g, sim.fields[f])));
    std::string lam_name = "truth_intensity" + field_names[f].substr(std::string("truth_S").size()) + ".asc";
    man.output(out, lam_name, to_esri_ascii(intensities[f]));
  }
  man.output(out, "run.cfg", c.snapshot());
  man.note("points", sim.pattern.size());
  man.save(out);
  std::cout << "simulated " << sim.pattern.size() << " points into " << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// kfit

inline KEstimate k_estimate_of(const Config& c, const PointPattern& p, double& u0) {
  const Window& w = p.window;
  const double short_side = std::min(w.width(), w.height());
  u0 = c.present("kfit.u0") ? c.real("kfit.u0") : 0.25 * short_side;
  if (!(u0 > 0.0) || u0 > 0.5 * short_side)
    throw InvalidInput("kfit.u0 must lie in (0, half the shorter window side]");
  return estimate_K(p, u0, static_cast<int>(c.integer("kfit.n_bins")));
}

inline MomentFit moment_fit_of(const Config& c, const PointPattern& p, KEstimate* est_out = nullptr) {
  double u0 = 0.0;
  KEstimate est = k_estimate_of(c, p, u0);
  MomentFitOptions o;
  o.u0 = u0;
  o.c = c.real("kfit.c");
  o.weight = PowerWeight{c.real("kfit.weight_power")};
  o.kappa = c.real("cov.kappa");
  MomentFit fit = fit_moments(est, parse_family(c.text("cov.family")), o, p.window);
  if (est_out) *est_out = std::move(est);
  return fit;
}

inline PointPattern pattern_of(const Config& c, RunManifest* man) {
  if (!c.present("run.input")) throw InvalidInput("run.input (pattern CSV) is required");
  const std::string path = c.text("run.input");
  PointPattern p = read_pattern_csv(path, window_of(c));
  p.validate();
  if (man) man->input(path);
  return p;
}

/// K-hat with translation correction and the least-squares moment fit.
inline int cmd_kfit(const Config& c) {
  const fs::path out = output_dir(c);
  RunManifest man("kfit", seed_of(c), c.snapshot());
  const PointPattern p = pattern_of(c, &man);
  KEstimate est;
  const MomentFit fit = moment_fit_of(c, p, &est);
  CovarianceModel m;
  m.family = parse_family(c.text("cov.family"));
  m.kappa = m.family == Family::exponential ? 0.5 : c.real("cov.kappa");
  m.sigma2 = fit.sigma * fit.sigma;
  m.phi = fit.phi;
  const auto km = theoretical_K_curve(m, est.u);
  std::string csv = "u,k_hat,k_model\n";
  for (std::size_t i = 0; i < est.u.size(); ++i)
    csv += lgcp::detail::fmt17(est.u[i]) + "," + lgcp::detail::fmt17(est.k_hat[i]) + "," +
           lgcp::detail::fmt17(km[i]) + "\n";
  man.output(out, "kfit.csv", csv);
  nlohmann::json j = {{"sigma", fit.sigma}, {"phi", fit.phi}, {"discrepancy", fit.d_min},
                      {"n", p.size()}, {"u0", est.u.back()}, {"c", c.real("kfit.c")}};
  man.output(out, "kfit.json", j.dump(2) + "\n");
  man.save(out);
  std::cout << "sigma " << fit.sigma << " phi " << fit.phi << " D " << fit.d_min << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// fit

inline SamplerConfig sampler_of(const Config& c) {
  SamplerConfig s;
  s.burnin = static_cast<long>(c.integer("mcmc.burnin"));
  s.iterations = static_cast<long>(c.integer("mcmc.iters"));
  s.thin = static_cast<long>(c.integer("mcmc.thin"));
  s.target_accept = c.real("mcmc.target_accept");
  s.c = c.real("mcmc.c");
  s.adapt_a = c.real("mcmc.adapt_a");
  s.h0 = c.real("mcmc.h0");
  s.priors.log_sigma_mean = c.real("prior.log_sigma_mean");
  s.priors.log_sigma_var = c.real("prior.log_sigma_var");
  s.priors.log_phi_mean = c.real("prior.log_phi_mean");
  s.priors.log_phi_var = c.real("prior.log_phi_var");
  s.priors.beta_mean = c.real("prior.beta_mean");
  s.priors.beta_var = c.real("prior.beta_var");
  s.validate();
  return s;
}

inline nlohmann::json diagnostics_json(const Diagnostics& d) {
  nlohmann::json j;
  j["n_samples"] = d.n_samples;
  j["acceptance"] = d.acceptance;
  j["trailing_acceptance"] = d.trailing_acceptance;
  j["target_accept"] = d.target_accept;
  j["random_walk_reference"] = d.random_walk_reference;
  for (const auto& p : d.parameters) {
    nlohmann::json q;
    q["name"] = p.name;
    q["mean"] = p.mean;
    q["degenerate"] = p.degenerate;
    q["poor_mixing"] = p.poor_mixing;
    q["acf"] = p.acf;
    q["trace_head"] = p.trace_head;
    j["parameters"].push_back(q);
  }
  return j;
}

/// What a fitted model needs at prediction time beyond run.cfg.
struct FitSetup {
  Kind kind = Kind::unitype;
  std::vector<std::string> covariate_names;
  double st_rate = 1.0;
};

struct ChainOutput {
  ChainResult result;
  std::string error;
  bool numerical = false;
};

template <class MakeTarget>
std::vector<ChainOutput> run_chains(const Config& c, const SamplerConfig& sc, MakeTarget&& make,
                                    const Vector& beta0, const Vector& log_theta0) {
  const int k = static_cast<int>(c.integer("mcmc.chains"));
  if (k < 1) throw InvalidInput("mcmc.chains must be >= 1");
  const std::uint64_t seed = seed_of(c, true);
  std::vector<ChainOutput> outs(static_cast<std::size_t>(k));
  auto work = [&](int i) {
    try {
      auto target = make(i);
      Rng rng = make_stream(seed, "chain", static_cast<std::uint64_t>(i));
      outs[static_cast<std::size_t>(i)].result =
          run_chain(target, sc, initial_state(target.gamma_dim(), beta0, log_theta0, sc.h0), rng);
    } catch (const NumericalError& e) {
      outs[static_cast<std::size_t>(i)].error = e.what();
      outs[static_cast<std::size_t>(i)].numerical = true;
    } catch (const std::exception& e) {
      outs[static_cast<std::size_t>(i)].error = e.what();
    }
  };
  if (k == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    for (int i = 0; i < k; ++i) threads.emplace_back(work, i);
    for (auto& t : threads) t.join();
  }
  for (int i = 0; i < k; ++i) {
    const auto& o = outs[static_cast<std::size_t>(i)];
    if (!o.error.empty()) {
      const std::string msg = "chain " + std::to_string(i + 1) + ": " + o.error;
      if (o.numerical) throw NumericalError(msg);
      throw InvalidInput(msg);
    }
  }
  return outs;
}

/// Starting (log sigma, log phi) per block from the moment fit or the
/// config; sigma is floored at 0.05 and phi shrunk until the covariance
/// embeds on the grid.
inline Vector theta_init(const Config& c, const GridSpec& g, const PointPattern* p, int blocks,
                         RunManifest& man) {
  double sigma = c.real("cov.sigma"), phi = c.real("cov.phi");
  if (c.text("mcmc.init") == "moments" && p && p->size() >= 2) {
    const MomentFit fit = moment_fit_of(c, *p);
    sigma = fit.sigma;
    phi = fit.phi;
    man.note("moment_fit", {{"sigma", fit.sigma}, {"phi", fit.phi}, {"discrepancy", fit.d_min}});
  } else if (c.text("mcmc.init") != "moments" && c.text("mcmc.init") != "config") {
    throw InvalidInput("mcmc.init must be 'moments' or 'config'");
  }
  sigma = std::max(sigma, 0.05);
  Vector lt(2 * blocks);
  for (int b = 0; b < blocks; ++b) {
    lt[2 * b] = std::log(sigma);
    lt[2 * b + 1] = std::log(phi);
  }
  const Vector start = embeddable_start(cov_of(c), g, lt);
  if (start != lt) man.note("phi_start_shrunk_to", std::exp(start[1]));
  return start;
}

/// Moment-based initialisation, then MCMC. Writes chain.csv (chain_<i>.csv
/// for several chains), matching fields files, S summaries, diagnostics,
/// run.cfg and manifest.json.
inline int cmd_fit(const Config& c) {
  const fs::path out = output_dir(c);
  RunManifest man("fit", seed_of(c, true), c.snapshot());
  const auto t0 = std::chrono::steady_clock::now();
  const GridSpec g = grid_of(c);
  CovarianceModel cov = cov_of(c);
  const SamplerConfig sc = sampler_of(c);
  const Kind kind = model_kind(c);
  FitSetup setup;
  setup.kind = kind;
  std::vector<ChainOutput> chains;
  ChainColumns cols;
  const std::uint64_t seed = seed_of(c, true);

  if (kind == Kind::unitype) {
    const PointPattern p = pattern_of(c, &man);
    UnitypeModel m = UnitypeModel::intercept_only(g, cov, 0.0);
    m.field = c.boolean("model.field");
    m.design = design_of(c, g);
    m.beta = Vector::Zero(m.design.cols());
    m.offset = offset_of(c, g);
    setup.covariate_names = covariate_names_of(c);
    const auto y = observation_counts(bin_points(p, g), g);
    const Vector b0 = default_beta_init(m, y);
    const Vector lt = m.field ? theta_init(c, g, &p, 1, man) : Vector(0);
    chains = run_chains(c, sc, [&](int) { return UnitypeTarget(m, y); }, b0, lt);
    cols = chain_columns(m.beta.size(), m.field ? 1 : 0, setup.covariate_names);
  } else if (kind == Kind::aggregated) {
    UnitypeModel m = UnitypeModel::intercept_only(g, cov, 0.0);
    m.design = design_of(c, g);
    m.beta = Vector::Zero(m.design.cols());
    setup.covariate_names = covariate_names_of(c);
    RegionPartition part;
    part.region_of_cell = region_map_of(c, g);
    if (!c.present("model.counts")) throw InvalidInput("aggregated fit: model.counts is required");
    part.region_totals = parse_region_counts(read_file(c.text("model.counts")), c.text("model.counts"));
    man.input(c.text("model.regions"));
    man.input(c.text("model.counts"));
    if (c.present("model.offset")) {
      const Vector d = offset_of(c, g);
      part.offsets.assign(d.data(), d.data() + d.size());
      man.input(c.text("model.offset"));
    }
    for (const auto& path : c.texts("model.covariates")) man.input(path);
    // Cells outside every region may lack covariates.
    std::vector<std::uint8_t> inside(g.n_obs(), 0);
    for (std::size_t k = 0; k < g.n_obs(); ++k) inside[k] = part.region_of_cell[k] > 0;
    m.design = design_of(c, g, &inside);
    AggregatedTarget proto(m, part);
    const Vector b0 = default_beta_init(proto.inner().model(), proto.inner().counts());
    std::optional<PointPattern> p;
    if (c.present("run.input")) p = pattern_of(c, &man);
    const Vector lt = theta_init(c, g, p ? &*p : nullptr, 1, man);
    chains = run_chains(
        c, sc,
        [&](int i) {
          AggregatedTarget t = proto;
          t.use_stream(make_stream(seed, "augmentation", static_cast<std::uint64_t>(i)));
          return t;
        },
        b0, lt);
    cols = chain_columns(m.beta.size(), 1, setup.covariate_names);
    long audits = 0;
    for (const auto& ch : chains) audits += ch.result.augmentation_audits;
    man.note("augmentation_audits", audits);
  } else if (kind == Kind::multitype) {
    const PointPattern p = pattern_of(c, &man);
    const int m_types = static_cast<int>(c.integer("model.types"));
    MultitypeModel m;
    m.grid = g;
    const int blocks = c.boolean("model.per_type_cov") ? m_types : 1;
    m.covs.assign(static_cast<std::size_t>(blocks), cov);
    m.beta = Vector::Zero(m_types);
    const auto typed = bin_marked(p, g, m_types);
    Vector b0(m_types);
    for (int k = 0; k < m_types; ++k) {
      double n = 0.0;
      for (double v : typed[static_cast<std::size_t>(k)]) n += v;
      b0[k] = std::log(std::max(n, 0.5) / g.window().area());
    }
    const Vector lt = theta_init(c, g, &p, blocks, man);
    chains = run_chains(c, sc, [&](int) { return MultitypeTarget(m, typed); }, b0, lt);
    cols = chain_columns(m_types, blocks, {}, true);
  } else {
    const PointPattern p = pattern_of(c, &man);
    const int steps = static_cast<int>(c.integer("model.steps"));
    const auto counts = bin_timed(p, g, steps);
    setup.st_rate = std::max(static_cast<double>(p.size()), 0.5) / (g.window().area() * steps);
    STModel m = STModel::uniform(g, steps, SeparableSTCovariance{cov, c.real("cov.rho")}, setup.st_rate);
    const Vector lt = theta_init(c, g, &p, 1, man);
    chains = run_chains(c, sc, [&](int) { return SpaceTimeTarget(m, counts); }, Vector(0), lt);
    cols = chain_columns(0, 1);
  }
  man.timing("sampling_seconds",
             std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());

  const bool several = chains.size() > 1;
  nlohmann::json diag;
  for (std::size_t i = 0; i < chains.size(); ++i) {
    const ChainResult& r = chains[i].result;
    const std::string suffix = several ? "_" + std::to_string(i + 1) : "";
    man.output(out, "chain" + suffix + ".csv", chain_to_csv(r.samples, cols));
    man.output(out, "fields" + suffix + ".csv", fields_to_csv(r.samples));
    nlohmann::json dj;
    if (r.samples.size() >= 10) dj = diagnostics_json(diagnostics(r));
    else dj["note"] = "fewer than 10 retained samples; autocorrelations skipped";
    dj["final_h"] = r.final_state.h;
    dj["overflow_rejections"] = r.overflow_rejections;
    dj["embedding_rejections"] = r.embedding_rejections;
    dj["augmentation_audits"] = r.augmentation_audits;
    diag.push_back(dj);
  }
  // Posterior mean and sd of S per field, pooled over chains.
  PosteriorSamples pooled;
  for (const auto& ch : chains)
    pooled.draws.insert(pooled.draws.end(), ch.result.samples.draws.begin(), ch.result.samples.draws.end());
  if (!pooled.empty() && !pooled.draws[0].fields.empty()) {
    const std::size_t nf = pooled.n_fields();
    for (std::size_t f = 0; f < nf; ++f) {
      Vector mean = Vector::Zero(static_cast<Eigen::Index>(g.n_obs()));
      Vector sq = mean;
      for (const Draw& d : pooled.draws) {
        mean += d.fields[f];
        sq += d.fields[f].cwiseProduct(d.fields[f]);
      }
      const double n = static_cast<double>(pooled.size());
      mean /= n;
      Vector var = (sq / n - mean.cwiseProduct(mean)).cwiseMax(0.0);
      if (n > 1) var *= n / (n - 1);
      const std::string suffix = nf > 1 ? "_" + std::to_string(f + 1) : "";
      man.output(out, "S_mean" + suffix + ".asc", to_esri_ascii(raster_from(g, mean)));
      man.output(out, "S_sd" + suffix + ".asc", to_esri_ascii(raster_from(g, var.cwiseSqrt())));
    }
  }
  man.output(out, "diagnostics.json", diag.dump(2) + "\n");
  nlohmann::json mj = {{"kind", c.text("model.kind")},
                       {"covariate_names", setup.covariate_names},
                       {"st_rate", setup.st_rate},
                       {"chains", chains.size()}};
  man.output(out, "model.json", mj.dump(2) + "\n");
  man.output(out, "run.cfg", c.snapshot());
  man.save(out);
  std::cout << "fit: " << pooled.size() << " retained draws";
  if (!chains.empty()) std::cout << ", acceptance " << chains[0].result.final_state.mean_alpha();
  std::cout << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// mcmle

/// Monte Carlo maximum likelihood for the unitype model.
inline int cmd_mcmle(const Config& c) {
  if (model_kind(c) != Kind::unitype) throw InvalidInput("mcmle supports model.kind = unitype only");
  const fs::path out = output_dir(c);
  const std::uint64_t seed = seed_of(c);
  RunManifest man("mcmle", seed, c.snapshot());
  const GridSpec g = grid_of(c);
  const PointPattern p = pattern_of(c, &man);
  UnitypeModel m = UnitypeModel::intercept_only(g, cov_of(c), 0.0);
  m.field = c.boolean("model.field");
  m.design = design_of(c, g);
  m.beta = Vector::Zero(m.design.cols());
  m.offset = offset_of(c, g);
  const auto y = observation_counts(bin_points(p, g), g);
  McTheta t0;
  const auto th = c.reals("mcmle.theta0");
  if (!th.empty()) {
    const std::size_t nb = static_cast<std::size_t>(m.beta.size());
    const std::size_t want = nb + (m.field ? 2 : 0);
    if (th.size() != want)
      throw InvalidInput("mcmle.theta0 needs " + std::to_string(want) + " values (beta" +
                         (m.field ? ",sigma,phi)" : ")"));
    t0.beta = Eigen::Map<const Vector>(th.data(), static_cast<Eigen::Index>(nb));
    if (m.field) {
      if (!(th[nb] > 0) || !(th[nb + 1] > 0)) throw InvalidInput("mcmle.theta0: sigma and phi must be > 0");
      t0.log_sigma = std::log(th[nb]);
      t0.log_phi = std::log(th[nb + 1]);
    }
  } else {
    t0.beta = default_beta_init(m, y);
    if (m.field) {
      const MomentFit fit = moment_fit_of(c, p);
      t0.log_sigma = std::log(std::max(fit.sigma, 0.05));
      t0.log_phi = std::log(fit.phi);
    }
  }
  MCLikelihoodOptions o;
  o.sims = static_cast<long>(c.integer("mcmle.sims"));
  o.pilot = static_cast<long>(c.integer("mcmle.pilot"));
  o.reanchor = static_cast<int>(c.integer("mcmle.reanchor"));
  o.box_beta = c.real("mcmle.box_beta");
  o.box_prior_sds = c.real("mcmle.box_prior_sds");
  o.sampler = sampler_of(c);
  const MCMLEResult r = mc_mle(m, y, t0, o, seed);
  nlohmann::json j;
  j["beta"] = std::vector<double>(r.theta_hat.beta.data(), r.theta_hat.beta.data() + r.theta_hat.beta.size());
  if (m.field) {
    j["sigma"] = r.theta_hat.sigma();
    j["phi"] = r.theta_hat.phi();
  }
  j["loglik_ratio"] = r.value;
  j["ess_conditional"] = r.diagnostics.ess_conditional;
  j["ess_joint"] = r.diagnostics.ess_joint;
  j["at_boundary"] = r.at_boundary;
  j["warnings"] = r.warnings;
  j["anchors"] = r.anchors;
  j["theta0"] = {{"beta", std::vector<double>(t0.beta.data(), t0.beta.data() + t0.beta.size())},
                 {"sigma", t0.sigma()}, {"phi", t0.phi()}};
  man.output(out, "mcmle.json", j.dump(2) + "\n");
  man.save(out);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << j.dump() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// predict / diagnose

inline fs::path chain_dir_of(const Config& c) {
  if (!c.present("predict.chain")) throw InvalidInput("predict.chain (fit output directory) is required");
  fs::path d = c.text("predict.chain");
  if (!fs::is_directory(d)) throw InvalidInput("chain directory '" + d.string() + "' does not exist");
  return d;
}

/// All chains in a fit directory, pooled in chain order.
inline PosteriorSamples load_chains(const fs::path& dir, RunManifest* man) {
  std::vector<std::pair<fs::path, fs::path>> files;
  if (fs::exists(dir / "chain.csv")) {
    files.emplace_back(dir / "chain.csv", dir / "fields.csv");
  } else {
    for (int i = 1; fs::exists(dir / ("chain_" + std::to_string(i) + ".csv")); ++i)
      files.emplace_back(dir / ("chain_" + std::to_string(i) + ".csv"),
                         dir / ("fields_" + std::to_string(i) + ".csv"));
  }
  if (files.empty()) throw InvalidInput("no chain file in '" + dir.string() + "'");
  PosteriorSamples all;
  for (const auto& [ch, fl] : files) {
    if (!fs::exists(fl)) throw InvalidInput("missing fields file '" + fl.string() + "'");
    if (man) {
      man->input(ch.string());
      man->input(fl.string());
    }
    PosteriorSamples s = parse_chain(read_file(ch.string()), read_file(fl.string()), ch.string());
    if (all.n_obs == 0) all.n_obs = s.n_obs;
    all.draws.insert(all.draws.end(), s.draws.begin(), s.draws.end());
  }
  return all;
}

/// Fit settings from the chain directory with predict.* and run.output
/// taken from the current config.
inline Config merged_config(const Config& c, const fs::path& chain_dir) {
  Config base = Config::load((chain_dir / "run.cfg").string());
  for (const auto& [k, v] : c.effective())
    if (k.rfind("predict.", 0) == 0) base.set(k, v, "predict");
  base.set("run.output", c.has("run.output") ? c.text("run.output") : (chain_dir / "predict").string(),
           "predict");
  return base;
}

/// Percentile, exceedance, type-probability, segregation and risk products
/// from stored draws.
inline int cmd_predict(const Config& cli) {
  const fs::path chain_dir = chain_dir_of(cli);
  const Config c = merged_config(cli, chain_dir);
  const fs::path out = output_dir(c);
  RunManifest man("predict", seed_of(c), c.snapshot());
  const PosteriorSamples samples = load_chains(chain_dir, &man);
  const nlohmann::json mj = nlohmann::json::parse(read_file((chain_dir / "model.json").string()));
  const GridSpec g = grid_of(c);
  const Kind kind = model_kind(c);
  const auto min_samples = static_cast<std::size_t>(c.integer("predict.min_samples"));
  const bool csv = c.boolean("predict.csv");
  auto emit = [&](const std::string& stem, const Raster& r) {
    man.output(out, stem + ".asc", to_esri_ascii(r));
    if (csv) man.output(out, stem + ".csv", to_csv(r));
  };

  PredictionContext ctx = PredictionContext::of(g);
  if (kind == Kind::unitype || kind == Kind::aggregated) {
    std::vector<std::uint8_t> inside;
    if (kind == Kind::aggregated) {
      const auto ids = region_map_of(c, g);
      inside.resize(g.n_obs());
      for (std::size_t k = 0; k < g.n_obs(); ++k) inside[k] = ids[k] > 0;
      ctx.observed = inside;
    }
    ctx.design = design_of(c, g, inside.empty() ? nullptr : &inside);
    ctx.offset = offset_of(c, g);
  } else if (kind == Kind::spacetime) {
    ctx.offset = Vector::Constant(static_cast<Eigen::Index>(g.n_obs()), mj.value("st_rate", 1.0));
  }
  if (!samples.empty() && samples.draws[0].fields.empty())
    throw InvalidInput("chain has no stored fields");

  const Functional f = parse_functional(c.text("predict.functional"));
  const std::string dir_text = c.text("predict.direction");
  if (dir_text != "above" && dir_text != "below") throw InvalidInput("predict.direction must be above or below");
  const Direction dir = dir_text == "above" ? Direction::above : Direction::below;
  std::vector<double> pct = c.reals("predict.percentile");
  const std::vector<double> thr = c.reals("predict.exceed");
  if (pct.empty() && thr.empty() && kind != Kind::multitype && kind != Kind::aggregated) pct = {0.5};

  const std::size_t nf = samples.n_fields();
  auto field_suffix = [&](std::size_t fi) -> std::string {
    if (nf <= 1) return "";
    return kind == Kind::spacetime ? "_t" + std::to_string(fi) : "_type" + std::to_string(fi + 1);
  };
  for (std::size_t fi = 0; fi < nf; ++fi) {
    for (double p : pct)
      emit("percentile_" + num_label(p) + "_" + to_string(f) + field_suffix(fi),
           percentile_surface(samples, ctx, f, p, fi, min_samples));
    for (double t : thr)
      emit(std::string("exceed_") + (dir == Direction::above ? "gt" : "lt") + num_label(t) + "_" +
               to_string(f) + field_suffix(fi),
           exceedance_probability(samples, ctx, f, t, dir, fi, min_samples));
  }

  if (kind == Kind::multitype) {
    const auto probs = type_probability_surfaces(samples, g, min_samples);
    for (std::size_t k = 0; k < probs.size(); ++k) emit("prob_type" + std::to_string(k + 1), probs[k]);
    const double cc = c.real("predict.segregation_c");
    const auto sets = segregation_sets(samples, g, cc, c.reals("predict.segregation_q"), min_samples);
    nlohmann::json sj;
    for (const auto& s : sets) {
      emit("segregation_type" + std::to_string(s.type) + "_c" + num_label(s.c) + "_q" + num_label(s.q),
           segregation_raster(s, g));
      sj.push_back({{"type", s.type}, {"c", s.c}, {"q", s.q}, {"n_cells", s.cells.size()}});
    }
    man.output(out, "segregation.json", sj.dump(2) + "\n");
  }
  if (kind == Kind::aggregated) {
    std::vector<std::string> names;
    for (const auto& n : mj.at("covariate_names")) names.push_back(n.get<std::string>());
    const double rt = c.real("predict.risk_threshold");
    const RiskReport rep = aggregated_risk_report(samples, ctx, names, rt, min_samples);
    std::string table = "covariate,q025,q50,q975\n";
    for (const auto& e : rep.effects)
      table += e.name + "," + lgcp::detail::fmt17(e.q025) + "," + lgcp::detail::fmt17(e.q50) + "," +
               lgcp::detail::fmt17(e.q975) + "\n";
    man.output(out, "risk_effects.csv", table);
    emit("risk_relative", rep.relative_risk);
    emit("risk_log_variance", rep.log_risk_variance);
    emit("risk_exceed_gt" + num_label(rt), rep.exceedance);
  }
  man.save(out);
  std::cout << "predict: wrote products for " << samples.size() << " draws into " << out.string() << "\n";
  return 0;
}

/// Autocorrelation report for a fit directory.
inline int cmd_diagnose(const Config& c) {
  const fs::path chain_dir = chain_dir_of(c);
  const PosteriorSamples s = load_chains(chain_dir, nullptr);
  const Diagnostics d = diagnostics(s);
  const nlohmann::json j = diagnostics_json(d);
  const fs::path out = c.has("run.output") ? output_dir(c) : chain_dir;
  write_atomic(out / "diagnose.json", j.dump(2) + "\n");
  std::cout << "parameter      mean          lag1      flag\n";
  for (const auto& p : d.parameters) {
    char line[160];
    std::snprintf(line, sizeof line, "%-14s %-13.6g %-9s %s\n", p.name.c_str(), p.mean,
                  p.degenerate ? "-" : num_label(p.acf.front()).c_str(),
                  p.degenerate ? "degenerate" : (p.poor_mixing ? "poor mixing" : "ok"));
    std::cout << line;
  }
  return 0;
}

}  // namespace lgcp::io

#endif  // LGCP_IO_COMMANDS_HPP
