#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lgcp/io/commands.hpp"

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string input, output;
  long long seed = -1;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "configuration file")->check(CLI::ExistingFile);
  sub->add_option("--set", c.sets, "override a setting (section.key=value)");
  sub->add_option("--input", c.input, "input point pattern CSV");
  sub->add_option("--output", c.output, "output directory");
  sub->add_option("--seed", c.seed, "master seed");
}

lgcp::io::Config build(const Common& c, const std::vector<std::pair<std::string, std::string>>& extra) {
  lgcp::io::Config cfg = c.config.empty() ? lgcp::io::Config{} : lgcp::io::Config::load(c.config);
  if (!c.input.empty()) cfg.set("run.input", c.input, "--input");
  if (!c.output.empty()) cfg.set("run.output", c.output, "--output");
  if (c.seed >= 0) cfg.set("run.seed", std::to_string(c.seed), "--seed");
  for (const auto& [k, v] : extra)
    if (!v.empty()) cfg.set(k, v, "command line");
  for (const auto& s : c.sets) cfg.set_assignment(s);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Log-Gaussian Cox process simulation, fitting and prediction"};
  app.set_version_flag("--version", std::string(lgcp::io::kVersion));
  app.require_subcommand(1);

  Common sim_o, kfit_o, fit_o, mcmle_o, pred_o, diag_o;
  std::string u0, kc, model, regions, offset, theta0, sims, exceed, percentile, chain;

  auto* sim = app.add_subcommand("simulate", "simulate a point pattern and its latent field");
  add_common(sim, sim_o);
  sim->add_option("--model", model, "unitype | multitype | aggregated | spacetime");

  auto* kfit = app.add_subcommand("kfit", "K-function estimate and moment fit");
  add_common(kfit, kfit_o);
  kfit->add_option("--u0", u0, "upper integration limit");
  kfit->add_option("--c", kc, "discrepancy power");

  auto* fit = app.add_subcommand("fit", "posterior sampling by MCMC");
  add_common(fit, fit_o);
  fit->add_option("--model", model, "model kind");
  fit->add_option("--regions", regions, "region map raster");
  fit->add_option("--offset", offset, "offset raster");

  auto* mcmle = app.add_subcommand("mcmle", "Monte Carlo maximum likelihood");
  add_common(mcmle, mcmle_o);
  mcmle->add_option("--theta0", theta0, "reference point beta,...,sigma,phi");
  mcmle->add_option("--sims", sims, "Monte Carlo sample size");

  auto* pred = app.add_subcommand("predict", "predictive surfaces from a fit directory");
  add_common(pred, pred_o);
  pred->add_option("--chain", chain, "fit output directory");
  pred->add_option("--exceed", exceed, "exceedance thresholds (comma separated)");
  pred->add_option("--percentile", percentile, "quantile levels (comma separated)");

  auto* diag = app.add_subcommand("diagnose", "autocorrelation report for a fit directory");
  add_common(diag, diag_o);
  diag->add_option("--chain", chain, "fit output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    using namespace lgcp::io;
    if (sim->parsed()) return cmd_simulate(build(sim_o, {{"model.kind", model}}));
    if (kfit->parsed()) return cmd_kfit(build(kfit_o, {{"kfit.u0", u0}, {"kfit.c", kc}}));
    if (fit->parsed())
      return cmd_fit(build(fit_o, {{"model.kind", model}, {"model.regions", regions}, {"model.offset", offset}}));
    if (mcmle->parsed()) return cmd_mcmle(build(mcmle_o, {{"mcmle.theta0", theta0}, {"mcmle.sims", sims}}));
    if (pred->parsed())
      return cmd_predict(build(pred_o, {{"predict.chain", chain}, {"predict.exceed", exceed},
                                        {"predict.percentile", percentile}}));
    if (diag->parsed()) return cmd_diagnose(build(diag_o, {{"predict.chain", chain}}));
  } catch (const lgcp::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const lgcp::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const lgcp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
