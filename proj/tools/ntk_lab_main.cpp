// ntk-lab: command-line front end for the NTK dispersion laboratory.
//
// One subcommand per experiment kind; every subcommand accepts the same
// flags.  Configuration comes from kind-specific defaults, then an optional
// flat key/value config file, then explicit flag overrides, in that order.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>

#include "ntklab/harness.hpp"
#include "ntklab/version.hpp"

namespace {

struct CliOverrides {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  unsigned workers = 0;
  int samples = 0;
};

void add_experiment(CLI::App& app, ntklab::ExperimentKind kind,
                    const char* description, int& exit_code) {
  CLI::App* sub = app.add_subcommand(ntklab::kind_name(kind), description);
  auto overrides = std::make_shared<CliOverrides>();
  CLI::Option* opt_config =
      sub->add_option("--config", overrides->config,
                      "flat key = value config file (unknown keys error)");
  CLI::Option* opt_out =
      sub->add_option("--out", overrides->out, "output CSV path");
  CLI::Option* opt_seed =
      sub->add_option("--seed", overrides->seed, "master seed (64-bit)");
  CLI::Option* opt_workers = sub->add_option(
      "--workers", overrides->workers, "worker threads (0 = hardware)");
  CLI::Option* opt_samples = sub->add_option(
      "--samples", overrides->samples, "initializations per sweep cell");

  sub->callback([&exit_code, kind, overrides, opt_config, opt_out, opt_seed,
                 opt_workers, opt_samples] {
    try {
      ntklab::SweepConfig cfg = ntklab::default_config(kind);
      if (opt_config->count() > 0) {
        cfg = ntklab::load_sweep_config(overrides->config, cfg);
        if (cfg.kind != kind) {
          throw std::invalid_argument(
              std::string("config file selects kind '") +
              ntklab::kind_name(cfg.kind) + "' but the subcommand is '" +
              ntklab::kind_name(kind) + "'");
        }
      }
      if (opt_out->count() > 0) cfg.out = overrides->out;
      if (opt_seed->count() > 0) cfg.seed = overrides->seed;
      if (opt_workers->count() > 0) cfg.workers = overrides->workers;
      if (opt_samples->count() > 0) cfg.samples = overrides->samples;

      const std::size_t rows = ntklab::run_and_write(cfg);
      std::printf("ntk-lab %s: wrote %zu rows to %s\n",
                  ntklab::kind_name(kind), rows, cfg.out.c_str());
    } catch (const std::exception& e) {
      std::fprintf(stderr, "ntk-lab %s: error: %s\n", ntklab::kind_name(kind),
                   e.what());
      exit_code = 1;
    }
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("ntk-lab ") + ntklab::kVersion +
               " - finite-width NTK moments, theory, and Monte-Carlo sweeps"};
  app.require_subcommand(1);
  int exit_code = 0;

  add_experiment(app, ntklab::ExperimentKind::dispersion,
                 "diagonal-kernel dispersion vs depth and variance scale",
                 exit_code);
  add_experiment(app, ntklab::ExperimentKind::nondiag,
                 "off-diagonal/diagonal kernel ratio vs input cosine",
                 exit_code);
  add_experiment(app, ntklab::ExperimentKind::gd_step,
                 "relative kernel change after one GD step", exit_code);
  add_experiment(app, ntklab::ExperimentKind::structure,
                 "kernel block structure while training on gaussian blobs",
                 exit_code);
  add_experiment(app, ntklab::ExperimentKind::theory,
                 "closed-form limits, finite-width moments, and bounds",
                 exit_code);

  CLI11_PARSE(app, argc, argv);
  return exit_code;
}
