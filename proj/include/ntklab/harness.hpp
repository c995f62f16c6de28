#pragma once

// Monte-Carlo experiment harness tying networks, kernels, theory, and
// statistics together into reproducible sweeps.
//
// Every experiment is described by one flat SweepConfig.  A sweep is a grid
// of cells (variance scale x depth x optional input cosine); each cell owns
// one fixed probe input and `samples` independent network initializations.
// Seeds are derived per (stream, cell index, sample index) from the master
// seed, so results are bit-identical under re-runs, cell reordering, and
// any worker count.  The only output format is CSV: a '#'-prefixed header
// block (config echo, seed, sampler identity, version), one column-name
// row, then data rows with 17-significant-digit floats.

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ntklab/network.hpp"
#include "ntklab/ntk.hpp"
#include "ntklab/stats.hpp"
#include "ntklab/theory.hpp"

namespace ntklab {

enum class ExperimentKind { dispersion, nondiag, gd_step, structure, theory };

enum class ScheduleKind { constant, ramp_up, ramp_down };

const char* kind_name(ExperimentKind k);
const char* schedule_name(ScheduleKind k);

// Hidden-width profile n_0 .. n_{L-1} interpolating between M1 and M2 over
// depth L (the width-1 output layer is appended implicitly by the network):
//   ramp_up:   n_l = M1 + ceil(l (M2 - M1) / L),
//   constant:  n_l = ceil((M1 + M2) / 2),
//   ramp_down: n_l = M2 + ceil(l (M1 - M2) / L),
// for l = 0 .. L-1.  All three share the average width and the joint ratio
// lambda = 2 L / (M1 + M2).
struct WidthSchedule {
  ScheduleKind kind = ScheduleKind::constant;
  int m1 = 0;
  int m2 = 0;
  int depth = 0;
};
std::vector<int> width_schedule(const WidthSchedule& ws);

// Flat experiment description.  Config files assign these fields by name
// (one "key = value" per line, '#' comments allowed; lists are
// comma-separated); unknown keys are an error.
struct SweepConfig {
  ExperimentKind kind = ExperimentKind::dispersion;
  std::vector<double> sigma_w_sq{1.0, 2.0, 3.0};  // variance-scale grid
  std::vector<int> depths{10, 30, 50, 80};        // depth grid (L values)
  int m = 100;                                    // hidden width M
  double alpha0 = 1.0;                            // input ratio n_0 / M
  int samples = 500;                              // initializations per cell
  std::uint64_t seed = 1;                         // master seed
  std::vector<double> cosines{0.1, 0.5, 0.9};     // input cosines (nondiag)
  double eta = 1e-3;                              // GD learning rate
  std::string out;                                // output CSV path
  int m1 = 0;                                     // architecture sweep ends;
  int m2 = 0;                                     //   both > 0 enables ramps
  unsigned workers = 0;                           // 0 = hardware concurrency

  // Input dimension used for a cell of width m: round(alpha0 * m), >= 1.
  int n0_for(int width) const;
  void validate() const;
};

// Kind-appropriate defaults (the structure experiment trains, so it wants a
// small net and a real learning rate; the others measure at initialization).
SweepConfig default_config(ExperimentKind kind);

// Parses a config file on top of `base` (fields the file does not mention
// keep their base values).  Throws std::invalid_argument on unknown keys or
// malformed values, std::runtime_error when the file cannot be read.
SweepConfig load_sweep_config(const std::string& path,
                              SweepConfig base = SweepConfig{});

// Applies one "key = value" assignment; shared by the file parser.
void apply_config_entry(SweepConfig& cfg, const std::string& key,
                        const std::string& value);

// Isotropic random unit vector in R^{n0} (exactly +-1 when n0 == 1).
Eigen::VectorXd gen_unit_input(int n0, std::uint64_t seed);

// Unit pair (x, x~) with <x, x~> = rho within 1e-10, built as
// x~ = rho x + sqrt(1 - rho^2) u with u a unit vector orthogonal to x.
// rho = +-1 returns x~ = +-x exactly; n0 == 1 admits only rho = +-1.
std::pair<Eigen::VectorXd, Eigen::VectorXd> gen_pair_with_cosine(
    int n0, double rho, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Experiment rows.  Each run_* function is pure compute (deterministic in
// the config); the matching write_*_csv serializes rows to cfg.out-style
// paths.  Every row carries the cell's full configuration, the master seed,
// the cell index, the library version, and the sampler identity, so any
// cell can be re-run in isolation from its row alone.
// ---------------------------------------------------------------------------

// Diagonal-kernel dispersion across one (sigma_w_sq, depth) grid.
struct DispersionRow {
  double sigma_w_sq = 0.0;
  int depth = 0;
  int m = 0;
  double alpha0 = 0.0;
  double lambda = 0.0;
  double r_hat = 0.0;
  double bootstrap_se = 0.0;
  double theory_limit = 0.0;
  double theory_finite = 0.0;
  int n = 0;
  std::uint64_t seed = 0;
  std::size_t cell = 0;
  std::string status;  // "ok" or "degenerate"
};
std::vector<DispersionRow> run_dispersion_sweep(const SweepConfig& cfg);
void write_dispersion_csv(const SweepConfig& cfg,
                          const std::vector<DispersionRow>& rows,
                          const std::string& path);

// Off-diagonal/diagonal kernel ratio across (sigma_w_sq, depth, rho0).
struct NondiagRow {
  double sigma_w_sq = 0.0;
  int depth = 0;
  int m = 0;
  double alpha0 = 0.0;
  double rho0 = 0.0;
  double ratio = 0.0;         // mean-ratio estimate of E[off] / E[diag]
  double ratio_se = 0.0;      // bootstrap SE of the ratio
  double bound = 0.0;         // nondiag_lower_bound at (rho0, depth, a)
  double offdiag_r_hat = 0.0;    // dispersion of the off-diagonal entry
  double offdiag_se = 0.0;
  int n = 0;
  std::uint64_t seed = 0;
  std::size_t cell = 0;
  std::string status;
};
std::vector<NondiagRow> run_nondiag_sweep(const SweepConfig& cfg);
void write_nondiag_csv(const SweepConfig& cfg,
                       const std::vector<NondiagRow>& rows,
                       const std::string& path);

// Kernel sensitivity to one GD step on (x, y = 0), across
// (sigma_w_sq, depth), measured along two routes per seed:
//   - mean_rel_change: literal finite step, |Theta' - Theta| / Theta after
//     gd_step with the configured eta.  Faithful but double-precision
//     fragile: deep ordered cells underflow to exact 0 (the update falls
//     below one ulp of the parameters) and deep chaotic cells overflow.
//   - mean_rel_first_order: linear response |eta * dTheta/deta| / Theta from
//     ntk_gd_response, the first-order kernel change per step.  Stays
//     representable across the sweep grid and is exactly linear in eta.
// eta == 0 requests no update and yields exactly zero along both routes.
struct GdStepRow {
  double sigma_w_sq = 0.0;
  int depth = 0;
  int m = 0;
  double alpha0 = 0.0;
  double eta = 0.0;
  double mean_rel_change = 0.0;
  double bootstrap_se = 0.0;
  double mean_rel_first_order = 0.0;
  double first_order_se = 0.0;
  int eta_warn = 0;  // 1 when a^L * eta > 1 (step likely out of regime)
  int n = 0;
  std::uint64_t seed = 0;
  std::size_t cell = 0;
  std::string status;
};
std::vector<GdStepRow> run_gd_step_experiment(const SweepConfig& cfg);
void write_gd_step_csv(const SweepConfig& cfg,
                       const std::vector<GdStepRow>& rows,
                       const std::string& path);

// Kernel block structure while training on synthetic Gaussian blobs:
// `classes` unit-normalized blobs of 10 points each, one scalar one-vs-rest
// output head per class, plain full-batch GD, snapshots of the summed
// per-head kernel matrix on a fixed epoch schedule.
struct StructureRow {
  int epoch = 0;
  double train_loss = 0.0;
  double theta_d = 0.0;
  double theta_c = 0.0;
  double theta_n = 0.0;
  double block_ratio = 0.0;  // (theta_c - theta_n) / theta_d
  double min_eig = 0.0;      // smallest eigenvalue of the summed kernel
  double trace = 0.0;
  std::uint64_t seed = 0;
};
struct StructureResult {
  std::vector<StructureRow> rows;
  bool converged = false;  // train loss fell below 0.05
  int epochs_run = 0;
};
StructureResult run_structure_experiment(const SweepConfig& cfg,
                                         int classes = 3);
void write_structure_csv(const SweepConfig& cfg, const StructureResult& result,
                         const std::string& path);

// Pure-theory grid: limits, finite-width dispersion, first moments, and the
// off-diagonal lower bound, over (sigma_w_sq, depth, schedule, rho0).  When
// m1 and m2 are set, each depth is evaluated under all three width
// schedules at matched average width; otherwise at constant width m.
struct TheoryRow {
  double sigma_w_sq = 0.0;
  std::string phase;
  std::string schedule;
  int depth = 0;
  int m = 0;
  int m1 = 0;
  int m2 = 0;
  double alpha0 = 0.0;
  double lambda = 0.0;
  double rho0 = 0.0;
  double limit = 0.0;
  double finite = 0.0;
  double e_theta_w = 0.0;
  double e_theta_b = 0.0;
  double bound = 0.0;
};
std::vector<TheoryRow> run_theory_eval(const SweepConfig& cfg);
void write_theory_csv(const SweepConfig& cfg,
                      const std::vector<TheoryRow>& rows,
                      const std::string& path);

// Runs cfg.kind and writes cfg.out; the single entry point used by the CLI.
// Returns the number of data rows written.
std::size_t run_and_write(const SweepConfig& cfg);

}  // namespace ntklab
