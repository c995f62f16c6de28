#include "ntklab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ntklab/csv.hpp"
#include "ntklab/version.hpp"

namespace ntklab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Small helpers
// ---------------------------------------------------------------------------

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) parts.push_back(cur);
  return parts;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key +
                                "': cannot parse '" + v + "' as a number");
  }
}

long long parse_ll(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long i = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key +
                                "': cannot parse '" + v + "' as an integer");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long i = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': cannot parse '" +
                                v + "' as an unsigned integer");
  }
}

template <typename T, typename F>
std::vector<T> parse_values(const std::string& key, const std::string& v,
                            F&& one) {
  std::vector<T> out;
  for (const std::string& part : split_list(v)) out.push_back(one(key, part));
  return out;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += CsvWriter::fmt(v[i]);
  }
  return s;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

// Constant-width network of a sweep cell: widths (n_0, M, ..., M), zero
// bias variance (the regime all moment formulas assume).
NetworkConfig cell_network(int n0, int m, int depth, double sigma_w_sq) {
  NetworkConfig net;
  net.widths.assign(static_cast<std::size_t>(depth), m);
  net.widths[0] = n0;
  net.sigma_w_sq = sigma_w_sq;
  net.sigma_b_sq = 0.0;
  return net;
}

// Shared header block: experiment name, version, sampler, bootstrap depth,
// and a re-parseable echo of every config field.
void write_common_header(CsvWriter& w, const SweepConfig& cfg) {
  w.comment(std::string("ntk-lab ") + kind_name(cfg.kind) + " experiment");
  w.comment(std::string("version = ") + kVersion);
  w.comment(std::string("sampler = ") + kSamplerIdentity);
  w.comment("bootstrap_resamples = " +
            std::to_string(kDefaultBootstrapResamples));
  w.comment(std::string("kind = ") + kind_name(cfg.kind));
  w.comment("sigma_w_sq = " + join_doubles(cfg.sigma_w_sq));
  w.comment("depths = " + join_ints(cfg.depths));
  w.comment("m = " + std::to_string(cfg.m));
  w.comment("alpha0 = " + CsvWriter::fmt(cfg.alpha0));
  w.comment("samples = " + std::to_string(cfg.samples));
  w.comment("seed = " + std::to_string(cfg.seed));
  w.comment("cosines = " + join_doubles(cfg.cosines));
  w.comment("eta = " + CsvWriter::fmt(cfg.eta));
  w.comment("m1 = " + std::to_string(cfg.m1));
  w.comment("m2 = " + std::to_string(cfg.m2));
  w.comment("workers = " + std::to_string(cfg.workers));
}

}  // namespace

// ---------------------------------------------------------------------------
// Names, schedules, config
// ---------------------------------------------------------------------------

const char* kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::dispersion:
      return "dispersion";
    case ExperimentKind::nondiag:
      return "nondiag";
    case ExperimentKind::gd_step:
      return "gd-step";
    case ExperimentKind::structure:
      return "structure";
    case ExperimentKind::theory:
      return "theory";
  }
  return "unknown";
}

const char* schedule_name(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::constant:
      return "constant";
    case ScheduleKind::ramp_up:
      return "ramp_up";
    case ScheduleKind::ramp_down:
      return "ramp_down";
  }
  return "unknown";
}

std::vector<int> width_schedule(const WidthSchedule& ws) {
  if (ws.m1 < 1 || ws.m2 < 1) {
    throw std::invalid_argument("width_schedule: M1 and M2 must be >= 1");
  }
  if (ws.depth < 1) {
    throw std::invalid_argument("width_schedule: depth must be >= 1");
  }
  const double L = static_cast<double>(ws.depth);
  std::vector<int> widths(static_cast<std::size_t>(ws.depth));
  for (int l = 0; l < ws.depth; ++l) {
    double w = 0.0;
    switch (ws.kind) {
      case ScheduleKind::ramp_up:
        w = ws.m1 + std::ceil(l * static_cast<double>(ws.m2 - ws.m1) / L);
        break;
      case ScheduleKind::constant:
        w = std::ceil((ws.m1 + ws.m2) / 2.0);
        break;
      case ScheduleKind::ramp_down:
        w = ws.m2 + std::ceil(l * static_cast<double>(ws.m1 - ws.m2) / L);
        break;
    }
    widths[static_cast<std::size_t>(l)] = static_cast<int>(w);
  }
  return widths;
}

int SweepConfig::n0_for(int width) const {
  const long n0 = std::lround(alpha0 * static_cast<double>(width));
  return static_cast<int>(std::max(1l, n0));
}

void SweepConfig::validate() const {
  if (m < 1) throw std::invalid_argument("config: m must be >= 1");
  if ((m1 == 0) != (m2 == 0)) {
    throw std::invalid_argument("config: m1 and m2 must be set together");
  }
  if (m1 < 0 || m2 < 0) {
    throw std::invalid_argument("config: m1 and m2 must be >= 0");
  }
  if (depths.empty()) throw std::invalid_argument("config: depths is empty");
  for (int L : depths) {
    if (L < 1) throw std::invalid_argument("config: every depth must be >= 1");
  }
  if (sigma_w_sq.empty()) {
    throw std::invalid_argument("config: sigma_w_sq is empty");
  }
  for (double s : sigma_w_sq) {
    if (!(s > 0.0)) {
      throw std::invalid_argument("config: sigma_w_sq values must be > 0");
    }
  }
  if (!(alpha0 > 0.0)) throw std::invalid_argument("config: alpha0 must be > 0");
  if (samples < 3) {
    throw std::invalid_argument(
        "config: samples must be >= 3 (dispersion estimation needs it)");
  }
  if (!(eta >= 0.0)) throw std::invalid_argument("config: eta must be >= 0");
  for (double c : cosines) {
    if (!(std::abs(c) <= 1.0)) {
      throw std::invalid_argument("config: cosines must lie in [-1, 1]");
    }
  }
  if (kind == ExperimentKind::nondiag && cosines.empty()) {
    throw std::invalid_argument("config: nondiag needs a non-empty cosine list");
  }
  if (kind == ExperimentKind::structure && !(eta > 0.0)) {
    throw std::invalid_argument("config: structure training needs eta > 0");
  }
}

SweepConfig default_config(ExperimentKind kind) {
  SweepConfig cfg;
  cfg.kind = kind;
  switch (kind) {
    case ExperimentKind::dispersion:
      break;  // struct defaults are the dispersion defaults
    case ExperimentKind::nondiag:
      cfg.sigma_w_sq = {1.0};
      cfg.depths = {20, 60, 100};
      break;
    case ExperimentKind::gd_step:
      cfg.sigma_w_sq = {1.0, 3.0};
      cfg.depths = {20, 40, 60};
      cfg.samples = 100;
      break;
    case ExperimentKind::structure:
      cfg.sigma_w_sq = {2.0};
      cfg.depths = {3};
      cfg.m = 32;
      cfg.alpha0 = 0.5;
      cfg.eta = 0.3;
      break;
    case ExperimentKind::theory:
      cfg.depths = {30, 60, 90, 150, 300};
      cfg.cosines = {0.5};
      break;
  }
  return cfg;
}

void apply_config_entry(SweepConfig& cfg, const std::string& key,
                        const std::string& value) {
  if (key == "kind") {
    if (value == "dispersion") {
      cfg.kind = ExperimentKind::dispersion;
    } else if (value == "nondiag") {
      cfg.kind = ExperimentKind::nondiag;
    } else if (value == "gd-step" || value == "gd_step") {
      cfg.kind = ExperimentKind::gd_step;
    } else if (value == "structure") {
      cfg.kind = ExperimentKind::structure;
    } else if (value == "theory") {
      cfg.kind = ExperimentKind::theory;
    } else {
      throw std::invalid_argument("config key 'kind': unknown kind '" + value +
                                  "'");
    }
  } else if (key == "sigma_w_sq") {
    cfg.sigma_w_sq = parse_values<double>(key, value, parse_double);
  } else if (key == "depths") {
    cfg.depths.clear();
    for (long long v : parse_values<long long>(key, value, parse_ll)) {
      cfg.depths.push_back(static_cast<int>(v));
    }
  } else if (key == "m") {
    cfg.m = static_cast<int>(parse_ll(key, value));
  } else if (key == "alpha0") {
    cfg.alpha0 = parse_double(key, value);
  } else if (key == "samples") {
    cfg.samples = static_cast<int>(parse_ll(key, value));
  } else if (key == "seed") {
    cfg.seed = parse_u64(key, value);
  } else if (key == "cosines") {
    cfg.cosines = parse_values<double>(key, value, parse_double);
  } else if (key == "eta") {
    cfg.eta = parse_double(key, value);
  } else if (key == "out") {
    cfg.out = value;
  } else if (key == "m1") {
    cfg.m1 = static_cast<int>(parse_ll(key, value));
  } else if (key == "m2") {
    cfg.m2 = static_cast<int>(parse_ll(key, value));
  } else if (key == "workers") {
    cfg.workers = static_cast<unsigned>(parse_u64(key, value));
  } else {
    throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

SweepConfig load_sweep_config(const std::string& path, SweepConfig base) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot read config file '" + path + "'");
  }
  SweepConfig cfg = std::move(base);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config file '" + path + "' line " +
                                  std::to_string(lineno) +
                                  ": expected 'key = value'");
    }
    apply_config_entry(cfg, trim(line.substr(0, eq)),
                       trim(line.substr(eq + 1)));
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Input generation
// ---------------------------------------------------------------------------

Eigen::VectorXd gen_unit_input(int n0, std::uint64_t seed) {
  if (n0 < 1) {
    throw std::invalid_argument("gen_unit_input: n0 must be >= 1");
  }
  Rng rng(seed);
  Eigen::VectorXd x(n0);
  for (;;) {
    for (int i = 0; i < n0; ++i) x(i) = rng.normal();
    const double norm = x.norm();
    if (norm > 0.0) {
      x /= norm;
      return x;
    }
  }
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> gen_pair_with_cosine(
    int n0, double rho, std::uint64_t seed) {
  if (n0 < 1) {
    throw std::invalid_argument("gen_pair_with_cosine: n0 must be >= 1");
  }
  if (!(std::abs(rho) <= 1.0)) {
    throw std::invalid_argument("gen_pair_with_cosine: rho must be in [-1, 1]");
  }
  if (n0 == 1 && std::abs(rho) != 1.0) {
    throw std::invalid_argument(
        "gen_pair_with_cosine: in one dimension only rho = +-1 is "
        "representable");
  }

  Rng rng(seed);
  Eigen::VectorXd x(n0);
  for (;;) {
    for (int i = 0; i < n0; ++i) x(i) = rng.normal();
    const double norm = x.norm();
    if (norm > 0.0) {
      x /= norm;
      break;
    }
  }
  if (rho == 1.0) return {x, x};
  if (rho == -1.0) return {x, -x};

  // Unit direction orthogonal to x, from a fresh Gaussian draw.
  Eigen::VectorXd u(n0);
  for (;;) {
    for (int i = 0; i < n0; ++i) u(i) = rng.normal();
    u -= u.dot(x) * x;
    const double norm = u.norm();
    if (norm > 1e-8) {
      u /= norm;
      break;
    }
  }
  Eigen::VectorXd x_tilde = rho * x + std::sqrt(1.0 - rho * rho) * u;
  return {x, x_tilde};
}

// ---------------------------------------------------------------------------
// Dispersion sweep
// ---------------------------------------------------------------------------

std::vector<DispersionRow> run_dispersion_sweep(const SweepConfig& cfg) {
  cfg.validate();
  std::vector<DispersionRow> rows;
  std::size_t cell = 0;

  for (double sw2 : cfg.sigma_w_sq) {
    for (int L : cfg.depths) {
      const int n0 = cfg.n0_for(cfg.m);
      const NetworkConfig net = cell_network(n0, cfg.m, L, sw2);
      const Eigen::VectorXd x = gen_unit_input(
          n0, derive_seed(cfg.seed, stream_tag(SeedStream::input), cell));

      std::vector<double> theta(static_cast<std::size_t>(cfg.samples));
      parallel_for(theta.size(), cfg.workers, [&](std::size_t i) {
        const Parameters params = init_network(
            net, derive_seed(cfg.seed, stream_tag(SeedStream::sample), cell,
                             static_cast<std::uint64_t>(i)));
        const ForwardTrace f = forward(params, x);
        const BackwardTrace b = backward(params, f);
        theta[i] = ntk_from_traces(f, b, f, b).theta;
      });

      DispersionRow row;
      row.sigma_w_sq = sw2;
      row.depth = L;
      row.m = cfg.m;
      row.alpha0 = cfg.alpha0;
      row.lambda = static_cast<double>(L) / static_cast<double>(cfg.m);
      row.n = cfg.samples;
      row.seed = cfg.seed;
      row.cell = cell;
      row.theory_limit = dispersion_limit(make_phase_point(
          sw2, row.lambda,
          static_cast<double>(n0) / static_cast<double>(cfg.m)));
      row.theory_finite = dispersion_finite(net);
      try {
        row.r_hat = dispersion_estimator(theta);
        row.bootstrap_se = bootstrap_se(
            theta, kDefaultBootstrapResamples,
            derive_seed(cfg.seed, stream_tag(SeedStream::bootstrap), cell));
        row.status = "ok";
      } catch (const std::exception&) {
        row.r_hat = kNaN;
        row.bootstrap_se = kNaN;
        row.status = "degenerate";
      }
      rows.push_back(std::move(row));
      ++cell;
    }
  }
  return rows;
}

void write_dispersion_csv(const SweepConfig& cfg,
                          const std::vector<DispersionRow>& rows,
                          const std::string& path) {
  CsvWriter w(path);
  write_common_header(w, cfg);
  w.columns({"sigma_w_sq", "depth", "m", "alpha0", "lambda", "r_hat",
             "bootstrap_se", "theory_limit", "theory_finite", "n", "seed",
             "cell", "status", "version", "sampler"});
  for (const DispersionRow& r : rows) {
    w.row({CsvWriter::fmt(r.sigma_w_sq), CsvWriter::fmt(r.depth),
           CsvWriter::fmt(r.m), CsvWriter::fmt(r.alpha0),
           CsvWriter::fmt(r.lambda), CsvWriter::fmt(r.r_hat),
           CsvWriter::fmt(r.bootstrap_se), CsvWriter::fmt(r.theory_limit),
           CsvWriter::fmt(r.theory_finite), CsvWriter::fmt(r.n),
           CsvWriter::fmt(r.seed), CsvWriter::fmt(r.cell), r.status, kVersion,
           kSamplerIdentity});
  }
}

// ---------------------------------------------------------------------------
// Off-diagonal sweep
// ---------------------------------------------------------------------------

std::vector<NondiagRow> run_nondiag_sweep(const SweepConfig& cfg) {
  cfg.validate();
  std::vector<NondiagRow> rows;
  std::size_t cell = 0;

  for (double sw2 : cfg.sigma_w_sq) {
    for (int L : cfg.depths) {
      for (double rho0 : cfg.cosines) {
        const int n0 = cfg.n0_for(cfg.m);
        const NetworkConfig net = cell_network(n0, cfg.m, L, sw2);
        const auto [x, x_tilde] = gen_pair_with_cosine(
            n0, rho0,
            derive_seed(cfg.seed, stream_tag(SeedStream::input), cell));

        std::vector<double> off(static_cast<std::size_t>(cfg.samples));
        std::vector<double> diag(off.size());
        parallel_for(off.size(), cfg.workers, [&](std::size_t i) {
          const Parameters params = init_network(
              net, derive_seed(cfg.seed, stream_tag(SeedStream::sample), cell,
                               static_cast<std::uint64_t>(i)));
          const ForwardTrace fa = forward(params, x);
          const BackwardTrace ba = backward(params, fa);
          const ForwardTrace fb = forward(params, x_tilde);
          const BackwardTrace bb = backward(params, fb);
          off[i] = ntk_from_traces(fa, ba, fb, bb).theta;
          diag[i] = ntk_from_traces(fa, ba, fa, ba).theta;
        });

        NondiagRow row;
        row.sigma_w_sq = sw2;
        row.depth = L;
        row.m = cfg.m;
        row.alpha0 = cfg.alpha0;
        row.rho0 = rho0;
        row.n = cfg.samples;
        row.seed = cfg.seed;
        row.cell = cell;
        row.bound = nondiag_lower_bound(rho0, L, sw2 / 2.0);
        try {
          row.ratio = mean_ratio_estimator(off, diag);
          row.ratio_se = bootstrap_ratio_se(
              off, diag, kDefaultBootstrapResamples,
              derive_seed(cfg.seed, stream_tag(SeedStream::bootstrap), cell));
          row.offdiag_r_hat = dispersion_estimator(off);
          row.offdiag_se = bootstrap_se(
              off, kDefaultBootstrapResamples,
              derive_seed(cfg.seed, stream_tag(SeedStream::bootstrap), cell,
                          1));
          row.status = "ok";
        } catch (const std::exception&) {
          row.ratio = kNaN;
          row.ratio_se = kNaN;
          row.offdiag_r_hat = kNaN;
          row.offdiag_se = kNaN;
          row.status = "degenerate";
        }
        rows.push_back(std::move(row));
        ++cell;
      }
    }
  }
  return rows;
}

void write_nondiag_csv(const SweepConfig& cfg,
                       const std::vector<NondiagRow>& rows,
                       const std::string& path) {
  CsvWriter w(path);
  write_common_header(w, cfg);
  w.columns({"sigma_w_sq", "depth", "m", "alpha0", "rho0", "ratio", "ratio_se",
             "bound", "offdiag_r_hat", "offdiag_se", "n", "seed", "cell",
             "status", "version", "sampler"});
  for (const NondiagRow& r : rows) {
    w.row({CsvWriter::fmt(r.sigma_w_sq), CsvWriter::fmt(r.depth),
           CsvWriter::fmt(r.m), CsvWriter::fmt(r.alpha0),
           CsvWriter::fmt(r.rho0), CsvWriter::fmt(r.ratio),
           CsvWriter::fmt(r.ratio_se), CsvWriter::fmt(r.bound),
           CsvWriter::fmt(r.offdiag_r_hat), CsvWriter::fmt(r.offdiag_se),
           CsvWriter::fmt(r.n), CsvWriter::fmt(r.seed), CsvWriter::fmt(r.cell),
           r.status, kVersion, kSamplerIdentity});
  }
}

// ---------------------------------------------------------------------------
// GD-step experiment
// ---------------------------------------------------------------------------

std::vector<GdStepRow> run_gd_step_experiment(const SweepConfig& cfg) {
  cfg.validate();
  std::vector<GdStepRow> rows;
  std::size_t cell = 0;

  for (double sw2 : cfg.sigma_w_sq) {
    for (int L : cfg.depths) {
      const int n0 = cfg.n0_for(cfg.m);
      const NetworkConfig net = cell_network(n0, cfg.m, L, sw2);
      const Eigen::VectorXd x = gen_unit_input(
          n0, derive_seed(cfg.seed, stream_tag(SeedStream::input), cell));

      std::vector<double> rel(static_cast<std::size_t>(cfg.samples));
      std::vector<double> rel1(static_cast<std::size_t>(cfg.samples));
      parallel_for(rel.size(), cfg.workers, [&](std::size_t i) {
        const Parameters params = init_network(
            net, derive_seed(cfg.seed, stream_tag(SeedStream::sample), cell,
                             static_cast<std::uint64_t>(i)));
        // Linear-response route: tangent sweep, exact in eta, no step taken.
        const GdResponse resp = ntk_gd_response(params, x, 0.0, cfg.eta);
        rel1[i] = resp.rel_first_order;
        if (cfg.eta == 0.0) {
          // eta = 0 requests "no update"; the kernel change is exactly zero
          // without invoking gd_step (which rejects non-positive rates).
          rel[i] = 0.0;
          return;
        }
        // Finite-step route: literally apply the update and re-evaluate.
        const Parameters stepped = gd_step(params, x, 0.0, cfg.eta);
        const ForwardTrace f1 = forward(stepped, x);
        const BackwardTrace b1 = backward(stepped, f1);
        const double theta1 = ntk_from_traces(f1, b1, f1, b1).theta;
        rel[i] = std::abs(theta1 - resp.theta) / resp.theta;
      });

      GdStepRow row;
      row.sigma_w_sq = sw2;
      row.depth = L;
      row.m = cfg.m;
      row.alpha0 = cfg.alpha0;
      row.eta = cfg.eta;
      row.n = cfg.samples;
      row.seed = cfg.seed;
      row.cell = cell;
      const double blowup = std::pow(sw2 / 2.0, L) * cfg.eta;
      row.eta_warn = blowup > 1.0 ? 1 : 0;
      if (row.eta_warn) {
        std::fprintf(stderr,
                     "ntk-lab: warning: a^L * eta = %.3g > 1 at sigma_w_sq = "
                     "%g, depth = %d; the one-step kernel change is likely "
                     "outside the perturbative regime\n",
                     blowup, sw2, L);
      }
      double mean = 0.0;
      double mean1 = 0.0;
      for (double v : rel) mean += v;
      for (double v : rel1) mean1 += v;
      row.mean_rel_change = mean / static_cast<double>(rel.size());
      row.mean_rel_first_order = mean1 / static_cast<double>(rel1.size());
      try {
        row.bootstrap_se = bootstrap_mean_se(
            rel, kDefaultBootstrapResamples,
            derive_seed(cfg.seed, stream_tag(SeedStream::bootstrap), cell));
        row.first_order_se = bootstrap_mean_se(
            rel1, kDefaultBootstrapResamples,
            derive_seed(cfg.seed, stream_tag(SeedStream::bootstrap), cell,
                        std::uint64_t{1}));
      } catch (const std::exception&) {
        row.bootstrap_se = kNaN;
        row.first_order_se = kNaN;
      }
      // A cell is degenerate when the literal-step route left the
      // representable range: a non-finite estimate (overflow), a failed
      // bootstrap, or an exact-zero mean with eta > 0 (every sampled update
      // fell below one ulp of the parameters, so each step was a bitwise
      // no-op).  The row is still emitted with whatever was measured.
      const bool finite_all = std::isfinite(row.mean_rel_change) &&
                              std::isfinite(row.bootstrap_se) &&
                              std::isfinite(row.mean_rel_first_order) &&
                              std::isfinite(row.first_order_se);
      const bool underflow = cfg.eta > 0.0 && row.mean_rel_change == 0.0;
      row.status = (finite_all && !underflow) ? "ok" : "degenerate";
      rows.push_back(std::move(row));
      ++cell;
    }
  }
  return rows;
}

void write_gd_step_csv(const SweepConfig& cfg,
                       const std::vector<GdStepRow>& rows,
                       const std::string& path) {
  CsvWriter w(path);
  write_common_header(w, cfg);
  w.comment("targets: y = 0 on the cell's fixed probe input");
  w.columns({"sigma_w_sq", "depth", "m", "alpha0", "eta", "mean_rel_change",
             "bootstrap_se", "mean_rel_first_order", "first_order_se",
             "eta_warn", "n", "seed", "cell", "status", "version", "sampler"});
  for (const GdStepRow& r : rows) {
    w.row({CsvWriter::fmt(r.sigma_w_sq), CsvWriter::fmt(r.depth),
           CsvWriter::fmt(r.m), CsvWriter::fmt(r.alpha0),
           CsvWriter::fmt(r.eta), CsvWriter::fmt(r.mean_rel_change),
           CsvWriter::fmt(r.bootstrap_se),
           CsvWriter::fmt(r.mean_rel_first_order),
           CsvWriter::fmt(r.first_order_se), CsvWriter::fmt(r.eta_warn),
           CsvWriter::fmt(r.n), CsvWriter::fmt(r.seed), CsvWriter::fmt(r.cell),
           r.status, kVersion, kSamplerIdentity});
  }
}

// ---------------------------------------------------------------------------
// Structure experiment
// ---------------------------------------------------------------------------

namespace {

constexpr int kPointsPerClass = 10;
constexpr int kMaxEpochs = 2000;
constexpr double kLossTarget = 0.005;

// Snapshot schedule: dense early (the kernel reorganizes fastest there),
// geometric later.
const int kSnapshotEpochs[] = {0,  1,  2,   3,   5,   8,   12,  20,   30,  50,
                               75, 100, 150, 200, 300, 400, 500, 750, 1000,
                               1500, 2000};

bool is_snapshot_epoch(int epoch) {
  for (int e : kSnapshotEpochs) {
    if (e == epoch) return true;
  }
  return false;
}

struct BlobDataset {
  std::vector<Eigen::VectorXd> points;  // unit-normalized
  std::vector<int> labels;
};

// `classes` Gaussian blobs in R^{n0} around well-separated unit mean
// directions (pairwise |cos| <= 0.5), each point unit-normalized.
BlobDataset make_blobs(int n0, int classes, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Eigen::VectorXd> means;
  means.reserve(static_cast<std::size_t>(classes));
  int tries = 0;
  while (static_cast<int>(means.size()) < classes) {
    Eigen::VectorXd mean(n0);
    for (int i = 0; i < n0; ++i) mean(i) = rng.normal();
    const double norm = mean.norm();
    if (norm == 0.0) continue;
    mean /= norm;
    bool separated = true;
    for (const Eigen::VectorXd& other : means) {
      if (std::abs(mean.dot(other)) > 0.5) separated = false;
    }
    // Accept after many tries so low dimensions cannot loop forever; the
    // resulting dataset is then merely less separated, not invalid.
    if (separated || ++tries > 1000) means.push_back(mean);
  }

  BlobDataset ds;
  for (int k = 0; k < classes; ++k) {
    for (int p = 0; p < kPointsPerClass; ++p) {
      Eigen::VectorXd x(n0);
      for (int i = 0; i < n0; ++i) x(i) = rng.normal();
      x = 2.0 * means[static_cast<std::size_t>(k)] + 0.6 * x;
      x /= x.norm();
      ds.points.push_back(std::move(x));
      ds.labels.push_back(k);
    }
  }
  return ds;
}

}  // namespace

StructureResult run_structure_experiment(const SweepConfig& cfg, int classes) {
  cfg.validate();
  if (classes < 2) {
    throw std::invalid_argument(
        "run_structure_experiment: need at least 2 classes (block structure "
        "is undefined for a single class)");
  }
  const int m = cfg.m;
  const int L = cfg.depths.front();
  const double sw2 = cfg.sigma_w_sq.front();
  const int n0 = cfg.n0_for(m);
  const NetworkConfig net = cell_network(n0, m, L, sw2);

  const BlobDataset ds = make_blobs(
      n0, classes, derive_seed(cfg.seed, stream_tag(SeedStream::dataset), 0));
  const std::size_t n_points = ds.points.size();

  // One scalar output head per class, trained one-vs-rest.
  std::vector<Parameters> heads;
  heads.reserve(static_cast<std::size_t>(classes));
  for (int h = 0; h < classes; ++h) {
    heads.push_back(init_network(
        net, derive_seed(cfg.seed, stream_tag(SeedStream::sample),
                         static_cast<std::uint64_t>(h))));
  }
  auto target = [&](int h, std::size_t i) {
    return ds.labels[i] == h ? 1.0 : 0.0;
  };

  StructureResult result;
  double loss0 = -1.0;

  for (int epoch = 0;; ++epoch) {
    // One combined pass per head: traces for loss now, gradients for the
    // step afterwards.
    std::vector<std::vector<ForwardTrace>> fwd(
        static_cast<std::size_t>(classes));
    std::vector<std::vector<BackwardTrace>> bwd(
        static_cast<std::size_t>(classes));
    double loss = 0.0;
    for (int h = 0; h < classes; ++h) {
      auto& fh = fwd[static_cast<std::size_t>(h)];
      auto& bh = bwd[static_cast<std::size_t>(h)];
      fh.reserve(n_points);
      bh.reserve(n_points);
      for (std::size_t i = 0; i < n_points; ++i) {
        fh.push_back(forward(heads[static_cast<std::size_t>(h)], ds.points[i]));
        bh.push_back(backward(heads[static_cast<std::size_t>(h)], fh.back()));
        const double r = fh.back().output - target(h, i);
        loss += 0.5 * r * r;
      }
    }
    loss /= static_cast<double>(classes) * static_cast<double>(n_points);
    if (epoch == 0) loss0 = loss;

    const bool converged_now = loss < kLossTarget;
    if (is_snapshot_epoch(epoch) || converged_now || epoch == kMaxEpochs) {
      Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(
          static_cast<Eigen::Index>(n_points),
          static_cast<Eigen::Index>(n_points));
      for (int h = 0; h < classes; ++h) {
        gram += ntk_gram(heads[static_cast<std::size_t>(h)], ds.points);
      }
      const StructureMetrics metrics = structure_metrics(gram, ds.labels);
      StructureRow row;
      row.epoch = epoch;
      row.train_loss = loss;
      row.theta_d = metrics.theta_d;
      row.theta_c = metrics.theta_c;
      row.theta_n = metrics.theta_n;
      row.block_ratio = (metrics.theta_c - metrics.theta_n) / metrics.theta_d;
      row.min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(
                        gram, Eigen::EigenvaluesOnly)
                        .eigenvalues()
                        .minCoeff();
      row.trace = gram.trace();
      row.seed = cfg.seed;
      result.rows.push_back(std::move(row));
    }
    if (converged_now || epoch == kMaxEpochs) {
      result.converged = converged_now;
      result.epochs_run = epoch;
      break;
    }
    if (epoch > 0 && (!std::isfinite(loss) || loss > 10.0 * loss0)) {
      throw std::runtime_error(
          "run_structure_experiment: training diverged (loss " +
          std::to_string(loss) + " vs 10 x initial " + std::to_string(loss0) +
          " at epoch " + std::to_string(epoch) +
          "); lower eta or the depth/variance scale");
    }

    // Full-batch GD step on every head.
    for (int h = 0; h < classes; ++h) {
      Parameters& params = heads[static_cast<std::size_t>(h)];
      std::vector<Eigen::MatrixXd> gw;
      std::vector<Eigen::VectorXd> gb;
      gw.reserve(params.weights.size());
      gb.reserve(params.biases.size());
      for (std::size_t l = 0; l < params.weights.size(); ++l) {
        gw.emplace_back(Eigen::MatrixXd::Zero(params.weights[l].rows(),
                                              params.weights[l].cols()));
        gb.emplace_back(Eigen::VectorXd::Zero(params.biases[l].size()));
      }
      for (std::size_t i = 0; i < n_points; ++i) {
        const ForwardTrace& f = fwd[static_cast<std::size_t>(h)][i];
        const BackwardTrace& b = bwd[static_cast<std::size_t>(h)][i];
        const double coef =
            (f.output - target(h, i)) / static_cast<double>(n_points);
        for (int l = 1; l <= net.depth(); ++l) {
          const std::size_t k = static_cast<std::size_t>(l) - 1;
          gw[k].noalias() += coef * (b.d(l) * f.act_in(l).transpose());
          gb[k] += coef * b.d(l);
        }
      }
      for (std::size_t l = 0; l < params.weights.size(); ++l) {
        params.weights[l] -= cfg.eta * gw[l];
        params.biases[l] -= cfg.eta * gb[l];
      }
    }
  }
  return result;
}

void write_structure_csv(const SweepConfig& cfg, const StructureResult& result,
                         const std::string& path) {
  CsvWriter w(path);
  write_common_header(w, cfg);
  w.comment("dataset: unit-normalized gaussian blobs, " +
            std::to_string(kPointsPerClass) + " points per class");
  w.comment("training: plain full-batch gradient descent, one-vs-rest scalar "
            "heads (one network per class), quadratic loss");
  w.comment("kernel: sum of the per-head kernel matrices");
  w.comment("converged = " + std::string(result.converged ? "1" : "0"));
  w.comment("epochs_run = " + std::to_string(result.epochs_run));
  w.columns({"epoch", "train_loss", "theta_d", "theta_c", "theta_n",
             "block_ratio", "min_eig", "trace", "seed", "version", "sampler"});
  for (const StructureRow& r : result.rows) {
    w.row({CsvWriter::fmt(r.epoch), CsvWriter::fmt(r.train_loss),
           CsvWriter::fmt(r.theta_d), CsvWriter::fmt(r.theta_c),
           CsvWriter::fmt(r.theta_n), CsvWriter::fmt(r.block_ratio),
           CsvWriter::fmt(r.min_eig), CsvWriter::fmt(r.trace),
           CsvWriter::fmt(r.seed), kVersion, kSamplerIdentity});
  }
}

// ---------------------------------------------------------------------------
// Theory evaluation
// ---------------------------------------------------------------------------

std::vector<TheoryRow> run_theory_eval(const SweepConfig& cfg) {
  cfg.validate();
  std::vector<TheoryRow> rows;
  const bool ramps = cfg.m1 > 0 && cfg.m2 > 0;
  const std::vector<ScheduleKind> schedules =
      ramps ? std::vector<ScheduleKind>{ScheduleKind::ramp_up,
                                        ScheduleKind::constant,
                                        ScheduleKind::ramp_down}
            : std::vector<ScheduleKind>{ScheduleKind::constant};
  const std::vector<double> rho_list =
      cfg.cosines.empty() ? std::vector<double>{1.0} : cfg.cosines;

  for (double sw2 : cfg.sigma_w_sq) {
    for (int L : cfg.depths) {
      for (ScheduleKind sched : schedules) {
        NetworkConfig net;
        double lambda = 0.0;
        double alpha0 = 0.0;
        int m_col = 0;
        if (ramps) {
          net.widths = width_schedule({sched, cfg.m1, cfg.m2, L});
          net.sigma_w_sq = sw2;
          net.sigma_b_sq = 0.0;
          m_col = static_cast<int>(std::ceil((cfg.m1 + cfg.m2) / 2.0));
          lambda = 2.0 * static_cast<double>(L) /
                   static_cast<double>(cfg.m1 + cfg.m2);
          alpha0 = static_cast<double>(net.widths[0]) /
                   static_cast<double>(m_col);
        } else {
          const int n0 = cfg.n0_for(cfg.m);
          net = cell_network(n0, cfg.m, L, sw2);
          m_col = cfg.m;
          lambda = static_cast<double>(L) / static_cast<double>(cfg.m);
          alpha0 = static_cast<double>(n0) / static_cast<double>(cfg.m);
        }
        const PhasePoint point = make_phase_point(sw2, lambda, alpha0);
        const FirstMoments first = expected_moments(net);
        const double finite = dispersion_finite(net);
        const double limit = dispersion_limit(point);
        for (double rho0 : rho_list) {
          TheoryRow row;
          row.sigma_w_sq = sw2;
          row.phase = phase_name(point.phase);
          row.schedule = schedule_name(sched);
          row.depth = L;
          row.m = m_col;
          row.m1 = cfg.m1;
          row.m2 = cfg.m2;
          row.alpha0 = alpha0;
          row.lambda = lambda;
          row.rho0 = rho0;
          row.limit = limit;
          row.finite = finite;
          row.e_theta_w = first.e_theta_w;
          row.e_theta_b = first.e_theta_b;
          row.bound = nondiag_lower_bound(rho0, L, sw2 / 2.0);
          rows.push_back(std::move(row));
        }
      }
    }
  }
  return rows;
}

void write_theory_csv(const SweepConfig& cfg,
                      const std::vector<TheoryRow>& rows,
                      const std::string& path) {
  CsvWriter w(path);
  write_common_header(w, cfg);
  w.columns({"sigma_w_sq", "phase", "schedule", "depth", "m", "m1", "m2",
             "alpha0", "lambda", "rho0", "limit", "finite", "e_theta_w",
             "e_theta_b", "bound", "version", "sampler"});
  for (const TheoryRow& r : rows) {
    w.row({CsvWriter::fmt(r.sigma_w_sq), r.phase, r.schedule,
           CsvWriter::fmt(r.depth), CsvWriter::fmt(r.m), CsvWriter::fmt(r.m1),
           CsvWriter::fmt(r.m2), CsvWriter::fmt(r.alpha0),
           CsvWriter::fmt(r.lambda), CsvWriter::fmt(r.rho0),
           CsvWriter::fmt(r.limit), CsvWriter::fmt(r.finite),
           CsvWriter::fmt(r.e_theta_w), CsvWriter::fmt(r.e_theta_b),
           CsvWriter::fmt(r.bound), kVersion, kSamplerIdentity});
  }
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

std::size_t run_and_write(const SweepConfig& cfg) {
  cfg.validate();
  if (cfg.out.empty()) {
    throw std::invalid_argument("run_and_write: output path is required");
  }
  switch (cfg.kind) {
    case ExperimentKind::dispersion: {
      const auto rows = run_dispersion_sweep(cfg);
      write_dispersion_csv(cfg, rows, cfg.out);
      return rows.size();
    }
    case ExperimentKind::nondiag: {
      const auto rows = run_nondiag_sweep(cfg);
      write_nondiag_csv(cfg, rows, cfg.out);
      return rows.size();
    }
    case ExperimentKind::gd_step: {
      const auto rows = run_gd_step_experiment(cfg);
      write_gd_step_csv(cfg, rows, cfg.out);
      return rows.size();
    }
    case ExperimentKind::structure: {
      const auto result = run_structure_experiment(cfg);
      write_structure_csv(cfg, result, cfg.out);
      return result.rows.size();
    }
    case ExperimentKind::theory: {
      const auto rows = run_theory_eval(cfg);
      write_theory_csv(cfg, rows, cfg.out);
      return rows.size();
    }
  }
  throw std::logic_error("run_and_write: unreachable kind");
}

}  // namespace ntklab
