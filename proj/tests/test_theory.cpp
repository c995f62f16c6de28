// Unit tests for the closed-form theory: phase classification, dispersion
// limits against frozen high-precision references, finite-width moment
// formulas against a brute-force oracle, and the cosine-map machinery.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "dispersion_reference.hpp"
#include "ntklab/rng.hpp"
#include "ntklab/theory.hpp"

using namespace ntklab;

namespace {

double rel_err(double value, double reference) {
  if (value == reference) return 0.0;
  return std::abs(value - reference) / std::abs(reference);
}

NetworkConfig constant_config(int n0, int m, int depth, double sw2) {
  NetworkConfig c;
  c.widths.assign(static_cast<std::size_t>(depth), m);
  c.widths[0] = n0;
  c.sigma_w_sq = sw2;
  c.sigma_b_sq = 0.0;
  return c;
}

// Brute-force evaluation of the second-moment formulas: every interval
// product X_(i,j) = prod_{k=i}^{j-1} (1 + 5/n_k) (and the 1/n_k analogue
// C) is multiplied out literally per pair, with no prefix arrays and no
// shared state, so any indexing or accumulation bug in the library route
// would have to be reproduced here independently to go unnoticed.
double interval_x(const NetworkConfig& cfg, int i, int j) {
  double p = 1.0;
  for (int k = i; k < j; ++k) {
    p *= 1.0 + 5.0 / static_cast<double>(cfg.widths[static_cast<std::size_t>(k)]);
  }
  return p;
}

double interval_c(const NetworkConfig& cfg, int i, int j) {
  double p = 1.0;
  for (int k = i; k < j; ++k) {
    p *= 1.0 + 1.0 / static_cast<double>(cfg.widths[static_cast<std::size_t>(k)]);
  }
  return p;
}

MomentSet brute_force_moments(const NetworkConfig& cfg) {
  const int L = cfg.depth();
  const double a = cfg.a();
  const double n0 = static_cast<double>(cfg.widths[0]);
  auto w_in = [&](int l) {
    return static_cast<double>(cfg.fan_in(l)) / n0;
  };

  MomentSet m;
  for (int l = 1; l <= L; ++l) m.e_theta_w += w_in(l);
  m.e_theta_w *= std::pow(a, L - 1);
  m.e_theta_b = std::abs(a - 1.0) <= 1e-12
                    ? static_cast<double>(L)
                    : (std::pow(a, L) - 1.0) / (a - 1.0);

  double ww = 0.0;
  for (int l = 1; l <= L; ++l) ww += w_in(l) * w_in(l);
  for (int l1 = 1; l1 <= L; ++l1) {
    for (int l2 = l1 + 1; l2 <= L; ++l2) {
      ww += 2.0 * w_in(l1) * w_in(l2) * interval_c(cfg, l1, l2) /
            interval_x(cfg, l1, l2);
    }
  }
  m.e_theta_w_sq = std::pow(a, 2 * (L - 1)) * interval_x(cfg, 1, L) * ww;

  for (int l = 1; l <= L; ++l) {
    m.e_theta_b_sq += std::pow(a, 2 * (L - l)) * interval_x(cfg, l, L);
  }
  for (int l1 = 1; l1 <= L; ++l1) {
    for (int l2 = l1 + 1; l2 <= L; ++l2) {
      m.e_theta_b_sq +=
          2.0 * std::pow(a, 2 * L - l1 - l2) * interval_x(cfg, l2, L);
    }
  }

  for (int l = 1; l <= L; ++l) {
    m.e_theta_wb += w_in(l) * std::pow(a, 2 * L - 1 - l) * interval_x(cfg, l, L);
  }
  for (int l1 = 1; l1 <= L; ++l1) {
    for (int l2 = l1 + 1; l2 <= L; ++l2) {
      const double widths_ratio = static_cast<double>(cfg.fan_in(l2)) /
                                  static_cast<double>(cfg.fan_in(l1));
      m.e_theta_wb += w_in(l1) * std::pow(a, 2 * L - 1 - l1) *
                      interval_x(cfg, l2, L) *
                      (widths_ratio * interval_c(cfg, l1, l2) +
                       std::pow(a, l1 - l2));
    }
  }
  return m;
}

}  // namespace

TEST_CASE("phase classification by sigma_w_sq") {
  CHECK(phase_of(1.0) == Phase::ordered);
  CHECK(phase_of(2.0) == Phase::eoc);
  CHECK(phase_of(3.0) == Phase::chaotic);
  CHECK(phase_of(2.0 + 5e-13) == Phase::eoc);   // |a - 1| = 2.5e-13
  CHECK(phase_of(2.0 - 5e-13) == Phase::eoc);
  CHECK(phase_of(2.0 + 4e-12) == Phase::chaotic);  // |a - 1| = 2e-12
  CHECK_THROWS_AS(phase_of(0.0), std::invalid_argument);
  CHECK_THROWS_AS(phase_of(-1.0), std::invalid_argument);
  CHECK(phase_name(Phase::ordered) == std::string("ordered"));
  CHECK(phase_name(Phase::eoc) == std::string("eoc"));
  CHECK(phase_name(Phase::chaotic) == std::string("chaotic"));
}

TEST_CASE("dispersion limits match the frozen 60-digit references") {
  for (const auto& pt : reference::kChaoticDispersion) {
    const double v = dispersion_limit(make_phase_point(3.0, pt.lambda_));
    CHECK(rel_err(v, pt.value) <= 1e-12);
  }
  for (const auto& pt : reference::kEocDispersion) {
    const double v =
        dispersion_limit(make_phase_point(2.0, pt.lambda_, pt.alpha0));
    CHECK(rel_err(v, pt.value) <= 1e-12);
  }
}

TEST_CASE("ordered limit is exactly 1; invalid limit arguments throw") {
  for (double lam : {0.1, 1.0, 10.0}) {
    CHECK(dispersion_limit(make_phase_point(1.0, lam)) == 1.0);
    CHECK(dispersion_limit(make_phase_point(1.5, lam)) == 1.0);
  }
  CHECK_THROWS_AS(dispersion_limit(make_phase_point(3.0, 0.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(dispersion_limit(make_phase_point(3.0, -1.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(dispersion_limit(make_phase_point(2.0, 1.0, 0.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(eoc_dispersion_limit_regrouped(1.0, -2.0),
                  std::invalid_argument);
}

TEST_CASE("independently regrouped EOC limit agrees to 1e-12") {
  for (double lam : {0.1, 0.25, 0.5, 1.0, 2.0, 3.0}) {
    for (double a0 : {0.01, 0.1, 0.5, 1.0, 2.0, 5.0}) {
      const double main_form = dispersion_limit(make_phase_point(2.0, lam, a0));
      const double regrouped = eoc_dispersion_limit_regrouped(lam, a0);
      CHECK(rel_err(main_form, regrouped) <= 1e-12);
    }
  }
}

TEST_CASE("first moments: depth 1, the edge, and the ordered plateau") {
  for (double sw2 : {1.0, 2.0, 3.0}) {
    const FirstMoments f = expected_moments(constant_config(7, 7, 1, sw2));
    CHECK(f.e_theta_w == 1.0);
    CHECK(f.e_theta_b == 1.0);
  }

  const FirstMoments edge = expected_moments(constant_config(40, 40, 10, 2.0));
  CHECK(edge.e_theta_w == 10.0);
  CHECK(edge.e_theta_b == 10.0);

  // a = 1/2: E[Theta_b] = 2 (1 - 2^{-L}) -> 2.
  const FirstMoments ord = expected_moments(constant_config(30, 30, 60, 1.0));
  CHECK(ord.e_theta_b == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(ord.e_theta_w < 1e-14);

  NetworkConfig biased = constant_config(5, 5, 3, 2.0);
  biased.sigma_b_sq = 0.5;
  CHECK_THROWS_AS(expected_moments(biased), std::invalid_argument);
  CHECK_THROWS_AS(second_moments(biased), std::invalid_argument);
}

TEST_CASE("second moments match the brute-force oracle on random configs") {
  Rng pick(31337);
  int tested = 0;
  for (int t = 0; t < 40; ++t) {
    const int L = 1 + static_cast<int>(pick.index(20));
    NetworkConfig cfg;
    cfg.widths.resize(static_cast<std::size_t>(L));
    for (int& w : cfg.widths) w = 1 + static_cast<int>(pick.index(50));
    cfg.sigma_w_sq = 1.0 + static_cast<double>(pick.index(3));
    cfg.sigma_b_sq = 0.0;

    const MomentSet fast = second_moments(cfg);
    const MomentSet slow = brute_force_moments(cfg);
    CHECK(rel_err(fast.e_theta_w, slow.e_theta_w) <= 1e-12);
    CHECK(rel_err(fast.e_theta_b, slow.e_theta_b) <= 1e-12);
    CHECK(rel_err(fast.e_theta_w_sq, slow.e_theta_w_sq) <= 1e-12);
    CHECK(rel_err(fast.e_theta_b_sq, slow.e_theta_b_sq) <= 1e-12);
    CHECK(rel_err(fast.e_theta_wb, slow.e_theta_wb) <= 1e-12);
    ++tested;
  }
  CHECK(tested == 40);
}

TEST_CASE("depth-1 moments are all exactly 1, as is the dispersion") {
  for (double sw2 : {1.0, 2.0, 3.0}) {
    const NetworkConfig cfg = constant_config(12, 12, 1, sw2);
    const MomentSet m = second_moments(cfg);
    CHECK(m.e_theta_w == 1.0);
    CHECK(m.e_theta_b == 1.0);
    CHECK(m.e_theta_w_sq == 1.0);
    CHECK(m.e_theta_b_sq == 1.0);
    CHECK(m.e_theta_wb == 1.0);
    CHECK(dispersion_finite(cfg) == 1.0);
  }
}

TEST_CASE("shallow-and-wide dispersion sits just above 1") {
  const double v = dispersion_finite(constant_config(10000, 10000, 5, 2.0));
  CHECK(v > 1.0);
  CHECK(v < 1.01);
}

TEST_CASE("finite-width dispersion converges to the phase limits") {
  // Chaotic, lambda = 1/2: the gap to the limit shrinks like 1/M.  Doubling
  // the width must roughly halve the relative error (measured ratios are
  // ~1.95 and ~1.97), and at M = 1000 the gap is below 2%.
  const double limit = dispersion_limit(make_phase_point(3.0, 0.5));
  std::vector<double> gaps;
  for (int m : {250, 500, 1000}) {
    const double finite =
        dispersion_finite(constant_config(m, m, m / 2, 3.0));
    gaps.push_back(rel_err(finite, limit));
  }
  CHECK(gaps[0] > gaps[1]);
  CHECK(gaps[1] > gaps[2]);
  CHECK(gaps[0] / gaps[1] > 1.7);
  CHECK(gaps[0] / gaps[1] < 2.3);
  CHECK(gaps[1] / gaps[2] > 1.7);
  CHECK(gaps[1] / gaps[2] < 2.3);
  CHECK(gaps[2] < 0.02);

  // All phases, lambda in {1/2, 1}, alpha0 = 1, M = 500: within 5%.
  for (double sw2 : {1.0, 2.0, 3.0}) {
    for (double lam : {0.5, 1.0}) {
      const int m = 500;
      const int L = static_cast<int>(lam * m);
      const double finite = dispersion_finite(constant_config(m, m, L, sw2));
      const double limit_v =
          dispersion_limit(make_phase_point(sw2, lam, 1.0));
      CHECK(rel_err(finite, limit_v) < 0.05);
    }
  }
}

TEST_CASE("dispersion_finite refuses configurations whose moments overflow") {
  // a = 3/2 raised to ~2000 exceeds double range; a silent NaN would be
  // worse than an error.
  CHECK_THROWS_AS(
      static_cast<void>(dispersion_finite(constant_config(2000, 2000, 1000, 3.0))),
      std::domain_error);
  // Deep *ordered* stacks stay representable (powers shrink instead).
  CHECK(std::isfinite(dispersion_finite(constant_config(2000, 2000, 1000, 1.0))));
}

TEST_CASE("near-edge ordered dispersion rises then falls in depth") {
  // sigma_w_sq = 1.9 (a = 0.95), M = 200, alpha0 = 1/2: the finite-width
  // dispersion must peak at an interior depth, exceeding both endpoints.
  std::vector<double> disp;
  for (int L = 10; L <= 300; ++L) {
    disp.push_back(dispersion_finite(constant_config(100, 200, L, 1.9)));
  }
  std::size_t argmax = 0;
  for (std::size_t i = 1; i < disp.size(); ++i) {
    if (disp[i] > disp[argmax]) argmax = i;
  }
  CHECK(argmax > 0);
  CHECK(argmax + 1 < disp.size());
  CHECK(disp[argmax] > disp.front());
  CHECK(disp[argmax] > disp.back());
}

TEST_CASE("cosine maps: endpoint values, monotonicity, domain, range") {
  CHECK(g_map(0.0) == 0.5);
  CHECK(g_map(1.0) == 1.0);
  CHECK(g_map(-1.0) == 0.0);
  CHECK(r_map(1.0) == 1.0);
  CHECK(r_map(-1.0) == 0.0);
  CHECK(r_map(0.0) ==
        doctest::Approx(1.0 / 3.141592653589793).epsilon(1e-15));

  CHECK_THROWS_AS(g_map(1.0 + 1e-12), std::invalid_argument);
  CHECK_THROWS_AS(g_map(-1.5), std::invalid_argument);
  CHECK_THROWS_AS(r_map(std::nan("")), std::invalid_argument);
  CHECK_THROWS_AS(r_map(2.0), std::invalid_argument);

  // Strict monotonicity of both maps on a [-1, 1] grid.
  int monotone_checks = 0;
  double prev_g = g_map(-1.0);
  double prev_r = r_map(-1.0);
  for (int i = 1; i <= 2000; ++i) {
    const double t = -1.0 + 2.0 * i / 2000.0;
    const double gg = g_map(t);
    const double rr = r_map(t);
    CHECK(gg > prev_g);
    CHECK(rr > prev_r);
    prev_g = gg;
    prev_r = rr;
    ++monotone_checks;
  }
  CHECK(monotone_checks == 2000);

  // r is a strict expansion on [0, 1) and maps [0, 1] into [1/pi, 1].
  int expansion_checks = 0;
  for (int i = 0; i < 10000; ++i) {
    const double t = static_cast<double>(i) / 10000.0;
    const double rr = r_map(t);
    REQUIRE(rr > t);
    REQUIRE(rr >= r_map(0.0));
    REQUIRE(rr <= 1.0);
    ++expansion_checks;
  }
  CHECK(expansion_checks == 10000);
}

TEST_CASE("rho_sequence iterates r_map toward the fixed point at 1") {
  const std::vector<double> ones = rho_sequence(1.0, 5);
  REQUIRE(ones.size() == 6);
  for (double v : ones) CHECK(v == 1.0);

  const std::vector<double> one_step = rho_sequence(0.0, 1);
  REQUIRE(one_step.size() == 2);
  CHECK(one_step[0] == 0.0);
  CHECK(one_step[1] == r_map(0.0));

  const std::vector<double> deep = rho_sequence(0.1, 200);
  REQUIRE(deep.size() == 201);
  CHECK(deep.back() > 0.999);
  for (std::size_t i = 1; i < deep.size(); ++i) {
    CHECK(deep[i] >= deep[i - 1]);
    CHECK(deep[i] <= 1.0);
  }

  CHECK_THROWS_AS(rho_sequence(0.5, -1), std::invalid_argument);
  CHECK_THROWS_AS(rho_sequence(1.5, 3), std::invalid_argument);
}

TEST_CASE("off-diagonal lower bound: exact cases, range, monotonicity") {
  CHECK(nondiag_lower_bound(1.0, 50, 1.5) == 1.0);
  CHECK(nondiag_lower_bound(1.0, 3, 0.5) == 1.0);
  CHECK(nondiag_lower_bound(0.2, 1, 1.0) == 1.0);

  const double deep_ordered = nondiag_lower_bound(0.5, 100, 0.5);
  CHECK(deep_ordered >= 0.25);
  CHECK(deep_ordered <= 1.0);

  for (double a : {0.5, 1.0, 1.5}) {
    for (int L : {2, 10, 40}) {
      double prev = 0.0;
      for (double rho0 : {0.1, 0.5, 0.9}) {
        const double b = nondiag_lower_bound(rho0, L, a);
        CHECK(b > 0.0);
        CHECK(b <= 1.0);
        CHECK(b < 1.0);  // rho0 < 1 and L >= 2
        CHECK(b > prev);
        prev = b;
      }
    }
  }

  CHECK_THROWS_AS(nondiag_lower_bound(0.5, 0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(nondiag_lower_bound(0.5, 5, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(nondiag_lower_bound(1.2, 5, 1.0), std::invalid_argument);
}

TEST_CASE("EOC limit approaches the chaotic limit as alpha0 -> 0") {
  const double chaotic = dispersion_limit(make_phase_point(3.0, 1.0));
  double prev_gap = -1.0;
  int steps = 0;
  for (double a0 : {1.0, 0.3, 0.1, 0.01}) {
    const double eoc = dispersion_limit(make_phase_point(2.0, 1.0, a0));
    const double gap = std::abs(eoc - chaotic);
    if (prev_gap >= 0.0) CHECK(gap < prev_gap);
    prev_gap = gap;
    ++steps;
  }
  CHECK(steps == 4);
  const double closest = dispersion_limit(make_phase_point(2.0, 1.0, 0.01));
  CHECK(rel_err(closest, chaotic) < 0.05);
}
