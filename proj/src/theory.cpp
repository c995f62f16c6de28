#include "ntklab/theory.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ntklab {

namespace {

constexpr double kEocTol = 1e-12;
constexpr double kPi = 3.141592653589793238462643383279502884;

// Shared precondition of the finite-width moment formulas.
void require_theory_config(const NetworkConfig& config, const char* who) {
  config.validate();
  if (config.sigma_b_sq != 0.0) {
    throw std::invalid_argument(
        std::string(who) +
        ": moment formulas require sigma_b_sq == 0 (bias variance enters the "
        "kernel only through its parameter count, but nonzero bias values "
        "change the activation statistics these formulas assume away)");
  }
}

}  // namespace

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::ordered:
      return "ordered";
    case Phase::eoc:
      return "eoc";
    case Phase::chaotic:
      return "chaotic";
  }
  return "unknown";
}

Phase phase_of(double sigma_w_sq) {
  if (!(sigma_w_sq > 0.0)) {
    throw std::invalid_argument("phase_of: sigma_w_sq must be > 0");
  }
  const double a = sigma_w_sq / 2.0;
  if (std::abs(a - 1.0) <= kEocTol) return Phase::eoc;
  return a < 1.0 ? Phase::ordered : Phase::chaotic;
}

PhasePoint make_phase_point(double sigma_w_sq, double lambda, double alpha0) {
  PhasePoint p;
  p.sigma_w_sq = sigma_w_sq;
  p.lambda = lambda;
  p.alpha0 = alpha0;
  p.phase = phase_of(sigma_w_sq);
  return p;
}

double dispersion_limit(const PhasePoint& p) {
  if (!(p.lambda > 0.0)) {
    throw std::invalid_argument("dispersion_limit: lambda must be > 0");
  }
  switch (p.phase) {
    case Phase::ordered:
      return 1.0;
    case Phase::chaotic: {
      const double lam = p.lambda;
      // (1/(2 lam)) e^{5 lam} (1 - (1/(4 lam)) (1 - e^{-4 lam})); the inner
      // 1 - e^{-4 lam} uses expm1 for accuracy at small lam.
      const double inner = 1.0 - (1.0 / (4.0 * lam)) * (-std::expm1(-4.0 * lam));
      return (1.0 / (2.0 * lam)) * std::exp(5.0 * lam) * inner;
    }
    case Phase::eoc: {
      const double lam = p.lambda;
      const double a0 = p.alpha0;
      if (!(a0 > 0.0)) {
        throw std::invalid_argument(
            "dispersion_limit: alpha0 must be > 0 on the EOC");
      }
      const double e5 = std::exp(5.0 * lam);
      const double e1 = std::exp(lam);
      const double term1 =
          e5 * (1.0 / (2.0 * lam) + (2.0 * a0 * a0 - 8.0 * a0) / (25.0 * lam * lam));
      const double term2 = (e1 - e5) * (1.0 - 4.0 * a0) / (8.0 * lam * lam);
      const double term3 =
          (2.0 * a0 / (5.0 * lam)) * ((4.0 - a0) / (5.0 * lam) - 1.0 - a0);
      return (term1 + term2 + term3) / ((1.0 + a0) * (1.0 + a0));
    }
  }
  throw std::logic_error("dispersion_limit: unreachable phase");
}

double eoc_dispersion_limit_regrouped(double lambda, double alpha0) {
  if (!(lambda > 0.0) || !(alpha0 > 0.0)) {
    throw std::invalid_argument(
        "eoc_dispersion_limit_regrouped: lambda and alpha0 must be > 0");
  }
  const double lam = lambda;
  const double a0 = alpha0;
  const double e5 = std::exp(5.0 * lam);
  const double e1 = std::exp(lam);
  const double bracket =
      e5 * (0.5 + (16.0 * a0 * a0 + 36.0 * a0 - 25.0) / (200.0 * lam)) +
      e1 * (1.0 - 4.0 * a0) / (8.0 * lam) +
      2.0 * a0 * (4.0 - a0) / (25.0 * lam) - 2.0 * a0 * (1.0 + a0) / 5.0;
  return bracket / ((1.0 + a0) * (1.0 + a0) * lam);
}

FirstMoments expected_moments(const NetworkConfig& config) {
  require_theory_config(config, "expected_moments");
  const int L = config.depth();
  const double a = config.a();
  const double n0 = static_cast<double>(config.widths[0]);

  FirstMoments out;
  double width_sum = 0.0;
  for (int l = 1; l <= L; ++l) {
    width_sum += static_cast<double>(config.fan_in(l)) / n0;
  }
  out.e_theta_w = std::pow(a, L - 1) * width_sum;
  out.e_theta_b = std::abs(a - 1.0) <= kEocTol
                      ? static_cast<double>(L)
                      : (std::pow(a, L) - 1.0) / (a - 1.0);
  return out;
}

MomentSet second_moments(const NetworkConfig& config) {
  require_theory_config(config, "second_moments");
  const int L = config.depth();
  const double a = config.a();
  const double n0 = static_cast<double>(config.widths[0]);

  // Prefix products over the hidden widths n_1 .. n_{L-1}:
  //   px[j] = prod_{k=1}^{j-1} (1 + 5/n_k),  pc[j] = prod_{k=1}^{j-1} (1 + 1/n_k),
  // so that the interval products X_(i,j) = px[j]/px[i] and
  // C_(i,j) = pc[j]/pc[i], with empty intervals (i = j) equal to 1.
  std::vector<double> px(static_cast<std::size_t>(L) + 1, 1.0);
  std::vector<double> pc(static_cast<std::size_t>(L) + 1, 1.0);
  for (int j = 2; j <= L; ++j) {
    const double nk = static_cast<double>(config.widths[static_cast<std::size_t>(j) - 1]);
    px[static_cast<std::size_t>(j)] =
        px[static_cast<std::size_t>(j) - 1] * (1.0 + 5.0 / nk);
    pc[static_cast<std::size_t>(j)] =
        pc[static_cast<std::size_t>(j) - 1] * (1.0 + 1.0 / nk);
  }
  auto X = [&](int i, int j) {
    return px[static_cast<std::size_t>(j)] / px[static_cast<std::size_t>(i)];
  };
  auto C = [&](int i, int j) {
    return pc[static_cast<std::size_t>(j)] / pc[static_cast<std::size_t>(i)];
  };
  auto w_in = [&](int l) {  // n_{l-1} / n_0
    return static_cast<double>(config.fan_in(l)) / n0;
  };

  MomentSet out;
  const FirstMoments first = expected_moments(config);
  out.e_theta_w = first.e_theta_w;
  out.e_theta_b = first.e_theta_b;

  // E[Theta_W^2] = a^{2(L-1)} X_(1,L) [ sum_l (n_{l-1}/n_0)^2
  //   + 2 sum_{l1<l2} (n_{l1-1} n_{l2-1} / n_0^2) C_(l1,l2) / X_(l1,l2) ].
  {
    double diag = 0.0;
    for (int l = 1; l <= L; ++l) diag += w_in(l) * w_in(l);
    double cross = 0.0;
    for (int l1 = 1; l1 <= L; ++l1) {
      for (int l2 = l1 + 1; l2 <= L; ++l2) {
        cross += w_in(l1) * w_in(l2) * C(l1, l2) / X(l1, l2);
      }
    }
    out.e_theta_w_sq =
        std::pow(a, 2 * (L - 1)) * X(1, L) * (diag + 2.0 * cross);
  }

  // E[Theta_b^2] = sum_l a^{2(L-l)} X_(l,L)
  //   + 2 sum_{l1<l2} a^{2L-l1-l2} X_(l2,L).
  {
    double diag = 0.0;
    for (int l = 1; l <= L; ++l) diag += std::pow(a, 2 * (L - l)) * X(l, L);
    double cross = 0.0;
    for (int l1 = 1; l1 <= L; ++l1) {
      for (int l2 = l1 + 1; l2 <= L; ++l2) {
        cross += std::pow(a, 2 * L - l1 - l2) * X(l2, L);
      }
    }
    out.e_theta_b_sq = diag + 2.0 * cross;
  }

  // E[Theta_W Theta_b] = sum_l (n_{l-1}/n_0) a^{2L-1-l} X_(l,L)
  //   + sum_{l1<l2} (n_{l1-1}/n_0) a^{2L-1-l1} X_(l2,L)
  //       [ (n_{l2-1}/n_{l1-1}) C_(l1,l2) + a^{l1-l2} ];
  // the second sum already folds both orderings of the pair.
  {
    double diag = 0.0;
    for (int l = 1; l <= L; ++l) {
      diag += w_in(l) * std::pow(a, 2 * L - 1 - l) * X(l, L);
    }
    double cross = 0.0;
    for (int l1 = 1; l1 <= L; ++l1) {
      for (int l2 = l1 + 1; l2 <= L; ++l2) {
        const double widths_ratio = static_cast<double>(config.fan_in(l2)) /
                                    static_cast<double>(config.fan_in(l1));
        cross += w_in(l1) * std::pow(a, 2 * L - 1 - l1) * X(l2, L) *
                 (widths_ratio * C(l1, l2) + std::pow(a, l1 - l2));
      }
    }
    out.e_theta_wb = diag + cross;
  }

  return out;
}

double dispersion_finite(const NetworkConfig& config) {
  const MomentSet m = second_moments(config);
  const double mean = m.e_theta_w + m.e_theta_b;
  const double second = m.e_theta_w_sq + 2.0 * m.e_theta_wb + m.e_theta_b_sq;
  // The raw moments grow like a^{2(L-1)} in the chaotic phase and exceed
  // double range near depth ~900 at sigma_w^2 = 3; fail loudly instead of
  // returning a silent NaN/0 ratio.
  if (!std::isfinite(second) || !std::isfinite(mean * mean)) {
    throw std::domain_error(
        "dispersion_finite: kernel moments overflow double precision for "
        "this configuration (too deep at this sigma_w^2)");
  }
  return second / (mean * mean);
}

double g_map(double t) {
  if (!(std::abs(t) <= 1.0)) {
    throw std::invalid_argument("g_map: domain is |t| <= 1");
  }
  return (kPi / 2.0 + std::asin(t)) / kPi;
}

double r_map(double t) {
  if (!(std::abs(t) <= 1.0)) {
    throw std::invalid_argument("r_map: domain is |t| <= 1");
  }
  return (std::sqrt(1.0 - t * t) + t * kPi / 2.0 + t * std::asin(t)) / kPi;
}

std::vector<double> rho_sequence(double rho0, int k) {
  if (k < 0) {
    throw std::invalid_argument("rho_sequence: k must be >= 0");
  }
  if (!(std::abs(rho0) <= 1.0)) {
    throw std::invalid_argument("rho_sequence: domain is |rho0| <= 1");
  }
  std::vector<double> rho;
  rho.reserve(static_cast<std::size_t>(k) + 1);
  rho.push_back(rho0);
  for (int j = 0; j < k; ++j) {
    // Clamp accumulated round-off at the fixed point back into the domain.
    rho.push_back(std::min(1.0, r_map(rho.back())));
  }
  return rho;
}

double nondiag_lower_bound(double rho0, int L, double a) {
  if (L < 1) {
    throw std::invalid_argument("nondiag_lower_bound: L must be >= 1");
  }
  if (!(a > 0.0)) {
    throw std::invalid_argument("nondiag_lower_bound: a must be > 0");
  }
  if (!(std::abs(rho0) <= 1.0)) {
    throw std::invalid_argument("nondiag_lower_bound: domain is |rho0| <= 1");
  }

  // rho_j for j = 0 .. L-2 feed the products prod_{k=l}^{L-1} g(rho_{k-1}).
  const std::vector<double> rho = rho_sequence(rho0, L >= 2 ? L - 2 : 0);
  std::vector<double> suffix(static_cast<std::size_t>(L) + 1, 1.0);
  for (int l = L - 1; l >= 1; --l) {
    suffix[static_cast<std::size_t>(l)] =
        g_map(rho[static_cast<std::size_t>(l) - 1]) *
        suffix[static_cast<std::size_t>(l) + 1];
  }

  double num = 0.0;
  double den = 0.0;
  for (int l = 1; l <= L; ++l) {
    const double weight = std::pow(a, L - l);
    num += weight * suffix[static_cast<std::size_t>(l)];
    den += weight;
  }
  return num / den;
}

}  // namespace ntklab
