#pragma once

// Closed-form predictions for NTK moments and dispersion at initialization.
//
// Everything here describes networks with sigma_b_sq = 0 and unit-norm
// inputs.  Writing a = sigma_w_sq / 2, the mean multiplier of the squared-
// norm layer ratios, the three initialization regimes are
//
//   ordered  a < 1,   edge of chaos (EOC)  a = 1,   chaotic  a > 1,
//
// and the large-width behaviour of the diagonal kernel Theta(x, x) is
// controlled by the depth-to-width ratio lambda = L / M together with the
// input-to-width ratio alpha0 = n_0 / M on the EOC.
//
// Two routes are implemented and kept deliberately separate:
//   * dispersion_limit: the lambda -> const limits of the dispersion
//     E[Theta^2] / E[Theta]^2 in each phase;
//   * expected_moments / second_moments / dispersion_finite: finite-width,
//     finite-depth moment formulas for arbitrary width schedules, exact up
//     to terms of order M^(-3/2) (the only systematic truncation).
// Tests require the second route to converge to the first as widths grow.

#include <cstdint>
#include <vector>

#include "ntklab/network.hpp"

namespace ntklab {

enum class Phase { ordered, eoc, chaotic };

const char* phase_name(Phase p);

// Classifies sigma_w_sq by a = sigma_w_sq / 2 with an EOC tolerance of
// |a - 1| <= 1e-12.  Throws std::invalid_argument when sigma_w_sq <= 0.
Phase phase_of(double sigma_w_sq);

// One point of the infinite-width-and-depth limit: variance scale, joint
// depth/width ratio lambda = L / M, and (EOC only) input ratio
// alpha0 = n_0 / M.
struct PhasePoint {
  double sigma_w_sq = 2.0;
  double lambda = 1.0;
  double alpha0 = 1.0;
  Phase phase = Phase::eoc;
};

// Builds a PhasePoint, classifying the phase from sigma_w_sq.
PhasePoint make_phase_point(double sigma_w_sq, double lambda,
                            double alpha0 = 1.0);

// Limiting dispersion E[Theta(x,x)^2] / E[Theta(x,x)]^2 as L, M -> infinity
// at fixed lambda (and alpha0 on the EOC):
//   ordered:  1;
//   chaotic:  (1/(2 lambda)) e^{5 lambda} (1 - (1/(4 lambda))(1 - e^{-4 lambda}));
//   EOC:      the alpha0-dependent expression implemented in the .cpp.
// Requires lambda > 0 (and alpha0 > 0 on the EOC).
double dispersion_limit(const PhasePoint& p);

// Algebraically regrouped form of the EOC limit, implemented independently
// and used as a cross-check of dispersion_limit; the two agree to 1e-12
// relative and neither may replace the other.
double eoc_dispersion_limit_regrouped(double lambda, double alpha0);

// First moments of the kernel parts at finite width/depth:
//   E[Theta_W] = a^{L-1} sum_{l=1}^{L} n_{l-1} / n_0,
//   E[Theta_b] = (a^L - 1)/(a - 1), or L when |a - 1| <= 1e-12.
// Requires sigma_b_sq == 0 (the formulas assume zero bias variance).
struct FirstMoments {
  double e_theta_w = 0.0;
  double e_theta_b = 0.0;
};
FirstMoments expected_moments(const NetworkConfig& config);

// First and second moments of (Theta_W, Theta_b) at finite width/depth with
// terms of order M^(-3/2) dropped.  The second moments may legitimately
// imply a dispersion below 1 at very small widths; values are reported raw,
// never clamped.
struct MomentSet {
  double e_theta_w = 0.0;
  double e_theta_b = 0.0;
  double e_theta_w_sq = 0.0;
  double e_theta_b_sq = 0.0;
  double e_theta_wb = 0.0;
};
MomentSet second_moments(const NetworkConfig& config);

// Finite-width dispersion of the full kernel Theta = Theta_W + Theta_b:
//   (E[Theta_W^2] + 2 E[Theta_W Theta_b] + E[Theta_b^2])
//     / (E[Theta_W] + E[Theta_b])^2.
double dispersion_finite(const NetworkConfig& config);

// Gradient cosine map g(t) = (1/pi)(pi/2 + arcsin t): the large-width
// expectation multiplier picked up by <delta, delta~> per layer at
// activation cosine t.  Domain |t| <= 1.
double g_map(double t);

// Activation cosine map r(t) = (1/pi)(sqrt(1 - t^2) + t pi/2 + t arcsin t):
// the large-width update rule for the cosine of two activations across one
// ReLU layer at the EOC.  Domain |t| <= 1; maps [0, 1] into [1/pi, 1].
double r_map(double t);

// Iterates r_map: returns (rho_0, rho_1, ..., rho_k) with
// rho_{j+1} = r_map(rho_j).  Requires k >= 0 and |rho0| <= 1.
std::vector<double> rho_sequence(double rho0, int k);

// Depth-L lower-bound estimate for E[Theta(x, x~)] / E[Theta(x, x)] at
// input cosine rho0 and mean multiplier a:
//   sum_{l=1}^{L} a^{L-l} prod_{k=l}^{L-1} g(rho_{k-1})
//     / sum_{l=1}^{L} a^{L-l},
// with rho_j the r_map iterates of rho0.  Lies in (0, 1], equals 1 exactly
// when rho0 = 1 or L = 1, and is increasing in rho0.
double nondiag_lower_bound(double rho0, int L, double a);

}  // namespace ntklab
