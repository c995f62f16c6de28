#pragma once

// Exact empirical neural-tangent-kernel computation.
//
// For a scalar-output network f with parameters theta, the empirical NTK of
// an input pair is Theta(x, x~) = <grad_theta f(x), grad_theta f(x~)>, split
// into the weight part Theta_W and the bias part Theta_b.  Using the
// backward vectors delta^l and activations x^{l-1}, the weight/bias parts
// collapse to
//
//   Theta_W = sum_{l=1}^{L} <delta^l, delta~^l> <x^{l-1}, x~^{l-1}>,
//   Theta_b = sum_{l=1}^{L} <delta^l, delta~^l>,
//
// which costs one forward/backward pass per input plus O(sum_l n_l) for the
// layer dot products.  The bias part always includes the output layer, even
// when networks are initialized with sigma_b_sq = 0: the kernel sums over
// bias *parameters*, whose gradients are independent of the bias values.

#include <Eigen/Dense>

#include <vector>

#include "ntklab/network.hpp"

namespace ntklab {

// Weight/bias split of one kernel evaluation; theta == theta_w + theta_b.
struct NtkBreakdown {
  double theta_w = 0.0;
  double theta_b = 0.0;
  double theta = 0.0;
};

// One squared-norm layer ratio; `defined` is false when the denominator is
// exactly zero (dead layer), in which case `value` is NaN.
struct LayerRatioEntry {
  double value = 0.0;
  bool defined = false;
};

// Forward/backward squared-norm ratios of one evaluated input:
//   n_x[l-1]     = ||x^l||^2 / ||x^{l-1}||^2     for l = 1 .. L-1,
//   n_delta[l-1] = ||delta^l||^2 / ||delta^{l+1}||^2 for l = 1 .. L-1.
struct LayerRatios {
  std::vector<LayerRatioEntry> n_x;
  std::vector<LayerRatioEntry> n_delta;
};

// Diagonal/within-class/cross-class averages of a labeled kernel matrix.
struct StructureMetrics {
  double theta_d = 0.0;
  double theta_c = 0.0;
  double theta_n = 0.0;
};

// Kernel of one input pair from already-computed traces.
NtkBreakdown ntk_from_traces(const ForwardTrace& fwd_a,
                             const BackwardTrace& bwd_a,
                             const ForwardTrace& fwd_b,
                             const BackwardTrace& bwd_b);

// Kernel of one unit-norm input pair via the layer-sum decomposition above.
// The pair is brought into a canonical order (lexicographic on the raw
// coefficient bytes) before evaluation, so ntk_pair_fast(p, x, y) and
// ntk_pair_fast(p, y, x) are bit-identical.
NtkBreakdown ntk_pair_fast(const Parameters& params, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& x_tilde);

// Same kernel by brute force: materializes every parameter-gradient entry
// df/dW^l_ij = delta^l_i x^{l-1}_j and df/db^l_i = delta^l_i for both inputs
// and accumulates the full inner product, at O(sum_l n_l n_{l-1}) cost.
// Kept as an independent route for cross-checking ntk_pair_fast; it shares
// no accumulation structure with the fast path.
NtkBreakdown ntk_pair_direct(const Parameters& params,
                             const Eigen::VectorXd& x,
                             const Eigen::VectorXd& x_tilde);

// Kernel matrix of a dataset of unit-norm inputs.  Each sample's
// forward/backward trace is computed once and reused for all pairs; the
// result is symmetric by construction.  Throws std::invalid_argument on an
// empty dataset.
Eigen::MatrixXd ntk_gram(const Parameters& params,
                         const std::vector<Eigen::VectorXd>& dataset);

// Averages the diagonal, within-class, and cross-class entries of a kernel
// matrix:
//   theta_d = (1/|X|) sum_i G_ii,
//   theta_c = (1/K) sum_k [ 1/(|X_k| (|X_k|-1)) ] sum_{i != j in X_k} G_ij,
//   theta_n = (1/K) sum_k [ 1/(|X_k| (|X|-|X_k|)) ] sum_{i in X_k, j not in X_k} G_ij,
// where K is the number of distinct labels.  Throws std::invalid_argument
// when labels and gram disagree in size, when any class has fewer than two
// members (theta_c undefined), or when there is a single class (theta_n
// undefined).
StructureMetrics structure_metrics(const Eigen::MatrixXd& gram,
                                   const std::vector<int>& labels);

// Kernel of the rescaled function alpha * f: every component is multiplied
// by alpha^2.  Dispersion-style ratios are invariant under this map.
NtkBreakdown rescale_ntk(const NtkBreakdown& b, double alpha);

// Linear response of the diagonal kernel to one gradient-descent step.
//
//   theta     = Theta(x, x) at the given parameters,
//   theta_dot = d/d eta Theta(x, x) at eta = 0 under the gd_step update
//               (quadratic loss on the single pair (x, y)),
//   rel_first_order = |eta * theta_dot| / theta.
//
// theta_dot is computed with forward-over-reverse tangents along the
// parameter velocity (W^l, b^l)-dot = -(f - y) * (delta^l (x^{l-1})^T,
// delta^l), treating the relu gates as locally constant.  That convention
// matches relu'(0) = 0 and is exact whenever no preactivation sits at a
// kink, i.e. almost surely at random initialization.  Every factor is a dot
// product of same-scale layer vectors, so the response stays representable
// at depths where the finite-difference quotient (Theta after a literal
// gd_step minus Theta before) has already collapsed to 0 or overflowed in
// double precision; it is the step-size-free way to measure the kernel's
// first-order sensitivity.  Requires a unit-norm input and eta >= 0 (eta
// only scales rel_first_order, so eta = 0 gives exactly 0).
struct GdResponse {
  double theta = 0.0;
  double theta_dot = 0.0;
  double rel_first_order = 0.0;
};
GdResponse ntk_gd_response(const Parameters& params, const Eigen::VectorXd& x,
                           double y, double eta);

// Squared-norm layer ratios of one evaluated input (see LayerRatios).
LayerRatios layer_ratios(const ForwardTrace& fwd, const BackwardTrace& bwd);

}  // namespace ntklab
