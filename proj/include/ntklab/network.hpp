#pragma once

// Fully-connected ReLU networks in standard parametrization.
//
// A network of depth L maps a unit-norm input x^0 of dimension n_0 through
// L - 1 ReLU hidden layers of widths n_1 .. n_{L-1} to one linear scalar
// output:
//
//   h^l = W^l x^{l-1} + b^l,   x^l = relu(h^l)   for l = 1 .. L - 1,
//   f(x) = W^L x^{L-1} + b^L   (scalar; the output layer has width 1).
//
// Weights are drawn i.i.d. N(0, sigma_w_sq / n_{l-1}) and biases
// N(0, sigma_b_sq); with sigma_b_sq = 0 biases are exactly zero and consume
// no random draws.  The backward pass propagates the output gradient
//
//   delta^L = (1),   delta^l_i = relu'(h^l_i) * sum_j delta^{l+1}_j W^{l+1}_{ji},
//
// with the convention relu'(0) = 0, so that df/dW^l_ij = delta^l_i x^{l-1}_j
// and df/db^l_i = delta^l_i.

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "ntklab/rng.hpp"

namespace ntklab {

// Architecture and initialization variances of one network.
//
// widths = (n_0, ..., n_{L-1}): the input dimension followed by the L - 1
// hidden widths.  The scalar output layer (width 1) is implicit, so
// depth() == widths.size() == L equals the number of weight matrices.
struct NetworkConfig {
  std::vector<int> widths;
  double sigma_w_sq = 2.0;
  double sigma_b_sq = 0.0;

  int depth() const { return static_cast<int>(widths.size()); }

  // Fan-in / fan-out of weight matrix l, for l = 1 .. L (n_L = 1).
  int fan_in(int l) const { return widths[static_cast<std::size_t>(l) - 1]; }
  int fan_out(int l) const {
    return l == depth() ? 1 : widths[static_cast<std::size_t>(l)];
  }

  // Per-layer mean multiplier a = sigma_w_sq / 2 of the squared-norm ratios
  // at constant width; a < 1, = 1, > 1 select the ordered phase, the edge of
  // chaos, and the chaotic phase.
  double a() const { return sigma_w_sq / 2.0; }

  // Throws std::invalid_argument when the architecture or variances are
  // unusable (empty widths, non-positive width, sigma_w_sq <= 0,
  // sigma_b_sq < 0).
  void validate() const;
};

// Concrete sampled parameters.  weights[l-1] is W^l with shape
// fan_out(l) x fan_in(l); biases[l-1] is b^l.
struct Parameters {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  int depth() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return static_cast<int>(weights.front().cols()); }
};

// Every intermediate quantity of one forward evaluation.
struct ForwardTrace {
  Eigen::VectorXd input;             // x^0
  std::vector<Eigen::VectorXd> pre;  // h^1 .. h^{L-1}
  std::vector<Eigen::VectorXd> act;  // x^1 .. x^{L-1}
  double output = 0.0;               // f(x^0)

  // Activation feeding weight matrix l (that is, x^{l-1}); the raw input
  // when l == 1.
  const Eigen::VectorXd& act_in(int l) const {
    return l == 1 ? input : act[static_cast<std::size_t>(l) - 2];
  }
};

// Output-gradient vectors of one backward evaluation.
struct BackwardTrace {
  std::vector<Eigen::VectorXd> delta;  // delta^1 .. delta^L (delta^L = (1))

  // delta^l for l = 1 .. L.
  const Eigen::VectorXd& d(int l) const {
    return delta[static_cast<std::size_t>(l) - 1];
  }
};

// Samples fresh parameters for `config` from the given seed.  Draw order is
// fixed (layer by layer; weights row-major, then biases), so equal
// (config, seed) pairs give bit-identical parameters.  With sigma_b_sq == 0
// the biases are exactly zero and no bias draws are consumed.
Parameters init_network(const NetworkConfig& config, std::uint64_t seed);

// Forward pass.  Requires | ||x|| - 1 | <= 1e-12 and matching input
// dimension; throws std::invalid_argument otherwise.  Inputs are never
// silently renormalized.
ForwardTrace forward(const Parameters& params, const Eigen::VectorXd& x);

// Identical map without the unit-norm gate, for callers that deliberately
// probe off the sphere (finite differences, homogeneity checks, training on
// raw points).
ForwardTrace forward_unchecked(const Parameters& params,
                               const Eigen::VectorXd& x);

// Backward pass for the trace produced by the same parameters.  Uses the
// relu'(0) = 0 convention, so delta^l_i is exactly zero wherever
// h^l_i <= 0.
BackwardTrace backward(const Parameters& params, const ForwardTrace& trace);

// One plain gradient-descent step on the squared loss 0.5 * (f(x) - y)^2.
// Pure: returns the updated copy, leaving `params` untouched.  Requires
// eta > 0; throws std::invalid_argument otherwise.
Parameters gd_step(const Parameters& params, const Eigen::VectorXd& x,
                   double y, double eta);

}  // namespace ntklab
