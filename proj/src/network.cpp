#include "ntklab/network.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ntklab {

void NetworkConfig::validate() const {
  if (widths.empty()) {
    throw std::invalid_argument("NetworkConfig: widths must be non-empty");
  }
  for (int w : widths) {
    if (w < 1) {
      throw std::invalid_argument("NetworkConfig: every width must be >= 1");
    }
  }
  if (!(sigma_w_sq > 0.0)) {
    throw std::invalid_argument("NetworkConfig: sigma_w_sq must be > 0");
  }
  if (sigma_b_sq < 0.0) {
    throw std::invalid_argument("NetworkConfig: sigma_b_sq must be >= 0");
  }
}

Parameters init_network(const NetworkConfig& config, std::uint64_t seed) {
  config.validate();
  const int L = config.depth();
  Rng rng(seed);

  Parameters params;
  params.weights.reserve(static_cast<std::size_t>(L));
  params.biases.reserve(static_cast<std::size_t>(L));

  for (int l = 1; l <= L; ++l) {
    const int rows = config.fan_out(l);
    const int cols = config.fan_in(l);
    const double sd_w = std::sqrt(config.sigma_w_sq / cols);

    Eigen::MatrixXd w(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) {
        w(i, j) = sd_w * rng.normal();
      }
    }
    params.weights.push_back(std::move(w));

    Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
    if (config.sigma_b_sq > 0.0) {
      const double sd_b = std::sqrt(config.sigma_b_sq);
      for (int i = 0; i < rows; ++i) {
        b(i) = sd_b * rng.normal();
      }
    }
    params.biases.push_back(std::move(b));
  }
  return params;
}

namespace {

ForwardTrace run_forward(const Parameters& params, const Eigen::VectorXd& x) {
  const int L = params.depth();
  if (x.size() != params.input_dim()) {
    throw std::invalid_argument(
        "forward: input dimension " + std::to_string(x.size()) +
        " does not match network input width " +
        std::to_string(params.input_dim()));
  }

  ForwardTrace trace;
  trace.input = x;
  trace.pre.reserve(static_cast<std::size_t>(L) - 1);
  trace.act.reserve(static_cast<std::size_t>(L) - 1);

  const Eigen::VectorXd* cur = &trace.input;
  for (int l = 1; l <= L - 1; ++l) {
    Eigen::VectorXd h = params.weights[static_cast<std::size_t>(l) - 1] * *cur +
                        params.biases[static_cast<std::size_t>(l) - 1];
    trace.pre.push_back(std::move(h));
    trace.act.push_back(trace.pre.back().cwiseMax(0.0));
    cur = &trace.act.back();
  }

  const Eigen::VectorXd out =
      params.weights[static_cast<std::size_t>(L) - 1] * *cur +
      params.biases[static_cast<std::size_t>(L) - 1];
  trace.output = out(0);
  return trace;
}

}  // namespace

ForwardTrace forward(const Parameters& params, const Eigen::VectorXd& x) {
  const double norm = x.norm();
  if (!(std::abs(norm - 1.0) <= 1e-12)) {
    throw std::invalid_argument(
        "forward: input must be unit-norm within 1e-12 (got ||x|| = " +
        std::to_string(norm) + "); inputs are never silently renormalized");
  }
  return run_forward(params, x);
}

ForwardTrace forward_unchecked(const Parameters& params,
                               const Eigen::VectorXd& x) {
  return run_forward(params, x);
}

BackwardTrace backward(const Parameters& params, const ForwardTrace& trace) {
  const int L = params.depth();
  BackwardTrace bwd;
  bwd.delta.assign(static_cast<std::size_t>(L), Eigen::VectorXd());
  bwd.delta[static_cast<std::size_t>(L) - 1] = Eigen::VectorXd::Ones(1);

  for (int l = L - 1; l >= 1; --l) {
    const Eigen::VectorXd back =
        params.weights[static_cast<std::size_t>(l)].transpose() *
        bwd.delta[static_cast<std::size_t>(l)];
    // relu'(h) with the relu'(0) = 0 convention: strictly positive
    // preactivations pass the gradient, everything else blocks it exactly.
    const Eigen::VectorXd gate =
        (trace.pre[static_cast<std::size_t>(l) - 1].array() > 0.0)
            .cast<double>()
            .matrix();
    bwd.delta[static_cast<std::size_t>(l) - 1] = back.cwiseProduct(gate);
  }
  return bwd;
}

Parameters gd_step(const Parameters& params, const Eigen::VectorXd& x,
                   double y, double eta) {
  if (!(eta > 0.0)) {
    throw std::invalid_argument("gd_step: learning rate eta must be > 0");
  }
  const ForwardTrace trace = forward_unchecked(params, x);
  const BackwardTrace bwd = backward(params, trace);
  const double residual = trace.output - y;

  Parameters next = params;
  for (int l = 1; l <= params.depth(); ++l) {
    const std::size_t k = static_cast<std::size_t>(l) - 1;
    next.weights[k].noalias() -=
        (eta * residual) * (bwd.d(l) * trace.act_in(l).transpose());
    next.biases[k] -= (eta * residual) * bwd.d(l);
  }
  return next;
}

}  // namespace ntklab
