#include "ntklab/ntk.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <stdexcept>

namespace ntklab {

namespace {

// Unit-norm gate shared by the pair entry points; the forward pass enforces
// the same bound, but checking here gives a kernel-specific message before
// any work happens.
void require_unit(const Eigen::VectorXd& x, const char* who) {
  if (!(std::abs(x.norm() - 1.0) <= 1e-12)) {
    throw std::invalid_argument(std::string(who) +
                                ": inputs must be unit-norm within 1e-12");
  }
}

// Lexicographic comparison on the raw IEEE-754 coefficient bytes.  Used only
// to pick a canonical evaluation order for input pairs so the kernel is
// exactly symmetric in its two arguments.
bool bytes_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  const int cmp = std::memcmp(a.data(), b.data(),
                              static_cast<std::size_t>(a.size()) * sizeof(double));
  return cmp < 0;
}

}  // namespace

NtkBreakdown ntk_from_traces(const ForwardTrace& fwd_a,
                             const BackwardTrace& bwd_a,
                             const ForwardTrace& fwd_b,
                             const BackwardTrace& bwd_b) {
  const int L = static_cast<int>(bwd_a.delta.size());
  NtkBreakdown out;
  for (int l = 1; l <= L; ++l) {
    const double dd = bwd_a.d(l).dot(bwd_b.d(l));
    out.theta_w += dd * fwd_a.act_in(l).dot(fwd_b.act_in(l));
    out.theta_b += dd;
  }
  out.theta = out.theta_w + out.theta_b;
  return out;
}

NtkBreakdown ntk_pair_fast(const Parameters& params, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& x_tilde) {
  require_unit(x, "ntk_pair_fast");
  require_unit(x_tilde, "ntk_pair_fast");
  const Eigen::VectorXd* first = &x;
  const Eigen::VectorXd* second = &x_tilde;
  if (bytes_less(*second, *first)) std::swap(first, second);

  const ForwardTrace fa = forward(params, *first);
  const BackwardTrace ba = backward(params, fa);
  const ForwardTrace fb = forward(params, *second);
  const BackwardTrace bb = backward(params, fb);
  return ntk_from_traces(fa, ba, fb, bb);
}

NtkBreakdown ntk_pair_direct(const Parameters& params,
                             const Eigen::VectorXd& x,
                             const Eigen::VectorXd& x_tilde) {
  require_unit(x, "ntk_pair_direct");
  require_unit(x_tilde, "ntk_pair_direct");

  const ForwardTrace fa = forward(params, x);
  const BackwardTrace ba = backward(params, fa);
  const ForwardTrace fb = forward(params, x_tilde);
  const BackwardTrace bb = backward(params, fb);

  NtkBreakdown out;
  const int L = params.depth();
  for (int l = 1; l <= L; ++l) {
    const Eigen::VectorXd& da = ba.d(l);
    const Eigen::VectorXd& db = bb.d(l);
    const Eigen::VectorXd& xa = fa.act_in(l);
    const Eigen::VectorXd& xb = fb.act_in(l);
    // Weight entries: df/dW^l_ij = delta^l_i x^{l-1}_j, one product per
    // matrix entry.
    for (Eigen::Index i = 0; i < da.size(); ++i) {
      for (Eigen::Index j = 0; j < xa.size(); ++j) {
        out.theta_w += (da(i) * xa(j)) * (db(i) * xb(j));
      }
    }
    // Bias entries: df/db^l_i = delta^l_i.
    for (Eigen::Index i = 0; i < da.size(); ++i) {
      out.theta_b += da(i) * db(i);
    }
  }
  out.theta = out.theta_w + out.theta_b;
  return out;
}

Eigen::MatrixXd ntk_gram(const Parameters& params,
                         const std::vector<Eigen::VectorXd>& dataset) {
  if (dataset.empty()) {
    throw std::invalid_argument("ntk_gram: dataset must be non-empty");
  }
  const std::size_t n = dataset.size();

  // One forward/backward trace per sample, reused for every pair.
  std::vector<ForwardTrace> fwd;
  std::vector<BackwardTrace> bwd;
  fwd.reserve(n);
  bwd.reserve(n);
  for (const Eigen::VectorXd& x : dataset) {
    require_unit(x, "ntk_gram");
    fwd.push_back(forward(params, x));
    bwd.push_back(backward(params, fwd.back()));
  }

  Eigen::MatrixXd gram(static_cast<Eigen::Index>(n),
                       static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v =
          ntk_from_traces(fwd[i], bwd[i], fwd[j], bwd[j]).theta;
      gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      gram(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  return gram;
}

StructureMetrics structure_metrics(const Eigen::MatrixXd& gram,
                                   const std::vector<int>& labels) {
  const Eigen::Index n = gram.rows();
  if (gram.cols() != n) {
    throw std::invalid_argument("structure_metrics: gram must be square");
  }
  if (static_cast<Eigen::Index>(labels.size()) != n || n == 0) {
    throw std::invalid_argument(
        "structure_metrics: labels must match the gram dimension and be "
        "non-empty");
  }

  std::map<int, std::vector<Eigen::Index>> classes;
  for (Eigen::Index i = 0; i < n; ++i) {
    classes[labels[static_cast<std::size_t>(i)]].push_back(i);
  }
  const std::size_t k_classes = classes.size();
  if (k_classes < 2) {
    throw std::invalid_argument(
        "structure_metrics: cross-class average undefined with a single "
        "class");
  }
  for (const auto& [label, members] : classes) {
    if (members.size() < 2) {
      throw std::invalid_argument(
          "structure_metrics: within-class average undefined for class " +
          std::to_string(label) + " with fewer than two members");
    }
  }

  StructureMetrics out;
  for (Eigen::Index i = 0; i < n; ++i) out.theta_d += gram(i, i);
  out.theta_d /= static_cast<double>(n);

  for (const auto& [label, members] : classes) {
    const std::size_t m = members.size();
    double within = 0.0;
    for (Eigen::Index i : members) {
      for (Eigen::Index j : members) {
        if (i != j) within += gram(i, j);
      }
    }
    out.theta_c += within / (static_cast<double>(m) *
                             static_cast<double>(m - 1));

    double cross = 0.0;
    for (Eigen::Index i : members) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (labels[static_cast<std::size_t>(j)] != label) cross += gram(i, j);
      }
    }
    out.theta_n += cross / (static_cast<double>(m) *
                            static_cast<double>(n - static_cast<Eigen::Index>(m)));
  }
  out.theta_c /= static_cast<double>(k_classes);
  out.theta_n /= static_cast<double>(k_classes);
  return out;
}

NtkBreakdown rescale_ntk(const NtkBreakdown& b, double alpha) {
  NtkBreakdown out;
  const double s = alpha * alpha;
  out.theta_w = s * b.theta_w;
  out.theta_b = s * b.theta_b;
  out.theta = out.theta_w + out.theta_b;
  return out;
}

GdResponse ntk_gd_response(const Parameters& params, const Eigen::VectorXd& x,
                           double y, double eta) {
  require_unit(x, "ntk_gd_response");
  if (!(std::isfinite(eta) && eta >= 0.0)) {
    throw std::invalid_argument(
        "ntk_gd_response: eta must be finite and >= 0");
  }

  const int L = params.depth();
  const ForwardTrace fwd = forward(params, x);
  const BackwardTrace bwd = backward(params, fwd);
  const double g = fwd.output - y;

  // relu gates of the hidden layers (relu'(0) = 0 convention), shared by
  // both tangent sweeps so the masks are the exact ones backward() used.
  std::vector<Eigen::ArrayXd> gate(fwd.pre.size());
  for (std::size_t k = 0; k < fwd.pre.size(); ++k) {
    gate[k] = (fwd.pre[k].array() > 0.0).cast<double>();
  }

  // Forward tangent sweep along the parameter velocity
  //   (W^l)-dot = -g delta^l (x^{l-1})^T,  (b^l)-dot = -g delta^l:
  //   x-dot^0 = 0,
  //   h-dot^l = -g (||x^{l-1}||^2 + 1) delta^l + W^l x-dot^{l-1},
  //   x-dot^l = gate^l .* h-dot^l           for the hidden layers.
  std::vector<Eigen::VectorXd> xdot(static_cast<std::size_t>(L));
  xdot[0] = Eigen::VectorXd::Zero(x.size());
  for (int l = 1; l <= L - 1; ++l) {
    const std::size_t k = static_cast<std::size_t>(l);
    Eigen::VectorXd hdot =
        (-g * (fwd.act_in(l).squaredNorm() + 1.0)) * bwd.d(l);
    hdot.noalias() += params.weights[k - 1] * xdot[k - 1];
    xdot[k] = gate[k - 1] * hdot.array();
  }

  // Backward tangent sweep.  delta^L = (1) is parameter-free, and
  //   delta-dot^l = gate^l .* ( -g ||delta^{l+1}||^2 x^l
  //                             + (W^{l+1})^T delta-dot^{l+1} ),
  // where the first term is (W^{l+1})-dot^T delta^{l+1} collapsed via the
  // rank-one velocity (gating x^l is a no-op since x^l is already gated).
  std::vector<Eigen::VectorXd> ddot(static_cast<std::size_t>(L));
  ddot[static_cast<std::size_t>(L) - 1] = Eigen::VectorXd::Zero(1);
  for (int l = L - 1; l >= 1; --l) {
    const std::size_t k = static_cast<std::size_t>(l);
    Eigen::VectorXd v =
        (-g * bwd.d(l + 1).squaredNorm()) * fwd.act[k - 1];
    v.noalias() += params.weights[k].transpose() * ddot[k];
    ddot[k - 1] = gate[k - 1] * v.array();
  }

  // Theta = sum_l ||delta^l||^2 (||x^{l-1}||^2 + 1) and its directional
  // derivative, accumulated in the same layer order as ntk_from_traces.
  double theta_w = 0.0;
  double theta_b = 0.0;
  double theta_dot = 0.0;
  for (int l = 1; l <= L; ++l) {
    const std::size_t k = static_cast<std::size_t>(l);
    const double dd = bwd.d(l).dot(bwd.d(l));
    const double xs = fwd.act_in(l).dot(fwd.act_in(l));
    theta_w += dd * xs;
    theta_b += dd;
    theta_dot += 2.0 * ddot[k - 1].dot(bwd.d(l)) * (xs + 1.0);
    theta_dot += dd * 2.0 * xdot[k - 1].dot(fwd.act_in(l));
  }

  GdResponse out;
  out.theta = theta_w + theta_b;
  out.theta_dot = theta_dot;
  out.rel_first_order = eta * std::abs(theta_dot) / out.theta;
  return out;
}

LayerRatios layer_ratios(const ForwardTrace& fwd, const BackwardTrace& bwd) {
  const int L = static_cast<int>(bwd.delta.size());
  LayerRatios out;
  if (L < 2) return out;  // no hidden layers, no ratios
  out.n_x.reserve(static_cast<std::size_t>(L) - 1);
  out.n_delta.reserve(static_cast<std::size_t>(L) - 1);

  auto ratio = [](double num, double den) {
    LayerRatioEntry e;
    if (den == 0.0) {
      e.value = std::numeric_limits<double>::quiet_NaN();
      e.defined = false;
    } else {
      e.value = num / den;
      e.defined = true;
    }
    return e;
  };

  for (int l = 1; l <= L - 1; ++l) {
    const double num_x = fwd.act[static_cast<std::size_t>(l) - 1].squaredNorm();
    const double den_x = fwd.act_in(l).squaredNorm();
    out.n_x.push_back(ratio(num_x, den_x));

    const double num_d = bwd.d(l).squaredNorm();
    const double den_d = bwd.d(l + 1).squaredNorm();
    out.n_delta.push_back(ratio(num_d, den_d));
  }
  return out;
}

}  // namespace ntklab
