#include "ntklab/stats.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ntklab/rng.hpp"

namespace ntklab {

namespace {

bool all_equal(std::span<const double> values) {
  for (double v : values) {
    if (v != values.front()) return false;
  }
  return true;
}

// Shared resampling loop: applies `statistic` to b bootstrap resamples,
// skipping resamples where it throws std::domain_error, and returns the
// standard deviation of the kept values under the 10% degeneracy rule.
template <typename Statistic>
double bootstrap_sd(std::size_t n, int b, std::uint64_t seed,
                    Statistic&& statistic) {
  if (b < 2) {
    throw std::invalid_argument("bootstrap: need at least 2 resamples");
  }
  std::vector<std::size_t> idx(n);
  std::vector<double> kept;
  kept.reserve(static_cast<std::size_t>(b));
  int skipped = 0;

  for (int r = 0; r < b; ++r) {
    Rng rng(derive_seed(seed, stream_tag(SeedStream::bootstrap),
                        static_cast<std::uint64_t>(r)));
    for (std::size_t i = 0; i < n; ++i) idx[i] = rng.index(n);
    try {
      kept.push_back(statistic(idx));
    } catch (const std::domain_error&) {
      ++skipped;
    }
  }

  if (skipped * 10 > b || kept.size() < 2) {
    throw std::runtime_error(
        "bootstrap: " + std::to_string(skipped) + " of " + std::to_string(b) +
        " resamples were degenerate (more than 10%); no standard error "
        "reported");
  }

  double mean = 0.0;
  for (double v : kept) mean += v;
  mean /= static_cast<double>(kept.size());
  double ss = 0.0;
  for (double v : kept) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(kept.size() - 1));
}

}  // namespace

double dispersion_estimator(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 3) {
    throw std::invalid_argument(
        "dispersion_estimator: need at least 3 observations");
  }
  // Zero spread identifies a deterministic kernel (true dispersion 1); the
  // leave-one-out denominators would all vanish, so resolve it exactly here.
  if (all_equal(values)) return 1.0;

  const double nn = static_cast<double>(n);
  double s1 = 0.0;
  double s2 = 0.0;
  for (double v : values) {
    s1 += v;
    s2 += v * v;
  }

  double sum = 0.0;
  for (double v : values) {
    const double rest_sum = s1 - v;
    const double rest_sq = s2 - v * v;
    const double d = (rest_sum * rest_sum - rest_sq) / ((nn - 1.0) * (nn - 2.0));
    if (!(d > 0.0)) {
      throw std::domain_error(
          "dispersion_estimator: non-positive leave-one-out denominator "
          "(degenerate sample)");
    }
    sum += v * v / d;
  }
  return sum / (nn - 2.0);
}

double bootstrap_se(std::span<const double> values, int b, std::uint64_t seed) {
  if (values.size() < 3) {
    throw std::invalid_argument("bootstrap_se: need at least 3 observations");
  }
  return bootstrap_sd(values.size(), b, seed,
                      [&](const std::vector<std::size_t>& idx) {
                        std::vector<double> resample(idx.size());
                        for (std::size_t i = 0; i < idx.size(); ++i) {
                          resample[i] = values[idx[i]];
                        }
                        return dispersion_estimator(resample);
                      });
}

double bootstrap_mean_se(std::span<const double> values, int b,
                         std::uint64_t seed) {
  if (values.empty()) {
    throw std::invalid_argument("bootstrap_mean_se: empty sample");
  }
  return bootstrap_sd(values.size(), b, seed,
                      [&](const std::vector<std::size_t>& idx) {
                        double sum = 0.0;
                        for (std::size_t i : idx) sum += values[i];
                        return sum / static_cast<double>(idx.size());
                      });
}

double mean_ratio_estimator(std::span<const double> num,
                            std::span<const double> den) {
  if (num.size() != den.size() || num.empty()) {
    throw std::invalid_argument(
        "mean_ratio_estimator: need equal-length non-empty samples");
  }
  double num_sum = 0.0;
  double den_sum = 0.0;
  for (std::size_t i = 0; i < num.size(); ++i) {
    num_sum += num[i];
    den_sum += den[i];
  }
  if (den_sum == 0.0) {
    throw std::domain_error("mean_ratio_estimator: denominator sum is zero");
  }
  return num_sum / den_sum;
}

double bootstrap_ratio_se(std::span<const double> num,
                          std::span<const double> den, int b,
                          std::uint64_t seed) {
  if (num.size() != den.size() || num.empty()) {
    throw std::invalid_argument(
        "bootstrap_ratio_se: need equal-length non-empty samples");
  }
  return bootstrap_sd(num.size(), b, seed,
                      [&](const std::vector<std::size_t>& idx) {
                        double num_sum = 0.0;
                        double den_sum = 0.0;
                        for (std::size_t i : idx) {
                          num_sum += num[i];
                          den_sum += den[i];
                        }
                        if (den_sum == 0.0) {
                          throw std::domain_error(
                              "bootstrap_ratio_se: zero denominator resample");
                        }
                        return num_sum / den_sum;
                      });
}

}  // namespace ntklab
