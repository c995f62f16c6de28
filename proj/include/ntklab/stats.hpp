#pragma once

// Sample statistics for kernel dispersion experiments.
//
// The central quantity is the dispersion estimator for a positive sample
// theta_1 .. theta_N:
//
//   r_hat = (1/(N-2)) sum_i theta_i^2 / D_i,
//   D_i   = [ (S_1 - theta_i)^2 - (S_2 - theta_i^2) ] / [ (N-1)(N-2) ],
//
// with running totals S_1 = sum_j theta_j and S_2 = sum_j theta_j^2; D_i is
// the unbiased mean-square of the sample with observation i left out.  The
// estimator targets E[theta^2] / E[theta]^2 and is exactly scale-invariant.
// Its leave-one-out denominators make it far less biased than the naive
// plug-in ratio mean(theta^2) / mean(theta)^2, but it is not exactly
// unbiased: a small positive O(1/N) bias remains (roughly N/(N-2) - 1 plus
// a Jensen term from the random denominator).
//
// Uncertainty is quantified by nonparametric bootstrap standard errors.
// Bootstrap randomness is derived from an explicit seed, independent of the
// randomness that produced the sample, with one stream per resample.

#include <cstdint>
#include <span>

namespace ntklab {

// Bootstrap resample count used by the experiment harness and echoed into
// CSV headers.
inline constexpr int kDefaultBootstrapResamples = 1000;

// Dispersion estimator above.  Requires n >= 3 (std::invalid_argument).  A
// sample with zero spread identifies a deterministic kernel, whose true
// dispersion is 1; that case short-circuits to exactly 1.0 before any
// denominator is formed.  Otherwise every leave-one-out denominator must be
// strictly positive; a non-positive one throws std::domain_error (a flagged
// error, never a silent NaN).
double dispersion_estimator(std::span<const double> values);

// Bootstrap standard error of dispersion_estimator: the standard deviation
// of the estimator over b resamples of size n drawn with replacement.
// Requires n >= 3 and b >= 2.  Resamples whose estimator is degenerate are
// skipped and counted; more than 10% skipped (or fewer than two usable
// resamples) is reported as std::runtime_error rather than a value.
double bootstrap_se(std::span<const double> values, int b, std::uint64_t seed);

// Bootstrap standard error of the sample mean, same resampling scheme.
double bootstrap_mean_se(std::span<const double> values, int b,
                         std::uint64_t seed);

// Ratio-of-means estimator sum(num) / sum(den) for paired samples (the
// pairing, e.g. by shared initialization seed, is the caller's job).
// Requires equal non-empty lengths; a denominator sum of exactly zero
// throws std::domain_error.
double mean_ratio_estimator(std::span<const double> num,
                            std::span<const double> den);

// Bootstrap standard error of mean_ratio_estimator: pairs are resampled
// jointly.  Resamples with zero denominator sum are skipped and counted
// under the same 10% rule as bootstrap_se.
double bootstrap_ratio_se(std::span<const double> num,
                          std::span<const double> den, int b,
                          std::uint64_t seed);

}  // namespace ntklab
