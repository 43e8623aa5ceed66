#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>

#include "bnmc/errors.hpp"
#include "bnmc/network.hpp"

/**
 * \file
 * \brief Relative (epsilon, delta) accuracy targets, a priori sample-size
 * bounds and the stopping-rule threshold used by the sequential estimators.
 */

namespace bnmc {

/// Target relative error `epsilon` in (0, 2] with failure probability `delta` in (0, 1).
struct AccuracyParams {
  double epsilon = 0.05;
  double delta = 0.05;

  void check() const {
    if (!(epsilon > 0.0 && epsilon <= 2.0)) {
      throw Error(ErrorCode::invalid_argument, "epsilon must lie in (0, 2]");
    }
    if (!(delta > 0.0 && delta < 1.0)) {
      throw Error(ErrorCode::invalid_argument, "delta must lie in (0, 1)");
    }
  }

  /// Bounds are still computed above 1, but the guarantees were only analyzed for epsilon <= 1.
  [[nodiscard]] bool beyond_analyzed_range() const { return epsilon > 1.0; }
};

/// |estimate - exact| / exact.
inline double relative_error(double estimate, double exact) {
  if (exact == 0.0) {
    return estimate == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return std::abs(estimate - exact) / exact;
}

/// exact(1 - epsilon) <= estimate <= exact(1 + epsilon).
inline bool within_relative_error(double estimate, double exact, double epsilon) {
  return exact * (1.0 - epsilon) <= estimate && estimate <= exact * (1.0 + epsilon);
}

struct StoppingConstants {
  static constexpr double lambda = std::numbers::e - 2.0;
  static constexpr double chebychev_c = 1.0;
  static constexpr double aa_c = 2.0;
};

namespace detail {

// Counts are ceilings of real expressions; a relative slack of 1e-12 keeps
// values such as 1999.9999999999998 and 2000.0000000000002 on the same side.
inline std::uint64_t ceil_count(double value) {
  if (!(value > 0.0)) {
    return 0;
  }
  const double c = std::ceil(value * (1.0 - 1e-12));
  if (c >= 1.8e19) {
    return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(c);
}

}  // namespace detail

/// Chebychev sample size ceil(c sigma^2 / (epsilon^2 mu^2 delta)); nullopt when mu = 0.
inline std::optional<std::uint64_t> chebychev_samples(double sigma2, double mu, AccuracyParams params,
                                                      double c = StoppingConstants::chebychev_c) {
  params.check();
  if (sigma2 < 0.0 || mu < 0.0) {
    throw Error(ErrorCode::invalid_argument, "variance and mean must be nonnegative");
  }
  if (mu == 0.0) {
    return std::nullopt;
  }
  return detail::ceil_count(c * sigma2 / (params.epsilon * params.epsilon * mu * mu * params.delta));
}

/// Zero-one estimator sample size ceil(4 ln(2/delta) / (mu epsilon^2)); nullopt when mu = 0.
inline std::optional<std::uint64_t> zero_one_samples(double mu, AccuracyParams params) {
  params.check();
  if (mu < 0.0 || mu > 1.0) {
    throw Error(ErrorCode::invalid_argument, "mu must lie in [0, 1]");
  }
  if (mu == 0.0) {
    return std::nullopt;
  }
  return detail::ceil_count(4.0 / (mu * params.epsilon * params.epsilon) * std::log(2.0 / params.delta));
}

/// Worst-case size ceil(4 Gamma^k ln(2/delta) / epsilon^2); nullopt for extreme probabilities.
inline std::optional<std::uint64_t> lvb_samples(const LvbSummary& lvb, AccuracyParams params) {
  params.check();
  if (lvb.extreme || !std::isfinite(lvb.gamma)) {
    return std::nullopt;
  }
  const double growth = std::pow(lvb.gamma, static_cast<double>(lvb.k));
  return detail::ceil_count(4.0 * growth / (params.epsilon * params.epsilon) * std::log(2.0 / params.delta));
}

/// Stopping-rule threshold S* = 4 lambda (1 + epsilon) ln(2/delta) / epsilon^2, kept real.
inline double bv_threshold(AccuracyParams params) {
  params.check();
  const double eps = params.epsilon;
  return 4.0 * StoppingConstants::lambda * (1.0 + eps) * std::log(2.0 / params.delta) / (eps * eps);
}

/// Failure probability at which an attained sum meets the threshold with equality, capped at 1.
inline double invert_failure(double attained_sum, double epsilon) {
  if (!(attained_sum > 0.0) || !(epsilon > 0.0)) {
    return 1.0;
  }
  const double delta =
      2.0 * std::exp(-attained_sum * epsilon * epsilon / (4.0 * StoppingConstants::lambda * (1.0 + epsilon)));
  return std::min(delta, 1.0);
}

}  // namespace bnmc
