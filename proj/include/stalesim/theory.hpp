#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "stalesim/optimization.hpp"
#include "stalesim/runtime_models.hpp"
#include "stalesim/sim_engine.hpp"

namespace stalesim {

/// Inputs of the convergence bounds.
struct TheoryParams {
  double eta = 0.0;
  double L = 0.0;
  double c = 0.0;
  double sigma2 = 0.0;
  double M_G = 0.0;
  std::size_t m = 1;
  std::size_t K = 1;
  double gamma = 0.0;  ///< staleness coefficient, in [0, 1]
  double p0 = 0.0;     ///< lower bound on Pr(tau = j | past), in [0, 1]
  double C = 0.0;      ///< schedule constant of the variable-rate bound
  double eta_max = 0.0;
  std::size_t J = 0;

  double gamma_prime() const noexcept { return 1.0 - gamma + 0.5 * p0; }

  /// L, c, sigma2, M_G from the objective; eta, m, K, J, C, eta_max from the variant.
  static TheoryParams from(const ObjectiveConstants& constants, const VariantConfig& variant);
};

/// Largest eta allowed by the K-async bound: 1 / (2L (M_G/(Km) + 1/K)).
double kasync_step_limit(const TheoryParams& p);
/// Largest eta allowed by the K-sync bound: 1 / (2L (M_G/(Km) + 1)).
double ksync_step_limit(const TheoryParams& p);
/// Largest eta_j allowed by the variable-rate bound: 1 / (2L (M_G/m + 1)).
double variable_lr_step_limit(const TheoryParams& p);

/// eta L sigma^2 / (2 c gamma' K m).
double kasync_error_floor(const TheoryParams& p);
/// eta L sigma^2 / (2 c K m).
double ksync_error_floor(const TheoryParams& p);

/// Per-iteration upper bounds b_0 .. b_J on E[F(w_j)] - F*.
struct BoundSeries {
  std::vector<double> values;
  double floor = 0.0;
  /// Constant per-iteration contraction for fixed-rate bounds; NaN otherwise.
  double decay_factor = 0.0;
  /// Variable-rate bound only: rho_j, Delta_j, the contraction product after
  /// j steps and the accumulated Delta after j steps (both of length J + 1).
  std::vector<double> rho;
  std::vector<double> delta;
  std::vector<double> product;
  std::vector<double> accumulated_delta;
};

/// K-async (and K-batch-async) bound:
///   b_j = floor + (1 - eta c gamma')^j (F0_gap - floor).
/// Throws PreconditionError when the step size, gamma or p0 are out of range.
BoundSeries bound_kasync(const TheoryParams& params, double f0_gap);

/// K-sync bound: b_j = floor + (1 - eta c)^j (F0_gap - floor).
BoundSeries bound_ksync(const TheoryParams& params, double f0_gap);

/// Bound for a per-iteration rate sequence eta_0 .. eta_{J-1}:
///   b_{j+1} = (1 - rho_j) b_j + Delta_j,  b_0 = F0_gap,
///   rho_j = eta_j (1 + p0/2) c,  Delta_j = eta_j^2 L sigma^2 / (2m) + C L^2 / 2.
/// `floor` is Delta_J / rho_J, the level the recursion settles at if the last
/// rate were held.
BoundSeries bound_variable_lr(std::span<const double> etas, const TheoryParams& params, double f0_gap);

/// Ergodic bound on the mean squared gradient norm over J+1 iterates:
///   2 F0_gap / ((J+1) eta gamma') + L eta sigma^2 / (K m gamma').
double bound_nonconvex(const TheoryParams& params, double f0_gap, std::size_t J);

/// P E[X_{P:P}] / E[X]: expected time per iteration of fully synchronous SGD
/// over fully asynchronous SGD.
Estimate speedup_sync_over_async(const RuntimeDistribution& dist, std::size_t P, const OrderStatisticMethod& method);

/// P log P, the large-P approximation of the exponential speed-up.
double speedup_log_approximation(std::size_t P);

enum class RatioKind { Exact, UpperBound, Indeterminate };
std::string to_string(RatioKind k);

struct RuntimeRatio {
  Estimate ratio;
  RatioKind kind = RatioKind::Indeterminate;
};

/// P E[X_{K:P}] / (K E[X]). Exact for memoryless service, an upper bound on the
/// K-async / K-batch-async runtime ratio for new-longer-than-used service.
RuntimeRatio ratio_kasync_over_kbatchasync(const RuntimeDistribution& dist, std::size_t P, std::size_t K,
                                           const OrderStatisticMethod& method);

struct P0Estimate {
  double p0 = 1.0;
  std::size_t fresh = 0;
  std::size_t contributions = 0;
  bool degenerate_protocol = false;  ///< synchronous trace; p0 is 1 by construction
};

/// Fraction of contributions with zero staleness. This is a marginal
/// frequency used as a proxy for the conditional lower bound p0.
/// Asynchronous traces need at least 1000 records.
P0Estimate estimate_p0(const SimTrace& trace);
/// Pooled over several replications of one configuration.
P0Estimate estimate_p0(std::span<const SimTrace> traces);

struct GammaEstimate {
  double gamma = 0.0;
  double drift = 0.0;     ///< sum of |grad F(w_j) - grad F(w_tau)|^2 over contributions
  double gradient = 0.0;  ///< sum of |grad F(w_j)|^2 over contributions
  bool hypothesis_violated = false;  ///< gamma > 1
};

/// Empirical ratio mean |grad F(w_j) - grad F(w_tau)|^2 / mean |grad F(w_j)|^2
/// over all contributions. Requires a trace run with record_params.
GammaEstimate estimate_gamma(const SimTrace& trace, const Objective& objective);
GammaEstimate estimate_gamma(std::span<const SimTrace> traces, const Objective& objective);

}  // namespace stalesim
