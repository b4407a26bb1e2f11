#include "stalesim/theory.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "stalesim/errors.hpp"

namespace stalesim {

TheoryParams TheoryParams::from(const ObjectiveConstants& constants, const VariantConfig& variant) {
  TheoryParams p;
  p.L = constants.L;
  p.c = constants.c;
  p.sigma2 = constants.sigma2;
  p.M_G = constants.M_G;
  p.m = variant.m;
  p.K = variant.K;
  p.J = variant.J;
  p.eta = variant.schedule.eta_max();
  p.eta_max = variant.schedule.eta_max();
  p.C = variant.schedule.C();
  return p;
}

double kasync_step_limit(const TheoryParams& p) {
  const auto km = static_cast<double>(p.K * p.m);
  return 1.0 / (2.0 * p.L * (p.M_G / km + 1.0 / static_cast<double>(p.K)));
}

double ksync_step_limit(const TheoryParams& p) {
  const auto km = static_cast<double>(p.K * p.m);
  return 1.0 / (2.0 * p.L * (p.M_G / km + 1.0));
}

double variable_lr_step_limit(const TheoryParams& p) {
  return 1.0 / (2.0 * p.L * (p.M_G / static_cast<double>(p.m) + 1.0));
}

double kasync_error_floor(const TheoryParams& p) {
  return p.eta * p.L * p.sigma2 / (2.0 * p.c * p.gamma_prime() * static_cast<double>(p.K * p.m));
}

double ksync_error_floor(const TheoryParams& p) {
  return p.eta * p.L * p.sigma2 / (2.0 * p.c * static_cast<double>(p.K * p.m));
}

namespace {

void require_common(const TheoryParams& p) {
  if (!(p.L > 0.0) || !(p.c > 0.0)) throw PreconditionError("bounds need L > 0 and c > 0");
  if (!(p.sigma2 >= 0.0) || !(p.M_G >= 0.0)) throw PreconditionError("bounds need sigma^2 >= 0 and M_G >= 0");
  if (p.m < 1 || p.K < 1) throw PreconditionError("bounds need m >= 1 and K >= 1");
}

BoundSeries geometric_series(double floor, double q, double f0_gap, std::size_t J) {
  BoundSeries s;
  s.floor = floor;
  s.decay_factor = q;
  s.values.resize(J + 1);
  const long double lq = q;
  long double qj = 1.0L;
  for (std::size_t j = 0; j <= J; ++j) {
    s.values[j] = static_cast<double>(floor + qj * (static_cast<long double>(f0_gap) - floor));
    qj *= lq;
  }
  return s;
}

}  // namespace

BoundSeries bound_kasync(const TheoryParams& params, double f0_gap) {
  require_common(params);
  if (!(params.gamma >= 0.0 && params.gamma <= 1.0)) {
    throw PreconditionError("K-async bound needs 0 <= gamma <= 1 (gamma = " + std::to_string(params.gamma) + ")");
  }
  if (!(params.p0 >= 0.0 && params.p0 <= 1.0)) throw PreconditionError("K-async bound needs 0 <= p0 <= 1");
  const double limit = kasync_step_limit(params);
  if (!(params.eta > 0.0) || params.eta > limit) {
    throw PreconditionError("K-async bound needs 0 < eta <= 1/(2L(M_G/(Km) + 1/K)) = " + std::to_string(limit));
  }
  const double q = 1.0 - params.eta * params.c * params.gamma_prime();
  return geometric_series(kasync_error_floor(params), q, f0_gap, params.J);
}

BoundSeries bound_ksync(const TheoryParams& params, double f0_gap) {
  require_common(params);
  const double limit = ksync_step_limit(params);
  if (!(params.eta > 0.0) || params.eta > limit) {
    throw PreconditionError("K-sync bound needs 0 < eta <= 1/(2L(M_G/(Km) + 1)) = " + std::to_string(limit));
  }
  const double q = 1.0 - params.eta * params.c;
  return geometric_series(ksync_error_floor(params), q, f0_gap, params.J);
}

BoundSeries bound_variable_lr(std::span<const double> etas, const TheoryParams& params, double f0_gap) {
  require_common(params);
  if (!(params.C >= 0.0)) throw PreconditionError("variable-rate bound needs C >= 0");
  if (!(params.p0 >= 0.0 && params.p0 <= 1.0)) throw PreconditionError("variable-rate bound needs 0 <= p0 <= 1");
  const double limit = variable_lr_step_limit(params);
  for (std::size_t j = 0; j < etas.size(); ++j) {
    if (!(etas[j] > 0.0) || etas[j] > limit) {
      throw PreconditionError("variable-rate bound: eta_" + std::to_string(j) + " = " + std::to_string(etas[j]) +
                              " violates 0 < eta_j <= 1/(2L(M_G/m + 1)) = " + std::to_string(limit));
    }
  }

  BoundSeries s;
  s.decay_factor = std::numeric_limits<double>::quiet_NaN();
  const std::size_t n = etas.size();
  s.values.resize(n + 1);
  s.rho.resize(n);
  s.delta.resize(n);
  s.product.resize(n + 1);
  s.accumulated_delta.resize(n + 1);

  const long double stale_term = 0.5L * params.C * params.L * params.L;
  const long double noise_scale = 0.5L * params.L * params.sigma2 / static_cast<long double>(params.m);
  long double product = 1.0L;
  long double acc = 0.0L;
  s.product[0] = 1.0;
  s.accumulated_delta[0] = 0.0;
  s.values[0] = f0_gap;
  for (std::size_t j = 0; j < n; ++j) {
    const long double eta = etas[j];
    const long double rho = eta * (1.0L + 0.5L * params.p0) * params.c;
    const long double delta = eta * eta * noise_scale + stale_term;
    s.rho[j] = static_cast<double>(rho);
    s.delta[j] = static_cast<double>(delta);
    product *= 1.0L - rho;
    acc = std::fma(1.0L - rho, acc, delta);
    s.product[j + 1] = static_cast<double>(product);
    s.accumulated_delta[j + 1] = static_cast<double>(acc);
    s.values[j + 1] = static_cast<double>(product * f0_gap + acc);
  }
  s.floor = n == 0 ? 0.0 : s.delta.back() / s.rho.back();
  return s;
}

double bound_nonconvex(const TheoryParams& params, double f0_gap, std::size_t J) {
  const double gp = params.gamma_prime();
  if (!(gp > 0.0)) throw PreconditionError("non-convex bound needs gamma' > 0");
  const auto km = static_cast<double>(params.K * params.m);
  return 2.0 * f0_gap / (static_cast<double>(J + 1) * params.eta * gp) + params.L * params.eta * params.sigma2 / (km * gp);
}

Estimate speedup_sync_over_async(const RuntimeDistribution& dist, std::size_t P, const OrderStatisticMethod& method) {
  if (P < 1) throw std::invalid_argument("speed-up needs P >= 1");
  const Estimate max_stat = expected_order_statistic(dist, P, P, method);
  const double scale = static_cast<double>(P) / dist.mean();
  return {scale * max_stat.value, scale * max_stat.stderr_};
}

double speedup_log_approximation(std::size_t P) {
  const auto p = static_cast<double>(P);
  return p * std::log(p);
}

std::string to_string(RatioKind k) {
  switch (k) {
    case RatioKind::Exact: return "exact";
    case RatioKind::UpperBound: return "upper_bound";
    case RatioKind::Indeterminate: return "indeterminate";
  }
  return "indeterminate";
}

RuntimeRatio ratio_kasync_over_kbatchasync(const RuntimeDistribution& dist, std::size_t P, std::size_t K,
                                           const OrderStatisticMethod& method) {
  const Estimate stat = expected_order_statistic(dist, K, P, method);
  const double scale = static_cast<double>(P) / (static_cast<double>(K) * dist.mean());
  RuntimeRatio r;
  r.ratio = {scale * stat.value, scale * stat.stderr_};
  switch (classify_monotonicity(dist)) {
    case MonotonicityClass::Memoryless: r.kind = RatioKind::Exact; break;
    case MonotonicityClass::NewLongerThanUsed: r.kind = RatioKind::UpperBound; break;
    default: r.kind = RatioKind::Indeterminate; break;
  }
  return r;
}

P0Estimate estimate_p0(std::span<const SimTrace> traces) {
  P0Estimate e;
  if (traces.empty()) throw InsufficientDataError("no traces");
  if (traces.front().config.synchronous()) {
    e.degenerate_protocol = true;
    for (const auto& t : traces) {
      for (const auto& r : t.records) e.contributions += r.staleness.size();
    }
    e.fresh = e.contributions;
    e.p0 = 1.0;
    return e;
  }
  for (const auto& t : traces) {
    if (t.records.size() < 1000) {
      throw InsufficientDataError("p0 estimate needs at least 1000 records per trace, have " +
                                  std::to_string(t.records.size()));
    }
    for (const auto& r : t.records) {
      for (auto s : r.staleness) {
        ++e.contributions;
        if (s == 0) ++e.fresh;
      }
    }
  }
  e.p0 = static_cast<double>(e.fresh) / static_cast<double>(e.contributions);
  return e;
}

P0Estimate estimate_p0(const SimTrace& trace) { return estimate_p0(std::span<const SimTrace>(&trace, 1)); }

GammaEstimate estimate_gamma(std::span<const SimTrace> traces, const Objective& objective) {
  GammaEstimate e;
  long double drift = 0.0L;
  long double grad = 0.0L;
  for (const auto& t : traces) {
    if (t.param_history.size() != t.records.size() + 1) {
      throw ConfigurationError("estimate_gamma needs parameter snapshots (run with record_params)");
    }
    std::vector<Vector> grads;
    grads.reserve(t.param_history.size());
    for (const auto& w : t.param_history) grads.push_back(objective.gradient(w));
    for (std::size_t r = 0; r < t.records.size(); ++r) {
      const std::size_t j = r;  // the update recorded at index r was applied to w_r
      for (auto s : t.records[r].staleness) {
        const std::size_t tau = j - s;
        drift += (grads[j] - grads[tau]).squaredNorm();
        grad += grads[j].squaredNorm();
      }
    }
  }
  e.drift = static_cast<double>(drift);
  e.gradient = static_cast<double>(grad);
  e.gamma = grad > 0.0L ? static_cast<double>(drift / grad) : 0.0;
  e.hypothesis_violated = e.gamma > 1.0;
  return e;
}

GammaEstimate estimate_gamma(const SimTrace& trace, const Objective& objective) {
  return estimate_gamma(std::span<const SimTrace>(&trace, 1), objective);
}

}  // namespace stalesim
