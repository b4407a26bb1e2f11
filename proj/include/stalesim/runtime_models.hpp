#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "stalesim/random.hpp"

namespace stalesim {

struct Deterministic {
  double value;
};
struct Exponential {
  double rate;
};
struct ShiftedExponential {
  double shift;
  double rate;
};
/// Classical Pareto: support [scale, inf), mean shape*scale/(shape-1).
struct Pareto {
  double shape;
  double scale;
};
struct HyperExponential {
  std::vector<double> weights;
  std::vector<double> rates;
};

/// Service-time law of one mini-batch gradient computation.
///
/// Parameters are validated on construction; a constructed value always has a
/// finite mean. Copyable, immutable, and safe to share between threads.
class RuntimeDistribution {
 public:
  using Params = std::variant<Deterministic, Exponential, ShiftedExponential, Pareto, HyperExponential>;

  static RuntimeDistribution deterministic(double value);
  static RuntimeDistribution exponential(double rate);
  static RuntimeDistribution shifted_exponential(double shift, double rate);
  static RuntimeDistribution pareto(double shape, double scale);
  static RuntimeDistribution hyper_exponential(std::vector<double> weights, std::vector<double> rates);

  explicit RuntimeDistribution(Params params);

  const Params& params() const noexcept { return params_; }

  template <class T>
  bool is() const noexcept {
    return std::holds_alternative<T>(params_);
  }

  double sample(RandomStream& rng) const;
  double mean() const;
  /// Pr(X > x).
  double survival(double x) const;

  /// Short human-readable tag, e.g. "pareto(2,1)".
  std::string describe() const;

  friend bool operator==(const RuntimeDistribution& a, const RuntimeDistribution& b);

 private:
  Params params_;
};

bool operator==(const Deterministic&, const Deterministic&);
bool operator==(const Exponential&, const Exponential&);
bool operator==(const ShiftedExponential&, const ShiftedExponential&);
bool operator==(const Pareto&, const Pareto&);
bool operator==(const HyperExponential&, const HyperExponential&);

enum class MonotonicityClass { NewLongerThanUsed, NewShorterThanUsed, Memoryless, Unknown };

std::string to_string(MonotonicityClass c);

/// Analytic rule where one is tabulated (Exponential, HyperExponential,
/// ShiftedExponential); otherwise the survival-function grid check.
MonotonicityClass classify_monotonicity(const RuntimeDistribution& dist);

/// Checks Pr(X > u+t | X > t) against Pr(X > u) on t,u in {0.1, 0.2, ..., 10}.
/// Grid points with Pr(X > t) = 0 are skipped.
MonotonicityClass classify_monotonicity_by_grid(const RuntimeDistribution& dist, double tolerance = 1e-9);

struct Analytic {};
struct MonteCarlo {
  std::size_t samples = 100'000;
  std::uint64_t seed = 0x5eedULL;
};
using OrderStatisticMethod = std::variant<Analytic, MonteCarlo>;

/// Point estimate with its standard error (zero for closed forms).
struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

/// H_n = sum_{i=1}^n 1/i, summed from the small terms up.
double harmonic_number(std::size_t n);

/// E[X_{K:P}], the K-th smallest of P i.i.d. draws.
///
/// Analytic is available for Deterministic, Exponential ((H_P - H_{P-K})/mu,
/// exact) and ShiftedExponential (shift plus the exponential term). Other laws
/// throw UnsupportedMethodError. MonteCarlo draws P samples per replication
/// and selects the K-th smallest.
Estimate expected_order_statistic(const RuntimeDistribution& dist, std::size_t k, std::size_t p,
                                  const OrderStatisticMethod& method);

/// The log(P/(P-K))/mu approximation of the exponential order statistic
/// (log(P)/mu when K = P). Never used where exact values are compared.
double order_statistic_log_approximation(double rate, std::size_t k, std::size_t p);

}  // namespace stalesim
