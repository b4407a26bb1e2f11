#include "stalesim/runtime_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "stalesim/csv.hpp"
#include "stalesim/errors.hpp"

namespace stalesim {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(what) + " must be finite and strictly positive");
  }
}

void validate(const RuntimeDistribution::Params& params) {
  std::visit(overloaded{
                 [](const Deterministic& d) { require_positive(d.value, "deterministic value"); },
                 [](const Exponential& d) { require_positive(d.rate, "exponential rate"); },
                 [](const ShiftedExponential& d) {
                   require_positive(d.shift, "shifted-exponential shift");
                   require_positive(d.rate, "shifted-exponential rate");
                 },
                 [](const Pareto& d) {
                   require_positive(d.scale, "pareto scale");
                   if (!(d.shape > 1.0) || !std::isfinite(d.shape)) {
                     throw std::invalid_argument("pareto shape must exceed 1 (finite mean)");
                   }
                 },
                 [](const HyperExponential& d) {
                   if (d.weights.empty() || d.weights.size() != d.rates.size()) {
                     throw std::invalid_argument("hyper-exponential needs matching non-empty weights and rates");
                   }
                   double total = 0.0;
                   for (double w : d.weights) {
                     require_positive(w, "hyper-exponential weight");
                     total += w;
                   }
                   for (double r : d.rates) require_positive(r, "hyper-exponential rate");
                   if (std::abs(total - 1.0) > 1e-12) {
                     throw std::invalid_argument("hyper-exponential weights must sum to 1");
                   }
                 },
             },
             params);
}

}  // namespace

RuntimeDistribution::RuntimeDistribution(Params params) : params_(std::move(params)) { validate(params_); }

RuntimeDistribution RuntimeDistribution::deterministic(double value) {
  return RuntimeDistribution(Deterministic{value});
}
RuntimeDistribution RuntimeDistribution::exponential(double rate) { return RuntimeDistribution(Exponential{rate}); }
RuntimeDistribution RuntimeDistribution::shifted_exponential(double shift, double rate) {
  return RuntimeDistribution(ShiftedExponential{shift, rate});
}
RuntimeDistribution RuntimeDistribution::pareto(double shape, double scale) {
  return RuntimeDistribution(Pareto{shape, scale});
}
RuntimeDistribution RuntimeDistribution::hyper_exponential(std::vector<double> weights, std::vector<double> rates) {
  return RuntimeDistribution(HyperExponential{std::move(weights), std::move(rates)});
}

double RuntimeDistribution::sample(RandomStream& rng) const {
  return std::visit(overloaded{
                        [](const Deterministic& d) { return d.value; },
                        [&](const Exponential& d) { return rng.exponential(d.rate); },
                        [&](const ShiftedExponential& d) { return d.shift + rng.exponential(d.rate); },
                        [&](const Pareto& d) { return d.scale * std::pow(rng.uniform_open0(), -1.0 / d.shape); },
                        [&](const HyperExponential& d) {
                          const double u = rng.uniform();
                          double acc = 0.0;
                          std::size_t branch = d.weights.size() - 1;
                          for (std::size_t i = 0; i + 1 < d.weights.size(); ++i) {
                            acc += d.weights[i];
                            if (u < acc) {
                              branch = i;
                              break;
                            }
                          }
                          return rng.exponential(d.rates[branch]);
                        },
                    },
                    params_);
}

double RuntimeDistribution::mean() const {
  return std::visit(overloaded{
                        [](const Deterministic& d) { return d.value; },
                        [](const Exponential& d) { return 1.0 / d.rate; },
                        [](const ShiftedExponential& d) { return d.shift + 1.0 / d.rate; },
                        [](const Pareto& d) { return d.shape * d.scale / (d.shape - 1.0); },
                        [](const HyperExponential& d) {
                          double m = 0.0;
                          for (std::size_t i = 0; i < d.weights.size(); ++i) m += d.weights[i] / d.rates[i];
                          return m;
                        },
                    },
                    params_);
}

double RuntimeDistribution::survival(double x) const {
  return std::visit(overloaded{
                        [x](const Deterministic& d) { return x < d.value ? 1.0 : 0.0; },
                        [x](const Exponential& d) { return x <= 0.0 ? 1.0 : std::exp(-d.rate * x); },
                        [x](const ShiftedExponential& d) {
                          return x <= d.shift ? 1.0 : std::exp(-d.rate * (x - d.shift));
                        },
                        [x](const Pareto& d) { return x <= d.scale ? 1.0 : std::pow(d.scale / x, d.shape); },
                        [x](const HyperExponential& d) {
                          if (x <= 0.0) return 1.0;
                          double s = 0.0;
                          for (std::size_t i = 0; i < d.weights.size(); ++i) s += d.weights[i] * std::exp(-d.rates[i] * x);
                          return s;
                        },
                    },
                    params_);
}

std::string RuntimeDistribution::describe() const {
  const auto f = [](double v) { return format_double(v); };
  return std::visit(overloaded{
                        [&](const Deterministic& d) { return "deterministic(" + f(d.value) + ")"; },
                        [&](const Exponential& d) { return "exp(" + f(d.rate) + ")"; },
                        [&](const ShiftedExponential& d) { return f(d.shift) + "+exp(" + f(d.rate) + ")"; },
                        [&](const Pareto& d) { return "pareto(" + f(d.shape) + "," + f(d.scale) + ")"; },
                        [&](const HyperExponential& d) {
                          std::string s = "hyperexp(";
                          for (std::size_t i = 0; i < d.weights.size(); ++i) {
                            if (i) s += ";";
                            s += f(d.weights[i]) + ":" + f(d.rates[i]);
                          }
                          return s + ")";
                        },
                    },
                    params_);
}

bool operator==(const Deterministic& a, const Deterministic& b) { return a.value == b.value; }
bool operator==(const Exponential& a, const Exponential& b) { return a.rate == b.rate; }
bool operator==(const ShiftedExponential& a, const ShiftedExponential& b) {
  return a.shift == b.shift && a.rate == b.rate;
}
bool operator==(const Pareto& a, const Pareto& b) { return a.shape == b.shape && a.scale == b.scale; }
bool operator==(const HyperExponential& a, const HyperExponential& b) {
  return a.weights == b.weights && a.rates == b.rates;
}
bool operator==(const RuntimeDistribution& a, const RuntimeDistribution& b) { return a.params_ == b.params_; }

std::string to_string(MonotonicityClass c) {
  switch (c) {
    case MonotonicityClass::NewLongerThanUsed: return "new-longer-than-used";
    case MonotonicityClass::NewShorterThanUsed: return "new-shorter-than-used";
    case MonotonicityClass::Memoryless: return "memoryless";
    case MonotonicityClass::Unknown: return "unknown";
  }
  return "unknown";
}

MonotonicityClass classify_monotonicity_by_grid(const RuntimeDistribution& dist, double tolerance) {
  bool longer = true;   // Pr(X>u+t | X>t) <= Pr(X>u) everywhere
  bool shorter = true;  // Pr(X>u+t | X>t) >= Pr(X>u) everywhere
  for (int ti = 1; ti <= 100; ++ti) {
    const double t = 0.1 * ti;
    const double st = dist.survival(t);
    if (st <= 0.0) continue;
    for (int ui = 1; ui <= 100; ++ui) {
      const double u = 0.1 * ui;
      const double conditional = dist.survival(u + t) / st;
      const double fresh = dist.survival(u);
      if (conditional > fresh + tolerance) longer = false;
      if (conditional < fresh - tolerance) shorter = false;
    }
  }
  if (longer && shorter) return MonotonicityClass::Memoryless;
  if (longer) return MonotonicityClass::NewLongerThanUsed;
  if (shorter) return MonotonicityClass::NewShorterThanUsed;
  return MonotonicityClass::Unknown;
}

MonotonicityClass classify_monotonicity(const RuntimeDistribution& dist) {
  if (dist.is<Exponential>()) return MonotonicityClass::Memoryless;
  if (dist.is<HyperExponential>()) return MonotonicityClass::NewShorterThanUsed;
  if (dist.is<ShiftedExponential>()) return MonotonicityClass::NewLongerThanUsed;
  return classify_monotonicity_by_grid(dist);
}

double harmonic_number(std::size_t n) {
  double h = 0.0;
  for (std::size_t i = n; i >= 1; --i) h += 1.0 / static_cast<double>(i);
  return h;
}

namespace {

double exponential_order_statistic(double rate, std::size_t k, std::size_t p) {
  // sum_{i=P-K+1}^{P} 1/(i mu), smallest terms first.
  double s = 0.0;
  for (std::size_t i = p; i >= p - k + 1; --i) s += 1.0 / static_cast<double>(i);
  return s / rate;
}

}  // namespace

Estimate expected_order_statistic(const RuntimeDistribution& dist, std::size_t k, std::size_t p,
                                  const OrderStatisticMethod& method) {
  if (k < 1 || k > p) throw std::invalid_argument("order statistic requires 1 <= K <= P");

  if (std::holds_alternative<Analytic>(method)) {
    if (const auto* d = std::get_if<Deterministic>(&dist.params())) return {d->value, 0.0};
    if (const auto* d = std::get_if<Exponential>(&dist.params())) {
      return {exponential_order_statistic(d->rate, k, p), 0.0};
    }
    if (const auto* d = std::get_if<ShiftedExponential>(&dist.params())) {
      return {d->shift + exponential_order_statistic(d->rate, k, p), 0.0};
    }
    throw UnsupportedMethodError("no closed-form order statistic for " + dist.describe());
  }

  const auto& mc = std::get<MonteCarlo>(method);
  if (mc.samples < 2) throw std::invalid_argument("monte-carlo order statistic needs at least 2 samples");
  RandomStream rng(mc.seed);
  std::vector<double> draws(p);
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t r = 0; r < mc.samples; ++r) {
    for (auto& x : draws) x = dist.sample(rng);
    std::nth_element(draws.begin(), draws.begin() + static_cast<std::ptrdiff_t>(k - 1), draws.end());
    const double x = draws[k - 1];
    const double delta = x - mean;
    mean += delta / static_cast<double>(r + 1);
    m2 += delta * (x - mean);
  }
  const double var = m2 / static_cast<double>(mc.samples - 1);
  return {mean, std::sqrt(var / static_cast<double>(mc.samples))};
}

double order_statistic_log_approximation(double rate, std::size_t k, std::size_t p) {
  if (k < 1 || k > p) throw std::invalid_argument("order statistic requires 1 <= K <= P");
  const auto pd = static_cast<double>(p);
  if (k == p) return std::log(pd) / rate;
  return std::log(pd / static_cast<double>(p - k)) / rate;
}

}  // namespace stalesim
