#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "stalesim/random.hpp"

namespace stalesim {

using Vector = Eigen::VectorXd;

/// Constants of the smoothness / convexity / noise assumptions.
struct ObjectiveConstants {
  double L = 0.0;       ///< gradient Lipschitz constant
  double c = 0.0;       ///< strong-convexity parameter (PL form)
  double sigma2 = 0.0;  ///< additive gradient-noise scale: Var <= sigma2/m + (M_G/m)|grad|^2
  double M_G = 0.0;     ///< multiplicative gradient-noise scale
  double F_star = 0.0;  ///< optimal value
};

/// Loss with exact and stochastic gradient oracles. Immutable after
/// construction; stochastic_gradient takes a caller-owned stream.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::string name() const = 0;
  std::size_t dim() const noexcept { return static_cast<std::size_t>(minimizer_.size()); }

  virtual double loss(const Vector& w) const = 0;
  virtual Vector gradient(const Vector& w) const = 0;
  /// Unbiased mini-batch gradient g(w, xi) with |xi| = m.
  virtual Vector stochastic_gradient(const Vector& w, std::size_t m, RandomStream& rng) const = 0;

  const ObjectiveConstants& constants() const noexcept { return constants_; }
  const Vector& minimizer() const noexcept { return minimizer_; }

 protected:
  ObjectiveConstants constants_;
  Vector minimizer_;
};

using ObjectivePtr = std::shared_ptr<const Objective>;

/// F(w) = 1/2 w^T diag(eigenvalues) w, minimizer 0, F* = 0.
///
/// Gradient noise is additive Gaussian with per-coordinate variance
/// sigma^2/(m dim), so its total variance is sigma^2/m. A nonzero
/// `multiplicative_variance` (M_G) adds a common scalar factor
/// grad * sqrt(M_G/m) * z, making Var = sigma^2/m + (M_G/m)|grad|^2 exactly.
ObjectivePtr make_quadratic(std::size_t dim, const std::vector<double>& eigenvalues, double sigma,
                            double multiplicative_variance = 0.0);

/// Labeled design matrix; labels are +1 / -1.
struct Dataset {
  Eigen::MatrixXd features;  ///< one sample per row
  Eigen::VectorXd labels;

  std::size_t size() const noexcept { return static_cast<std::size_t>(features.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(features.cols()); }
};

/// Two Gaussian clusters with unit covariance centred at +/- 0.5 * ones.
Dataset make_two_cluster_data(std::size_t n_samples, std::size_t dim, RandomStream& rng);

/// Binary logistic regression, F(w) = mean log(1 + exp(-y x.w)) + lambda |w|^2.
///
/// c = 2 lambda; L = 2 lambda + max_i |x_i|^2 / 4. w* and F* come from a
/// full-batch gradient-descent run to |grad| <= 1e-8. sigma^2 and M_G are the
/// cheapest pair satisfying the variance bound on a grid of points around w*.
ObjectivePtr make_logistic(const Dataset& data, double lambda);
ObjectivePtr make_logistic(std::size_t n_samples, std::size_t dim, double lambda, RandomStream& rng);

/// Full-batch gradient descent with a fixed step. Stops once |grad| <= tol.
struct DescentResult {
  Vector w;
  std::size_t iterations = 0;
  double grad_norm = 0.0;
  std::vector<double> losses;  ///< F(w_0), F(w_1), ... when record_losses is set
};
DescentResult gradient_descent(const Objective& obj, Vector w0, double eta, double tol, std::size_t max_iter,
                               bool record_losses = false);

/// Learning-rate schedule: fixed, or min(C / |w_j - w_tau|^2, eta_max).
class LrSchedule {
 public:
  enum class Kind { Fixed, StalenessCompensated };

  static LrSchedule fixed(double eta);
  static LrSchedule staleness_compensated(double C, double eta_max);

  Kind kind() const noexcept { return kind_; }
  /// The fixed rate, or eta_max.
  double eta_max() const noexcept { return eta_max_; }
  double C() const noexcept { return C_; }

  /// Rate for an update whose contributions drifted by staleness_norm =
  /// |w_j - w_tau|^2. A zero norm yields eta_max (C/0 taken as +inf).
  double rate(double staleness_norm) const;

  friend bool operator==(const LrSchedule&, const LrSchedule&) = default;

 private:
  LrSchedule(Kind kind, double C, double eta_max) : kind_(kind), C_(C), eta_max_(eta_max) {}

  Kind kind_;
  double C_;
  double eta_max_;
};

}  // namespace stalesim
