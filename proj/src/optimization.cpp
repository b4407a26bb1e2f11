#include "stalesim/optimization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace stalesim {

namespace {

class Quadratic final : public Objective {
 public:
  Quadratic(const std::vector<double>& eigenvalues, double sigma, double mg) : sigma_(sigma), mg_(mg) {
    diag_ = Eigen::Map<const Vector>(eigenvalues.data(), static_cast<Eigen::Index>(eigenvalues.size()));
    minimizer_ = Vector::Zero(diag_.size());
    constants_.L = diag_.maxCoeff();
    constants_.c = diag_.minCoeff();
    constants_.sigma2 = sigma * sigma;
    constants_.M_G = mg;
    constants_.F_star = 0.0;
  }

  std::string name() const override { return "quadratic"; }

  double loss(const Vector& w) const override { return 0.5 * w.dot(diag_.cwiseProduct(w)); }

  Vector gradient(const Vector& w) const override { return diag_.cwiseProduct(w); }

  Vector stochastic_gradient(const Vector& w, std::size_t m, RandomStream& rng) const override {
    Vector g = gradient(w);
    const auto md = static_cast<double>(m);
    if (mg_ > 0.0) g *= 1.0 + std::sqrt(mg_ / md) * rng.normal();
    if (sigma_ > 0.0) {
      const double sd = sigma_ / std::sqrt(md * static_cast<double>(diag_.size()));
      for (Eigen::Index i = 0; i < g.size(); ++i) g[i] += sd * rng.normal();
    }
    return g;
  }

 private:
  Vector diag_;
  double sigma_;
  double mg_;
};

// log(1 + exp(-z)) without overflow.
double log1p_exp_neg(double z) { return z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z)); }

// 1 / (1 + exp(z)).
double sigmoid_neg(double z) {
  if (z >= 0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

class Logistic final : public Objective {
 public:
  Logistic(Dataset data, double lambda) : data_(std::move(data)), lambda_(lambda) {
    const double max_row_sq = data_.features.rowwise().squaredNorm().maxCoeff();
    constants_.c = 2.0 * lambda_;
    constants_.L = 2.0 * lambda_ + 0.25 * max_row_sq;
    minimizer_ = Vector::Zero(static_cast<Eigen::Index>(data_.dim()));

    const auto oracle = gradient_descent(*this, minimizer_, 1.0 / constants_.L, 1e-8, 2'000'000);
    if (oracle.grad_norm > 1e-8) throw std::runtime_error("logistic oracle did not reach |grad| <= 1e-8");
    minimizer_ = oracle.w;
    constants_.F_star = loss(minimizer_);
    fit_noise_constants();
  }

  std::string name() const override { return "logistic"; }

  double loss(const Vector& w) const override {
    const Vector margins = data_.labels.cwiseProduct(data_.features * w);
    double s = 0.0;
    for (Eigen::Index i = 0; i < margins.size(); ++i) s += log1p_exp_neg(margins[i]);
    return s / static_cast<double>(data_.size()) + lambda_ * w.squaredNorm();
  }

  Vector gradient(const Vector& w) const override {
    const Vector coef = sample_coefficients(w);
    return data_.features.transpose() * coef / static_cast<double>(data_.size()) + 2.0 * lambda_ * w;
  }

  Vector stochastic_gradient(const Vector& w, std::size_t m, RandomStream& rng) const override {
    Vector g = Vector::Zero(w.size());
    for (std::size_t b = 0; b < m; ++b) {
      const auto i = static_cast<Eigen::Index>(rng.index(data_.size()));
      const double y = data_.labels[i];
      const double z = y * data_.features.row(i).dot(w);
      g.noalias() -= y * sigmoid_neg(z) * data_.features.row(i).transpose();
    }
    g /= static_cast<double>(m);
    g += 2.0 * lambda_ * w;
    return g;
  }

  // Exact variance of a single-sample gradient at w.
  double single_sample_variance(const Vector& w) const {
    const Vector coef = sample_coefficients(w);
    const auto n = static_cast<double>(data_.size());
    const Vector mean = data_.features.transpose() * coef / n;
    double v = 0.0;
    for (Eigen::Index i = 0; i < coef.size(); ++i) {
      v += (coef[i] * data_.features.row(i).transpose() - mean).squaredNorm();
    }
    return v / n;
  }

 private:
  // d/dz of the per-sample log-loss, times y: -y * sigmoid(-y x.w).
  Vector sample_coefficients(const Vector& w) const {
    const Vector z = data_.features * w;
    Vector coef(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double y = data_.labels[i];
      coef[i] = -y * sigmoid_neg(y * z[i]);
    }
    return coef;
  }

  // Minimise sigma2 + M_G * mean_k g_k subject to sigma2 + M_G g_k >= V_k on
  // the grid. The objective is convex piecewise-linear in M_G, so the optimum
  // sits at one of the breakpoints enumerated below.
  void fit_noise_constants() {
    RandomStream rng(0x10615eedULL);
    std::vector<double> var;
    std::vector<double> gsq;
    const auto add_point = [&](const Vector& w) {
      var.push_back(single_sample_variance(w));
      gsq.push_back(gradient(w).squaredNorm());
    };
    add_point(minimizer_);
    for (double radius : {0.1, 0.3, 1.0, 3.0}) {
      for (int k = 0; k < 16; ++k) {
        Vector dir(minimizer_.size());
        for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = rng.normal();
        add_point(minimizer_ + radius * dir / dir.norm());
      }
    }
    double gbar = 0.0;
    for (double g : gsq) gbar += g;
    gbar /= static_cast<double>(gsq.size());

    const auto sigma_for = [&](double mg) {
      double s = 0.0;
      for (std::size_t k = 0; k < var.size(); ++k) s = std::max(s, var[k] - mg * gsq[k]);
      return s;
    };
    std::vector<double> candidates{0.0};
    for (std::size_t a = 0; a < var.size(); ++a) {
      if (gsq[a] > 0) candidates.push_back(var[a] / gsq[a]);
      for (std::size_t b = a + 1; b < var.size(); ++b) {
        const double dg = gsq[a] - gsq[b];
        if (dg != 0.0) {
          const double mg = (var[a] - var[b]) / dg;
          if (mg > 0.0) candidates.push_back(mg);
        }
      }
    }
    double best_cost = std::numeric_limits<double>::infinity();
    for (double mg : candidates) {
      const double cost = sigma_for(mg) + mg * gbar;
      if (cost < best_cost) {
        best_cost = cost;
        constants_.M_G = mg;
      }
    }
    constants_.sigma2 = sigma_for(constants_.M_G);
  }

  Dataset data_;
  double lambda_;
};

}  // namespace

ObjectivePtr make_quadratic(std::size_t dim, const std::vector<double>& eigenvalues, double sigma,
                            double multiplicative_variance) {
  if (dim == 0 || eigenvalues.size() != dim) throw std::invalid_argument("quadratic needs one eigenvalue per dimension");
  for (double e : eigenvalues) {
    if (!(e > 0.0) || !std::isfinite(e)) throw std::invalid_argument("quadratic eigenvalues must be positive");
  }
  if (!(sigma >= 0.0)) throw std::invalid_argument("noise sigma must be nonnegative");
  if (!(multiplicative_variance >= 0.0)) throw std::invalid_argument("M_G must be nonnegative");
  return std::make_shared<Quadratic>(eigenvalues, sigma, multiplicative_variance);
}

Dataset make_two_cluster_data(std::size_t n_samples, std::size_t dim, RandomStream& rng) {
  Dataset d;
  d.features.resize(static_cast<Eigen::Index>(n_samples), static_cast<Eigen::Index>(dim));
  d.labels.resize(static_cast<Eigen::Index>(n_samples));
  for (Eigen::Index i = 0; i < d.features.rows(); ++i) {
    const double y = rng.uniform() < 0.5 ? 1.0 : -1.0;
    d.labels[i] = y;
    for (Eigen::Index j = 0; j < d.features.cols(); ++j) d.features(i, j) = 0.5 * y + rng.normal();
  }
  return d;
}

ObjectivePtr make_logistic(const Dataset& data, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("logistic regularizer must be positive");
  if (data.size() == 0 || data.dim() == 0) throw std::invalid_argument("logistic needs a non-empty dataset");
  for (Eigen::Index i = 0; i < data.labels.size(); ++i) {
    if (data.labels[i] != 1.0 && data.labels[i] != -1.0) throw std::invalid_argument("logistic labels must be +1 or -1");
  }
  return std::make_shared<Logistic>(data, lambda);
}

ObjectivePtr make_logistic(std::size_t n_samples, std::size_t dim, double lambda, RandomStream& rng) {
  return make_logistic(make_two_cluster_data(n_samples, dim, rng), lambda);
}

DescentResult gradient_descent(const Objective& obj, Vector w0, double eta, double tol, std::size_t max_iter,
                               bool record_losses) {
  DescentResult r;
  r.w = std::move(w0);
  Vector g = obj.gradient(r.w);
  r.grad_norm = g.norm();
  if (record_losses) r.losses.push_back(obj.loss(r.w));
  while (r.grad_norm > tol && r.iterations < max_iter) {
    r.w -= eta * g;
    ++r.iterations;
    g = obj.gradient(r.w);
    r.grad_norm = g.norm();
    if (record_losses) r.losses.push_back(obj.loss(r.w));
  }
  return r;
}

LrSchedule LrSchedule::fixed(double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("learning rate must be positive");
  return LrSchedule(Kind::Fixed, 0.0, eta);
}

LrSchedule LrSchedule::staleness_compensated(double C, double eta_max) {
  if (!(C > 0.0) || !std::isfinite(C)) throw std::invalid_argument("schedule constant C must be positive");
  if (!(eta_max > 0.0) || !std::isfinite(eta_max)) throw std::invalid_argument("eta_max must be positive");
  return LrSchedule(Kind::StalenessCompensated, C, eta_max);
}

double LrSchedule::rate(double staleness_norm) const {
  if (staleness_norm < 0.0) throw std::invalid_argument("staleness norm must be nonnegative");
  if (kind_ == Kind::Fixed) return eta_max_;
  if (!(staleness_norm > 0.0)) return eta_max_;
  return std::min(C_ / staleness_norm, eta_max_);
}

}  // namespace stalesim
