#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "stalesim/optimization.hpp"
#include "test_support.hpp"

using namespace stalesim;

namespace {

Vector random_vector(RandomStream& rng, std::size_t dim, double scale) {
  Vector v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = scale * rng.normal();
  return v;
}

// Mean of |g(w, xi) - grad F(w)|^2 and the standard error of that mean.
std::pair<double, double> noise_variance(const Objective& obj, const Vector& w, std::size_t m, int draws,
                                         RandomStream& rng) {
  const Vector g = obj.gradient(w);
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double d = (obj.stochastic_gradient(w, m, rng) - g).squaredNorm();
    s += d;
    s2 += d * d;
  }
  const double mean = s / draws;
  return {mean, std::sqrt((s2 / draws - mean * mean) / draws)};
}

ObjectivePtr small_logistic() {
  RandomStream rng(17);
  return make_logistic(400, 5, 0.01, rng);
}

}  // namespace

TEST_SUITE("optimization") {

TEST_CASE("quadratic closed forms") {
  const auto q = make_quadratic(2, {1.0, 1.0}, 1.0);
  const Vector w = (Vector(2) << 1.0, 0.0).finished();
  CHECK(q->loss(w) == 0.5);
  CHECK(q->gradient(w)[0] == 1.0);
  CHECK(q->gradient(w)[1] == 0.0);

  const auto q2 = make_quadratic(2, {1.0, 4.0}, 1.0);
  CHECK(q2->constants().L == 4.0);
  CHECK(q2->constants().c == 1.0);
  CHECK(q2->constants().sigma2 == 1.0);
  CHECK(q2->constants().F_star == 0.0);
  CHECK(q2->minimizer().norm() == 0.0);
  CHECK_THROWS_AS(make_quadratic(2, {1.0}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_quadratic(2, {1.0, 0.0}, 1.0), std::invalid_argument);
}

TEST_CASE("quadratic noise variance sigma^2/m") {
  const auto q = make_quadratic(2, {1.0, 4.0}, 1.0);
  RandomStream rng(5);
  const auto [var, se] = noise_variance(*q, Vector::Ones(2), 4, 100'000, rng);
  CHECK(std::abs(var - 0.25) <= 3.0 * se);
}

TEST_CASE("assumptions hold on the quadratic") {
  const auto q = stalesim::testing::standard_quadratic();
  const auto& k = q->constants();
  RandomStream rng(8);
  for (int t = 0; t < 200; ++t) {
    const Vector a = random_vector(rng, 8, 2.0);
    const Vector b = random_vector(rng, 8, 2.0);
    // Lipschitz gradient.
    CHECK((q->gradient(a) - q->gradient(b)).norm() <= k.L * (a - b).norm() * (1 + 1e-12));
    // Strong convexity (PL form): 2c (F(w) - F*) <= |grad F(w)|^2.
    CHECK(2.0 * k.c * (q->loss(a) - k.F_star) <= q->gradient(a).squaredNorm() * (1 + 1e-12));
    // Quadratic upper bound from L-smoothness.
    CHECK(q->loss(b) <= q->loss(a) + q->gradient(a).dot(b - a) + 0.5 * k.L * (b - a).squaredNorm() + 1e-12);
  }
  SUBCASE("unbiased stochastic gradient") {
    const Vector w = Vector::Ones(8);
    Vector mean = Vector::Zero(8);
    const int n = 100'000;
    for (int i = 0; i < n; ++i) mean += q->stochastic_gradient(w, 1, rng);
    mean /= n;
    // per-coordinate noise sd is sigma/sqrt(dim)
    const double se = 1.0 / std::sqrt(8.0 * n);
    CHECK(((mean - q->gradient(w)).cwiseAbs().array() <= 4.0 * se).all());
  }
  SUBCASE("variance bound, additive and multiplicative noise") {
    for (double mg : {0.0, 0.5}) {
      const auto qm = stalesim::testing::standard_quadratic(1.0, mg);
      for (std::size_t m : {1u, 4u}) {
        const Vector w = random_vector(rng, 8, 1.0);
        const auto [var, se] = noise_variance(*qm, w, m, 50'000, rng);
        const double bound = (1.0 + mg * q->gradient(w).squaredNorm()) / static_cast<double>(m);
        // The quadratic meets the bound with equality.
        CHECK(std::abs(var - bound) <= 4.0 * se);
      }
    }
  }
}

TEST_CASE("logistic oracle") {
  const auto obj = small_logistic();
  const auto& k = obj->constants();
  CHECK(obj->gradient(obj->minimizer()).norm() <= 1e-6);
  CHECK(k.c == doctest::Approx(0.02));
  CHECK(k.L > k.c);
  RandomStream rng(23);
  for (int t = 0; t < 50; ++t) {
    const Vector w = obj->minimizer() + random_vector(rng, 5, 1.0);
    CHECK(obj->loss(w) >= k.F_star);
  }
}

TEST_CASE("logistic finite-difference gradient") {
  const auto obj = small_logistic();
  RandomStream rng(29);
  double worst = 0.0;
  const double h = 1e-6;
  for (int t = 0; t < 10; ++t) {
    const Vector w = random_vector(rng, 5, 1.0);
    const Vector g = obj->gradient(w);
    Vector fd(5);
    for (Eigen::Index i = 0; i < 5; ++i) {
      Vector a = w, b = w;
      a[i] += h;
      b[i] -= h;
      fd[i] = (obj->loss(a) - obj->loss(b)) / (2 * h);
    }
    worst = std::max(worst, (fd - g).norm() / g.norm());
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("logistic satisfies the fitted assumptions") {
  const auto obj = small_logistic();
  const auto& k = obj->constants();
  RandomStream rng(31);
  for (int t = 0; t < 100; ++t) {
    const Vector a = obj->minimizer() + random_vector(rng, 5, 1.0);
    const Vector b = obj->minimizer() + random_vector(rng, 5, 1.0);
    CHECK((obj->gradient(a) - obj->gradient(b)).norm() <= k.L * (a - b).norm() * (1 + 1e-12));
    CHECK(2.0 * k.c * (obj->loss(a) - k.F_star) <= obj->gradient(a).squaredNorm() * (1 + 1e-9));
  }
  SUBCASE("variance bound at fresh points near w*") {
    for (double radius : {0.0, 0.2, 0.5, 1.0}) {
      Vector dir = random_vector(rng, 5, 1.0);
      const Vector w = obj->minimizer() + radius * dir / dir.norm();
      const auto [var, se] = noise_variance(*obj, w, 1, 40'000, rng);
      const double bound = k.sigma2 + k.M_G * obj->gradient(w).squaredNorm();
      CHECK(var <= bound * 1.05 + 3.0 * se);
    }
  }
  SUBCASE("unbiased stochastic gradient") {
    const Vector w = obj->minimizer() + random_vector(rng, 5, 0.5);
    Vector mean = Vector::Zero(5);
    Vector sq = Vector::Zero(5);
    const int n = 100'000;
    for (int i = 0; i < n; ++i) {
      const Vector g = obj->stochastic_gradient(w, 1, rng);
      mean += g;
      sq += g.cwiseProduct(g);
    }
    mean /= n;
    const Vector se = ((sq / n - mean.cwiseProduct(mean)) / n).cwiseSqrt();
    CHECK(((mean - obj->gradient(w)).cwiseAbs().array() <= 4.0 * se.array()).all());
  }
}

TEST_CASE("two-cluster data") {
  RandomStream rng(1);
  const Dataset d = make_two_cluster_data(1000, 3, rng);
  CHECK(d.size() == 1000);
  CHECK(d.dim() == 3);
  CHECK((d.labels.array().abs() == 1.0).all());
}

TEST_CASE("learning-rate schedules") {
  CHECK(LrSchedule::fixed(0.01).rate(0.0) == 0.01);
  CHECK(LrSchedule::fixed(0.01).rate(123.0) == 0.01);
  const auto s = LrSchedule::staleness_compensated(0.1, 1.0);
  CHECK(s.rate(0.0) == 1.0);
  CHECK(s.rate(0.5) == doctest::Approx(0.2).epsilon(1e-15));
  double prev = s.rate(0.0);
  for (double norm = 0.01; norm < 100.0; norm *= 1.3) {
    CHECK(s.rate(norm) <= prev);
    prev = s.rate(norm);
  }
  CHECK_THROWS_AS(s.rate(-1.0), std::invalid_argument);
  CHECK_THROWS_AS(LrSchedule::fixed(0.0), std::invalid_argument);
  CHECK_THROWS_AS(LrSchedule::staleness_compensated(-1.0, 1.0), std::invalid_argument);
}

TEST_CASE("gradient descent with eta = 1/L decreases F monotonically") {
  const auto q = stalesim::testing::standard_quadratic(0.0);
  const auto r = gradient_descent(*q, Vector::Ones(8), 1.0 / q->constants().L, 1e-10, 10'000, true);
  REQUIRE(r.losses.size() > 2);
  for (std::size_t i = 1; i < r.losses.size(); ++i) CHECK(r.losses[i] <= r.losses[i - 1]);
  CHECK(r.grad_norm <= 1e-10);
}

}  // TEST_SUITE
