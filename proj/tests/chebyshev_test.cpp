#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "chebtt/chebyshev.hpp"

using namespace chebtt;
using Eigen::VectorXd;

namespace {

std::vector<double> pt(std::initializer_list<double> xs) { return std::vector<double>(xs); }

double sup_error_1d(const ChebyshevTensor<double>& t, const std::function<double(double)>& f,
                    double lo, double hi, int samples) {
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / (samples - 1);
    const std::vector<double> p{x};
    worst = std::max(worst, std::abs(eval_barycentric(t, std::span<const double>(p)) - f(x)));
  }
  return worst;
}

ChebyshevTensor<double> tensor_1d(const std::function<double(double)>& f, Index n, double lo,
                                  double hi) {
  ChebyshevGrid<double> g({Interval<double>(lo, hi)}, {n});
  return build_full_tensor(std::move(g), [&](std::span<const double> x) { return f(x[0]); });
}

}  // namespace

TEST_CASE("interval validation") {
  CHECK_THROWS_AS(Interval<double>(1.0, 1.0), ConfigError);
  CHECK_THROWS_AS(Interval<double>(2.0, -1.0), ConfigError);
  CHECK_THROWS_AS(Interval<double>(0.0, std::numeric_limits<double>::infinity()), ConfigError);
  Interval<double> iv(-2.0, 6.0);
  CHECK(iv.width() == 8.0);
  CHECK(iv.midpoint() == 2.0);
  CHECK(iv.to_unit(6.0) == 1.0);
  CHECK(iv.from_unit(-1.0) == -2.0);
}

TEST_CASE("chebyshev_points worked examples") {
  const VectorXd a = chebyshev_points<double>(3, {-1.0, 1.0});
  REQUIRE(a.size() == 3);
  CHECK(a[0] == -1.0);
  CHECK(a[1] == 0.0);
  CHECK(a[2] == 1.0);

  const VectorXd b = chebyshev_points<double>(5, {0.0, 2.0});
  const double s = std::sqrt(2.0) / 2.0;
  REQUIRE(b.size() == 5);
  CHECK(b[0] == 0.0);
  CHECK(b[1] == doctest::Approx(1.0 - s).epsilon(1e-15));
  CHECK(b[2] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(b[3] == doctest::Approx(1.0 + s).epsilon(1e-15));
  CHECK(b[4] == 2.0);

  CHECK_THROWS_AS((void)chebyshev_points<double>(1, {0.0, 1.0}), ConfigError);
}

TEST_CASE("chebyshev_points are ascending, endpoint-exact and symmetric") {
  for (Index n : {2, 3, 7, 12, 33}) {
    const Interval<double> iv(0.3, 1.9);
    const VectorXd x = chebyshev_points(n, iv);
    CHECK(x[0] == iv.lo);
    CHECK(x[n - 1] == iv.hi);
    for (Index j = 1; j < n; ++j) CHECK(x[j] > x[j - 1]);
    for (Index j = 0; j < n; ++j)
      CHECK(std::abs((x[j] - iv.midpoint()) + (x[n - 1 - j] - iv.midpoint())) <= 1e-15 * iv.width());
  }
}

TEST_CASE("build_full_tensor sizes match grid") {
  {
    std::vector<Interval<double>> dom(6, Interval<double>(-1.0, 1.0));
    ChebyshevGrid<double> g(dom, {5, 5, 3, 4, 6, 8});
    CHECK(g.total_points() == 14400);
    auto t = build_full_tensor(std::move(g), [](std::span<const double> x) {
      double s = 0;
      for (double v : x) s += v;
      return s;
    });
    CHECK(t.values().size() == 14400);
  }
  {
    std::vector<Interval<double>> dom(6, Interval<double>(0.0, 1.0));
    ChebyshevGrid<double> g(dom, std::vector<Index>(6, 7));
    CHECK(g.total_points() == 117649);
  }
}

TEST_CASE("build_full_tensor reports offending multi-index on non-finite values") {
  ChebyshevGrid<double> g({Interval<double>(-1.0, 1.0), Interval<double>(-1.0, 1.0)}, {3, 3});
  try {
    auto t = build_full_tensor(std::move(g), [](std::span<const double> x) {
      if (x[0] > 0.5 && x[1] < -0.5) return std::numeric_limits<double>::quiet_NaN();
      return x[0] + x[1];
    });
    FAIL("expected BuildError");
  } catch (const BuildError& e) {
    CHECK(std::string(e.what()).find("(2,0)") != std::string::npos);
  }
}

TEST_CASE("eval_barycentric reproduces stored node values bit-for-bit") {
  ChebyshevGrid<double> g({Interval<double>(0.0, 2.0), Interval<double>(-3.0, 5.0)}, {5, 7});
  auto t = build_full_tensor(std::move(g), [](std::span<const double> x) {
    return std::sin(3.0 * x[0]) + std::cos(x[1]);
  });
  const auto& gr = t.grid();
  std::size_t flat = 0;
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 7; ++j, ++flat) {
      const std::vector<double> p{gr.nodes(0)[i], gr.nodes(1)[j]};
      CHECK(eval_barycentric(t, std::span<const double>(p)) == t.values()[static_cast<Index>(flat)]);
    }
}

TEST_CASE("linear exactness on two nodes") {
  auto t = tensor_1d([](double x) { return x; }, 2, -1.0, 1.0);
  const auto p = pt({0.3});
  CHECK(eval_barycentric(t, std::span<const double>(p)) == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("Runge function at 50 nodes: frozen dense-sampling oracle") {
  auto f = [](double x) { return 1.0 / (1.0 + 25.0 * x * x); };
  auto t = tensor_1d(f, 50, -1.0, 1.0);
  const double err = sup_error_1d(t, f, -1.0, 1.0, 1001);
  // Independently recomputed oracle value: 1.159585e-4 at 50 points; this is
  // the true interpolation error level for this function and node count.
  CHECK(err > 1.10e-4);
  CHECK(err < 1.25e-4);
  CHECK(err == doctest::Approx(1.159585e-4).epsilon(5e-3));
  // Spectral decay continues with more nodes.
  auto t80 = tensor_1d(f, 80, -1.0, 1.0);
  CHECK(sup_error_1d(t80, f, -1.0, 1.0, 1001) < 5e-7);
}

TEST_CASE("exp(x) at 12 nodes is interpolated to better than 1e-9") {
  auto f = [](double x) { return std::exp(x); };
  auto t = tensor_1d(f, 12, -1.0, 1.0);
  const double err = sup_error_1d(t, f, -1.0, 1.0, 1001);
  CHECK(err < 1e-9);
  CHECK(err < 1e-11);  // frozen oracle: 2.075e-12
}

TEST_CASE("exp(x) error is non-increasing as nodes grow 4 -> 16") {
  auto f = [](double x) { return std::exp(x); };
  double prev = std::numeric_limits<double>::infinity();
  for (Index n : {4, 6, 8, 10, 12, 14, 16}) {
    const double err = sup_error_1d(tensor_1d(f, n, -1.0, 1.0), f, -1.0, 1.0, 1001);
    CHECK(err <= prev * 1.0 + 10.0 * 1e-15);  // allow a 10x-noise floor near machine precision
    prev = std::max(err, 1e-15);
  }
}

TEST_CASE("out-of-domain evaluation is a hard error") {
  auto t = tensor_1d([](double x) { return x; }, 5, 0.0, 1.0);
  const auto lo = pt({-0.001});
  const auto hi = pt({1.0000001});
  const auto edge = pt({1.0});
  CHECK_THROWS_AS((void)eval_barycentric(t, std::span<const double>(lo)), OutOfDomainError);
  CHECK_THROWS_AS((void)eval_barycentric(t, std::span<const double>(hi)), OutOfDomainError);
  CHECK(eval_barycentric(t, std::span<const double>(edge)) == doctest::Approx(1.0));
}

TEST_CASE("polynomial reproduction at 100 random points") {
  // degree (3,2,4) monomial mix on counts (5,4,6): inside the exactness range
  auto poly = [](std::span<const double> x) {
    return 0.7 * x[0] * x[0] * x[0] - 1.3 * x[0] * x[1] + 2.0 * x[1] * x[1] * x[2] -
           0.25 * x[2] * x[2] * x[2] * x[2] + 5.0;
  };
  ChebyshevGrid<double> g({Interval<double>(-2.0, 1.0), Interval<double>(0.5, 2.5),
                           Interval<double>(-1.0, 3.0)},
                          {5, 4, 6});
  auto t = build_full_tensor(std::move(g), poly);
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> p{-2.0 + 3.0 * u(rng), 0.5 + 2.0 * u(rng), -1.0 + 4.0 * u(rng)};
    const double exact = poly(p);
    const double got = eval_barycentric(t, std::span<const double>(p));
    CHECK(std::abs(got - exact) <= 1e-12 * std::max(1.0, std::abs(exact)));
  }
}

TEST_CASE("affine invariance of the interpolant") {
  auto f = [](double x) { return std::sin(2.0 * x) + 0.3 * x; };
  const double a = 1.5, b = 4.5;  // map from [-1,1]
  auto tref = tensor_1d([&](double u) { return f(a + (b - a) * (u + 1.0) / 2.0); }, 14, -1.0, 1.0);
  auto tmap = tensor_1d(f, 14, a, b);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uu(-1.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const double u = uu(rng);
    const double x = a + (b - a) * (u + 1.0) / 2.0;
    const std::vector<double> pu{u}, px{x};
    const double vu = eval_barycentric(tref, std::span<const double>(pu));
    const double vx = eval_barycentric(tmap, std::span<const double>(px));
    CHECK(std::abs(vu - vx) <= 1e-13 * std::max(1.0, std::abs(vx)));
  }
}

TEST_CASE("x^2 on three nodes has coefficients {1/2, 0, 1/2}") {
  auto t = tensor_1d([](double x) { return x * x; }, 3, -1.0, 1.0);
  REQUIRE(t.coefficients().size() == 3);
  CHECK(t.coefficients()[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(std::abs(t.coefficients()[1]) < 1e-15);
  CHECK(t.coefficients()[2] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("clenshaw agrees with barycentric to 1e-12 relative") {
  ChebyshevGrid<double> g({Interval<double>(0.1, 2.0), Interval<double>(-1.0, 1.0),
                           Interval<double>(3.0, 4.0)},
                          {9, 7, 5});
  auto t = build_full_tensor(std::move(g), [](std::span<const double> x) {
    return std::exp(-x[0]) * std::sin(x[1]) + std::log(x[2]);
  });
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> p{0.1 + 1.9 * u(rng), -1.0 + 2.0 * u(rng), 3.0 + u(rng)};
    const double vb = eval_barycentric(t, std::span<const double>(p));
    const double vc = eval_clenshaw(t, std::span<const double>(p));
    CHECK(std::abs(vb - vc) <= 1e-12 * std::max(1.0, std::abs(vb)));
  }
}

TEST_CASE("gradient worked examples") {
  {
    auto t = tensor_1d([](double x) { return x * x; }, 3, -1.0, 1.0);
    const auto p = pt({0.5});
    const VectorXd gr = eval_gradient(t, std::span<const double>(p));
    CHECK(gr[0] == doctest::Approx(1.0).epsilon(1e-13));
  }
  {
    ChebyshevGrid<double> g({Interval<double>(-1.0, 1.0), Interval<double>(-1.0, 1.0)}, {4, 4});
    auto t = build_full_tensor(std::move(g),
                               [](std::span<const double> x) { return x[0] * x[1]; });
    const auto p = pt({0.3, -0.4});
    const VectorXd gr = eval_gradient(t, std::span<const double>(p));
    CHECK(gr[0] == doctest::Approx(-0.4).epsilon(1e-13));
    CHECK(gr[1] == doctest::Approx(0.3).epsilon(1e-13));
  }
}

TEST_CASE("gradient matches central finite differences in 6-d") {
  std::vector<Interval<double>> dom(6, Interval<double>(-1.0, 1.0));
  ChebyshevGrid<double> g(dom, {5, 5, 4, 4, 5, 5});
  auto f = [](std::span<const double> x) {
    return std::sin(x[0] + 0.5 * x[1]) * std::exp(0.3 * x[2]) + x[3] * x[4] - 0.2 * x[5] * x[5];
  };
  auto t = build_full_tensor(std::move(g), f);
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> p(6);
    for (auto& v : p) v = u(rng);
    const VectorXd gr = eval_gradient(t, std::span<const double>(p));
    for (int k = 0; k < 6; ++k) {
      std::vector<double> pp = p, pm = p;
      pp[static_cast<std::size_t>(k)] += h;
      pm[static_cast<std::size_t>(k)] -= h;
      const double fd = (eval_barycentric(t, std::span<const double>(pp)) -
                         eval_barycentric(t, std::span<const double>(pm))) /
                        (2.0 * h);
      CHECK(std::abs(gr[k] - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
  }
}
