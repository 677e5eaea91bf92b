#include <catch2/catch.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "qtomo/fock.hpp"

using namespace qtomo;

namespace {

// Independent oracle: psi_n from explicit Hermite polynomial coefficients in
// extended precision, usable for n <= 10. The implementation under test
// never touches raw H_n, so agreement is a real cross-check.
long double hermite_poly(int n, long double x) {
  // H_0..H_10 coefficient table, ascending powers.
  static const std::vector<std::vector<long double>> coeff = {
      {1.0L},
      {0.0L, 2.0L},
      {-2.0L, 0.0L, 4.0L},
      {0.0L, -12.0L, 0.0L, 8.0L},
      {12.0L, 0.0L, -48.0L, 0.0L, 16.0L},
      {0.0L, 120.0L, 0.0L, -160.0L, 0.0L, 32.0L},
      {-120.0L, 0.0L, 720.0L, 0.0L, -480.0L, 0.0L, 64.0L},
      {0.0L, -1680.0L, 0.0L, 3360.0L, 0.0L, -1344.0L, 0.0L, 128.0L},
      {1680.0L, 0.0L, -13440.0L, 0.0L, 13440.0L, 0.0L, -3584.0L, 0.0L, 256.0L},
      {0.0L, 30240.0L, 0.0L, -80640.0L, 0.0L, 48384.0L, 0.0L, -9216.0L, 0.0L, 512.0L},
      {-30240.0L, 0.0L, 302400.0L, 0.0L, -403200.0L, 0.0L, 161280.0L, 0.0L, -23040.0L, 0.0L,
       1024.0L}};
  long double acc = 0.0L, xp = 1.0L;
  for (long double c : coeff.at(static_cast<std::size_t>(n))) {
    acc += c * xp;
    xp *= x;
  }
  return acc;
}

double psi_oracle(int n, double x) {
  long double fact = 1.0L;
  for (int k = 2; k <= n; ++k) fact *= k;
  const long double norm = std::pow(3.14159265358979323846L, -0.25L) /
                           std::sqrt(std::pow(2.0L, static_cast<long double>(n)) * fact);
  return static_cast<double>(norm * hermite_poly(n, x) * std::exp(-0.5L * x * x));
}

// Closed-form quadrature variance of the squeezed vacuum at cut theta.
double squeezed_variance(double r, double phi, double theta) {
  return (std::cosh(2 * r) - std::sinh(2 * r) * std::cos(phi - 2 * theta)) / 2.0;
}

}  // namespace

TEST_CASE("hermite_function ground state and parity at origin") {
  CHECK(hermite_function(0, 0.0) == Approx(0.7511255444649425).epsilon(1e-14));
  CHECK(hermite_function(1, 0.0) == 0.0);
}

TEST_CASE("hermite_function matches explicit-polynomial oracle for n <= 10") {
  // Frozen spot value from the oracle: psi_5(1.3) = -0.39939146281375065.
  CHECK(hermite_function(5, 1.3) == Approx(-0.39939146281375065).epsilon(1e-13));
  for (int n = 0; n <= 10; ++n)
    for (double x : {-2.7, -1.3, -0.2, 0.4, 1.3, 2.9, 4.1})
      CHECK(hermite_function(n, x) == Approx(psi_oracle(n, x)).margin(1e-13));
}

TEST_CASE("hermite_function parity is exact") {
  for (int n : {0, 1, 2, 5, 12, 31}) {
    const double sign = (n % 2 == 0) ? 1.0 : -1.0;
    for (double x : {0.3, 1.7, 5.2}) CHECK(hermite_function(n, -x) == sign * hermite_function(n, x));
  }
}

TEST_CASE("hermite_function rejects n beyond the cap") {
  CHECK_THROWS_AS(hermite_function(513, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(hermite_function(-1, 0.5), std::invalid_argument);
  CHECK_NOTHROW(hermite_function(600, 0.5, 1024));
  CHECK_THROWS_AS(hermite_function(0, std::nan("")), std::invalid_argument);
}

TEST_CASE("hermite_functions_upto agrees with single evaluations") {
  const Eigen::VectorXd all = hermite_functions_upto(32, 1.234);
  for (int n = 0; n < 32; ++n) CHECK(all[n] == Approx(hermite_function(n, 1.234)).margin(1e-15));
}

TEST_CASE("orthonormality on the module quadrature grid, m,n <= 30") {
  const int nmax = 30;
  const QuadratureGrid g = fock_quadrature_grid(nmax);
  Eigen::MatrixXd psi(g.x.size(), nmax + 1);
  for (std::size_t k = 0; k < g.x.size(); ++k)
    psi.row(static_cast<Eigen::Index>(k)) = hermite_functions_upto(nmax + 1, g.x[k]).transpose();
  const Eigen::MatrixXd gram = psi.transpose() * psi * g.dx;
  const Eigen::MatrixXd err = gram - Eigen::MatrixXd::Identity(nmax + 1, nmax + 1);
  CHECK(err.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("quadrature_amplitude phase convention") {
  CHECK(quadrature_amplitude(3, 0.7, 0.0).imag() == 0.0);
  CHECK(quadrature_amplitude(3, 0.7, 0.0).real() == Approx(hermite_function(3, 0.7)));

  // Full winding for n = 2 at theta = pi: e^{2 pi i} = 1.
  const Complex a = quadrature_amplitude(2, 0.5, kPi);
  CHECK(a.real() == Approx(hermite_function(2, 0.5)).epsilon(1e-13));
  CHECK(std::abs(a.imag()) < 1e-13);

  // 2pi periodicity after internal phase reduction.
  for (int n : {1, 7, 24})
    for (double theta : {0.0, 0.3, 2.9, 5.9}) {
      const Complex lhs = quadrature_amplitude(n, 1.1, theta + kTwoPi);
      const Complex rhs = quadrature_amplitude(n, 1.1, theta);
      CHECK(std::abs(lhs - rhs) < 1e-12);
    }
}

TEST_CASE("quadrature overlap reproduces the squeezed Gaussian marginal") {
  const double r = 1.0, phi = kPi / 2.0;
  const StateVector sv = squeezed_vacuum(SqueezeParams(r, phi), FockDim(60));
  for (double theta : {phi / 2.0, phi / 2.0 + kPi / 2.0, 0.7}) {
    const double s2 = squeezed_variance(r, phi, theta);
    double worst = 0.0;
    for (double x = -6.0; x <= 6.0; x += 0.05) {
      Complex amp = 0.0;
      for (int n = 0; n < sv.dim(); ++n)
        amp += std::conj(quadrature_amplitude(n, x, theta)) * sv.amplitudes[n];
      const double dens = std::norm(amp);
      const double gauss = std::exp(-x * x / (2 * s2)) / std::sqrt(2 * kPi * s2);
      worst = std::max(worst, std::abs(dens - gauss));
    }
    CHECK(worst < 5e-4);
  }
}

TEST_CASE("squeezed_vacuum basics") {
  SECTION("zero squeezing is the vacuum for every phi") {
    for (double phi : {0.0, 1.0, 5.0}) {
      const StateVector v = squeezed_vacuum(SqueezeParams(0.0, phi), FockDim(10));
      CHECK(std::abs(v.amplitudes[0] - Complex(1.0, 0.0)) < 1e-15);
      CHECK(v.amplitudes.tail(9).norm() == 0.0);
    }
  }
  SECTION("odd amplitudes vanish identically") {
    const StateVector v = squeezed_vacuum(SqueezeParams(1.3, 0.8), FockDim(29), 0.99);
    for (int n = 1; n < v.dim(); n += 2) CHECK(std::abs(v.amplitudes[n]) == 0.0);
  }
  SECTION("|c_0|^2 = 1/cosh(r) up to truncation renormalization") {
    const StateVector v = squeezed_vacuum(SqueezeParams(1.0, kPi / 2), FockDim(30));
    CHECK(std::norm(v.amplitudes[0]) == Approx(1.0 / std::cosh(1.0)).margin(1e-4));
  }
  SECTION("normalization") {
    const StateVector v = squeezed_vacuum(SqueezeParams(1.0, kPi / 2), FockDim(30));
    CHECK(v.norm_error() < 1e-10);
  }
  SECTION("truncation health check fires") {
    CHECK_THROWS_WITH(squeezed_vacuum(SqueezeParams(2.0, 0.0), FockDim(6)),
                      Catch::Contains("captures"));
    CHECK(squeezed_vacuum_captured_norm(SqueezeParams(2.0, 0.0), FockDim(6)) < 0.999);
    CHECK(squeezed_vacuum_captured_norm(SqueezeParams(1.0, 0.0), FockDim(25)) > 0.999);
  }
}

TEST_CASE("coherent_state basics") {
  SECTION("alpha = 0 is the vacuum") {
    const StateVector v = coherent_state(Complex(0.0, 0.0), FockDim(12));
    CHECK(std::abs(v.amplitudes[0] - Complex(1.0, 0.0)) < 1e-15);
  }
  SECTION("Poisson photon statistics at alpha = 1") {
    const StateVector v = coherent_state(Complex(1.0, 0.0), FockDim(20));
    CHECK(std::norm(v.amplitudes[0]) == Approx(std::exp(-1.0)).margin(1e-6));
    double mean = 0.0;
    for (int n = 0; n < v.dim(); ++n) mean += n * std::norm(v.amplitudes[n]);
    CHECK(mean == Approx(1.0).margin(1e-9));
  }
  SECTION("truncation loss check fires") {
    CHECK_THROWS_AS(coherent_state(Complex(3.0, 0.0), FockDim(10)), std::runtime_error);
  }
}

TEST_CASE("fock_state and make_state validation") {
  const StateVector v = fock_state(3, FockDim(6));
  CHECK(std::abs(v.amplitudes[3]) == 1.0);
  CHECK_THROWS_AS(fock_state(6, FockDim(6)), std::invalid_argument);
  CHECK_THROWS_AS(make_state(Eigen::VectorXcd::Zero(4)), std::invalid_argument);
  CHECK_THROWS_AS(FockDim(0), std::invalid_argument);
  CHECK_THROWS_AS(SqueezeParams(-0.1, 0.0), std::invalid_argument);
}
