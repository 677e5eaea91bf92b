#pragma once

// Truncated Fock-space numerics: oscillator wavefunctions, rotated
// quadrature amplitudes and reference states (squeezed vacuum, coherent,
// number states). Everything here is a pure function of its inputs.

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qtomo {

using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Truncation of the number basis to |0> .. |dim-1>.
struct FockDim {
  int dim;
  explicit FockDim(int d) : dim(d) {
    if (d < 1) throw std::invalid_argument("FockDim: dim must be >= 1, got " + std::to_string(d));
  }
};

// Normalized pure state in the truncated number basis.
struct StateVector {
  Eigen::VectorXcd amplitudes;

  int dim() const { return static_cast<int>(amplitudes.size()); }
  double norm_error() const { return std::abs(amplitudes.squaredNorm() - 1.0); }
};

inline StateVector make_state(Eigen::VectorXcd amps) {
  const double n = amps.norm();
  if (!(n > 0.0) || !std::isfinite(n))
    throw std::invalid_argument("make_state: amplitudes must have positive finite norm");
  amps /= n;
  return StateVector{std::move(amps)};
}

// Squeeze magnitude r >= 0 and phase reduced into [0, 2pi).
struct SqueezeParams {
  double r;
  double phi;
  SqueezeParams(double r_, double phi_) : r(r_), phi(phi_) {
    if (!(r >= 0.0) || !std::isfinite(r))
      throw std::invalid_argument("SqueezeParams: r must be finite and >= 0");
    if (!std::isfinite(phi)) throw std::invalid_argument("SqueezeParams: phi must be finite");
    phi = std::fmod(phi, kTwoPi);
    if (phi < 0.0) phi += kTwoPi;
  }
};

// Largest n the recurrence is evaluated for by default. Far beyond anything
// the (-7,7) scan can resolve; mainly guards against silent denormal decay.
inline constexpr int kHermiteCap = 512;

// psi_n(x) = pi^{-1/4} (2^n n!)^{-1/2} H_n(x) e^{-x^2/2}, evaluated by the
// three-term recurrence on psi_n itself:
//   psi_{k+1} = sqrt(2/(k+1)) x psi_k - sqrt(k/(k+1)) psi_{k-1}.
// Recursing on raw H_n overflows past n ~ 170; this form stays O(1).
inline double hermite_function(int n, double x, int max_n = kHermiteCap) {
  if (n < 0) throw std::invalid_argument("hermite_function: n must be >= 0");
  if (n > max_n)
    throw std::invalid_argument("hermite_function: n = " + std::to_string(n) +
                                " exceeds the recurrence cap " + std::to_string(max_n));
  if (!std::isfinite(x)) throw std::invalid_argument("hermite_function: x must be finite");

  const double pi_m14 = 0.75112554446494248;  // pi^{-1/4}
  double p0 = pi_m14 * std::exp(-0.5 * x * x);
  if (n == 0) return p0;
  double p1 = std::sqrt(2.0) * x * p0;
  for (int k = 1; k < n; ++k) {
    const double next =
        std::sqrt(2.0 / (k + 1)) * x * p1 - std::sqrt(static_cast<double>(k) / (k + 1)) * p0;
    p0 = p1;
    p1 = next;
  }
  return p1;
}

// psi_0(x) .. psi_{count-1}(x) in one recurrence pass.
inline Eigen::VectorXd hermite_functions_upto(int count, double x, int max_n = kHermiteCap) {
  if (count < 1) throw std::invalid_argument("hermite_functions_upto: count must be >= 1");
  if (count - 1 > max_n)
    throw std::invalid_argument("hermite_functions_upto: count exceeds the recurrence cap");
  if (!std::isfinite(x)) throw std::invalid_argument("hermite_functions_upto: x must be finite");

  Eigen::VectorXd out(count);
  const double pi_m14 = 0.75112554446494248;
  double p0 = pi_m14 * std::exp(-0.5 * x * x);
  out[0] = p0;
  if (count == 1) return out;
  double p1 = std::sqrt(2.0) * x * p0;
  out[1] = p1;
  for (int k = 1; k + 1 < count; ++k) {
    const double next =
        std::sqrt(2.0 / (k + 1)) * x * p1 - std::sqrt(static_cast<double>(k) / (k + 1)) * p0;
    p0 = p1;
    p1 = next;
    out[k + 1] = p1;
  }
  return out;
}

// <n|x,theta> = e^{i n theta} psi_n(x).
//
// Phase convention: the rotated quadrature eigenstate is |x,theta> =
// U(theta)|x> with U(theta) = e^{i theta n_hat}, which makes |x,theta> an
// eigenstate of (a e^{-i theta} + a^dag e^{i theta})/sqrt(2). Under this
// convention the squeezed vacuum b = a cosh r + e^{i phi} a^dag sinh r has
// its minimum quadrature variance e^{-2r}/2 at theta = phi/2. theta is
// reduced mod 2pi before use so the amplitude is 2pi-periodic to rounding.
inline Complex quadrature_amplitude(int n, double x, double theta, int max_n = kHermiteCap) {
  if (!std::isfinite(theta)) throw std::invalid_argument("quadrature_amplitude: theta must be finite");
  double t = std::fmod(theta, kTwoPi);
  if (t < 0.0) t += kTwoPi;
  return std::polar(1.0, n * t) * hermite_function(n, x, max_n);
}

// Squeezed vacuum: the normalized solution of b|psi> = 0 with
// b = a cosh r + e^{i phi} sinh r a^dag, via the two-term recurrence
//   c_{n+1} = -e^{i phi} tanh(r) sqrt(n/(n+1)) c_{n-1},   c_1 = 0,
// so only even n are populated. The untruncated norm of the c_0 = 1 seed
// is cosh r; `captured` below is the fraction retained by the truncation
// and must be at least `min_captured` (default 0.999).
inline StateVector squeezed_vacuum(const SqueezeParams& p, FockDim d, double min_captured = 0.999) {
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(d.dim);
  c[0] = 1.0;
  const Complex step = -std::polar(std::tanh(p.r), p.phi);
  for (int n = 1; n + 1 < d.dim; n += 2)
    c[n + 1] = step * std::sqrt(static_cast<double>(n) / (n + 1)) * c[n - 1];

  const double captured = c.squaredNorm() / std::cosh(p.r);
  if (captured < min_captured)
    throw std::runtime_error("squeezed_vacuum: truncation to dim " + std::to_string(d.dim) +
                             " captures only " + std::to_string(captured) +
                             " of the state norm (need >= " + std::to_string(min_captured) + ")");
  return make_state(std::move(c));
}

// Fraction of the exact squeezed-vacuum norm captured by a truncation.
inline double squeezed_vacuum_captured_norm(const SqueezeParams& p, FockDim d) {
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(d.dim);
  c[0] = 1.0;
  const Complex step = -std::polar(std::tanh(p.r), p.phi);
  for (int n = 1; n + 1 < d.dim; n += 2)
    c[n + 1] = step * std::sqrt(static_cast<double>(n) / (n + 1)) * c[n - 1];
  return c.squaredNorm() / std::cosh(p.r);
}

// Coherent state c_n = e^{-|alpha|^2/2} alpha^n / sqrt(n!), renormalized on
// the truncated space. Fails if the truncation loses more than `max_loss`
// of the probability.
inline StateVector coherent_state(Complex alpha, FockDim d, double max_loss = 1e-3) {
  Eigen::VectorXcd c(d.dim);
  c[0] = std::exp(-0.5 * std::norm(alpha));
  for (int n = 0; n + 1 < d.dim; ++n) c[n + 1] = c[n] * alpha / std::sqrt(n + 1.0);
  const double loss = 1.0 - c.squaredNorm();
  if (loss > max_loss)
    throw std::runtime_error("coherent_state: truncation to dim " + std::to_string(d.dim) +
                             " loses " + std::to_string(loss) + " of the state norm (max " +
                             std::to_string(max_loss) + ")");
  return make_state(std::move(c));
}

// Number state |n>.
inline StateVector fock_state(int n, FockDim d) {
  if (n < 0 || n >= d.dim)
    throw std::invalid_argument("fock_state: n = " + std::to_string(n) +
                                " outside truncation dim " + std::to_string(d.dim));
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(d.dim);
  c[n] = 1.0;
  return StateVector{std::move(c)};
}

// Midpoint quadrature grid wide enough to integrate products of
// psi_0..psi_{nmax} to ~1e-10: the classical turning point sqrt(2 nmax + 1)
// plus four units of Airy tail. (-7,7) alone cannot hold psi_30, whose
// turning point is at 7.81.
struct QuadratureGrid {
  std::vector<double> x;
  double dx;
};

inline QuadratureGrid fock_quadrature_grid(int nmax, int points = 1 << 13) {
  const double span = std::sqrt(2.0 * nmax + 1.0) + 4.0;
  QuadratureGrid g;
  g.dx = 2.0 * span / points;
  g.x.resize(points);
  for (int k = 0; k < points; ++k) g.x[k] = -span + (k + 0.5) * g.dx;
  return g;
}

}  // namespace qtomo
