#pragma once

// The geometric picture: renormalized projectors |y'_i> = sqrt(f_i/rho_ii)
// |y_i>, the overlap operator sum_i |y'_i><y'_i|, its eigenproblem, the
// recoverable subspace where it resolves the identity, and the R(xi)
// transfer-function diagnostic for commuting POVMs.

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "qtomo/maxlik.hpp"
#include "qtomo/measurement.hpp"

namespace qtomo {

struct RenormalizedProjectorSet {
  int dim = 0;
  std::vector<Eigen::VectorXcd> vectors;  // |y'_i>
  std::vector<double> factors;            // sqrt(f_i / rho_ii)
  std::vector<BinLabel> labels;
};

// Scales each retained projector so that <y'_i|rho|y'_i> = f_i exactly.
// Factors are all 1 when rho reproduces the frequencies.
inline RenormalizedProjectorSet renormalize(const ProjectorSet& ps, const FrequencyData& fd,
                                            const Eigen::MatrixXcd& rho) {
  if (ps.kind != ProjectorKind::SharpQuadrature)
    throw std::invalid_argument("renormalize: sharp-quadrature kind required");
  if (ps.size() != fd.frequencies.size())
    throw std::invalid_argument("renormalize: projector/frequency length mismatch");
  const Eigen::VectorXd p = born_probability(rho, ps);
  RenormalizedProjectorSet out;
  out.dim = ps.dim;
  out.vectors.reserve(ps.size());
  out.factors.reserve(ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double f = fd.frequencies[i];
    const double pii = p[static_cast<Eigen::Index>(i)];
    if (pii <= 0.0)
      throw std::runtime_error(
          "renormalize: state assigns zero probability to an observed event (bin " +
          std::to_string(i) + ")");
    const double factor = std::sqrt(f / pii);
    out.factors.push_back(factor);
    out.vectors.push_back(factor * ps.vectors[i]);
    out.labels.push_back(ps.labels[i]);
  }
  return out;
}

// sum_i |y'_i><y'_i|; identical to r_operator evaluated at the same rho.
inline Eigen::MatrixXcd overlap_operator(const RenormalizedProjectorSet& rp) {
  Eigen::MatrixXcd v(rp.dim, rp.vectors.size());
  for (std::size_t i = 0; i < rp.vectors.size(); ++i)
    v.col(static_cast<Eigen::Index>(i)) = rp.vectors[i];
  Eigen::MatrixXcd o = v * v.adjoint();
  return (o + o.adjoint()) / 2.0;
}

// Eigendecomposition report of an overlap operator. recoverable_dim counts
// the eigenvalues within lambda_tolerance of 1; residual_z is the weight of
// the projectors outside the selected subspace, sum_i <Z_i|Z_i>, which
// equals the sum of the non-selected eigenvalues.
struct SubspaceReport {
  Eigen::VectorXd eigenvalues;   // descending
  Eigen::MatrixXcd eigenvectors; // columns, aligned with eigenvalues
  int recoverable_dim = 0;
  double lambda_tolerance = 0.0;
  double residual_z = 0.0;
};

inline constexpr double kDefaultLambdaTolerance = 0.05;

inline SubspaceReport recoverable_subspace(const Eigen::MatrixXcd& overlap,
                                           double lambda_tolerance = kDefaultLambdaTolerance) {
  if (overlap.rows() != overlap.cols())
    throw std::invalid_argument("recoverable_subspace: square matrix required");
  if ((overlap - overlap.adjoint()).cwiseAbs().maxCoeff() > 1e-9)
    throw std::invalid_argument("recoverable_subspace: Hermitian matrix required");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es((overlap + overlap.adjoint()) / 2.0);

  SubspaceReport rep;
  const auto d = overlap.rows();
  rep.lambda_tolerance = lambda_tolerance;
  rep.eigenvalues.resize(d);
  rep.eigenvectors.resize(d, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    rep.eigenvalues[k] = es.eigenvalues()[d - 1 - k];
    rep.eigenvectors.col(k) = es.eigenvectors().col(d - 1 - k);
  }
  for (Eigen::Index k = 0; k < d; ++k) {
    if (std::abs(rep.eigenvalues[k] - 1.0) <= lambda_tolerance)
      ++rep.recoverable_dim;
    else
      rep.residual_z += rep.eigenvalues[k];
  }
  return rep;
}

// Diagonal of the unweighted POVM sum in the common (Fock) basis, Eq.-style
// R(xi) with all weights at the perfect-fit value 1. Plays the role of an
// optical transfer function for the measurement.
inline Eigen::VectorXd r_diagonal(const ProjectorSet& povm) {
  if (povm.kind != ProjectorKind::RandomPhasePovm)
    throw std::invalid_argument("r_diagonal: commuting (random-phase-povm) kind required");
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(povm.dim);
  for (const auto& d : povm.diagonals) diag += d;
  return diag;
}

}  // namespace qtomo
