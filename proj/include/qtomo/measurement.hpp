#pragma once

// Projector sets and POVMs over coordinate-phase bin grids, Gram/correlation
// matrices, Born-rule predictions, and Monte-Carlo simulation of homodyne
// records by seeded inverse-CDF sampling.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qtomo/fock.hpp"
#include "qtomo/rng.hpp"

namespace qtomo {

enum class PhaseSpan { Half, Full };  // 12 cuts over [0,pi) or [0,2pi)

// Coordinate-phase binning of the scan: cut angles theta_j and n_bins
// equal-width bins on (x_min, x_max).
struct BinGrid {
  std::vector<double> phases;
  double x_min = -7.0;
  double x_max = 7.0;
  int n_bins = 100;

  double bin_width() const { return (x_max - x_min) / n_bins; }
  double bin_center(int i) const { return x_min + (i + 0.5) * bin_width(); }
  int num_phases() const { return static_cast<int>(phases.size()); }
};

inline BinGrid make_bin_grid(std::vector<double> phases, double x_min, double x_max, int n_bins) {
  if (phases.empty()) throw std::invalid_argument("BinGrid: need at least one phase");
  for (std::size_t j = 0; j < phases.size(); ++j) {
    if (!(phases[j] >= 0.0) || !(phases[j] < kTwoPi))
      throw std::invalid_argument("BinGrid: phases must lie in [0, 2pi)");
    if (j > 0 && !(phases[j] > phases[j - 1]))
      throw std::invalid_argument("BinGrid: phases must be strictly increasing");
  }
  if (!(x_max > x_min)) throw std::invalid_argument("BinGrid: x_max must exceed x_min");
  if (n_bins < 1) throw std::invalid_argument("BinGrid: n_bins must be >= 1");
  return BinGrid{std::move(phases), x_min, x_max, n_bins};
}

inline std::vector<double> uniform_phases(int count, PhaseSpan span) {
  if (count < 1) throw std::invalid_argument("uniform_phases: count must be >= 1");
  const double period = (span == PhaseSpan::Half) ? kPi : kTwoPi;
  std::vector<double> out(count);
  for (int j = 0; j < count; ++j) out[j] = j * period / count;
  return out;
}

enum class ProjectorKind { SharpQuadrature, RandomPhasePovm };

// (phase cut, coordinate bin); phase_index is -1 for phase-averaged POVMs.
struct BinLabel {
  int phase_index;
  int bin_index;
};

// Measured projectors in the Fock basis. Sharp kind stores weighted kets
// |y_i> = sqrt(bin_width/P) |x_i,theta_j>; the random-phase kind stores the
// diagonals of Pi_i = bin_width * diag(psi_n(x_i)^2), since the 2pi phase
// average annihilates every off-diagonal element.
struct ProjectorSet {
  ProjectorKind kind = ProjectorKind::SharpQuadrature;
  int dim = 0;
  std::vector<Eigen::VectorXcd> vectors;   // sharp kind
  std::vector<Eigen::VectorXd> diagonals;  // povm kind
  std::vector<BinLabel> labels;

  std::size_t size() const {
    return kind == ProjectorKind::SharpQuadrature ? vectors.size() : diagonals.size();
  }
};

// Sharp rotated-quadrature projectors at the bin centers, weighted with
// sqrt(bin_width / P). With that weight sum_i |y_i><y_i| tends to the
// identity as the bins refine: each cut alone resolves the identity,
// integral dx |x,theta><x,theta| = 1, and the cuts are averaged.
inline ProjectorSet build_tomography_projectors(const BinGrid& grid, FockDim d) {
  if (d.dim < 2) throw std::invalid_argument("build_tomography_projectors: dim must be >= 2");
  const int P = grid.num_phases();
  const double w = std::sqrt(grid.bin_width() / P);

  std::vector<Eigen::VectorXd> psi(grid.n_bins);
  for (int i = 0; i < grid.n_bins; ++i) psi[i] = hermite_functions_upto(d.dim, grid.bin_center(i));

  ProjectorSet ps;
  ps.kind = ProjectorKind::SharpQuadrature;
  ps.dim = d.dim;
  ps.vectors.reserve(static_cast<std::size_t>(P) * grid.n_bins);
  ps.labels.reserve(ps.vectors.capacity());
  for (int j = 0; j < P; ++j) {
    Eigen::VectorXcd phase(d.dim);
    for (int n = 0; n < d.dim; ++n) phase[n] = std::polar(w, n * grid.phases[j]);
    for (int i = 0; i < grid.n_bins; ++i) {
      ps.vectors.push_back(phase.cwiseProduct(psi[i].cast<Complex>()));
      ps.labels.push_back(BinLabel{j, i});
    }
  }
  return ps;
}

// Random-phase homodyne POVM, Pi_i = (1/2pi) integral dtheta
// |x_i,theta><x_i,theta| scaled by the bin width:
// <m|Pi_i|n> = delta_mn * bin_width * psi_n(x_i)^2.
// subsamples > 1 switches to the unsharp form: the superposition of
// indistinguishable positions across the bin, <m|Pi_i|n> = delta_mn *
// sum_s (bin_width / subsamples) psi_n(x_s)^2 over sub-points x_s in bin i.
inline ProjectorSet build_random_phase_povm(const BinGrid& grid, FockDim d, int subsamples = 1) {
  if (subsamples < 1) throw std::invalid_argument("build_random_phase_povm: subsamples must be >= 1");
  ProjectorSet ps;
  ps.kind = ProjectorKind::RandomPhasePovm;
  ps.dim = d.dim;
  ps.diagonals.reserve(grid.n_bins);
  ps.labels.reserve(grid.n_bins);
  const double w = grid.bin_width();
  const double sub_w = w / subsamples;
  for (int i = 0; i < grid.n_bins; ++i) {
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(d.dim);
    const double left = grid.x_min + i * w;
    for (int s = 0; s < subsamples; ++s) {
      Eigen::VectorXd psi = hermite_functions_upto(d.dim, left + (s + 0.5) * sub_w);
      diag += sub_w * psi.cwiseProduct(psi);
    }
    ps.diagonals.push_back(std::move(diag));
    ps.labels.push_back(BinLabel{-1, i});
  }
  return ps;
}

// Projectors as the columns of a dim x M matrix (sharp kind only).
inline Eigen::MatrixXcd projector_matrix(const ProjectorSet& ps) {
  if (ps.kind != ProjectorKind::SharpQuadrature)
    throw std::invalid_argument("projector_matrix: sharp-quadrature kind required");
  Eigen::MatrixXcd V(ps.dim, ps.vectors.size());
  for (std::size_t i = 0; i < ps.vectors.size(); ++i) V.col(i) = ps.vectors[i];
  return V;
}

// sum_i |y_i><y_i| (or sum_i Pi_i), the measurement's resolution of the
// identity on the truncated space.
inline Eigen::MatrixXcd completeness_operator(const ProjectorSet& ps) {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(ps.dim, ps.dim);
  if (ps.kind == ProjectorKind::SharpQuadrature) {
    const Eigen::MatrixXcd V = projector_matrix(ps);
    out = V * V.adjoint();
  } else {
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(ps.dim);
    for (const auto& d : ps.diagonals) diag += d;
    out = diag.cast<Complex>().asDiagonal();
  }
  return (out + out.adjoint()) / 2.0;
}

// Gram matrix C_ij = <y_i|y_j> with a condition-number report. C is
// singular whenever M exceeds the Fock dimension, so downstream C^{-1}
// checks consult `invertible` first instead of crashing.
struct CorrelationMatrix {
  Eigen::MatrixXcd entries;
  double condition_number = 0.0;
  bool invertible = false;
};

inline constexpr double kMaxGramCondition = 1e10;

inline CorrelationMatrix correlation_matrix(const ProjectorSet& ps) {
  if (ps.kind != ProjectorKind::SharpQuadrature)
    throw std::invalid_argument("correlation_matrix: sharp-quadrature kind required");
  CorrelationMatrix c;
  const Eigen::MatrixXcd V = projector_matrix(ps);
  c.entries = V.adjoint() * V;
  c.entries = (c.entries + c.entries.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(c.entries, Eigen::EigenvaluesOnly);
  const double lmax = es.eigenvalues().maxCoeff();
  const double lmin = es.eigenvalues().minCoeff();
  if (lmin <= 0.0 || lmax <= 0.0) {
    c.condition_number = std::numeric_limits<double>::infinity();
    c.invertible = false;
  } else {
    c.condition_number = lmax / lmin;
    c.invertible = c.condition_number < kMaxGramCondition;
  }
  return c;
}

// Born probabilities p_i = <y_i|rho|y_i> (or Tr[rho Pi_i]). Tiny negative
// values from rounding are clamped to zero; anything below -1e-12 is a bug
// in the caller's rho.
inline Eigen::VectorXd born_probability(const Eigen::MatrixXcd& rho, const ProjectorSet& ps) {
  if (rho.rows() != ps.dim || rho.cols() != ps.dim)
    throw std::invalid_argument("born_probability: dimension mismatch");
  const auto m = static_cast<Eigen::Index>(ps.size());
  Eigen::VectorXd p(m);
  if (ps.kind == ProjectorKind::SharpQuadrature) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& v = ps.vectors[static_cast<std::size_t>(i)];
      p[i] = std::real(v.dot(rho * v));  // dot conjugates the left argument
    }
  } else {
    const Eigen::VectorXd diag = rho.diagonal().real();
    for (Eigen::Index i = 0; i < m; ++i)
      p[i] = ps.diagonals[static_cast<std::size_t>(i)].dot(diag);
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (p[i] < -1e-12)
      throw std::runtime_error("born_probability: probability " + std::to_string(p[i]) +
                               " below -1e-12; input is not positive semidefinite");
    if (p[i] < 0.0) p[i] = 0.0;
  }
  return p;
}

inline Eigen::VectorXd born_probability(const StateVector& psi, const ProjectorSet& ps) {
  if (psi.dim() != ps.dim) throw std::invalid_argument("born_probability: dimension mismatch");
  const auto m = static_cast<Eigen::Index>(ps.size());
  Eigen::VectorXd p(m);
  if (ps.kind == ProjectorKind::SharpQuadrature) {
    for (Eigen::Index i = 0; i < m; ++i)
      p[i] = std::norm(ps.vectors[static_cast<std::size_t>(i)].dot(psi.amplitudes));
  } else {
    const Eigen::VectorXd pop = psi.amplitudes.cwiseAbs2();
    for (Eigen::Index i = 0; i < m; ++i)
      p[i] = ps.diagonals[static_cast<std::size_t>(i)].dot(pop);
  }
  return p;
}

// Event counts per bin with relative frequencies f_i = counts_i / total.
// Zero-count bins may be present until drop_empty_bins removes them.
struct FrequencyData {
  std::vector<std::int64_t> counts;
  std::int64_t total = 0;
  std::vector<double> frequencies;
};

inline FrequencyData make_frequency_data(std::vector<std::int64_t> counts) {
  FrequencyData fd;
  fd.total = 0;
  for (auto c : counts) {
    if (c < 0) throw std::invalid_argument("FrequencyData: negative count");
    fd.total += c;
  }
  if (fd.total <= 0) throw std::invalid_argument("FrequencyData: all counts are zero");
  fd.frequencies.resize(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    fd.frequencies[i] = static_cast<double>(counts[i]) / static_cast<double>(fd.total);
  fd.counts = std::move(counts);
  return fd;
}

// Removes every zero-count bin from both structures. The likelihood product
// runs only over observed events, f_i > 0. Total count is unchanged, so the
// retained frequencies still sum to one. Idempotent.
inline std::pair<ProjectorSet, FrequencyData> drop_empty_bins(const ProjectorSet& ps,
                                                              const FrequencyData& fd) {
  if (ps.size() != fd.counts.size())
    throw std::invalid_argument("drop_empty_bins: projector/count length mismatch");
  std::vector<std::size_t> keep;
  keep.reserve(fd.counts.size());
  for (std::size_t i = 0; i < fd.counts.size(); ++i)
    if (fd.counts[i] > 0) keep.push_back(i);
  if (keep.empty()) throw std::runtime_error("drop_empty_bins: no observed events");

  ProjectorSet out;
  out.kind = ps.kind;
  out.dim = ps.dim;
  std::vector<std::int64_t> counts;
  counts.reserve(keep.size());
  for (std::size_t i : keep) {
    if (ps.kind == ProjectorKind::SharpQuadrature)
      out.vectors.push_back(ps.vectors[i]);
    else
      out.diagonals.push_back(ps.diagonals[i]);
    out.labels.push_back(ps.labels[i]);
    counts.push_back(fd.counts[i]);
  }
  return {std::move(out), make_frequency_data(std::move(counts))};
}

// One simulated scan: binned counts plus the out-of-window discard report.
struct HomodyneRun {
  FrequencyData data;
  std::int64_t requested = 0;
  std::int64_t discarded = 0;
  double discarded_fraction = 0.0;
  bool window_warning = false;  // discarded fraction above 1%
};

// Fine grid used for inverse-CDF sampling: 2^12 midpoints over a window
// 1.5x the scan window.
inline constexpr int kFineGridPoints = 1 << 12;
inline constexpr double kFineWindowScale = 1.5;
inline constexpr double kDiscardWarnFraction = 0.01;

namespace detail {

struct FineGrid {
  Eigen::VectorXd x;
  double lo = 0.0;
  double cell = 0.0;
  Eigen::MatrixXd psi;  // kFineGridPoints x dim
};

inline FineGrid make_fine_grid(const BinGrid& grid, int dim) {
  FineGrid fg;
  const double center = 0.5 * (grid.x_min + grid.x_max);
  const double half = 0.5 * (grid.x_max - grid.x_min) * kFineWindowScale;
  fg.lo = center - half;
  fg.cell = 2.0 * half / kFineGridPoints;
  fg.x.resize(kFineGridPoints);
  fg.psi.resize(kFineGridPoints, dim);
  for (int k = 0; k < kFineGridPoints; ++k) {
    fg.x[k] = fg.lo + (k + 0.5) * fg.cell;
    fg.psi.row(k) = hermite_functions_upto(dim, fg.x[k]).transpose();
  }
  return fg;
}

// |<x,theta|psi>|^2 on the fine grid. <x,theta|psi> = sum_n e^{-in theta}
// psi_n(x) c_n, evaluated as two real mat-vecs.
inline Eigen::VectorXd phase_density(const FineGrid& fg, const Eigen::VectorXcd& amps,
                                     double theta) {
  const int dim = static_cast<int>(amps.size());
  Eigen::VectorXcd rot(dim);
  for (int n = 0; n < dim; ++n) rot[n] = std::polar(1.0, -n * theta) * amps[n];
  const Eigen::VectorXd re = fg.psi * rot.real();
  const Eigen::VectorXd im = fg.psi * rot.imag();
  return re.cwiseAbs2() + im.cwiseAbs2();
}

// Draw one sample from a piecewise-constant density given its inclusive
// cumulative sums. One uniform per record.
inline double sample_from_cdf(const FineGrid& fg, const Eigen::VectorXd& cdf, double u) {
  const double target = u * cdf[cdf.size() - 1];
  const double* begin = cdf.data();
  const double* end = begin + cdf.size();
  const auto idx = static_cast<Eigen::Index>(std::upper_bound(begin, end, target) - begin);
  const auto k = std::min(idx, cdf.size() - 1);
  const double prev = (k == 0) ? 0.0 : cdf[k - 1];
  const double mass = cdf[k] - prev;
  const double frac = (mass > 0.0) ? (target - prev) / mass : 0.5;
  return fg.lo + (static_cast<double>(k) + frac) * fg.cell;
}

inline Eigen::VectorXd inclusive_cumsum(const Eigen::VectorXd& v) {
  Eigen::VectorXd out(v.size());
  double acc = 0.0;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    acc += v[k];
    out[k] = acc;
  }
  return out;
}

}  // namespace detail

// Simulates the tomographic scan: for each cut theta_j, draws
// records_per_phase quadrature samples from |<x,theta_j|psi>|^2 by
// inverse-CDF sampling and bins them on the grid. Samples falling outside
// (x_min, x_max) are discarded and reported. Each phase uses an
// independent substream derived from (seed, j), so the output is
// deterministic and independent of any execution order.
inline HomodyneRun simulate_homodyne(const StateVector& state, const BinGrid& grid,
                                     std::int64_t records_per_phase, std::uint64_t seed) {
  if (records_per_phase < 1)
    throw std::invalid_argument("simulate_homodyne: records_per_phase must be >= 1");
  if (state.norm_error() > 1e-8)
    throw std::invalid_argument("simulate_homodyne: state is not normalized");

  const detail::FineGrid fg = detail::make_fine_grid(grid, state.dim());
  const int P = grid.num_phases();
  const double width = grid.bin_width();

  std::vector<std::int64_t> counts(static_cast<std::size_t>(P) * grid.n_bins, 0);
  std::int64_t discarded = 0;
  for (int j = 0; j < P; ++j) {
    const Eigen::VectorXd cdf =
        detail::inclusive_cumsum(detail::phase_density(fg, state.amplitudes, grid.phases[j]));
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(j)));
    for (std::int64_t r = 0; r < records_per_phase; ++r) {
      const double x = detail::sample_from_cdf(fg, cdf, rng.uniform());
      const double rel = (x - grid.x_min) / width;
      if (rel < 0.0 || rel >= grid.n_bins) {
        ++discarded;
        continue;
      }
      ++counts[static_cast<std::size_t>(j) * grid.n_bins + static_cast<int>(rel)];
    }
  }

  HomodyneRun run;
  run.requested = records_per_phase * P;
  run.discarded = discarded;
  run.discarded_fraction = static_cast<double>(discarded) / static_cast<double>(run.requested);
  run.window_warning = run.discarded_fraction > kDiscardWarnFraction;
  run.data = make_frequency_data(std::move(counts));
  return run;
}

// Random-phase homodyning: every record draws its own local-oscillator
// phase uniformly on [0, 2pi) and then a quadrature sample at that phase.
// Counts are binned on x alone, matching build_random_phase_povm.
inline HomodyneRun simulate_random_phase(const StateVector& state, const BinGrid& grid,
                                         std::int64_t total_records, std::uint64_t seed) {
  if (total_records < 1)
    throw std::invalid_argument("simulate_random_phase: total_records must be >= 1");
  if (state.norm_error() > 1e-8)
    throw std::invalid_argument("simulate_random_phase: state is not normalized");

  const detail::FineGrid fg = detail::make_fine_grid(grid, state.dim());
  const double width = grid.bin_width();
  std::vector<std::int64_t> counts(grid.n_bins, 0);
  std::int64_t discarded = 0;
  Rng rng(derive_seed(seed, 0x5256504853ULL));
  for (std::int64_t r = 0; r < total_records; ++r) {
    const double theta = rng.uniform() * kTwoPi;
    const Eigen::VectorXd cdf =
        detail::inclusive_cumsum(detail::phase_density(fg, state.amplitudes, theta));
    const double x = detail::sample_from_cdf(fg, cdf, rng.uniform());
    const double rel = (x - grid.x_min) / width;
    if (rel < 0.0 || rel >= grid.n_bins) {
      ++discarded;
      continue;
    }
    ++counts[static_cast<int>(rel)];
  }

  HomodyneRun run;
  run.requested = total_records;
  run.discarded = discarded;
  run.discarded_fraction = static_cast<double>(discarded) / static_cast<double>(total_records);
  run.window_warning = run.discarded_fraction > kDiscardWarnFraction;
  run.data = make_frequency_data(std::move(counts));
  return run;
}

}  // namespace qtomo
