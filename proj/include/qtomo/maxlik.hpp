#pragma once

// Maximum-likelihood reconstruction: solves the extremal equation
// R(rho) rho = rho, with R = sum_i (f_i / rho_ii) |y_i><y_i|, by diluted
// fixed-point iteration. Variants for general mixed states, for
// pure-state-restricted fits, and for commuting (diagonal) POVMs.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "qtomo/measurement.hpp"
#include "qtomo/rng.hpp"

namespace qtomo {

// Hermitian, positive-semidefinite, unit-trace reconstruction target.
struct DensityMatrix {
  Eigen::MatrixXcd mat;

  int dim() const { return static_cast<int>(mat.rows()); }

  static DensityMatrix maximally_mixed(int d) {
    return DensityMatrix{Eigen::MatrixXcd::Identity(d, d) / static_cast<double>(d)};
  }
};

struct DensityCheck {
  double hermiticity_violation = 0.0;  // max |m - m^dag| entry
  double trace_error = 0.0;            // |Tr m - 1|
  double min_eigenvalue = 0.0;

  bool ok(double herm_tol = 1e-12, double trace_tol = 1e-12, double eig_tol = -1e-10) const {
    return hermiticity_violation <= herm_tol && trace_error <= trace_tol &&
           min_eigenvalue >= eig_tol;
  }
};

inline DensityCheck check_density(const Eigen::MatrixXcd& m) {
  DensityCheck c;
  c.hermiticity_violation = (m - m.adjoint()).cwiseAbs().maxCoeff();
  c.trace_error = std::abs(m.trace() - Complex(1.0, 0.0));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es((m + m.adjoint()) / 2.0,
                                                     Eigen::EigenvaluesOnly);
  c.min_eigenvalue = es.eigenvalues().minCoeff();
  return c;
}

// (1/2) sum |eig(a - b)|.
inline double trace_distance(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd d = a - b;
  d = (d + d.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(d, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

// Wishart-style random state: G G^dag / Tr, G complex Gaussian.
inline DensityMatrix random_density(int dim, Rng& rng) {
  Eigen::MatrixXcd g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) g(i, j) = Complex(rng.normal(), rng.normal());
  Eigen::MatrixXcd rho = g * g.adjoint();
  rho /= rho.trace().real();
  return DensityMatrix{(rho + rho.adjoint()) / 2.0};
}

inline Eigen::VectorXcd random_pure(int dim, Rng& rng) {
  Eigen::VectorXcd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = Complex(rng.normal(), rng.normal());
  return v / v.norm();
}

// Rotates the global phase so the largest-magnitude entry is real positive.
// Pure-state fits are defined up to e^{i gamma}; comparisons mod it out.
inline Eigen::VectorXcd align_global_phase(const Eigen::VectorXcd& v) {
  Eigen::Index imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  const Complex z = v[imax];
  if (std::abs(z) == 0.0) return v;
  return v * (std::conj(z) / std::abs(z));
}

// S = -sum f_i ln f_i over the retained bins.
inline double entropy(const FrequencyData& fd) {
  double s = 0.0;
  for (double f : fd.frequencies)
    if (f > 0.0) s -= f * std::log(f);
  return s;
}

// (1/n) ln L = sum_i f_i ln <y_i|rho|y_i>. Returns -inf if the state
// assigns zero probability to an observed event.
inline double log_likelihood(const Eigen::MatrixXcd& rho, const ProjectorSet& ps,
                             const FrequencyData& fd) {
  if (ps.size() != fd.frequencies.size())
    throw std::invalid_argument("log_likelihood: projector/frequency length mismatch");
  const Eigen::VectorXd p = born_probability(rho, ps);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double f = fd.frequencies[static_cast<std::size_t>(i)];
    if (f <= 0.0) throw std::invalid_argument("log_likelihood: retained frequencies must be > 0");
    if (p[i] <= 0.0) return -std::numeric_limits<double>::infinity();
    ll += f * std::log(p[i]);
  }
  return ll;
}

// K(rho/f) = -sum_i f_i ln(rho_ii / f_i) = -S - (1/n) ln L >= 0;
// zero exactly at a perfect frequency fit.
inline double relative_entropy(const Eigen::MatrixXcd& rho, const ProjectorSet& ps,
                               const FrequencyData& fd) {
  const Eigen::VectorXd p = born_probability(rho, ps);
  double k = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double f = fd.frequencies[static_cast<std::size_t>(i)];
    if (f <= 0.0) throw std::invalid_argument("relative_entropy: retained frequencies must be > 0");
    if (p[i] <= 0.0) return std::numeric_limits<double>::infinity();
    k -= f * std::log(p[i] / f);
  }
  return k;
}

// Probabilities below this are floored inside R to keep early iterations
// from dividing by zero; every hit is counted and reported.
inline constexpr double kBornFloor = 1e-14;

// R = sum_i (f_i / rho_ii) |y_i><y_i| with rho_ii = <y_i|rho|y_i|>.
// At an exact fit (rho_ii = f_i) this is the raw projector sum.
inline Eigen::MatrixXcd r_operator(const Eigen::MatrixXcd& rho, const ProjectorSet& ps,
                                   const FrequencyData& fd, long* floor_hits = nullptr) {
  if (ps.size() != fd.frequencies.size())
    throw std::invalid_argument("r_operator: projector/frequency length mismatch");
  const Eigen::VectorXd p = born_probability(rho, ps);
  Eigen::VectorXd w(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    double pi = p[i];
    if (pi < kBornFloor) {
      pi = kBornFloor;
      if (floor_hits) ++*floor_hits;
    }
    w[i] = fd.frequencies[static_cast<std::size_t>(i)] / pi;
  }
  Eigen::MatrixXcd r;
  if (ps.kind == ProjectorKind::SharpQuadrature) {
    const Eigen::MatrixXcd V = projector_matrix(ps);
    r = V * w.asDiagonal() * V.adjoint();
  } else {
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(ps.dim);
    for (std::size_t i = 0; i < ps.diagonals.size(); ++i)
      diag += w[static_cast<Eigen::Index>(i)] * ps.diagonals[i];
    r = diag.cast<Complex>().asDiagonal();
  }
  return (r + r.adjoint()) / 2.0;
}

// Iteration controls. The extremal-residual tolerance applies to
// ||R rho - rho||_F, the fixed-point condition itself.
struct SolverConfig {
  int max_iters = 20000;
  double tol = 1e-8;
  double dilution = 0.5;  // mixing weight of the R-update, in (0,1]
  int restarts = 0;       // extra runs from random starts, to probe non-uniqueness
  std::uint64_t seed = 7;
  int max_threads = 1;    // cap on concurrent restart runs; results are
                          // merged by index, so scheduling cannot change them

  friend bool operator==(const SolverConfig&, const SolverConfig&) = default;

  void validate() const {
    if (max_iters < 1) throw std::invalid_argument("SolverConfig: max_iters must be >= 1");
    if (!(tol > 0.0)) throw std::invalid_argument("SolverConfig: tol must be > 0");
    if (!(dilution > 0.0) || dilution > 1.0)
      throw std::invalid_argument("SolverConfig: dilution must be in (0,1]");
    if (restarts < 0) throw std::invalid_argument("SolverConfig: restarts must be >= 0");
  }
};

struct ReconstructionResult {
  DensityMatrix rho;
  int iterations = 0;
  bool converged = false;
  double log_likelihood_per_event = 0.0;
  double entropy_S = 0.0;
  double rel_entropy_K = 0.0;
  double extremal_residual = 0.0;
  double restart_spread = 0.0;             // max trace distance between solutions
  double restart_likelihood_spread = 0.0;  // max log-likelihood gap between solutions
  long floor_hits = 0;

  // Worst-case numbers over every iterate of every run.
  double max_hermiticity_violation = 0.0;
  double max_trace_error = 0.0;
  double min_iterate_eigenvalue = 0.0;
  double em_monotonicity_violation = 0.0;  // diagonal solver only

  std::string method;
  Eigen::VectorXcd amplitudes;  // pure solver: phase-aligned state
  Eigen::VectorXd populations;  // diagonal solver: p_n

  double k_over_s_percent() const {
    return entropy_S > 0.0 ? 100.0 * rel_entropy_K / entropy_S : 0.0;
  }
};

namespace detail {

struct IterateStats {
  double max_herm = 0.0;
  double max_trace = 0.0;
  double min_eig = std::numeric_limits<double>::infinity();

  void observe(const Eigen::MatrixXcd& raw) {
    const DensityCheck c = check_density(raw);
    max_herm = std::max(max_herm, c.hermiticity_violation);
    max_trace = std::max(max_trace, c.trace_error);
    min_eig = std::min(min_eig, c.min_eigenvalue);
  }
};

struct MixedRun {
  Eigen::MatrixXcd rho;
  int iterations = 0;
  bool converged = false;
  double residual = 0.0;
  double loglik = 0.0;
  long floor_hits = 0;
  IterateStats stats;
};

// Diluted R rho R with trace renormalization. A candidate that lowers the
// likelihood is retried at half dilution, so the likelihood sequence is
// nondecreasing by construction; R rho R preserves positivity, and convex
// mixing with the previous iterate keeps it.
inline MixedRun iterate_mixed(Eigen::MatrixXcd rho, const ProjectorSet& ps,
                              const FrequencyData& fd, const SolverConfig& cfg) {
  MixedRun run;
  run.stats.observe(rho);
  double ll_prev = log_likelihood(rho, ps, fd);
  bool stalled = false;
  for (run.iterations = 0; run.iterations < cfg.max_iters; ++run.iterations) {
    const Eigen::MatrixXcd r = r_operator(rho, ps, fd, &run.floor_hits);
    run.residual = (r * rho - rho).norm();
    if (run.residual <= cfg.tol) {
      run.converged = true;
      break;
    }

    Eigen::MatrixXcd core = r * rho * r;
    core = (core + core.adjoint()) / 2.0;
    core /= core.trace().real();

    double d = cfg.dilution;
    Eigen::MatrixXcd cand;
    double ll_cand = 0.0;
    for (int back = 0;; ++back) {
      cand = (1.0 - d) * rho + d * core;
      cand /= cand.trace().real();
      ll_cand = log_likelihood(cand, ps, fd);
      if (ll_cand >= ll_prev - 1e-12 * std::max(1.0, std::abs(ll_prev))) break;
      d *= 0.5;
      if (back >= 50) {
        stalled = true;
        break;
      }
    }
    if (stalled) break;  // no dilution improves the likelihood; report as is

    run.stats.observe(cand);
    rho = (cand + cand.adjoint()) / 2.0;
    ll_prev = ll_cand;
  }
  if (!run.converged) {
    const Eigen::MatrixXcd r = r_operator(rho, ps, fd, &run.floor_hits);
    run.residual = (r * rho - rho).norm();
    run.converged = run.residual <= cfg.tol;
  }
  run.rho = rho;
  run.loglik = ll_prev;
  return run;
}

// Pure-state update in terms of overlaps a = V^dag psi only: the likelihood
// is sum f ln |a_i|^2 and R|psi> = V (w .* a), so no dim x dim operator is
// ever formed.
inline MixedRun iterate_pure(Eigen::VectorXcd psi, const ProjectorSet& ps,
                             const FrequencyData& fd, const SolverConfig& cfg) {
  const Eigen::MatrixXcd v = projector_matrix(ps);
  const auto m = static_cast<Eigen::Index>(fd.frequencies.size());
  if (v.cols() != m) throw std::invalid_argument("iterate_pure: projector/frequency mismatch");
  Eigen::VectorXd f(m);
  for (Eigen::Index i = 0; i < m; ++i) f[i] = fd.frequencies[static_cast<std::size_t>(i)];

  auto loglik_of = [&](const Eigen::VectorXcd& a) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double p = std::norm(a[i]);
      if (p <= 0.0) return -std::numeric_limits<double>::infinity();
      ll += f[i] * std::log(p);
    }
    return ll;
  };

  MixedRun run;
  Eigen::VectorXcd a = v.adjoint() * psi;
  double ll_prev = loglik_of(a);
  bool stalled = false;
  for (run.iterations = 0; run.iterations < cfg.max_iters; ++run.iterations) {
    Eigen::VectorXcd wa(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      double p = std::norm(a[i]);
      if (p < kBornFloor) {
        p = kBornFloor;
        ++run.floor_hits;
      }
      wa[i] = (f[i] / p) * a[i];
    }
    const Eigen::VectorXcd rpsi = v * wa;
    run.residual = (rpsi - psi).norm();  // fixed point R|psi> = |psi>
    if (run.residual <= cfg.tol) {
      run.converged = true;
      break;
    }

    double d = cfg.dilution;
    Eigen::VectorXcd cand;
    Eigen::VectorXcd cand_a;
    double ll_cand = 0.0;
    for (int back = 0;; ++back) {
      cand = (1.0 - d) * psi + d * rpsi / rpsi.norm();
      cand /= cand.norm();
      cand_a = v.adjoint() * cand;
      ll_cand = loglik_of(cand_a);
      if (ll_cand >= ll_prev - 1e-12 * std::max(1.0, std::abs(ll_prev))) break;
      d *= 0.5;
      if (back >= 50) {
        stalled = true;
        break;
      }
    }
    if (stalled) break;

    psi = cand;
    a = cand_a;
    run.stats.max_trace = std::max(run.stats.max_trace, std::abs(psi.squaredNorm() - 1.0));
    ll_prev = ll_cand;
  }
  if (!run.converged) {
    Eigen::VectorXcd wa(m);
    for (Eigen::Index i = 0; i < m; ++i)
      wa[i] = (f[i] / std::max(std::norm(a[i]), kBornFloor)) * a[i];
    run.residual = (v * wa - psi).norm();
    run.converged = run.residual <= cfg.tol;
  }
  run.rho = psi * psi.adjoint();
  run.stats.observe(run.rho);
  run.loglik = ll_prev;
  return run;
}

inline void merge_runs(ReconstructionResult& res, const std::vector<MixedRun>& runs) {
  res.min_iterate_eigenvalue = std::numeric_limits<double>::infinity();
  for (const auto& a : runs) {
    res.max_hermiticity_violation = std::max(res.max_hermiticity_violation, a.stats.max_herm);
    res.max_trace_error = std::max(res.max_trace_error, a.stats.max_trace);
    res.min_iterate_eigenvalue = std::min(res.min_iterate_eigenvalue, a.stats.min_eig);
    res.floor_hits += a.floor_hits;
  }
  for (std::size_t a = 0; a < runs.size(); ++a)
    for (std::size_t b = a + 1; b < runs.size(); ++b) {
      res.restart_spread =
          std::max(res.restart_spread, trace_distance(runs[a].rho, runs[b].rho));
      res.restart_likelihood_spread =
          std::max(res.restart_likelihood_spread, std::abs(runs[a].loglik - runs[b].loglik));
    }
}

template <typename Job>
inline void run_indexed(int count, int max_threads, Job job) {
  const int workers = std::min(std::max(max_threads, 1), count);
  if (workers <= 1) {
    for (int k = 0; k < count; ++k) job(k);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int k = next.fetch_add(1); k < count; k = next.fetch_add(1)) job(k);
    });
  for (auto& t : pool) t.join();
}

inline void finish_result(ReconstructionResult& res, const MixedRun& main,
                          const ProjectorSet& ps, const FrequencyData& fd) {
  res.rho = DensityMatrix{main.rho};
  res.iterations = main.iterations;
  res.converged = main.converged;
  res.extremal_residual = main.residual;
  res.log_likelihood_per_event = main.loglik;
  res.entropy_S = entropy(fd);
  res.rel_entropy_K = relative_entropy(main.rho, ps, fd);
}

}  // namespace detail

// General mixed-state reconstruction. The canonical run starts from the
// maximally mixed state; cfg.restarts further runs start from random
// Wishart states and only feed the spread diagnostics. Non-convergence
// returns converged = false with the best iterate, never throws.
inline ReconstructionResult solve_mixed(const ProjectorSet& ps, const FrequencyData& fd,
                                        const SolverConfig& cfg) {
  cfg.validate();
  if (ps.size() == 0) throw std::invalid_argument("solve_mixed: empty projector set");
  std::vector<detail::MixedRun> runs(static_cast<std::size_t>(cfg.restarts) + 1);
  detail::run_indexed(cfg.restarts + 1, cfg.max_threads, [&](int k) {
    if (k == 0) {
      runs[0] = detail::iterate_mixed(DensityMatrix::maximally_mixed(ps.dim).mat, ps, fd, cfg);
    } else {
      Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(k)));
      runs[static_cast<std::size_t>(k)] =
          detail::iterate_mixed(random_density(ps.dim, rng).mat, ps, fd, cfg);
    }
  });
  ReconstructionResult res;
  res.method = "mixed";
  detail::finish_result(res, runs.front(), ps, fd);
  detail::merge_runs(res, runs);
  return res;
}

// Pure-state-restricted fit, |psi> <- N[(1-d)|psi> + d N[R|psi>]]. The
// canonical start is the principal eigenvector of sum_i f_i |y_i><y_i|.
// Reported amplitudes are phase-aligned (largest entry real positive).
inline ReconstructionResult solve_pure(const ProjectorSet& ps, const FrequencyData& fd,
                                       const SolverConfig& cfg) {
  cfg.validate();
  if (ps.kind != ProjectorKind::SharpQuadrature)
    throw std::invalid_argument("solve_pure: sharp-quadrature kind required");
  if (ps.size() == 0) throw std::invalid_argument("solve_pure: empty projector set");

  Eigen::VectorXd f(static_cast<Eigen::Index>(fd.frequencies.size()));
  for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = fd.frequencies[static_cast<std::size_t>(i)];
  const Eigen::MatrixXcd V = projector_matrix(ps);
  Eigen::MatrixXcd b = V * f.asDiagonal() * V.adjoint();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es((b + b.adjoint()) / 2.0);
  const Eigen::VectorXcd start = es.eigenvectors().col(ps.dim - 1);

  std::vector<detail::MixedRun> runs(static_cast<std::size_t>(cfg.restarts) + 1);
  detail::run_indexed(cfg.restarts + 1, cfg.max_threads, [&](int k) {
    if (k == 0) {
      runs[0] = detail::iterate_pure(start, ps, fd, cfg);
    } else {
      Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(k)));
      runs[static_cast<std::size_t>(k)] =
          detail::iterate_pure(random_pure(ps.dim, rng), ps, fd, cfg);
    }
  });

  ReconstructionResult res;
  res.method = "pure";
  detail::finish_result(res, runs.front(), ps, fd);
  detail::merge_runs(res, runs);
  // Recover |psi> from the rank-1 rho as its dominant eigenvector.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> er(runs.front().rho);
  res.amplitudes = align_global_phase(er.eigenvectors().col(ps.dim - 1));
  return res;
}

// Commuting-POVM case: the density matrix is diagonal in the common basis
// and the expectation-maximization update
//   p_n <- p_n * sum_i f_i Pi_i,nn / pred_i,   pred_i = sum_m p_m Pi_i,mm
// has a nondecreasing likelihood (sum_n p_n s_n = sum_i f_i = 1, so the
// update stays on the simplex and Jensen's inequality applies even for an
// incomplete POVM). Any decrease beyond 1e-12 is a bug and is reported.
inline ReconstructionResult solve_diagonal(const ProjectorSet& ps, const FrequencyData& fd,
                                           const SolverConfig& cfg) {
  cfg.validate();
  if (ps.kind != ProjectorKind::RandomPhasePovm)
    throw std::invalid_argument("solve_diagonal: random-phase-povm kind required");
  const auto m = static_cast<Eigen::Index>(ps.size());
  if (m == 0) throw std::invalid_argument("solve_diagonal: empty POVM");

  Eigen::MatrixXd dmat(m, ps.dim);  // rows are the POVM diagonals
  Eigen::VectorXd f(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    dmat.row(i) = ps.diagonals[static_cast<std::size_t>(i)].transpose();
    f[i] = fd.frequencies[static_cast<std::size_t>(i)];
    if (dmat.row(i).maxCoeff() <= 0.0)
      throw std::runtime_error("solve_diagonal: retained POVM element is identically zero");
  }

  struct DiagRun {
    Eigen::VectorXd p;
    int iterations = 0;
    bool converged = false;
    double residual = 0.0;
    double loglik = 0.0;
    double monotone_violation = 0.0;
  };

  auto loglik_of = [&](const Eigen::VectorXd& p) {
    const Eigen::VectorXd pred = dmat * p;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (pred[i] <= 0.0) return -std::numeric_limits<double>::infinity();
      ll += f[i] * std::log(pred[i]);
    }
    return ll;
  };

  auto run_from = [&](Eigen::VectorXd p) {
    DiagRun run;
    double ll_prev = loglik_of(p);
    for (run.iterations = 0; run.iterations < cfg.max_iters; ++run.iterations) {
      const Eigen::VectorXd pred = (dmat * p).cwiseMax(1e-300);
      const Eigen::VectorXd s = dmat.transpose() * f.cwiseQuotient(pred).matrix();
      run.residual = p.cwiseProduct(s - Eigen::VectorXd::Ones(ps.dim)).norm();
      if (run.residual <= cfg.tol) {
        run.converged = true;
        break;
      }
      p = p.cwiseProduct(s);
      p /= p.sum();
      const double ll = loglik_of(p);
      run.monotone_violation = std::max(run.monotone_violation, ll_prev - ll);
      ll_prev = ll;
    }
    if (!run.converged) {
      const Eigen::VectorXd pred = (dmat * p).cwiseMax(1e-300);
      const Eigen::VectorXd s = dmat.transpose() * f.cwiseQuotient(pred).matrix();
      run.residual = p.cwiseProduct(s - Eigen::VectorXd::Ones(ps.dim)).norm();
      run.converged = run.residual <= cfg.tol;
    }
    run.p = p;
    run.loglik = ll_prev;
    return run;
  };

  std::vector<DiagRun> runs;
  runs.push_back(run_from(Eigen::VectorXd::Constant(ps.dim, 1.0 / ps.dim)));
  for (int k = 0; k < cfg.restarts; ++k) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(k) + 1));
    Eigen::VectorXd p(ps.dim);
    for (int n = 0; n < ps.dim; ++n) p[n] = -std::log(1.0 - rng.uniform());
    p /= p.sum();
    runs.push_back(run_from(p));
  }

  ReconstructionResult res;
  res.method = "diagonal";
  const DiagRun& main = runs.front();
  res.rho = DensityMatrix{Eigen::MatrixXcd(main.p.cast<Complex>().asDiagonal())};
  res.populations = main.p;
  res.iterations = main.iterations;
  res.converged = main.converged;
  res.extremal_residual = main.residual;
  res.log_likelihood_per_event = main.loglik;
  res.entropy_S = entropy(fd);
  res.rel_entropy_K = relative_entropy(res.rho.mat, ps, fd);
  res.min_iterate_eigenvalue = 0.0;
  for (const auto& r : runs)
    res.em_monotonicity_violation = std::max(res.em_monotonicity_violation, r.monotone_violation);
  for (std::size_t a = 0; a < runs.size(); ++a)
    for (std::size_t b = a + 1; b < runs.size(); ++b) {
      res.restart_spread = std::max(res.restart_spread, 0.5 * (runs[a].p - runs[b].p).lpNorm<1>());
      res.restart_likelihood_spread =
          std::max(res.restart_likelihood_spread, std::abs(runs[a].loglik - runs[b].loglik));
    }
  return res;
}

// Residuals of the matrix-element form of the extremal equations:
//   f_i rho_ij = rho_ii sum_k Cinv_ik rho_kj        (matrix equation)
//   sum_k Cinv_ik rho_ki = f_i                      (diagonal relation)
// with rho_ij = <y_i|rho|y_j>. Skipped with a note when the Gram matrix is
// too ill-conditioned for C^{-1} to mean anything.
struct ExtremalReport {
  double eq_matrix_max = 0.0;
  double eq_diagonal_max = 0.0;
  bool skipped = false;
  double condition_number = 0.0;
};

inline ExtremalReport extremal_residuals(const Eigen::MatrixXcd& rho, const ProjectorSet& ps,
                                         const FrequencyData& fd, const CorrelationMatrix& corr) {
  ExtremalReport rep;
  rep.condition_number = corr.condition_number;
  if (!corr.invertible) {
    rep.skipped = true;
    return rep;
  }
  const Eigen::MatrixXcd V = projector_matrix(ps);
  const Eigen::MatrixXcd rho_y = V.adjoint() * rho * V;  // <y_i|rho|y_j>
  const Eigen::MatrixXcd x = corr.entries.ldlt().solve(rho_y);
  const auto msize = rho_y.rows();
  for (Eigen::Index i = 0; i < msize; ++i) {
    const double fi = fd.frequencies[static_cast<std::size_t>(i)];
    const double pii = std::real(rho_y(i, i));
    for (Eigen::Index j = 0; j < msize; ++j)
      rep.eq_matrix_max =
          std::max(rep.eq_matrix_max, std::abs(fi * rho_y(i, j) - pii * x(i, j)));
    rep.eq_diagonal_max = std::max(rep.eq_diagonal_max, std::abs(x(i, i) - fi));
  }
  return rep;
}

}  // namespace qtomo
