#include <catch2/catch.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "qtomo/maxlik.hpp"
#include "qtomo/measurement.hpp"
#include "qtomo/rng.hpp"

using namespace qtomo;

namespace {

FrequencyData exact_freqs(const Eigen::VectorXd& p) {
  FrequencyData fd;
  fd.total = 1;
  fd.counts.assign(static_cast<std::size_t>(p.size()), 1);
  fd.frequencies.resize(static_cast<std::size_t>(p.size()));
  for (Eigen::Index i = 0; i < p.size(); ++i) fd.frequencies[static_cast<std::size_t>(i)] = p[i];
  return fd;
}

ProjectorSet basis_projectors(int dim) {
  ProjectorSet ps;
  ps.kind = ProjectorKind::SharpQuadrature;
  ps.dim = dim;
  for (int n = 0; n < dim; ++n) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(dim);
    v[n] = 1.0;
    ps.vectors.push_back(v);
    ps.labels.push_back(BinLabel{0, n});
  }
  return ps;
}

// Qubit measured in the three Pauli bases, scaled so the six projectors
// resolve the identity. Informationally complete.
ProjectorSet mub_projectors() {
  ProjectorSet ps;
  ps.kind = ProjectorKind::SharpQuadrature;
  ps.dim = 2;
  const double s = 1.0 / std::sqrt(3.0);
  const double q = s / std::sqrt(2.0);
  auto add = [&](Complex a, Complex b) {
    Eigen::VectorXcd v(2);
    v << a, b;
    ps.vectors.push_back(v);
    ps.labels.push_back(BinLabel{0, static_cast<int>(ps.vectors.size()) - 1});
  };
  add(q, q);
  add(q, -q);
  add(q, Complex(0, 1) * q);
  add(q, Complex(0, -1) * q);
  add(s, 0);
  add(0, s);
  return ps;
}

Eigen::MatrixXcd bloch_state(double x, double y, double z) {
  Eigen::MatrixXcd rho(2, 2);
  rho << Complex(1 + z, 0), Complex(x, -y), Complex(x, y), Complex(1 - z, 0);
  return rho / 2.0;
}

// Exhaustive likelihood search over a Bloch-ball grid; the oracle for the
// dim-2 solver checks.
double bloch_grid_best(const ProjectorSet& ps, const FrequencyData& fd, int steps) {
  double best = -std::numeric_limits<double>::infinity();
  for (int ix = 0; ix < steps; ++ix)
    for (int iy = 0; iy < steps; ++iy)
      for (int iz = 0; iz < steps; ++iz) {
        const double x = -1.0 + 2.0 * ix / (steps - 1);
        const double y = -1.0 + 2.0 * iy / (steps - 1);
        const double z = -1.0 + 2.0 * iz / (steps - 1);
        if (x * x + y * y + z * z > 1.0) continue;
        best = std::max(best, log_likelihood(bloch_state(x, y, z), ps, fd));
      }
  return best;
}

}  // namespace

TEST_CASE("log_likelihood and relative_entropy at a perfect fit") {
  const ProjectorSet ps = basis_projectors(2);
  Eigen::VectorXd f(2);
  f << 0.75, 0.25;
  const FrequencyData fd = exact_freqs(f);
  const Eigen::MatrixXcd rho = f.cast<Complex>().asDiagonal();

  const double s = entropy(fd);
  CHECK(s == Approx(-(0.75 * std::log(0.75) + 0.25 * std::log(0.25))).epsilon(1e-14));
  CHECK(log_likelihood(rho, ps, fd) == Approx(-s).epsilon(1e-14));
  CHECK(relative_entropy(rho, ps, fd) == Approx(0.0).margin(1e-14));
}

TEST_CASE("Gibbs bound and the K = -S - logL identity") {
  Rng rng(19);
  const ProjectorSet ps = basis_projectors(4);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd f(4);
    for (int i = 0; i < 4; ++i) f[i] = 0.05 + rng.uniform();
    f /= f.sum();
    const FrequencyData fd = exact_freqs(f);
    const DensityMatrix rho = random_density(4, rng);

    const double s = entropy(fd);
    const double ll = log_likelihood(rho.mat, ps, fd);
    const double k = relative_entropy(rho.mat, ps, fd);
    CHECK(ll <= -s + 1e-12);
    CHECK(k == Approx(-s - ll).margin(1e-12));
    CHECK(k >= -1e-12);
  }
}

TEST_CASE("log_likelihood sentinel for zero-probability observed events") {
  const ProjectorSet ps = basis_projectors(2);
  Eigen::VectorXd f(2);
  f << 0.5, 0.5;
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(2, 2);
  rho(0, 0) = 1.0;  // assigns zero probability to outcome 1
  CHECK(std::isinf(log_likelihood(rho, ps, exact_freqs(f))));
  CHECK(log_likelihood(rho, ps, exact_freqs(f)) < 0);
}

TEST_CASE("r_operator properties") {
  SECTION("single projector fixed point") {
    ProjectorSet ps;
    ps.kind = ProjectorKind::SharpQuadrature;
    ps.dim = 3;
    Eigen::VectorXcd y(3);
    y << Complex(0.6, 0.1), Complex(0.2, -0.3), Complex(0.5, 0.0);
    ps.vectors.push_back(y);
    ps.labels.push_back(BinLabel{0, 0});
    Eigen::VectorXd f(1);
    f << 1.0;
    const Eigen::MatrixXcd rho = y * y.adjoint() / y.squaredNorm();
    const Eigen::MatrixXcd r = r_operator(rho, ps, exact_freqs(f));
    CHECK((r * rho - rho).norm() < 1e-12);
  }
  SECTION("exact fit reduces R to the unweighted projector sum") {
    const ProjectorSet ps = mub_projectors();
    const Eigen::MatrixXcd rho = bloch_state(0.2, -0.1, 0.3);
    const FrequencyData fd = exact_freqs(born_probability(rho, ps));
    const Eigen::MatrixXcd r = r_operator(rho, ps, fd);
    CHECK((r - completeness_operator(ps)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("Tr(R rho) = sum f = 1 for any valid state") {
    Rng rng(3);
    const ProjectorSet ps = mub_projectors();
    for (int trial = 0; trial < 10; ++trial) {
      const DensityMatrix rho = random_density(2, rng);
      Eigen::VectorXd f(6);
      for (int i = 0; i < 6; ++i) f[i] = 0.01 + rng.uniform();
      f /= f.sum();
      const Eigen::MatrixXcd r = r_operator(rho.mat, ps, exact_freqs(f));
      CHECK(std::real((r * rho.mat).trace()) == Approx(1.0).margin(1e-12));
    }
  }
  SECTION("floor counter reports masked divisions") {
    const ProjectorSet ps = basis_projectors(2);
    Eigen::VectorXd f(2);
    f << 0.5, 0.5;
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(2, 2);
    rho(0, 0) = 1.0;
    long hits = 0;
    (void)r_operator(rho, ps, exact_freqs(f), &hits);
    CHECK(hits == 1);
  }
}

TEST_CASE("solve_mixed recovers the truth from exact informationally complete data") {
  const ProjectorSet ps = mub_projectors();
  const Eigen::MatrixXcd truth = bloch_state(0.3, 0.2, -0.4);
  const FrequencyData fd = exact_freqs(born_probability(truth, ps));

  SolverConfig cfg;
  cfg.tol = 1e-12;
  cfg.max_iters = 100000;
  const ReconstructionResult res = solve_mixed(ps, fd, cfg);

  CHECK(res.converged);
  CHECK(res.extremal_residual <= cfg.tol);
  CHECK(trace_distance(res.rho.mat, truth) < 1e-6);
  CHECK(res.rel_entropy_K < 1e-10);
  CHECK(res.max_hermiticity_violation <= 1e-12);
  CHECK(res.max_trace_error <= 1e-12);
  CHECK(res.min_iterate_eigenvalue >= -1e-10);
  CHECK(res.method == "mixed");
}

TEST_CASE("solve_mixed matches a Bloch-ball grid search on noisy data") {
  Rng rng(11);
  const ProjectorSet ps = mub_projectors();
  Eigen::VectorXd f(6);
  for (int i = 0; i < 6; ++i) f[i] = 0.02 + rng.uniform();
  f /= f.sum();
  const FrequencyData fd = exact_freqs(f);

  SolverConfig cfg;
  cfg.tol = 1e-11;
  cfg.max_iters = 200000;
  const ReconstructionResult res = solve_mixed(ps, fd, cfg);
  const double grid_best = bloch_grid_best(ps, fd, 60);
  CHECK(res.log_likelihood_per_event >= grid_best - 1e-5);
}

TEST_CASE("solve_pure") {
  SECTION("global phase is gauge: aligned amplitudes coincide") {
    Eigen::VectorXcd psi(3);
    psi << Complex(0.5, 0.2), Complex(-0.4, 0.6), Complex(0.1, -0.3);
    psi /= psi.norm();
    const Eigen::VectorXcd rotated = std::polar(1.0, 1.234) * psi;
    CHECK((align_global_phase(psi) - align_global_phase(rotated)).norm() < 1e-12);
  }
  SECTION("recovers a pure truth from exact data") {
    const ProjectorSet ps = mub_projectors();
    Eigen::VectorXcd truth(2);
    truth << Complex(0.8, 0.0), Complex(0.36, 0.48);
    truth /= truth.norm();
    const Eigen::MatrixXcd rho_t = truth * truth.adjoint();
    const FrequencyData fd = exact_freqs(born_probability(rho_t, ps));

    SolverConfig cfg;
    cfg.tol = 1e-12;
    cfg.max_iters = 100000;
    const ReconstructionResult res = solve_pure(ps, fd, cfg);
    CHECK(res.converged);
    CHECK(trace_distance(res.rho.mat, rho_t) < 1e-6);
    const Eigen::VectorXcd est = res.amplitudes;
    const Eigen::VectorXcd want = align_global_phase(truth);
    CHECK((est - want).norm() < 1e-6);
    CHECK(res.method == "pure");
  }
  SECTION("povm kind is rejected") {
    const BinGrid g = make_bin_grid({0.0}, -7.0, 7.0, 10);
    const ProjectorSet povm = build_random_phase_povm(g, FockDim(3));
    Eigen::VectorXd f = Eigen::VectorXd::Constant(10, 0.1);
    CHECK_THROWS_AS(solve_pure(povm, exact_freqs(f), SolverConfig{}), std::invalid_argument);
  }
}

TEST_CASE("solve_diagonal") {
  const BinGrid g = make_bin_grid({0.0}, -7.0, 7.0, 100);
  SECTION("vacuum data concentrates the populations on p_0") {
    const StateVector vac = fock_state(0, FockDim(12));
    const HomodyneRun run = simulate_random_phase(vac, g, 4000, 21);
    const ProjectorSet povm = build_random_phase_povm(g, FockDim(12));
    auto [rp, rf] = drop_empty_bins(povm, run.data);
    SolverConfig cfg;
    cfg.max_iters = 50000;
    const ReconstructionResult res = solve_diagonal(rp, rf, cfg);
    CHECK(res.populations[0] > 0.95);
    CHECK(res.em_monotonicity_violation <= 1e-12);
    CHECK(res.method == "diagonal");
  }
  SECTION("Fock |1> round trip makes p_1 dominant") {
    const StateVector one = fock_state(1, FockDim(12));
    const HomodyneRun run = simulate_random_phase(one, g, 6000, 22);
    const ProjectorSet povm = build_random_phase_povm(g, FockDim(12));
    auto [rp, rf] = drop_empty_bins(povm, run.data);
    SolverConfig cfg;
    cfg.max_iters = 50000;
    const ReconstructionResult res = solve_diagonal(rp, rf, cfg);
    CHECK(res.populations[1] > 0.6);
    CHECK(res.populations[1] == res.populations.maxCoeff());
    CHECK(res.em_monotonicity_violation <= 1e-12);
  }
  SECTION("sharp kind is rejected") {
    const ProjectorSet ps = basis_projectors(3);
    Eigen::VectorXd f = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
    CHECK_THROWS_AS(solve_diagonal(ps, exact_freqs(f), SolverConfig{}), std::invalid_argument);
  }
}

TEST_CASE("restart family on informationally incomplete data") {
  // Basis-ket projectors see only the diagonal; every PSD matrix with the
  // observed diagonal is an extremum, so restarts land on different states
  // with the same likelihood.
  const ProjectorSet ps = basis_projectors(3);
  Eigen::VectorXd f(3);
  f << 0.5, 0.3, 0.2;
  const FrequencyData fd = exact_freqs(f);

  SolverConfig cfg;
  cfg.tol = 1e-10;
  cfg.max_iters = 100000;
  cfg.restarts = 3;
  cfg.seed = 5;
  const ReconstructionResult res = solve_mixed(ps, fd, cfg);
  CHECK(res.converged);
  CHECK(res.restart_spread > 1e-3);
  CHECK(res.restart_likelihood_spread <= 10.0 * cfg.tol);
}

TEST_CASE("extremal_residuals") {
  SECTION("orthonormal complete projectors at the perfect fit give zero") {
    const ProjectorSet ps = basis_projectors(3);
    Eigen::VectorXd f(3);
    f << 0.5, 0.3, 0.2;
    const Eigen::MatrixXcd rho = f.cast<Complex>().asDiagonal();
    const ExtremalReport rep =
        extremal_residuals(rho, ps, exact_freqs(f), correlation_matrix(ps));
    CHECK_FALSE(rep.skipped);
    CHECK(rep.eq_matrix_max < 1e-14);
    CHECK(rep.eq_diagonal_max < 1e-14);
  }
  SECTION("converged solution on well-conditioned C satisfies both equations") {
    ProjectorSet ps;
    ps.kind = ProjectorKind::SharpQuadrature;
    ps.dim = 3;
    auto add = [&](Complex a, Complex b, Complex c) {
      Eigen::VectorXcd v(3);
      v << a, b, c;
      ps.vectors.push_back(v / v.norm());
      ps.labels.push_back(BinLabel{0, static_cast<int>(ps.vectors.size()) - 1});
    };
    add(1, 0.2, 0);
    add(Complex(0.1, 0.3), 1, 0.1);
    add(0, Complex(0.2, -0.1), 1);
    Eigen::VectorXd f(3);
    f << 0.4, 0.35, 0.25;
    const FrequencyData fd = exact_freqs(f);

    SolverConfig cfg;
    cfg.tol = 1e-11;
    cfg.max_iters = 200000;
    const ReconstructionResult res = solve_mixed(ps, fd, cfg);
    REQUIRE(res.converged);

    const CorrelationMatrix corr = correlation_matrix(ps);
    REQUIRE(corr.invertible);
    const ExtremalReport rep = extremal_residuals(res.rho.mat, ps, fd, corr);
    CHECK(rep.eq_matrix_max <= 10.0 * cfg.tol);
    CHECK(rep.eq_diagonal_max <= 10.0 * cfg.tol);
  }
  SECTION("random non-extremal states violate the equations at O(1)") {
    // Needs invertible C, so use linearly independent vectors (M <= dim).
    Rng rng(9);
    ProjectorSet ps;
    ps.kind = ProjectorKind::SharpQuadrature;
    ps.dim = 3;
    auto add = [&](Complex a, Complex b, Complex c) {
      Eigen::VectorXcd v(3);
      v << a, b, c;
      ps.vectors.push_back(v / v.norm());
      ps.labels.push_back(BinLabel{0, static_cast<int>(ps.vectors.size()) - 1});
    };
    add(1, 0.2, 0);
    add(Complex(0.1, 0.3), 1, 0.1);
    add(0, Complex(0.2, -0.1), 1);
    Eigen::VectorXd f(3);
    f << 0.5, 0.3, 0.2;
    const CorrelationMatrix corr = correlation_matrix(ps);
    REQUIRE(corr.invertible);
    const ExtremalReport rep =
        extremal_residuals(random_density(3, rng).mat, ps, exact_freqs(f), corr);
    CHECK_FALSE(rep.skipped);
    CHECK(rep.eq_diagonal_max > 1e-3);
  }
  SECTION("singular C is skipped with a note, not a crash") {
    ProjectorSet ps = basis_projectors(2);
    ps.vectors.push_back(ps.vectors[0]);
    ps.labels.push_back(BinLabel{0, 2});
    Eigen::VectorXd f = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
    const ExtremalReport rep = extremal_residuals(Eigen::MatrixXcd::Identity(2, 2) / 2.0, ps,
                                                  exact_freqs(f), correlation_matrix(ps));
    CHECK(rep.skipped);
  }
}

TEST_CASE("restart results are independent of the thread cap") {
  const ProjectorSet ps = mub_projectors();
  Rng rng(17);
  Eigen::VectorXd f(6);
  for (int i = 0; i < 6; ++i) f[i] = 0.02 + rng.uniform();
  f /= f.sum();
  const FrequencyData fd = exact_freqs(f);

  SolverConfig serial;
  serial.restarts = 3;
  serial.seed = 31;
  SolverConfig threaded = serial;
  threaded.max_threads = 4;

  const ReconstructionResult a = solve_mixed(ps, fd, serial);
  const ReconstructionResult b = solve_mixed(ps, fd, threaded);
  CHECK((a.rho.mat - b.rho.mat).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.restart_spread == b.restart_spread);
  CHECK(a.restart_likelihood_spread == b.restart_likelihood_spread);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("SolverConfig validation") {
  SolverConfig cfg;
  cfg.tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SolverConfig{};
  cfg.dilution = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SolverConfig{};
  cfg.max_iters = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
