// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any
// criterion fails. `mgba_acceptance A3 A4` runs a subset.

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <limits>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "harness.hpp"
#include "mgba/bal_io.hpp"
#include "mgba/metrics.hpp"
#include "mgba/multigrid.hpp"
#include "mgba/random.hpp"
#include "mgba/solver.hpp"
#include "oracles.hpp"

namespace mgba {
namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Accumulates failed checks and the worst observed values.
class Checker {
 public:
  void require(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    pass_ = pass_ && ok;
  }
  void note(const std::string& s) { notes_.push_back(s); }
  Outcome outcome() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < notes_.size(); ++i) os << (i ? "; " : "") << notes_[i];
    for (const auto& f : failures_) os << "; failed: " << f;
    return {pass_, os.str()};
  }

 private:
  bool pass_ = true;
  std::vector<std::string> notes_;
  std::vector<std::string> failures_;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

Vector random_vector(Rng& rng, Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SchurSystem make_system(const Evaluation& e, double mu) {
  auto pattern =
      std::make_shared<const SchurPattern>(e.num_cameras, e.num_points, std::span<const JacobianBlock>(e.blocks));
  return build_system(e, Damping::from_evaluation(e, mu), pattern);
}

void spd_probe(Checker& c, const std::string& name, const std::function<void(const Vector&, Vector&)>& m, Index n,
               std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  bool positive = true;
  for (int k = 0; k < 20; ++k) {
    const Vector r = random_vector(rng, n);
    const Vector q = random_vector(rng, n);
    Vector mr;
    Vector mq;
    m(r, mr);
    m(q, mq);
    worst = std::max(worst, std::abs(mr.dot(q) - r.dot(mq)) / (mr.norm() * q.norm()));
    positive = positive && mr.dot(r) > 0.0;
  }
  c.require(worst <= 1e-10, name + " symmetry " + sci(worst));
  c.require(positive, name + " positivity");
  c.note(name + " asym " + sci(worst));
}

// Dense JᵀJ+D, its Schur complement and the full LM step against the block
// pipeline on small random problems.
Outcome a1_oracle_equivalence() {
  Checker c;
  const auto t0 = std::chrono::steady_clock::now();
  double worst_s = 0.0;
  double worst_step = 0.0;
  double worst_rhs = 0.0;
  for (std::uint64_t s = 0; s < 25; ++s) {
    Rng rng(900 + s);
    const Index nc = 2 + static_cast<Index>((rng.next() % 7));
    const Index np = 10 + static_cast<Index>((rng.next() % 21));
    const BundleProblem p = testing::random_problem(1000 + s, nc, np, 1.0, s % 2 ? LossKind::huber : LossKind::trivial);
    const Evaluation e = evaluate(p);
    const double mu = std::pow(10.0, rng.uniform(-2.0, 4.0));
    const auto dense = testing::dense_normal_equations(e, mu);
    const Index ncd = kCameraSize * nc;
    const DenseMatrix s_dense = testing::dense_schur(dense.H, ncd);
    const Vector step_dense = dense.H.llt().solve(dense.g);

    SchurSystem sys = make_system(e, mu);
    ensure_explicit(sys);
    const DenseMatrix s_block = sys.S_explicit->to_dense();
    worst_s = std::max(worst_s, testing::relative_error(s_block, s_dense));

    const DenseMatrix hpp = dense.H.bottomRightCorner(dense.H.rows() - ncd, dense.H.cols() - ncd);
    const Vector rhs = dense.g.head(ncd) -
                       dense.H.topRightCorner(ncd, dense.H.cols() - ncd) * hpp.llt().solve(dense.g.tail(hpp.rows()));
    worst_rhs = std::max(worst_rhs, (sys.rhs_cam - rhs).norm() / rhs.norm());

    CgOptions opts;
    // Forcing compares squared error norms: 1e-24 is an error tolerance of 1e-12.
    opts.tau = 1e-24;
    opts.residual_tolerance = 1e-12;
    const auto pbj = PointBlockJacobi::from_system(sys);
    const Vector dc = pcg([&](const Vector& x, Vector& y) { schur_apply(sys, x, y); },
                          [&](const Vector& r, Vector& z) { pbj.apply(r, z); }, sys.rhs_cam, opts);
    Vector step(dense.H.rows());
    step << dc, back_substitute(sys, dc);
    worst_step = std::max(worst_step, (step - step_dense).norm() / step_dense.norm());
  }
  const double t = seconds_since(t0);
  c.require(worst_s <= 1e-8, "Schur complement " + sci(worst_s));
  c.require(worst_rhs <= 1e-8, "reduced gradient " + sci(worst_rhs));
  c.require(worst_step <= 1e-8, "LM step " + sci(worst_step));
  c.require(t < 10.0, "runtime " + sci(t) + " s");
  c.note("25 problems, S rel " + sci(worst_s) + ", rhs rel " + sci(worst_rhs) + ", step rel " + sci(worst_step) +
         ", " + sci(t) + " s");
  return c.outcome();
}

Outcome a2_gauge_invariance() {
  Checker c;
  double worst_fd = 0.0;
  double worst_pk = 0.0;
  Index levels = 0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const BundleProblem p = make_dataset(testing::small_city_spec(2, 2, 40 + s, 400)).noisy;
    const Vector x = p.parameters();
    const DenseTall kc = gauge_nullspace(p);
    const DenseTall kp = gauge_point_motion(p);
    const double h = 1e-5;
    // Reference scale: derivative along a random unit-length direction.
    Rng rng(70 + s);
    Vector w = random_vector(rng, x.size());
    for (int mode = 0; mode < kGaugeModes; ++mode) {
      Vector d(x.size());
      d << kc.col(mode), kp.col(mode);
      w *= d.norm() / w.norm();
      const Vector df =
          (testing::reference_residuals(p, x + h * d) - testing::reference_residuals(p, x - h * d)) / (2.0 * h);
      const Vector dw =
          (testing::reference_residuals(p, x + h * w) - testing::reference_residuals(p, x - h * w)) / (2.0 * h);
      worst_fd = std::max(worst_fd, df.norm() / dw.norm());
    }

    const Evaluation e = evaluate(p);
    SchurSystem sys = make_system(e, 1e4);
    ensure_explicit(sys);
    const MgHierarchy mg(sys, kc);
    levels = std::max(levels, mg.num_levels());
    for (Index l = 0; l + 1 < mg.num_levels(); ++l) {
      const DenseMatrix pk = mg.level(l).P.to_dense() * mg.level(l + 1).K;
      worst_pk = std::max(worst_pk, testing::relative_error(pk, mg.level(l).K));
    }
  }
  c.require(worst_fd <= 1e-6, "residual derivative along gauge " + sci(worst_fd));
  c.require(worst_pk <= 1e-12, "P K_coarse vs K " + sci(worst_pk));
  c.require(levels >= 2, "hierarchy has a coarse level");
  c.note("5 problems, gauge derivative rel " + sci(worst_fd) + ", P K_c rel " + sci(worst_pk) + ", up to " +
         std::to_string(levels) + " levels");
  return c.outcome();
}

Outcome a3_preconditioner_validity() {
  Checker c;
  const BundleProblem p = make_dataset(testing::small_city_spec(2, 2, 50, 400)).noisy;
  const Evaluation e = evaluate(p);
  SchurSystem sys = make_system(e, 1e4);
  const auto pbj_implicit = PointBlockJacobi::from_system(sys);
  ensure_explicit(sys);
  const auto pbj = PointBlockJacobi::from_system(sys);
  double worst = 0.0;
  for (Index i = 0; i < sys.num_cameras(); ++i) {
    const DenseMatrix ref = sys.S_explicit->block(*sys.S_explicit->find(i, i));
    worst = std::max(worst, testing::relative_error(DenseMatrix(pbj.diagonal().block(i)), ref));
    worst = std::max(worst, testing::relative_error(DenseMatrix(pbj_implicit.diagonal().block(i)), ref));
  }
  c.require(worst <= 1e-12, "point block Jacobi diagonal " + sci(worst));
  c.note("pbj diag rel " + sci(worst));

  const Index n = kCameraSize * sys.num_cameras();
  const MgHierarchy mg(sys, gauge_nullspace(p));
  const VisibilityJacobi vis(sys, visibility_cluster(visibility_strength(*sys.pattern)));
  spd_probe(c, "mgcycle", [&](const Vector& r, Vector& z) { mg.apply(r, z); }, n, 1);
  spd_probe(c, "pbj", [&](const Vector& r, Vector& z) { pbj.apply(r, z); }, n, 2);
  spd_probe(c, "visibility", [&](const Vector& r, Vector& z) { vis.apply(r, z); }, n, 3);
  return c.outcome();
}

Outcome a4_smoother_lanczos() {
  Checker c;
  double min_ratio = std::numeric_limits<double>::infinity();
  double max_ratio = 0.0;
  double worst_excess = 0.0;
  double worst_mismatch = 0.0;
  Index modes = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Index nb = 4 + static_cast<Index>(s % 4);
    const Index n = 9 * nb;
    const DenseMatrix a = testing::random_spd(300 + s, n, 1e-2, 1e2);
    BlockDiagMatrix d(9, nb);
    for (Index i = 0; i < nb; ++i) d.block(i) = a.block(9 * i, 9 * i, 9, 9);
    const DenseMatrix dd = d.to_dense();
    const PointBlockJacobi jac(d);
    const LinearOperator op = [&a](const Vector& x, Vector& y) { y = a * x; };

    Eigen::GeneralizedSelfAdjointEigenSolver<DenseMatrix> eig(a, dd);
    const double exact = eig.eigenvalues().maxCoeff();
    const double est = estimate_lambda_max(op, jac);
    min_ratio = std::min(min_ratio, est / exact);
    max_ratio = std::max(max_ratio, est / exact);

    const ChebyshevSmoother sm(jac, est);
    const double theta = 0.5 * (sm.upper() + sm.lower());
    const double delta = 0.5 * (sm.upper() - sm.lower());
    const double sigma = theta / delta;
    const auto t2 = [](double z) { return 2.0 * z * z - 1.0; };
    const double bound = 1.0 / t2(sigma);
    for (Index k = 0; k < n; ++k) {
      const double lambda = eig.eigenvalues()(k);
      if (lambda < sm.lower() || lambda > sm.upper()) continue;
      const Vector v = eig.eigenvectors().col(k);
      Vector x = Vector::Zero(n);
      sm.smooth(op, x, a * v, true);
      const Vector err = x - v;
      const double damping = std::sqrt(err.dot(dd * err) / v.dot(dd * v));
      const double analytic = std::abs(t2((theta - lambda) / delta)) * bound;
      worst_excess = std::max(worst_excess, damping / bound);
      worst_mismatch = std::max(worst_mismatch, std::abs(damping - analytic) / bound);
      ++modes;
    }
  }
  c.require(min_ratio >= 0.8 && max_ratio <= 1.0 + 1e-12,
            "lambda ratio range [" + sci(min_ratio) + ", " + sci(max_ratio) + "]");
  c.require(worst_excess <= 1.05, "in-band damping over bound " + sci(worst_excess));
  c.require(worst_mismatch <= 0.05, "damping vs polynomial " + sci(worst_mismatch));
  c.require(modes > 0, "in-band modes exist");
  c.note("lambda_est/lambda in [" + sci(min_ratio) + ", " + sci(max_ratio) + "], " + std::to_string(modes) +
         " in-band modes, damping/bound max " + sci(worst_excess));
  return c.outcome();
}

// Benchmark sweep shared by A5, A6 and A7.
const tools::BenchResult& scaling_sweep() {
  static const tools::BenchResult result = [] {
    tools::BenchSpec spec;
    spec.grid_sizes = {2, 3, 4, 5, 6};
    spec.preconditioners = {PreconditionerKind::point_block_jacobi, PreconditionerKind::multigrid};
    spec.taus = {0.01};
    spec.losses = {LossKind::huber};
    spec.seed = 1;
    // Long-range noise only.
    spec.synthetic.noise.drift_rate = 0.0;
    spec.synthetic.noise.rotation_sigma = 0.0;
    spec.synthetic.noise.sin_amplitude = 1.0;
    return tools::run_bench(spec, "", &std::cerr);
  }();
  return result;
}

Outcome a5_scaling_trend() {
  Checker c;
  const auto& r = scaling_sweep();
  std::vector<double> cams[2];
  std::vector<double> cg[2];
  std::ostringstream table;
  for (const auto& s : r.summary) {
    const int k = s.preconditioner == "multigrid" ? 1 : 0;
    cams[k].push_back(static_cast<double>(s.n_cameras));
    cg[k].push_back(s.cg_per_iteration);
    table << " " << s.preconditioner << "@" << s.n_cameras << "=" << sci(s.cg_per_iteration);
  }
  for (const auto& n : r.notes) c.note(n);
  c.require(cams[0].size() == 5 && cams[1].size() == 5, "five sizes per preconditioner");
  if (cams[0].size() < 2 || cams[1].size() < 2) return c.outcome();
  const double pbj_slope = log_log_slope(cams[0], cg[0]);
  const double mg_slope = log_log_slope(cams[1], cg[1]);
  c.require(mg_slope <= pbj_slope - 0.25, "multigrid slope " + sci(mg_slope) + " not 0.25 below pbj " + sci(pbj_slope));
  c.require(mg_slope <= 0.3, "multigrid slope " + sci(mg_slope) + " above 0.3");
  c.note("slopes pbj " + sci(pbj_slope) + ", multigrid " + sci(mg_slope) + ";" + table.str());
  return c.outcome();
}

Outcome a6_convergence_quality() {
  Checker c;
  const auto& r = scaling_sweep();
  std::vector<RunMetrics> group;
  for (const auto& run : r.runs) {
    if (run.header.problem == "city4x4-huber-r0") group.push_back(run);
  }
  c.require(group.size() == 2, "4x4 group present");
  if (group.size() != 2) return c.outcome();
  const auto aligned = truncate_to_common_objective(group);
  Index iters[2] = {0, 0};
  for (const auto& run : aligned) {
    iters[run.header.preconditioner == "multigrid" ? 1 : 0] = summarize(run).nonlinear_iterations;
  }
  c.require(iters[1] <= iters[0], "multigrid needs " + std::to_string(iters[1]) + " > pbj " + std::to_string(iters[0]));
  c.note("common objective " + sci(aligned[0].final_objective) + ": multigrid " + std::to_string(iters[1]) +
         " iterations, pbj " + std::to_string(iters[0]));
  return c.outcome();
}

Outcome a7_protocol_fidelity() {
  Checker c;
  c.require(huber(0.25) == 0.25, "huber(0.25) = " + sci(huber(0.25)));
  c.require(huber(4.0) == 3.0, "huber(4) = " + sci(huber(4.0)));

  const auto& r = scaling_sweep();
  bool capped = true;
  bool radius0 = true;
  bool tau_const = true;
  for (const auto& run : r.runs) {
    capped = capped && run.records.size() <= 101;
    radius0 = radius0 && !run.records.empty() && run.records[0].trust_radius == 1e4;
    tau_const = tau_const && run.header.tau == 0.01;
  }
  c.require(capped, "at most 100 nonlinear iterations");
  c.require(radius0, "initial radius 1e4");
  c.require(tau_const, "constant tau 0.01");

  // Logged PCG trace on a bundle Schur system at the benchmark tolerance.
  const BundleProblem p = make_dataset(testing::small_city_spec(2, 2, 60, 400)).noisy;
  const Evaluation e = evaluate(p);
  const SchurSystem sys = make_system(e, 1e4);
  const auto pbj = PointBlockJacobi::from_system(sys);
  CgOptions opts;
  opts.tau = 0.01;
  CgReport rep;
  pcg([&](const Vector& x, Vector& y) { schur_apply(sys, x, y); }, [&](const Vector& z, Vector& y) { pbj.apply(z, y); },
      sys.rhs_cam, opts, &rep);
  const auto ratio = [&](std::size_t i) {
    const auto& q = rep.q_history;
    return static_cast<double>(i) * (q[i] - q[i - 1]) / q[i];
  };
  const auto stop = static_cast<std::size_t>(rep.iterations);
  c.require(rep.stop_reason == CgStop::forcing, "trace stopped by " + std::string(to_string(rep.stop_reason)));
  c.require(stop >= 1 && ratio(stop) <= 0.01, "stopping ratio " + sci(stop >= 1 ? ratio(stop) : 0.0));
  bool earlier_above = true;
  for (std::size_t i = 1; i < stop; ++i) earlier_above = earlier_above && ratio(i) > 0.01;
  c.require(earlier_above, "forcing rule would have fired earlier");
  c.note(std::to_string(r.runs.size()) + " runs checked; CG trace stops at i=" + std::to_string(stop) +
         " with i(Q_i-Q_{i-1})/Q_i=" + sci(stop >= 1 ? ratio(stop) : 0.0));
  return c.outcome();
}

Outcome a8_determinism_io() {
  Checker c;
  const auto dir = std::filesystem::temp_directory_path() / "mgba_acceptance_a8";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "city.bal").string();

  SyntheticSpec spec = tools::with_seed(tools::default_synthetic_spec(), 77);
  spec.city.n_blocks_x = 2;
  spec.city.n_blocks_y = 2;
  spec.n_points = 1500;

  tools::SolveSettings settings;
  settings.preconditioner = PreconditionerKind::multigrid;
  settings.lm.max_iterations = 20;
  std::vector<RunMetrics> runs;
  std::vector<std::string> files;
  for (int k = 0; k < 2; ++k) {
    const SyntheticDataset ds = make_dataset(spec);
    write_bal(path, ds.noisy);
    std::ifstream in(path);
    files.emplace_back(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    BundleProblem p = read_bal(path);
    p.loss = LossKind::huber;
    runs.push_back(tools::solve_and_record(p, "city", settings, 77));
  }
  c.require(files[0] == files[1], "generated files differ");
  c.require(same_except_timing(runs[0], runs[1]), "metrics differ between runs");

  std::istringstream in(files[0]);
  const BundleProblem back = read_bal(in);
  std::ostringstream rewritten;
  write_bal(rewritten, back);
  c.require(rewritten.str() == files[0], "BAL rewrite differs");
  const SyntheticDataset ds = make_dataset(spec);
  c.require(back.parameters() == ds.noisy.parameters(), "BAL read parameters differ");
  std::filesystem::remove_all(dir);
  c.note(std::to_string(runs[0].records.size()) + " records identical, final objective " +
         sci(runs[0].final_objective) + ", BAL " + std::to_string(files[0].size()) + " bytes round-tripped");
  return c.outcome();
}

}  // namespace
}  // namespace mgba

int main(int argc, char** argv) {
  using namespace mgba;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"A1", a1_oracle_equivalence}, {"A2", a2_gauge_invariance},    {"A3", a3_preconditioner_validity},
      {"A4", a4_smoother_lanczos},   {"A5", a5_scaling_trend},       {"A6", a6_convergence_quality},
      {"A7", a7_protocol_fidelity},  {"A8", a8_determinism_io},
  };
  std::set<std::string> selected(argv + 1, argv + argc);
  bool all = true;
  for (const auto& [name, fn] : criteria) {
    if (!selected.empty() && selected.count(name) == 0) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << name << " " << (o.pass ? "PASS" : "FAIL") << " (" << sci(seconds_since(t0)) << " s) " << o.detail
              << std::endl;
  }
  return all ? 0 : 1;
}
