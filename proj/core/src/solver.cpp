// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#include "mgba/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "mgba/error.hpp"

namespace mgba {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

std::string_view to_string(CgStop stop) {
  switch (stop) {
    case CgStop::forcing:
      return "forcing";
    case CgStop::residual_tolerance:
      return "residual_tolerance";
    case CgStop::max_iterations:
      return "max_iterations";
  }
  return "unknown";
}

Vector pcg(const LinearOperator& a, const LinearOperator& m, const Vector& b, const CgOptions& options,
           CgReport* report) {
  if (!(options.tau > 0.0)) throw ContractError("pcg: tau must be positive");
  CgReport local;
  CgReport& rep = report != nullptr ? *report : local;
  rep = CgReport{};
  rep.q_history.push_back(0.0);

  Vector x = Vector::Zero(b.size());
  const double b_norm = b.norm();
  if (!std::isfinite(b_norm)) throw DivergenceError("pcg: right-hand side is not finite");
  if (b_norm == 0.0) return x;

  Vector r = b;
  Vector z;
  m(r, z);
  double rz = r.dot(z);
  if (std::isnan(rz)) throw DivergenceError("pcg: NaN in preconditioned residual");
  if (!(rz > 0.0)) throw NotPositiveDefiniteError("pcg: preconditioner gave <r, M r> <= 0");
  Vector p = z;
  Vector ap;
  double q_prev = 0.0;
  for (Index i = 1;; ++i) {
    a(p, ap);
    const double pap = p.dot(ap);
    if (std::isnan(pap)) throw DivergenceError("pcg: NaN in operator product");
    if (!(pap > 0.0)) throw NotPositiveDefiniteError("pcg: operator gave p^T A p <= 0");
    const double alpha = rz / pap;
    x += alpha * p;
    r -= alpha * ap;
    const double q = -0.5 * x.dot(b + r);
    const double rel = r.norm() / b_norm;
    if (std::isnan(q) || std::isnan(rel)) throw DivergenceError("pcg: NaN in iterate");
    rep.q_history.push_back(q);
    rep.iterations = i;
    rep.final_relative_residual = rel;
    if (rel <= options.residual_tolerance) {
      rep.stop_reason = CgStop::residual_tolerance;
      break;
    }
    if (q < 0.0 && static_cast<double>(i) * (q - q_prev) / q <= options.tau) {
      rep.stop_reason = CgStop::forcing;
      break;
    }
    if (i >= options.max_iterations) {
      rep.stop_reason = CgStop::max_iterations;
      break;
    }
    m(r, z);
    const double rz_next = r.dot(z);
    if (std::isnan(rz_next)) throw DivergenceError("pcg: NaN in preconditioned residual");
    if (!(rz_next > 0.0)) throw NotPositiveDefiniteError("pcg: preconditioner gave <r, M r> <= 0");
    p = z + (rz_next / rz) * p;
    rz = rz_next;
    q_prev = q;
  }
  return x;
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::function_tolerance:
      return "function_tolerance";
    case Termination::gradient_tolerance:
      return "gradient_tolerance";
    case Termination::parameter_tolerance:
      return "parameter_tolerance";
    case Termination::max_iterations:
      return "max_iterations";
    case Termination::radius_underflow:
      return "radius_underflow";
    case Termination::failure:
      return "failure";
  }
  return "unknown";
}

NonlinearReport lm_solve(LeastSquaresModel& model, const LmOptions& options) {
  NonlinearReport report;
  Vector x = model.parameters();
  double cost = model.linearize();
  double radius = options.initial_radius;
  report.initial_objective = cost;
  report.iterations.push_back({0, cost, 0, 0.0, radius, true, 0.0, 0.0});

  for (Index iter = 1;; ++iter) {
    if (iter > options.max_iterations) {
      report.termination = Termination::max_iterations;
      break;
    }
    const Vector& g = model.gradient();
    if (g.size() == 0 || g.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      report.termination = Termination::gradient_tolerance;
      break;
    }

    IterationRecord rec;
    rec.iteration = iter;
    rec.trust_radius = radius;
    LinearSolveStats stats;
    Vector delta;
    bool solved = true;
    try {
      delta = model.solve_step(radius, &stats);
    } catch (const IndefiniteBlockError&) {
      solved = false;
    } catch (const NotPositiveDefiniteError&) {
      solved = false;
    } catch (const Error& e) {
      report.termination = Termination::failure;
      report.message = e.what();
      break;
    }
    if (!solved) {
      // Too little damping for the linear solver: retry with a smaller radius.
      radius /= 2.0;
      rec.accepted = false;
      rec.objective = cost;
      report.iterations.push_back(rec);
      if (radius < options.min_radius) {
        report.termination = Termination::radius_underflow;
        break;
      }
      continue;
    }
    rec.cg_iterations = stats.cg_iterations;
    rec.linear_setup_seconds = stats.setup_seconds;
    rec.linear_solve_seconds = stats.solve_seconds;
    rec.step_norm = delta.norm();

    if (rec.step_norm < options.parameter_tolerance * (x.norm() + options.parameter_tolerance)) {
      rec.accepted = false;
      rec.objective = cost;
      report.iterations.push_back(rec);
      report.termination = Termination::parameter_tolerance;
      break;
    }

    const Vector trial = x + delta;
    double new_cost = std::numeric_limits<double>::infinity();
    bool evaluated = true;
    try {
      new_cost = model.objective_at(trial);
    } catch (const BehindCameraError&) {
      evaluated = false;
    }
    const double model_decrease = 2.0 * g.dot(delta) - model.step_energy(delta);
    const double rho = evaluated && model_decrease > 0.0 && std::isfinite(new_cost)
                           ? (cost - new_cost) / model_decrease
                           : -std::numeric_limits<double>::infinity();

    if (rho > options.min_relative_decrease) {
      x = trial;
      model.set_parameters(x);
      x = model.parameters();
      const double relative_decrease = (cost - new_cost) / cost;
      cost = model.linearize();
      const double shrink = std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
      radius = std::min(radius / shrink, options.max_radius);
      rec.accepted = true;
      rec.objective = cost;
      report.iterations.push_back(rec);
      if (relative_decrease < options.function_tolerance) {
        report.termination = Termination::function_tolerance;
        break;
      }
    } else {
      radius /= 2.0;
      rec.accepted = false;
      rec.objective = cost;
      report.iterations.push_back(rec);
      if (radius < options.min_radius) {
        report.termination = Termination::radius_underflow;
        break;
      }
    }
  }
  report.final_objective = cost;
  return report;
}

BundleModel::BundleModel(BundleProblem& problem, LinearSolverOptions options)
    : problem_(problem), options_(std::move(options)) {
  problem_.validate();
  pattern_ = std::make_shared<const SchurPattern>(problem_.num_cameras(), problem_.num_points(),
                                                  std::span<const Observation>(problem_.observations));
}

Vector BundleModel::parameters() const { return problem_.parameters(); }

void BundleModel::set_parameters(const Vector& x) { problem_.set_parameters(x); }

double BundleModel::linearize() {
  eval_ = evaluate(problem_);
  gradient_ = Vector::Zero(problem_.num_parameters());
  const Index off = kCameraSize * problem_.num_cameras();
  for (const auto& jb : eval_.blocks) {
    gradient_.segment<kCameraSize>(kCameraSize * jb.camera).noalias() -= jb.F.transpose() * jb.residual;
    gradient_.segment<kPointSize>(off + kPointSize * jb.point).noalias() -= jb.E.transpose() * jb.residual;
  }
  return eval_.objective;
}

double BundleModel::objective_at(const Vector& x) {
  const Vector saved = problem_.parameters();
  problem_.set_parameters(x);
  double value = 0.0;
  try {
    value = evaluate_objective(problem_);
  } catch (...) {
    problem_.set_parameters(saved);
    throw;
  }
  problem_.set_parameters(saved);
  return value;
}

Vector BundleModel::solve_step(double radius, LinearSolveStats* stats) {
  const auto setup_start = Clock::now();
  const Damping damping = Damping::from_evaluation(eval_, radius);
  last_damping_ = damping.diagonal;
  SchurSystem sys = build_system(eval_, damping, pattern_);

  std::unique_ptr<Preconditioner> precond;
  switch (options_.preconditioner) {
    case PreconditionerKind::point_block_jacobi:
      if (sys.mode == ProductMode::explicit_schur) ensure_explicit(sys);
      precond = std::make_unique<PointBlockJacobi>(PointBlockJacobi::from_system(sys));
      break;
    case PreconditionerKind::visibility:
      if (sys.mode == ProductMode::explicit_schur) ensure_explicit(sys);
      if (!clusters_) {
        clusters_ = visibility_cluster(visibility_strength(*pattern_), options_.visibility_cluster_size);
      }
      precond = std::make_unique<VisibilityJacobi>(sys, *clusters_);
      break;
    case PreconditionerKind::multigrid: {
      ensure_explicit(sys);
      auto mg = std::make_unique<MgHierarchy>(sys, gauge_nullspace(problem_), options_.multigrid);
      last_hierarchy_ = mg->stats();
      precond = std::move(mg);
      break;
    }
  }
  const double setup_seconds = seconds_since(setup_start);

  const auto solve_start = Clock::now();
  const LinearOperator a = [&sys](const Vector& x, Vector& y) { schur_apply(sys, x, y); };
  const LinearOperator m = [&precond](const Vector& r, Vector& z) { precond->apply(r, z); };
  CgReport cg;
  const Vector delta_cam = pcg(a, m, sys.rhs_cam, options_.cg, &cg);
  const Vector delta_pt = back_substitute(sys, delta_cam);
  const double solve_seconds = seconds_since(solve_start);

  if (stats != nullptr) {
    stats->cg_iterations = cg.iterations;
    stats->setup_seconds = setup_seconds;
    stats->solve_seconds = solve_seconds;
    stats->stop_reason = cg.stop_reason;
    stats->relative_residual = cg.final_relative_residual;
  }
  Vector delta(problem_.num_parameters());
  delta << delta_cam, delta_pt;
  return delta;
}

double BundleModel::step_energy(const Vector& delta) const {
  const Index off = kCameraSize * problem_.num_cameras();
  double energy = 0.0;
  for (const auto& jb : eval_.blocks) {
    const Eigen::Vector2d jd = jb.F * delta.segment<kCameraSize>(kCameraSize * jb.camera) +
                               jb.E * delta.segment<kPointSize>(off + kPointSize * jb.point);
    energy += jd.squaredNorm();
  }
  if (last_damping_.size() == delta.size()) energy += delta.dot(last_damping_.cwiseProduct(delta));
  return energy;
}

NonlinearReport solve_bundle(BundleProblem& problem, const LinearSolverOptions& linear, const LmOptions& lm) {
  BundleModel model(problem, linear);
  return lm_solve(model, lm);
}

}  // namespace mgba
