// Copyright 2026 The mgba Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MGBA_SOLVER_HPP
#define MGBA_SOLVER_HPP

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mgba/blockmat.hpp"
#include "mgba/multigrid.hpp"
#include "mgba/operator.hpp"
#include "mgba/precond.hpp"
#include "mgba/problem.hpp"
#include "mgba/schur.hpp"

namespace mgba {

enum class CgStop { forcing, residual_tolerance, max_iterations };

std::string_view to_string(CgStop stop);

struct CgOptions {
  /// Forcing tolerance on the quadratic-model decrease.
  double tau = 1e-2;
  double residual_tolerance = 1e-12;
  Index max_iterations = 500;
};

struct CgReport {
  Index iterations = 0;
  double final_relative_residual = 0.0;
  CgStop stop_reason = CgStop::residual_tolerance;
  /// Q_i = x_i^T A x_i / 2 - x_i^T b, starting with Q_0 = 0.
  std::vector<double> q_history;
};

// Preconditioned conjugate gradients from x = 0. Stops when
// i (Q_i - Q_{i-1}) / Q_i <= tau, when the relative residual reaches
// residual_tolerance, or at max_iterations. Throws NotPositiveDefiniteError
// when <r, M r> <= 0 or p^T A p <= 0, DivergenceError on NaN.
Vector pcg(const LinearOperator& a, const LinearOperator& m, const Vector& b, const CgOptions& options,
           CgReport* report = nullptr);

struct LinearSolveStats {
  Index cg_iterations = 0;
  double setup_seconds = 0.0;
  double solve_seconds = 0.0;
  CgStop stop_reason = CgStop::residual_tolerance;
  double relative_residual = 0.0;
};

// Nonlinear least-squares objective sum rho(|f_i|^2) as the LM loop sees it.
class LeastSquaresModel {
 public:
  virtual ~LeastSquaresModel() = default;

  virtual Vector parameters() const = 0;
  virtual void set_parameters(const Vector& x) = 0;
  /// Linearizes at the current parameters and returns the objective.
  virtual double linearize() = 0;
  /// g = -J^T f at the last linearization.
  virtual const Vector& gradient() const = 0;
  /// Objective at x, leaving the current parameters untouched. May throw
  /// BehindCameraError.
  virtual double objective_at(const Vector& x) = 0;
  /// Solves (J^T J + D) delta = g with D from the radius.
  virtual Vector solve_step(double radius, LinearSolveStats* stats) = 0;
  /// delta^T (J^T J + D) delta at the last linearization and solve.
  virtual double step_energy(const Vector& delta) const = 0;
};

struct LmOptions {
  Index max_iterations = 100;
  double initial_radius = 1e4;
  double max_radius = 1e16;
  double min_radius = 1e-32;
  double min_relative_decrease = 1e-3;
  double function_tolerance = 1e-6;
  double gradient_tolerance = 1e-10;
  double parameter_tolerance = 1e-8;
};

enum class Termination {
  function_tolerance,
  gradient_tolerance,
  parameter_tolerance,
  max_iterations,
  radius_underflow,
  failure,
};

std::string_view to_string(Termination t);

struct IterationRecord {
  Index iteration = 0;
  double objective = 0.0;
  Index cg_iterations = 0;
  double step_norm = 0.0;
  double trust_radius = 0.0;
  bool accepted = true;
  double linear_setup_seconds = 0.0;
  double linear_solve_seconds = 0.0;
};

struct NonlinearReport {
  std::vector<IterationRecord> iterations;
  Termination termination = Termination::max_iterations;
  std::string message;
  double initial_objective = 0.0;
  double final_objective = 0.0;
};

// Levenberg-Marquardt with trust-radius control. Record 0 holds the initial
// objective; each later record is one trial step, accepted when the ratio of
// actual to model decrease exceeds min_relative_decrease.
NonlinearReport lm_solve(LeastSquaresModel& model, const LmOptions& options = {});

struct LinearSolverOptions {
  PreconditionerKind preconditioner = PreconditionerKind::multigrid;
  CgOptions cg;
  Index visibility_cluster_size = 100;
  MgOptions multigrid;
};

// Bundle problem adapter: Schur reduction, the chosen preconditioner and
// PCG for every step.
class BundleModel : public LeastSquaresModel {
 public:
  BundleModel(BundleProblem& problem, LinearSolverOptions options);

  Vector parameters() const override;
  void set_parameters(const Vector& x) override;
  double linearize() override;
  const Vector& gradient() const override { return gradient_; }
  double objective_at(const Vector& x) override;
  Vector solve_step(double radius, LinearSolveStats* stats) override;
  double step_energy(const Vector& delta) const override;

  const SchurPattern& pattern() const { return *pattern_; }
  /// Hierarchy statistics from the last multigrid setup.
  const std::vector<MgLevelStats>& last_hierarchy() const { return last_hierarchy_; }

 private:
  BundleProblem& problem_;
  LinearSolverOptions options_;
  std::shared_ptr<const SchurPattern> pattern_;
  std::optional<Aggregation> clusters_;
  Evaluation eval_;
  Vector gradient_;
  Vector last_damping_;
  std::vector<MgLevelStats> last_hierarchy_;
};

NonlinearReport solve_bundle(BundleProblem& problem, const LinearSolverOptions& linear,
                             const LmOptions& lm = {});

}  // namespace mgba

#endif  // MGBA_SOLVER_HPP
