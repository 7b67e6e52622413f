#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace radcam {

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

struct LmOptions {
  double lambda_init = 1e-3;
  double lambda_up = 10.0;
  double lambda_down = 10.0;  // divisor on accepted steps
  int max_iters = 100;
  double cost_tol = 1e-10;      // relative cost change
  double step_tol = 1e-12;
  double fd_step = 1e-6;
  // Stop once the sum of squares falls below this; exact fits otherwise bounce
  // off the relative tolerance for several extra iterations.
  double abs_cost_tol = 1e-20;
};

enum class LmTermination {
  kCostTolerance,
  kStepTolerance,
  kAbsoluteCost,
  kMaxIterations,
};

struct LmResult {
  Eigen::VectorXd solution;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  LmTermination reason = LmTermination::kMaxIterations;
  std::vector<double> cost_history;  // cost at x0 followed by every accepted step
};

std::string to_string(LmTermination reason);

/// Minimizes sum_i r_i(x)^2. When `jacobian` is empty the Jacobian is taken by
/// central differences with opts.fd_step.
///
/// Throws kInvalidStart if r(x0) is non-finite and kNumericalFailure when the
/// damped normal equations stay unsolvable after damping escalation.
LmResult levenberg_marquardt(const ResidualFn& residual, const Eigen::VectorXd& x0,
                             const LmOptions& opts = {}, const JacobianFn& jacobian = {});

/// J[i][j] = (r_i(x + h e_j) - r_i(x - h e_j)) / (2h).
Eigen::MatrixXd numeric_jacobian(const ResidualFn& residual, const Eigen::VectorXd& x,
                                 double fd_step = 1e-6);

/// (v_i - mean) / sample_std with the N-1 denominator; all zeros when N < 2 or
/// the deviation is below 1e-12. Throws kEmptyInput on empty input.
std::vector<double> zscore(std::span<const double> values);

}  // namespace radcam
