#include "radcam/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "radcam/error.hpp"

namespace radcam {

namespace {

constexpr double kMaxLambda = 1e32;

}  // namespace

std::string to_string(LmTermination reason) {
  switch (reason) {
    case LmTermination::kCostTolerance: return "cost-tolerance";
    case LmTermination::kStepTolerance: return "step-tolerance";
    case LmTermination::kAbsoluteCost: return "absolute-cost";
    case LmTermination::kMaxIterations: return "max-iterations";
  }
  return "unknown";
}

Eigen::MatrixXd numeric_jacobian(const ResidualFn& residual, const Eigen::VectorXd& x,
                                 double fd_step) {
  Eigen::MatrixXd jac;
  Eigen::VectorXd xp = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    xp(j) = x(j) + fd_step;
    const Eigen::VectorXd plus = residual(xp);
    xp(j) = x(j) - fd_step;
    const Eigen::VectorXd minus = residual(xp);
    xp(j) = x(j);
    if (!plus.allFinite() || !minus.allFinite()) {
      throw Error(ErrorCode::kNumericalFailure, "non-finite residual in finite differences");
    }
    if (j == 0) jac.resize(plus.size(), x.size());
    jac.col(j) = (plus - minus) / (2.0 * fd_step);
  }
  return jac;
}

LmResult levenberg_marquardt(const ResidualFn& residual, const Eigen::VectorXd& x0,
                             const LmOptions& opts, const JacobianFn& jacobian) {
  auto eval_jacobian = [&](const Eigen::VectorXd& x) -> Eigen::MatrixXd {
    return jacobian ? jacobian(x) : numeric_jacobian(residual, x, opts.fd_step);
  };

  LmResult out;
  Eigen::VectorXd x = x0;
  Eigen::VectorXd r = residual(x);
  if (!x.allFinite() || !r.allFinite()) {
    throw Error(ErrorCode::kInvalidStart, "residual is not finite at the starting point");
  }
  double cost = r.squaredNorm();
  out.initial_cost = cost;
  out.cost_history.push_back(cost);

  double lambda = opts.lambda_init;
  Eigen::MatrixXd jac = eval_jacobian(x);

  while (out.iterations < opts.max_iters) {
    if (cost <= opts.abs_cost_tol) {
      out.converged = true;
      out.reason = LmTermination::kAbsoluteCost;
      break;
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd gradient = jac.transpose() * r;
    // Marquardt scaling, floored so zero columns stay solvable.
    const double floor = 1e-12 * std::max(1.0, jtj.diagonal().maxCoeff());
    const Eigen::VectorXd scale = jtj.diagonal().cwiseMax(floor);

    Eigen::MatrixXd damped = jtj;
    damped.diagonal() += lambda * scale;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
    Eigen::VectorXd step = ldlt.solve(-gradient);
    ++out.iterations;

    if (ldlt.info() != Eigen::Success || !step.allFinite()) {
      lambda *= opts.lambda_up;
      if (lambda > kMaxLambda) {
        throw Error(ErrorCode::kNumericalFailure,
                    "damped normal equations singular after damping escalation");
      }
      continue;
    }
    if (step.norm() < opts.step_tol * (x.norm() + opts.step_tol)) {
      out.converged = true;
      out.reason = LmTermination::kStepTolerance;
      break;
    }

    const Eigen::VectorXd x_new = x + step;
    const Eigen::VectorXd r_new = residual(x_new);
    const double cost_new = r_new.allFinite() ? r_new.squaredNorm() : cost + 1.0;
    if (cost_new < cost) {
      const double rel = (cost - cost_new) / std::max(cost, 1e-300);
      x = x_new;
      r = r_new;
      cost = cost_new;
      out.cost_history.push_back(cost);
      lambda = std::max(lambda / opts.lambda_down, 1e-300);
      if (rel < opts.cost_tol) {
        out.converged = true;
        out.reason = LmTermination::kCostTolerance;
        break;
      }
      jac = eval_jacobian(x);
    } else {
      lambda *= opts.lambda_up;
      if (lambda > kMaxLambda) {
        // Nothing downhill at any damping: we are at a numerical minimum.
        out.converged = true;
        out.reason = LmTermination::kStepTolerance;
        break;
      }
    }
  }

  out.solution = x;
  out.final_cost = cost;
  return out;
}

std::vector<double> zscore(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::kEmptyInput, "zscore of an empty sequence");
  const auto n = static_cast<double>(values.size());
  std::vector<double> out(values.size(), 0.0);
  if (values.size() < 2) return out;

  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double stddev = std::sqrt(ss / (n - 1.0));
  if (stddev < 1e-12) return out;

  std::transform(values.begin(), values.end(), out.begin(),
                 [&](double v) { return (v - mean) / stddev; });
  return out;
}

}  // namespace radcam
