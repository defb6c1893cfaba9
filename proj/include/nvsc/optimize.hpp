#pragma once

// Unconstrained minimisers over small dense vectors.

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace nvsc {

using Vector = Eigen::VectorXd;
using ObjectiveFn = std::function<std::pair<double, Vector>(const Vector&)>;

struct OptimOptions {
  double grad_tol = 1e-5;   // on the infinity norm of the gradient
  double param_tol = 1e-6;  // on the infinity norm of the accepted step
  int max_iters = 200;
  double adam_lr0 = 1e-3;
  int adam_patience = 3;  // non-improving iterations before the rate drops
  double adam_lr_factor = 0.5;

  void validate() const;
};

enum class StopReason { grad_tol, param_tol, max_iters };
std::string to_string(StopReason r);

struct OptimizationResult {
  Vector x;
  double loss = 0;
  int iterations = 0;
  int function_evals = 0;
  StopReason converged_by = StopReason::max_iters;
  // Adam only: learning rate at exit.
  double final_learning_rate = 0;
  // Loss after every accepted iteration, starting with the loss at x0.
  std::vector<double> loss_history;
};

// BFGS with a strong-Wolfe line search (c1 = 1e-4, c2 = 0.9). A line search
// that finds no acceptable step ends the run as a zero-length step (param_tol).
OptimizationResult minimize_bfgs(const ObjectiveFn& f, const Vector& x0, const OptimOptions& opts = {});

// Adam (0.9, 0.999, 1e-8) with bias correction. The learning rate is multiplied
// by adam_lr_factor after adam_patience consecutive iterations that do not
// improve on the best loss seen.
OptimizationResult minimize_adam(const ObjectiveFn& f, const Vector& x0, const OptimOptions& opts = {});

// Adam until it stops, then BFGS from Adam's final point. Each phase has its
// own max_iters budget; counts are summed.
OptimizationResult minimize_hybrid(const ObjectiveFn& f, const Vector& x0, const OptimOptions& opts = {});

enum class Optimizer { bfgs, adam, hybrid };
Optimizer parse_optimizer(const std::string& name);
std::string to_string(Optimizer o);
OptimizationResult minimize(Optimizer which, const ObjectiveFn& f, const Vector& x0,
                            const OptimOptions& opts = {});

}  // namespace nvsc
