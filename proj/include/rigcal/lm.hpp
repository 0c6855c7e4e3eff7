#pragma once

#include <Eigen/Core>

namespace rigcal {

/// Shared Levenberg-Marquardt schedule: fixed damping ladder and stopping
/// rules so every refinement in the library behaves identically.
struct LmOptions {
  double lambda_init = 1e-3;
  double lambda_scale = 10.0;  // multiplied on reject, divided on accept
  int max_iterations = 100;
  double cost_tolerance = 1e-10;      // relative decrease of an accepted step
  double gradient_tolerance = 1e-8;   // infinity norm of J^T r
};

enum class LmStop {
  GradientSmall,
  CostStalled,
  MaxIterations,
  LambdaOverflow,
};

const char* lm_stop_name(LmStop stop);

struct LmSummary {
  LmStop stop = LmStop::MaxIterations;
  bool converged = false;
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
};

/// Dense nonlinear least-squares problem with state owned by the problem
/// object. Steps live in the tangent space; save/restore implements trial
/// step rollback.
class LmProblem {
 public:
  virtual ~LmProblem() = default;

  virtual int residual_size() const = 0;
  virtual int tangent_size() const = 0;

  /// Evaluates residuals (and the Jacobian when non-null) at the current
  /// state. Returns false when the state left the model's domain; such a
  /// trial step is rejected.
  virtual bool eval(Eigen::VectorXd* residuals, Eigen::MatrixXd* jacobian) const = 0;

  virtual void apply_step(const Eigen::VectorXd& delta) = 0;
  virtual void save_state() = 0;
  virtual void restore_state() = 0;
};

/// Minimizes |r|^2. Accepted steps never increase the cost. Throws
/// NumericalFailure when the initial state is invalid or non-finite.
LmSummary lm_minimize(LmProblem& problem, const LmOptions& options = {});

}  // namespace rigcal
