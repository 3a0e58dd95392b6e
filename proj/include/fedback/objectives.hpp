#pragma once

#include <cstddef>
#include <vector>

#include "fedback/types.hpp"

namespace fedback {

enum class ObjectiveKind { quadratic, logistic };

/// A client's local loss f_i together with the data it is built from.
///
/// quadratic: f(theta) = 1/2 |A theta - b|^2, parameter dimension = columns of A.
/// logistic:  multinomial (softmax) cross-entropy summed over samples. The
///            parameter is a features x classes weight matrix stored
///            column-major, so dimension = features * classes.
///
/// Objectives are immutable once built; the Gram matrix and smoothness
/// constant are computed at construction.
class Objective {
 public:
  static Objective quadratic(Matrix design, Vector targets);
  static Objective logistic(Matrix features, std::vector<int> labels, int classes);

  ObjectiveKind kind() const noexcept { return kind_; }
  std::size_t sample_count() const noexcept { return static_cast<std::size_t>(design_.rows()); }
  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t feature_count() const noexcept { return static_cast<std::size_t>(design_.cols()); }
  int classes() const noexcept { return classes_; }

  const Matrix& design() const noexcept { return design_; }
  const Vector& targets() const noexcept { return targets_; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  /// design^T design
  const Matrix& gram() const noexcept { return gram_; }
  /// design^T targets (quadratic only; empty for logistic)
  const Vector& design_t_targets() const noexcept { return design_t_targets_; }
  /// Upper bound r_i on the gradient's Lipschitz constant.
  double smoothness() const noexcept { return smoothness_; }

 private:
  Objective() = default;

  ObjectiveKind kind_ = ObjectiveKind::quadratic;
  Matrix design_;
  Vector targets_;
  std::vector<int> labels_;
  int classes_ = 0;
  std::size_t dimension_ = 0;
  Matrix gram_;
  Vector design_t_targets_;
  double smoothness_ = 0.0;
};

double loss(const Objective& obj, const Vector& theta);
Vector gradient(const Objective& obj, const Vector& theta);
double smoothness_constant(const Objective& obj);

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration, converged to relative tolerance `rel_tol`.
double largest_eigenvalue(const Matrix& symmetric_psd, double rel_tol = 1e-8);

/// min_theta f(theta) + rho/2 |theta - anchor|^2, solved until the gradient
/// residual |grad f(theta) + rho (theta - anchor)| <= tolerance.
struct ProxProblem {
  Vector anchor;
  double rho = 1.0;
  double tolerance = 1e-6;
  Vector warm_start;
};

enum class ProxMethod {
  automatic,         ///< closed form for quadratics, gradient descent otherwise
  gradient_descent,  ///< always iterate from the warm start
};

inline constexpr int kMaxProxSteps = 10000;

double prox_residual(const Objective& obj, const ProxProblem& prob, const Vector& theta);

/// Throws SolverFailure (carrying the final residual) after kMaxProxSteps.
Vector prox_solve(const Objective& obj, const ProxProblem& prob,
                  ProxMethod method = ProxMethod::automatic);

/// (A^T A + rho I)^{-1} (A^T b + rho anchor); quadratic objectives only.
Vector prox_solve_closed_form(const Objective& obj, const ProxProblem& prob);

/// Inexactness schedule eps_k = eps_0 / (k + 1).
inline double tolerance_at_round(double epsilon0, long long round) {
  return epsilon0 / static_cast<double>(round + 1);
}

}  // namespace fedback
