#include "fedback/objectives.hpp"

#include <cmath>
#include <string>

#include "fedback/errors.hpp"

namespace fedback {

namespace {

void check_dimension(const Objective& obj, const Vector& theta) {
  if (static_cast<std::size_t>(theta.size()) != obj.dimension()) {
    throw ContractViolation("parameter has dimension " + std::to_string(theta.size()) +
                            ", objective expects " + std::to_string(obj.dimension()));
  }
}

// Column-major features x classes view of a flat parameter.
Eigen::Map<const Matrix> as_weights(const Objective& obj, const Vector& theta) {
  return {theta.data(), static_cast<Eigen::Index>(obj.feature_count()), obj.classes()};
}

// Row-wise softmax probabilities and the summed cross-entropy.
double softmax_rows(const Matrix& logits, const std::vector<int>& labels, Matrix* probs) {
  double total = 0.0;
  if (probs != nullptr) probs->resize(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.rows(); ++j) {
    const double peak = logits.row(j).maxCoeff();
    double norm = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) norm += std::exp(logits(j, c) - peak);
    const double lse = peak + std::log(norm);
    total += lse - logits(j, labels[static_cast<std::size_t>(j)]);
    if (probs != nullptr) {
      for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        (*probs)(j, c) = std::exp(logits(j, c) - lse);
      }
    }
  }
  return total;
}

Vector gradient_descent_prox(const Objective& obj, const ProxProblem& prob, Vector theta) {
  const double step = 1.0 / (obj.smoothness() + prob.rho);
  double residual = 0.0;
  for (int it = 0; it <= kMaxProxSteps; ++it) {
    const Vector g = gradient(obj, theta) + prob.rho * (theta - prob.anchor);
    residual = g.norm();
    if (residual <= prob.tolerance) return theta;
    if (it == kMaxProxSteps) break;
    theta -= step * g;
  }
  throw SolverFailure("prox solve did not reach tolerance " + std::to_string(prob.tolerance) +
                          " within " + std::to_string(kMaxProxSteps) + " steps",
                      residual);
}

}  // namespace

Objective Objective::quadratic(Matrix design, Vector targets) {
  require(design.rows() >= 1 && design.cols() >= 1, "quadratic objective needs n_i >= 1 and d >= 1");
  require(design.rows() == targets.size(), "design row count must equal target count");
  Objective obj;
  obj.kind_ = ObjectiveKind::quadratic;
  obj.dimension_ = static_cast<std::size_t>(design.cols());
  obj.gram_ = design.transpose() * design;
  obj.design_t_targets_ = design.transpose() * targets;
  obj.design_ = std::move(design);
  obj.targets_ = std::move(targets);
  obj.smoothness_ = largest_eigenvalue(obj.gram_);
  return obj;
}

Objective Objective::logistic(Matrix features, std::vector<int> labels, int classes) {
  require(features.rows() >= 1 && features.cols() >= 1, "logistic objective needs n_i >= 1 and d >= 1");
  require(static_cast<std::size_t>(features.rows()) == labels.size(),
          "feature row count must equal label count");
  require(classes >= 2, "logistic objective needs at least two classes");
  for (int y : labels) require(y >= 0 && y < classes, "label out of range");
  Objective obj;
  obj.kind_ = ObjectiveKind::logistic;
  obj.classes_ = classes;
  obj.dimension_ = static_cast<std::size_t>(features.cols()) * static_cast<std::size_t>(classes);
  obj.gram_ = features.transpose() * features;
  obj.design_ = std::move(features);
  obj.labels_ = std::move(labels);
  // The softmax Hessian block diag(p) - p p^T has spectral norm <= 1/2.
  obj.smoothness_ = 0.5 * largest_eigenvalue(obj.gram_);
  return obj;
}

double loss(const Objective& obj, const Vector& theta) {
  check_dimension(obj, theta);
  if (obj.kind() == ObjectiveKind::quadratic) {
    return 0.5 * (obj.design() * theta - obj.targets()).squaredNorm();
  }
  const Matrix logits = obj.design() * as_weights(obj, theta);
  return softmax_rows(logits, obj.labels(), nullptr);
}

Vector gradient(const Objective& obj, const Vector& theta) {
  check_dimension(obj, theta);
  if (obj.kind() == ObjectiveKind::quadratic) {
    return obj.design().transpose() * (obj.design() * theta - obj.targets());
  }
  const Matrix logits = obj.design() * as_weights(obj, theta);
  Matrix probs;
  softmax_rows(logits, obj.labels(), &probs);
  for (std::size_t j = 0; j < obj.labels().size(); ++j) {
    probs(static_cast<Eigen::Index>(j), obj.labels()[j]) -= 1.0;
  }
  const Matrix grad = obj.design().transpose() * probs;
  return Eigen::Map<const Vector>(grad.data(), grad.size());
}

double smoothness_constant(const Objective& obj) { return obj.smoothness(); }

double largest_eigenvalue(const Matrix& m, double rel_tol) {
  require(m.rows() == m.cols() && m.rows() >= 1, "largest_eigenvalue needs a square matrix");
  const Eigen::Index n = m.rows();
  Vector v(n);
  for (Eigen::Index j = 0; j < n; ++j) v(j) = 1.0 + 0.5 * std::sin(1.3 * static_cast<double>(j) + 0.7);
  v.normalize();

  double mu = 0.0;
  constexpr int kMaxIterations = 100000;
  for (int it = 0; it < kMaxIterations; ++it) {
    const Vector w = m * v;
    const double next = v.dot(w);
    if (w.norm() == 0.0) return 0.0;
    const double residual = (w - next * v).norm();
    const bool settled = std::abs(next - mu) <= 1e-15 * std::abs(next);
    mu = next;
    if (residual <= rel_tol * std::abs(mu) || settled) break;
    v = w / w.norm();
  }
  return mu;
}

double prox_residual(const Objective& obj, const ProxProblem& prob, const Vector& theta) {
  return (gradient(obj, theta) + prob.rho * (theta - prob.anchor)).norm();
}

Vector prox_solve_closed_form(const Objective& obj, const ProxProblem& prob) {
  require(obj.kind() == ObjectiveKind::quadratic, "closed-form prox needs a quadratic objective");
  require(prob.rho > 0.0, "prox rho must be positive");
  check_dimension(obj, prob.anchor);
  Matrix system = obj.gram();
  system.diagonal().array() += prob.rho;
  const Vector rhs = obj.design_t_targets() + prob.rho * prob.anchor;
  return system.llt().solve(rhs);
}

Vector prox_solve(const Objective& obj, const ProxProblem& prob, ProxMethod method) {
  require(prob.rho > 0.0, "prox rho must be positive");
  require(prob.tolerance > 0.0, "prox tolerance must be positive");
  check_dimension(obj, prob.anchor);
  check_dimension(obj, prob.warm_start);

  if (method == ProxMethod::automatic && obj.kind() == ObjectiveKind::quadratic) {
    Vector theta = prox_solve_closed_form(obj, prob);
    if (prox_residual(obj, prob, theta) <= prob.tolerance) return theta;
    // Ill-conditioned system: polish iteratively from the direct solution.
    return gradient_descent_prox(obj, prob, std::move(theta));
  }
  return gradient_descent_prox(obj, prob, prob.warm_start);
}

}  // namespace fedback
