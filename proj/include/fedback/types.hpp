#pragma once

#include <Eigen/Dense>

namespace fedback {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

}  // namespace fedback
