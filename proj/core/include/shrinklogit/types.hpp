#pragma once

#include <Eigen/Dense>

namespace shrinklogit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

}  // namespace shrinklogit
