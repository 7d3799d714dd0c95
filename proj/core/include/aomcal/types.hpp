#pragma once

#include <Eigen/Core>

namespace aomcal {

// Sample-major: rows are samples, columns are channels (wavelengths).
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

}  // namespace aomcal
