// Common dense types used throughout the library.
#pragma once

#include <Eigen/Dense>

namespace otube {

using Index = Eigen::Index;

template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = MatrixX<double>;
using VectorXd = VectorX<double>;

}  // namespace otube
