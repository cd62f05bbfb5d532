#pragma once

#include <Eigen/Dense>

namespace lesplat {

template <typename Scalar> using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar> using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar> using Mat2 = Eigen::Matrix<Scalar, 2, 2>;
template <typename Scalar> using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar> using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
// Row-major so that one pixel (or one Gaussian) is one contiguous row.
template <typename Scalar>
using RowMatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Vector3d = Vec3<double>;
using VectorXd = VecX<double>;
using MatrixXd = Eigen::MatrixXd;
using RowMatrixXd = RowMatX<double>;

} // namespace lesplat
