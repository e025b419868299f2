#pragma once

#include <Eigen/Core>

namespace nptc {

// Dense row-major feature matrix: rows are points, columns are channels.
template <typename T>
using Tensor2 = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

}  // namespace nptc
