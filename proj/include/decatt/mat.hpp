#pragma once

#include <Eigen/Core>

namespace decatt {

// Row-major so tensor bytes serialize in their natural order.
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;

}  // namespace decatt
