#pragma once

#include <Eigen/Dense>

namespace ttconv {

// Row-major so a Map over a lexicographic buffer reads as its natural unfolding.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using ConstStridedMatrixMap = Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>>;

}  // namespace ttconv
