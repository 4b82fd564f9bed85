#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace fedprune {

// Production scalar. Parameters travel as 32-bit reals; tests may
// instantiate the templated core with double.
using Real = float;
using Index = Eigen::Index;

template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <class S>
using RowMajorMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace fedprune
