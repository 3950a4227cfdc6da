#pragma once

#include <Eigen/Core>
#include <cstdint>

namespace lpass {

template <class Scalar_, int Rows_ = Eigen::Dynamic, int Cols_ = Eigen::Dynamic>
using mat_type = Eigen::Matrix<Scalar_, Rows_, Cols_>;

// Activations and sample-major data are row-major so a row is one sample.
template <class Scalar_, int Rows_ = Eigen::Dynamic, int Cols_ = Eigen::Dynamic>
using rowmat_type = Eigen::Matrix<Scalar_, Rows_, Cols_, Eigen::RowMajor>;

template <class Scalar_, int Rows_ = Eigen::Dynamic>
using vec_type = Eigen::Matrix<Scalar_, Rows_, 1>;

template <class Scalar_, int Cols_ = Eigen::Dynamic>
using rowvec_type = Eigen::Matrix<Scalar_, 1, Cols_>;

using index_t = Eigen::Index;
using seed_t = std::uint64_t;

} // namespace lpass
