#pragma once

#include <Eigen/Dense>
#include <initializer_list>

#include "qgrl/common.hpp"

namespace qgrl {

// Row-major throughout so serialized layouts match in-memory layouts.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Shape = std::vector<Eigen::Index>;

std::string shape_str(const Shape& s);

// Dense 64-bit float array of rank 1 or 2. Rank-1 arrays are stored as a
// single matrix row; shape() keeps the declared rank for serialization.
class DenseArray {
 public:
  DenseArray() = default;

  static DenseArray zeros(const Shape& shape);
  static DenseArray from_matrix(Mat m);                     // rank 2
  static DenseArray from_row(Mat m);                        // rank 1, expects 1 x n
  static DenseArray vec(std::initializer_list<double> xs);  // rank 1

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  Eigen::Index size() const { return m_.size(); }

  Mat& mat() { return m_; }
  const Mat& mat() const { return m_; }

  bool all_finite() const { return m_.allFinite(); }

 private:
  Shape shape_;
  Mat m_;
};

// Row softmax with max-shift; the single softmax kernel used everywhere.
// Empty input is an argument error.
DenseArray softmax(const DenseArray& v);
Mat softmax_rows_mat(const Mat& m);

}  // namespace qgrl
