#include "qgrl/dense.hpp"

#include <sstream>

namespace qgrl {

std::string join(const Tokens& toks, const std::string& sep) {
  std::string out;
  for (size_t i = 0; i < toks.size(); ++i) {
    if (i) out += sep;
    out += toks[i];
  }
  return out;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? " " : "") << s[i];
  os << "]";
  return os.str();
}

DenseArray DenseArray::zeros(const Shape& shape) {
  if (shape.empty() || shape.size() > 2)
    throw ArgError("DenseArray rank must be 1 or 2, got " + shape_str(shape));
  for (auto d : shape)
    if (d < 0) throw ArgError("negative dimension in " + shape_str(shape));
  DenseArray a;
  a.shape_ = shape;
  if (shape.size() == 1)
    a.m_ = Mat::Zero(1, shape[0]);
  else
    a.m_ = Mat::Zero(shape[0], shape[1]);
  return a;
}

DenseArray DenseArray::from_matrix(Mat m) {
  DenseArray a;
  a.shape_ = {m.rows(), m.cols()};
  a.m_ = std::move(m);
  return a;
}

DenseArray DenseArray::from_row(Mat m) {
  if (m.rows() != 1) throw DimError("from_row expects a single row");
  DenseArray a;
  a.shape_ = {m.cols()};
  a.m_ = std::move(m);
  return a;
}

DenseArray DenseArray::vec(std::initializer_list<double> xs) {
  Mat m(1, static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) m(0, i++) = x;
  return from_row(std::move(m));
}

Mat softmax_rows_mat(const Mat& m) {
  if (m.size() == 0) throw ArgError("softmax of empty input");
  Mat out(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    double mx = m.row(r).maxCoeff();
    Eigen::ArrayXd e = (m.row(r).array() - mx).exp();
    out.row(r) = (e / e.sum()).matrix();
  }
  return out;
}

DenseArray softmax(const DenseArray& v) {
  if (v.size() == 0) throw ArgError("softmax of empty input");
  if (v.rank() == 1) return DenseArray::from_row(softmax_rows_mat(v.mat()));
  return DenseArray::from_matrix(softmax_rows_mat(v.mat()));
}

}  // namespace qgrl
