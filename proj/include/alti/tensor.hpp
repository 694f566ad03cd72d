#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace alti {

template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Row-major dense matrix; rows are tokens, columns are features.
using Matrix = MatrixT<double>;
using Vector = VectorT<double>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

/// A stack of equally shaped matrices, e.g. per-head attention [H x J x J].
using Tensor3 = std::vector<Matrix>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an operation produces NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* where) {
  if (!m.allFinite()) {
    throw NumericError(std::string("non-finite value produced by ") + where);
  }
}

std::string shape_string(Eigen::Index rows, Eigen::Index cols);

template <typename A, typename B>
auto matmul(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  using Scalar = typename A::Scalar;
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_string(a.rows(), a.cols()) + " * " +
                     shape_string(b.rows(), b.cols()));
  }
  MatrixT<Scalar> out = a * b;
  require_finite(out, "matmul");
  return out;
}

/// Row-wise softmax with max subtraction.
template <typename Derived>
auto softmax_rows(const Eigen::MatrixBase<Derived>& s) {
  using Scalar = typename Derived::Scalar;
  require_finite(s, "softmax_rows input");
  MatrixT<Scalar> out(s.rows(), s.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const Scalar mx = s.row(i).maxCoeff();
    out.row(i) = (s.row(i).array() - mx).unaryExpr([](Scalar v) { return std::exp(v); }).matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

/// Standard deviation used by layer normalization: sqrt(population variance + eps).
template <typename Derived>
typename Derived::Scalar ln_sigma(const Eigen::MatrixBase<Derived>& u, double eps) {
  using Scalar = typename Derived::Scalar;
  const Scalar mean = u.mean();
  const Scalar var = (u.array() - mean).square().mean();
  return std::sqrt(var + static_cast<Scalar>(eps));
}

/// ((u - mean(u)) / sqrt(var(u) + eps)) * gamma + beta for a single vector.
template <typename U, typename G, typename B>
auto layer_norm(const Eigen::MatrixBase<U>& u, const Eigen::MatrixBase<G>& gamma,
                const Eigen::MatrixBase<B>& beta, double eps) {
  using Scalar = typename U::Scalar;
  if (u.size() < 1 || gamma.size() != u.size() || beta.size() != u.size()) {
    throw ShapeError("layer_norm: parameter size mismatch");
  }
  const Scalar mean = u.mean();
  const Scalar sigma = ln_sigma(u, eps);
  VectorT<Scalar> out(u.size());
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    out(k) = (u(k) - mean) / sigma * gamma(k) + beta(k);
  }
  require_finite(out, "layer_norm");
  return out;
}

/// Applies layer_norm to every row of `x`; optionally reports the per-row sigma.
Matrix layer_norm_rows(const Matrix& x, const Vector& gamma, const Vector& beta, double eps,
                       Vector* sigma_out = nullptr);

/// Linear part of layer normalization: diag(gamma) * (I - ones / d).
template <typename G>
auto ln_linear_part(const Eigen::MatrixBase<G>& gamma) {
  using Scalar = typename G::Scalar;
  const Eigen::Index d = gamma.size();
  if (d < 2) {
    throw ShapeError("ln_linear_part: dimension must be >= 2");
  }
  MatrixT<Scalar> centering =
      MatrixT<Scalar>::Identity(d, d) - MatrixT<Scalar>::Constant(d, d, Scalar(1) / Scalar(d));
  return MatrixT<Scalar>(gamma.asDiagonal() * centering);
}

/// Applies diag(gamma) * (I - ones/d) to each row without materializing the d x d matrix.
Matrix apply_ln_linear_rows(const Matrix& rows, const Vector& gamma);

double gelu(double x);
double gelu_derivative(double x);

}  // namespace alti
