#include "alti/tensor.hpp"

#include <numbers>

namespace alti {

std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

Matrix layer_norm_rows(const Matrix& x, const Vector& gamma, const Vector& beta, double eps,
                       Vector* sigma_out) {
  if (gamma.size() != x.cols() || beta.size() != x.cols()) {
    throw ShapeError("layer_norm_rows: gamma/beta do not match " +
                     shape_string(x.rows(), x.cols()));
  }
  Matrix out(x.rows(), x.cols());
  if (sigma_out != nullptr) {
    sigma_out->resize(x.rows());
  }
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).mean();
    const double sigma = ln_sigma(x.row(i), eps);
    out.row(i) = ((x.row(i).array() - mean) / sigma * gamma.transpose().array() +
                  beta.transpose().array())
                     .matrix();
    if (sigma_out != nullptr) {
      (*sigma_out)(i) = sigma;
    }
  }
  require_finite(out, "layer_norm_rows");
  return out;
}

Matrix apply_ln_linear_rows(const Matrix& rows, const Vector& gamma) {
  Matrix out = rows.colwise() - rows.rowwise().mean();
  out.array().rowwise() *= gamma.transpose().array();
  return out;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

}  // namespace alti
