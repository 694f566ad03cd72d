#include "alti/decomposition.hpp"

#include <spdlog/spdlog.h>

namespace alti {
namespace {

constexpr double kMinSigma = 1e-8;

void check_sigma(const Vector& sigma, const char* which) {
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (!(sigma(i) >= kMinSigma)) {
      throw DecompositionError(std::string("degenerate layer norm input: ") + which + " of token " +
                               std::to_string(i) + " is " + std::to_string(sigma(i)));
    }
  }
}

/// Normalizes each row to sum 1; all-zero rows become uniform.
Matrix normalize_rows(Matrix raw, const char* what) {
  const auto n = raw.cols();
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    const double total = raw.row(i).sum();
    if (total > 0.0) {
      raw.row(i) /= total;
    } else {
      spdlog::warn("{}: row {} has no positive contribution, using uniform 1/{}", what, i, n);
      raw.row(i).setConstant(1.0 / static_cast<double>(n));
    }
  }
  return raw;
}

double vector_norm(const RowVector& v, Norm norm) {
  return norm == Norm::l1 ? v.lpNorm<1>() : v.norm();
}

}  // namespace

const char* metric_name(ContributionMetric m) {
  switch (m) {
    case ContributionMetric::norms: return "norms";
    case ContributionMetric::alti_l1: return "alti_l1";
    case ContributionMetric::alti_l2: return "alti_l2";
  }
  return "unknown";
}

Norm parse_norm(std::string_view s) {
  if (s == "l1") return Norm::l1;
  if (s == "l2") return Norm::l2;
  throw std::invalid_argument("unknown norm '" + std::string(s) + "' (expected l1|l2)");
}

Matrix TransformedSet::reconstruct() const {
  Matrix out(bias_term.rows(), bias_term.cols());
  for (std::size_t i = 0; i < T.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out.row(r) = T[i].colwise().sum() + bias_term.row(r) + beta.transpose();
  }
  return out;
}

TransformedSet transformed_vectors(const LayerTrace& layer, const LayerWeights& weights) {
  const Matrix& x = layer.input;
  const Eigen::Index J = x.rows();
  const Eigen::Index d = x.cols();
  check_sigma(layer.sigma1, "sigma1");
  if (layer.attention.size() != weights.heads.size()) {
    throw ShapeError("transformed_vectors: trace has " + std::to_string(layer.attention.size()) +
                     " heads, weights have " + std::to_string(weights.heads.size()));
  }

  // Per-head value vectors projected back to model space, without the value bias:
  // row j of projected[h] is W_O^h W_V^h x_j.
  Tensor3 projected;
  projected.reserve(weights.heads.size());
  Vector untracked = weights.output_bias;
  for (const HeadWeights& h : weights.heads) {
    projected.push_back((x * h.value.transpose()) * h.output.transpose());
    // rows of A sum to 1, hence A (1 b_V^T) = 1 b_V^T
    untracked += h.output * h.value_bias;
  }

  TransformedSet ts;
  ts.T.resize(static_cast<std::size_t>(J));
  ts.bias_term.resize(J, d);
  ts.beta = weights.ln1_beta;
  for (Eigen::Index i = 0; i < J; ++i) {
    Matrix mixed = Matrix::Zero(J, d);
    for (std::size_t h = 0; h < projected.size(); ++h) {
      mixed += layer.attention[h].row(i).transpose().asDiagonal() * projected[h];
    }
    mixed.row(i) += x.row(i);
    const double inv_sigma = 1.0 / layer.sigma1(i);
    ts.T[static_cast<std::size_t>(i)] = inv_sigma * apply_ln_linear_rows(mixed, weights.ln1_gamma);
    ts.bias_term.row(i) = inv_sigma * apply_ln_linear_rows(Matrix(untracked.transpose()), weights.ln1_gamma);
  }
  return ts;
}

TransformedSet extend_ln2(const TransformedSet& ts, const LayerTrace& layer,
                          const LayerWeights& weights) {
  check_sigma(layer.sigma2, "sigma2");
  const auto J = static_cast<Eigen::Index>(ts.num_tokens());
  if (layer.ffn_out.rows() != J) {
    throw ShapeError("extend_ln2: trace and transformed set disagree on token count");
  }
  TransformedSet out;
  out.T.resize(ts.T.size());
  out.bias_term.resize(ts.bias_term.rows(), ts.bias_term.cols());
  out.beta = weights.ln2_beta;
  for (Eigen::Index i = 0; i < J; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    Matrix terms = ts.T[idx];
    terms.row(i) += layer.ffn_out.row(i);
    const double inv_sigma = 1.0 / layer.sigma2(i);
    out.T[idx] = inv_sigma * apply_ln_linear_rows(terms, weights.ln2_gamma);
    const RowVector carried = ts.bias_term.row(i) + ts.beta.transpose();
    out.bias_term.row(i) = inv_sigma * apply_ln_linear_rows(Matrix(carried), weights.ln2_gamma);
  }
  return out;
}

ContributionMatrix contributions_norms(const TransformedSet& ts) {
  const auto J = static_cast<Eigen::Index>(ts.num_tokens());
  Matrix raw(J, J);
  for (Eigen::Index i = 0; i < J; ++i) {
    raw.row(i) = ts.T[static_cast<std::size_t>(i)].rowwise().norm().transpose();
  }
  return {normalize_rows(std::move(raw), "contributions_norms"), ContributionMetric::norms};
}

ContributionMatrix contributions_alti(const TransformedSet& ts, const Matrix& y, Norm norm) {
  const auto J = static_cast<Eigen::Index>(ts.num_tokens());
  if (y.rows() != J) {
    throw ShapeError("contributions_alti: output has " + std::to_string(y.rows()) +
                     " rows for " + std::to_string(J) + " tokens");
  }
  Matrix raw(J, J);
  for (Eigen::Index i = 0; i < J; ++i) {
    const Matrix& t = ts.T[static_cast<std::size_t>(i)];
    const RowVector yi = y.row(i);
    const double y_norm = vector_norm(yi, norm);
    for (Eigen::Index j = 0; j < J; ++j) {
      const double distance = vector_norm(yi - t.row(j), norm);
      raw(i, j) = std::max(0.0, y_norm - distance);
    }
  }
  return {normalize_rows(std::move(raw), "contributions_alti"),
          norm == Norm::l1 ? ContributionMetric::alti_l1 : ContributionMetric::alti_l2};
}

double reconstruction_error(const TransformedSet& ts, const Matrix& target) {
  const Matrix diff = ts.reconstruct() - target;
  return diff.size() == 0 ? 0.0 : diff.cwiseAbs().maxCoeff();
}

}  // namespace alti
