#include "alti/aggregation.hpp"

namespace alti {

Matrix average_heads(const Tensor3& attention) {
  if (attention.empty()) {
    throw std::invalid_argument("average_heads: no heads");
  }
  Matrix avg = attention.front();
  for (std::size_t h = 1; h < attention.size(); ++h) {
    avg += attention[h];
  }
  return avg / static_cast<double>(attention.size());
}

Matrix augment_residual(const Matrix& attention_avg) {
  if (attention_avg.rows() != attention_avg.cols()) {
    throw ShapeError("augment_residual: matrix must be square, got " +
                     shape_string(attention_avg.rows(), attention_avg.cols()));
  }
  const double drift = (attention_avg.rowwise().sum().array() - 1.0).abs().maxCoeff();
  if (drift > 1e-6 || (attention_avg.array() < 0.0).any()) {
    throw std::invalid_argument("augment_residual: attention is not row-stochastic");
  }
  const auto n = attention_avg.rows();
  return 0.5 * attention_avg + 0.5 * Matrix::Identity(n, n);
}

RelevanceMatrix rollout(std::span<const Matrix> mats, int upto) {
  if (upto < 1 || upto > static_cast<int>(mats.size())) {
    throw std::out_of_range("rollout: upto=" + std::to_string(upto) + " outside [1, " +
                            std::to_string(mats.size()) + "]");
  }
  const auto n = mats.front().rows();
  RelevanceMatrix out{Matrix::Identity(n, n), upto};
  for (int l = 0; l < upto; ++l) {
    const Matrix& m = mats[static_cast<std::size_t>(l)];
    if (m.rows() != n || m.cols() != n) {
      throw ShapeError("rollout: layer " + std::to_string(l + 1) + " is " +
                       shape_string(m.rows(), m.cols()) + ", expected " + shape_string(n, n));
    }
    out.R = m * out.R;
  }
  return out;
}

AttributionVector attribution_from_relevance(const RelevanceMatrix& relevance, const ForwardTrace& trace,
                                             std::string method) {
  const auto anchor = static_cast<Eigen::Index>(trace.anchor);
  if (anchor >= relevance.R.rows()) {
    throw std::out_of_range("attribution_from_relevance: anchor outside relevance matrix");
  }
  Vector scores = relevance.R.row(anchor).transpose().cwiseMax(0.0);
  const double total = scores.sum();
  if (total > 0.0) {
    scores /= total;
  } else {
    scores.setConstant(1.0 / static_cast<double>(scores.size()));
  }
  return {std::move(scores), std::move(method), trace.predicted_class};
}

}  // namespace alti
