#pragma once

#include "alti/encoder.hpp"

#include <span>
#include <string>

namespace alti {

/// R^l = M^l * M^{l-1} * ... * M^1; row i holds the input relevances of token i at layer l.
struct RelevanceMatrix {
  Matrix R;
  int layer = 0;
};

/// Per-token input attribution for one sentence and one method; sums to 1.
struct AttributionVector {
  Vector scores;
  std::string method;
  int predicted_class = 0;
};

/// Uniform mean over heads.
Matrix average_heads(const Tensor3& attention);

/// 0.5 * A + 0.5 * I. Throws std::invalid_argument when A is not row-stochastic
/// within 1e-6.
Matrix augment_residual(const Matrix& attention_avg);

/// Product of the first `upto` matrices (1-based, as in layers). Throws ShapeError
/// on dimension mismatch and std::out_of_range when upto is outside [1, mats.size()].
RelevanceMatrix rollout(std::span<const Matrix> mats, int upto);

/// Anchor row of R, renormalized to sum 1.
AttributionVector attribution_from_relevance(const RelevanceMatrix& relevance, const ForwardTrace& trace,
                                             std::string method);

}  // namespace alti
