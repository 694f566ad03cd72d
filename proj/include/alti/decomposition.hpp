#pragma once

#include "alti/encoder.hpp"

namespace alti {

/// Additive decomposition of an attention block's output into per-source-token terms.
///
/// T[i] is a [J x d] matrix whose row j is T_i(x_j), the share of token j in the
/// output of token i. For every i:
///   sum_j T[i].row(j) + bias_term.row(i) + beta == block output of token i.
/// bias_term collects the output-projection bias and the folded value-projection
/// biases, which are not attributed to any token.
struct TransformedSet {
  Tensor3 T;
  Matrix bias_term;
  Vector beta;

  std::size_t num_tokens() const { return T.size(); }
  /// sum_j T_i(x_j) + bias_i + beta for every token, [J x d].
  Matrix reconstruct() const;
};

enum class ContributionMetric { norms, alti_l1, alti_l2 };
enum class Norm { l1, l2 };

const char* metric_name(ContributionMetric m);
Norm parse_norm(std::string_view s);

/// Row-stochastic J x J matrix of token-to-token contributions for one layer.
struct ContributionMatrix {
  Matrix C;
  ContributionMetric metric = ContributionMetric::alti_l1;
};

class DecompositionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Transformed vectors of the attention block (multi-head attention, residual, LN1).
/// Throws DecompositionError when some sigma1_i < 1e-8.
TransformedSet transformed_vectors(const LayerTrace& layer, const LayerWeights& weights);

/// Pushes the set through the FFN residual and LN2 so it reconstructs layer_out.
/// The FFN output is attributed to the residual token (j == i).
TransformedSet extend_ln2(const TransformedSet& ts, const LayerTrace& layer,
                          const LayerWeights& weights);

/// Euclidean norms of transformed vectors, row-normalized. Zero rows become uniform.
ContributionMatrix contributions_norms(const TransformedSet& ts);

/// Proximity-based contributions: max(0, ||y_i|| - ||y_i - T_i(x_j)||), row-normalized,
/// with the same norm for both terms. Zero rows become uniform.
ContributionMatrix contributions_alti(const TransformedSet& ts, const Matrix& y, Norm norm);

/// max_i ||reconstruct()_i - target_i||_inf
double reconstruction_error(const TransformedSet& ts, const Matrix& target);

}  // namespace alti
