#pragma once

#include "alti/aggregation.hpp"

#include <functional>

namespace alti {

/// How per-dimension scores of one token collapse into a scalar.
enum class Aggregation { l2, mean_abs };

Aggregation parse_aggregation(std::string_view s);

struct IGConfig {
  int steps = 100;
  Aggregation aggregation = Aggregation::l2;
};

/// A scalar function of the word-embedding matrix [J x d] together with its gradient.
/// `eval` returns f(emb) and, when `grad` is non-null, writes df/demb into it.
struct EmbeddingObjective {
  std::function<double(const Matrix& emb, Matrix* grad)> eval;
};

/// Probability of `class_index` as a function of the word embeddings, differentiated
/// by the tape.
EmbeddingObjective probability_objective(const ModelBundle& bundle, std::size_t anchor,
                                         Target target, int class_index);

/// Per-token scalar from a [J x d] score matrix.
Vector aggregate_rows(const Matrix& per_dim, Aggregation aggregation);

/// Nonnegative scores normalized to sum 1; all-zero input falls back to uniform.
AttributionVector normalize_attribution(const Vector& raw, std::string method, int predicted_class);

/// Raw ||df/dx_j||_2 per token.
Vector gradient_scores(const EmbeddingObjective& f, const Matrix& emb);

/// Raw aggregate of grad * emb per token.
Vector grad_x_input_scores(const EmbeddingObjective& f, const Matrix& emb, Aggregation aggregation);

/// Signed per-dimension integrated gradients, right Riemann sum with `steps` points:
/// (x - B) * (1/m) * sum_{c=1..m} grad f(B + c/m (x - B)).
Matrix integrated_gradients_signed(const EmbeddingObjective& f, const Matrix& emb,
                                   const Matrix& baseline, int steps);

/// [MASK] word embedding at every non-special position; CLS/SEP/MASK rows unchanged.
Matrix mask_baseline(const ModelBundle& bundle, const EncodedInput& input);

AttributionVector grad_l2(const ModelBundle& bundle, const EncodedInput& input,
                          Target target = Target::cls);

AttributionVector grad_x_input(const ModelBundle& bundle, const EncodedInput& input,
                               Aggregation aggregation, Target target = Target::cls);

AttributionVector integrated_gradients(const ModelBundle& bundle, const EncodedInput& input,
                                       const IGConfig& cfg, Target target = Target::cls);

}  // namespace alti
