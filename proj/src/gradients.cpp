#include "alti/gradients.hpp"

#include <spdlog/spdlog.h>

namespace alti {
namespace {

struct Prediction {
  std::size_t anchor = 0;
  int predicted_class = 0;
};

Prediction predict(const ModelBundle& bundle, const EncodedInput& input, Target target) {
  const std::size_t anchor = anchor_position(input, bundle, target);
  return {anchor, argmax(forward_probs_only(bundle, input, target))};
}

}  // namespace

Aggregation parse_aggregation(std::string_view s) {
  if (s == "l2") return Aggregation::l2;
  if (s == "mean" || s == "mean_abs") return Aggregation::mean_abs;
  throw std::invalid_argument("unknown aggregation '" + std::string(s) + "'");
}

EmbeddingObjective probability_objective(const ModelBundle& bundle, std::size_t anchor,
                                         Target target, int class_index) {
  return {[&bundle, anchor, target, class_index](const Matrix& emb, Matrix* grad) {
    if (grad == nullptr) {
      return forward_probs_from_word_embeddings(bundle, emb, anchor, target)(class_index);
    }
    ad::Tape tape;
    const ad::Var x = tape.leaf(emb);
    const ad::Var probs = forward_on_tape(tape, bundle, x, anchor, target);
    const ad::Var f = ad::element(probs, 0, class_index);
    *grad = tape.backward(f).wrt(x);
    return f.value()(0, 0);
  }};
}

Vector aggregate_rows(const Matrix& per_dim, Aggregation aggregation) {
  if (aggregation == Aggregation::l2) {
    return per_dim.rowwise().norm();
  }
  return per_dim.cwiseAbs().rowwise().mean();
}

AttributionVector normalize_attribution(const Vector& raw, std::string method, int predicted_class) {
  Vector scores = raw.cwiseAbs();
  const double total = scores.sum();
  if (total > 0.0 && std::isfinite(total)) {
    scores /= total;
  } else {
    spdlog::warn("{}: all attribution scores are zero, using uniform scores", method);
    scores.setConstant(1.0 / static_cast<double>(scores.size()));
  }
  return {std::move(scores), std::move(method), predicted_class};
}

Vector gradient_scores(const EmbeddingObjective& f, const Matrix& emb) {
  Matrix grad;
  f.eval(emb, &grad);
  return grad.rowwise().norm();
}

Vector grad_x_input_scores(const EmbeddingObjective& f, const Matrix& emb, Aggregation aggregation) {
  Matrix grad;
  f.eval(emb, &grad);
  return aggregate_rows(grad.cwiseProduct(emb), aggregation);
}

Matrix integrated_gradients_signed(const EmbeddingObjective& f, const Matrix& emb,
                                   const Matrix& baseline, int steps) {
  if (steps < 1) {
    throw std::invalid_argument("integrated_gradients: steps must be >= 1");
  }
  if (baseline.rows() != emb.rows() || baseline.cols() != emb.cols()) {
    throw ShapeError("integrated_gradients: baseline shape differs from input");
  }
  const Matrix delta = emb - baseline;
  Matrix grad_sum = Matrix::Zero(emb.rows(), emb.cols());
  Matrix grad;
  for (int c = 1; c <= steps; ++c) {
    const double alpha = static_cast<double>(c) / static_cast<double>(steps);
    f.eval(baseline + alpha * delta, &grad);
    grad_sum += grad;
  }
  return delta.cwiseProduct(grad_sum) / static_cast<double>(steps);
}

Matrix mask_baseline(const ModelBundle& bundle, const EncodedInput& input) {
  Matrix base = word_embeddings(bundle, input);
  const auto mask_row = bundle.embeddings.word.row(bundle.config.special.mask);
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (!input.special_mask[i]) {
      base.row(static_cast<Eigen::Index>(i)) = mask_row;
    }
  }
  return base;
}

AttributionVector grad_l2(const ModelBundle& bundle, const EncodedInput& input, Target target) {
  const Prediction p = predict(bundle, input, target);
  const auto f = probability_objective(bundle, p.anchor, target, p.predicted_class);
  return normalize_attribution(gradient_scores(f, word_embeddings(bundle, input)), "grad-l2",
                               p.predicted_class);
}

AttributionVector grad_x_input(const ModelBundle& bundle, const EncodedInput& input,
                               Aggregation aggregation, Target target) {
  const Prediction p = predict(bundle, input, target);
  const auto f = probability_objective(bundle, p.anchor, target, p.predicted_class);
  return normalize_attribution(
      grad_x_input_scores(f, word_embeddings(bundle, input), aggregation),
      aggregation == Aggregation::l2 ? "gxi-l2" : "gxi-mean", p.predicted_class);
}

AttributionVector integrated_gradients(const ModelBundle& bundle, const EncodedInput& input,
                                       const IGConfig& cfg, Target target) {
  const Prediction p = predict(bundle, input, target);
  const auto f = probability_objective(bundle, p.anchor, target, p.predicted_class);
  const Matrix signed_attr = integrated_gradients_signed(f, word_embeddings(bundle, input),
                                                         mask_baseline(bundle, input), cfg.steps);
  return normalize_attribution(aggregate_rows(signed_attr, cfg.aggregation),
                               cfg.aggregation == Aggregation::l2 ? "ig-l2" : "ig-mean",
                               p.predicted_class);
}

}  // namespace alti
