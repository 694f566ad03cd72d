#include "alti/encoder.hpp"

#include <cmath>

namespace alti {
namespace {

Matrix add_bias(Matrix m, const Vector& bias) {
  m.rowwise() += bias.transpose();
  return m;
}

Matrix activate(const Matrix& x, Activation act) {
  return act == Activation::gelu ? Matrix(x.unaryExpr(&gelu)) : Matrix(x.cwiseMax(0.0));
}

/// One post-LN encoder layer; fills `trace` when non-null.
Matrix run_layer(const LayerWeights& w, const Matrix& x, const ModelConfig& cfg,
                 LayerTrace* trace) {
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(cfg.head_dim()));
  Matrix mha = Matrix::Zero(x.rows(), x.cols());
  Tensor3 attention;
  attention.reserve(w.heads.size());
  for (const HeadWeights& h : w.heads) {
    const Matrix q = add_bias(x * h.query.transpose(), h.query_bias);
    const Matrix k = add_bias(x * h.key.transpose(), h.key_bias);
    const Matrix v = add_bias(x * h.value.transpose(), h.value_bias);
    Matrix a = softmax_rows(Matrix(inv_sqrt_dh * (q * k.transpose())));
    mha += (a * v) * h.output.transpose();
    attention.push_back(std::move(a));
  }
  mha.rowwise() += w.output_bias.transpose();
  require_finite(mha, "multi-head attention");

  Matrix pre1 = mha + x;
  Vector sigma1;
  Matrix y = layer_norm_rows(pre1, w.ln1_gamma, w.ln1_beta, cfg.ln_eps, &sigma1);

  const Matrix hidden = activate(add_bias(y * w.ffn_in.transpose(), w.ffn_in_bias), cfg.activation);
  Matrix ffn = add_bias(hidden * w.ffn_out.transpose(), w.ffn_out_bias);
  require_finite(ffn, "feed-forward");

  Matrix pre2 = ffn + y;
  Vector sigma2;
  Matrix out = layer_norm_rows(pre2, w.ln2_gamma, w.ln2_beta, cfg.ln_eps, &sigma2);

  if (trace != nullptr) {
    trace->input = x;
    trace->attention = std::move(attention);
    trace->mha_out = std::move(mha);
    trace->pre_ln1 = std::move(pre1);
    trace->sigma1 = std::move(sigma1);
    trace->attn_block_out = std::move(y);
    trace->ffn_out = std::move(ffn);
    trace->pre_ln2 = std::move(pre2);
    trace->sigma2 = std::move(sigma2);
    trace->layer_out = out;
  }
  return out;
}

Vector classify(const ModelBundle& bundle, const Matrix& hidden, std::size_t anchor, Target target,
                Vector* logits_out) {
  const ClassifierWeights& head = bundle.head;
  const Vector h = hidden.row(static_cast<Eigen::Index>(anchor)).transpose();
  Vector logits;
  if (target == Target::cls) {
    const Vector pooled = (head.pooler * h + head.pooler_bias).array().tanh().matrix();
    logits = head.classifier * pooled + head.classifier_bias;
  } else {
    logits = head.classifier * h + head.classifier_bias;
  }
  require_finite(logits, "classifier");
  if (logits_out != nullptr) {
    *logits_out = logits;
  }
  Matrix probs = softmax_rows(Matrix(logits.transpose()));
  return probs.row(0).transpose();
}

Vector run_encoder(const ModelBundle& bundle, const Matrix& word_emb, std::size_t anchor,
                   Target target, ForwardTrace* trace) {
  const ModelConfig& cfg = bundle.config;
  const Matrix summed = word_emb + positional_embeddings(bundle, static_cast<std::size_t>(word_emb.rows()));
  Matrix x = layer_norm_rows(summed, bundle.embeddings.ln_gamma, bundle.embeddings.ln_beta, cfg.ln_eps);
  if (trace != nullptr) {
    trace->embeddings = x;
    trace->layers.resize(bundle.layers.size());
  }
  for (std::size_t l = 0; l < bundle.layers.size(); ++l) {
    x = run_layer(bundle.layers[l], x, cfg, trace != nullptr ? &trace->layers[l] : nullptr);
  }
  Vector logits;
  Vector probs = classify(bundle, x, anchor, target, &logits);
  if (trace != nullptr) {
    trace->final_hidden = std::move(x);
    trace->logits = std::move(logits);
    trace->class_probs = probs;
    trace->predicted_class = argmax(probs);
  }
  return probs;
}

void check_length(const ModelBundle& bundle, std::size_t length) {
  if (length == 0) {
    throw std::invalid_argument("forward: empty input");
  }
  if (static_cast<int>(length) > bundle.config.max_positions) {
    throw std::invalid_argument("forward: input of " + std::to_string(length) +
                                " tokens exceeds max_positions " +
                                std::to_string(bundle.config.max_positions));
  }
}

}  // namespace

Target parse_target(std::string_view s) {
  if (s == "cls") return Target::cls;
  if (s == "mask") return Target::mask;
  throw std::invalid_argument("unknown target '" + std::string(s) + "' (expected cls|mask)");
}

const char* target_name(Target t) { return t == Target::cls ? "cls" : "mask"; }

std::size_t anchor_position(const EncodedInput& input, const ModelBundle& bundle, Target target) {
  const SpecialTokens& sp = bundle.config.special;
  if (target == Target::cls) {
    if (input.token_ids.empty() || input.token_ids.front() != sp.cls) {
      throw std::invalid_argument("input does not start with the CLS token");
    }
    return 0;
  }
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (input.token_ids[i] == sp.mask) {
      return i;
    }
  }
  throw std::invalid_argument("target=mask but the input contains no [MASK] token");
}

Matrix word_embeddings(const ModelBundle& bundle, const EncodedInput& input) {
  Matrix out(static_cast<Eigen::Index>(input.size()), bundle.config.hidden);
  for (std::size_t i = 0; i < input.size(); ++i) {
    const int id = input.token_ids[i];
    if (id < 0 || id >= bundle.config.vocab_size) {
      throw std::out_of_range("token id " + std::to_string(id) + " outside vocab");
    }
    out.row(static_cast<Eigen::Index>(i)) = bundle.embeddings.word.row(id);
  }
  return out;
}

Matrix positional_embeddings(const ModelBundle& bundle, std::size_t length) {
  check_length(bundle, length);
  const auto j = static_cast<Eigen::Index>(length);
  Matrix out = bundle.embeddings.position.topRows(j);
  out.rowwise() += bundle.embeddings.segment.row(0);
  return out;
}

int argmax(const Vector& v) {
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) {
      best = static_cast<int>(i);
    }
  }
  return best;
}

ForwardTrace forward(const ModelBundle& bundle, const EncodedInput& input, Target target) {
  check_length(bundle, input.size());
  ForwardTrace trace;
  trace.encoded = input;
  trace.target = target;
  trace.anchor = anchor_position(input, bundle, target);
  run_encoder(bundle, word_embeddings(bundle, input), trace.anchor, target, &trace);
  return trace;
}

Vector forward_probs_only(const ModelBundle& bundle, const EncodedInput& input, Target target) {
  check_length(bundle, input.size());
  return run_encoder(bundle, word_embeddings(bundle, input), anchor_position(input, bundle, target),
                     target, nullptr);
}

Vector forward_probs_from_word_embeddings(const ModelBundle& bundle, const Matrix& word_emb,
                                          std::size_t anchor, Target target) {
  check_length(bundle, static_cast<std::size_t>(word_emb.rows()));
  return run_encoder(bundle, word_emb, anchor, target, nullptr);
}

ad::Var forward_on_tape(ad::Tape& tape, const ModelBundle& bundle, ad::Var word_emb,
                        std::size_t anchor, Target target) {
  const ModelConfig& cfg = bundle.config;
  const auto length = static_cast<std::size_t>(word_emb.rows());
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(cfg.head_dim()));
  auto weight = [&](const Matrix& m) { return tape.constant(m); };
  auto bias = [&](const Vector& v) { return tape.constant(v.transpose()); };
  auto linear = [&](ad::Var x, const Matrix& w, const Vector& b) {
    return ad::add_row(ad::matmul_nt(x, weight(w)), bias(b));
  };

  ad::Var x = ad::layer_norm_rows(ad::add(word_emb, tape.constant(positional_embeddings(bundle, length))),
                                  bundle.embeddings.ln_gamma, bundle.embeddings.ln_beta, cfg.ln_eps);
  for (const LayerWeights& w : bundle.layers) {
    std::optional<ad::Var> mha;
    for (const HeadWeights& h : w.heads) {
      const ad::Var q = linear(x, h.query, h.query_bias);
      const ad::Var k = linear(x, h.key, h.key_bias);
      const ad::Var v = linear(x, h.value, h.value_bias);
      const ad::Var a = ad::softmax_rows(ad::scale(ad::matmul_nt(q, k), inv_sqrt_dh));
      const ad::Var head_out = ad::matmul_nt(ad::matmul(a, v), weight(h.output));
      mha = mha ? ad::add(*mha, head_out) : head_out;
    }
    const ad::Var attn = ad::add_row(*mha, bias(w.output_bias));
    const ad::Var y = ad::layer_norm_rows(ad::add(attn, x), w.ln1_gamma, w.ln1_beta, cfg.ln_eps);
    ad::Var hidden = linear(y, w.ffn_in, w.ffn_in_bias);
    hidden = cfg.activation == Activation::gelu ? ad::gelu(hidden) : ad::relu(hidden);
    const ad::Var ffn = linear(hidden, w.ffn_out, w.ffn_out_bias);
    x = ad::layer_norm_rows(ad::add(ffn, y), w.ln2_gamma, w.ln2_beta, cfg.ln_eps);
  }
  ad::Var h = ad::row(x, static_cast<Eigen::Index>(anchor));
  if (target == Target::cls) {
    h = ad::tanh(linear(h, bundle.head.pooler, bundle.head.pooler_bias));
  }
  const ad::Var logits = linear(h, bundle.head.classifier, bundle.head.classifier_bias);
  return ad::softmax_rows(logits);
}

}  // namespace alti
