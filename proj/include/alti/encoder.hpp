#pragma once

#include "alti/autodiff.hpp"
#include "alti/model.hpp"
#include "alti/tokenizer.hpp"

#include <optional>

namespace alti {

/// Which final hidden state feeds the classifier and anchors attributions.
enum class Target { cls, mask };

Target parse_target(std::string_view s);
const char* target_name(Target t);

/// Everything one post-LN layer computed for one sentence.
struct LayerTrace {
  Matrix input;        // X^{l-1}            [J x d]
  Tensor3 attention;   // A^{l,h}            H x [J x J]
  Matrix mha_out;      // x_hat (incl. b_O)  [J x d]
  Matrix pre_ln1;      // x_hat + x          [J x d]
  Vector sigma1;       // sqrt(var + eps) of pre_ln1 rows
  Matrix attn_block_out;  // Y = LN1(pre_ln1)
  Matrix ffn_out;      // FFN(Y)             [J x d]
  Matrix pre_ln2;      // ffn_out + Y
  Vector sigma2;
  Matrix layer_out;    // LN2(pre_ln2)
};

struct ForwardTrace {
  EncodedInput encoded;
  Target target = Target::cls;
  std::size_t anchor = 0;  // position read by the classifier
  Matrix embeddings;       // X^0, after embedding layer norm
  std::vector<LayerTrace> layers;
  Matrix final_hidden;
  Vector logits;
  Vector class_probs;
  int predicted_class = 0;
};

/// Position the classifier reads: 0 for CLS, first [MASK] for mask. Throws
/// std::invalid_argument when the anchor is missing.
std::size_t anchor_position(const EncodedInput& input, const ModelBundle& bundle, Target target);

/// Word-embedding rows for the input ids, [J x d].
Matrix word_embeddings(const ModelBundle& bundle, const EncodedInput& input);

/// Position + segment-0 embeddings for a sequence of length J, [J x d].
Matrix positional_embeddings(const ModelBundle& bundle, std::size_t length);

/// Instrumented forward pass.
ForwardTrace forward(const ModelBundle& bundle, const EncodedInput& input,
                     Target target = Target::cls);

/// Same class probabilities as forward(), bit for bit, without keeping a trace.
Vector forward_probs_only(const ModelBundle& bundle, const EncodedInput& input,
                          Target target = Target::cls);

/// Forward pass from explicit word embeddings (used for gradients and IG paths).
Vector forward_probs_from_word_embeddings(const ModelBundle& bundle, const Matrix& word_emb,
                                          std::size_t anchor, Target target);

/// Lowest index among maximal entries.
int argmax(const Vector& v);

/// Records the forward pass on `tape` starting from the word-embedding leaf and
/// returns the [1 x num_classes] probability row.
ad::Var forward_on_tape(ad::Tape& tape, const ModelBundle& bundle, ad::Var word_emb,
                        std::size_t anchor, Target target);

}  // namespace alti
