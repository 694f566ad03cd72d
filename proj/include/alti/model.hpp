#pragma once

#include "alti/tensor.hpp"
#include "alti/vocab.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace alti {

enum class Activation { gelu, relu };

struct SpecialTokens {
  int cls = 2;
  int sep = 3;
  int mask = 4;
  int unk = 1;
  int pad = 0;

  bool operator==(const SpecialTokens&) const = default;
};

struct ModelConfig {
  int num_layers = 2;
  int hidden = 8;
  int heads = 2;
  int ffn_dim = 16;
  int vocab_size = 0;
  int max_positions = 64;
  int type_vocab_size = 1;
  int num_classes = 2;
  double ln_eps = 1e-12;
  Activation activation = Activation::gelu;
  bool lowercase = true;
  SpecialTokens special;

  int head_dim() const { return heads > 0 ? hidden / heads : 0; }

  bool operator==(const ModelConfig&) const = default;

  /// Throws BundleError describing the first violated invariant.
  void validate() const;
};

/// Per-head projections. Shapes follow y = W x: query/key/value are [d_h x d],
/// output is the column block W_O^h of the output projection, [d x d_h].
struct HeadWeights {
  Matrix query;
  Vector query_bias;
  Matrix key;
  Vector key_bias;
  Matrix value;
  Vector value_bias;
  Matrix output;
};

struct LayerWeights {
  std::vector<HeadWeights> heads;
  Vector output_bias;
  Vector ln1_gamma;
  Vector ln1_beta;
  Matrix ffn_in;    // [ffn x d]
  Vector ffn_in_bias;
  Matrix ffn_out;   // [d x ffn]
  Vector ffn_out_bias;
  Vector ln2_gamma;
  Vector ln2_beta;
};

struct EmbeddingWeights {
  Matrix word;      // [vocab x d]
  Matrix position;  // [max_positions x d]
  Matrix segment;   // [type_vocab_size x d]
  Vector ln_gamma;
  Vector ln_beta;
};

/// Classifier head. For CLS readout: tanh(pooler * h + b) then classifier; for MASK
/// readout the classifier is applied directly to the hidden state.
struct ClassifierWeights {
  Matrix pooler;  // [d x d]
  Vector pooler_bias;
  Matrix classifier;  // [num_classes x d]
  Vector classifier_bias;
};

struct ModelBundle {
  ModelConfig config;
  Vocab vocab;
  EmbeddingWeights embeddings;
  std::vector<LayerWeights> layers;
  ClassifierWeights head;

  /// Throws BundleError naming the first tensor whose shape disagrees with config.
  void validate() const;
};

class BundleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bundle with every tensor sized for `config` and zero-filled, LN gamma = 1.
ModelBundle make_zero_bundle(const ModelConfig& config, Vocab vocab);

/// Reads manifest.json + tensors.bin + vocab.txt. Weights are float32 on disk.
ModelBundle load_bundle(const std::filesystem::path& dir);

/// Writes the bundle directory, creating it if needed. Values are rounded to float32.
void save_bundle(const ModelBundle& bundle, const std::filesystem::path& dir);

/// Deterministic random bundle: weights ~ N(0, 0.02^2), LN gamma = 1, beta = 0.
/// config.vocab_size must be at least fixture_vocab().size(); extra slots are padded
/// with "[unusedN]" entries.
ModelBundle generate_fixture_bundle(const ModelConfig& config, std::uint64_t seed);

/// Config of the given size whose vocab_size matches fixture_vocab().
ModelConfig fixture_config(int num_layers, int hidden, int heads, int ffn_dim);

/// Visits every (name, tensor) pair in canonical manifest order. `fn` must accept
/// both Matrix& and Vector& (const-qualified when the bundle is const).
template <typename Bundle, typename Fn>
void for_each_tensor(Bundle& bundle, Fn&& fn) {
  fn("embeddings.word", bundle.embeddings.word);
  fn("embeddings.position", bundle.embeddings.position);
  fn("embeddings.segment", bundle.embeddings.segment);
  fn("embeddings.ln.gamma", bundle.embeddings.ln_gamma);
  fn("embeddings.ln.beta", bundle.embeddings.ln_beta);
  for (std::size_t l = 0; l < bundle.layers.size(); ++l) {
    auto& layer = bundle.layers[l];
    const std::string prefix = "layers." + std::to_string(l) + ".";
    for (std::size_t h = 0; h < layer.heads.size(); ++h) {
      auto& head = layer.heads[h];
      const std::string hp = prefix + "attention.heads." + std::to_string(h) + ".";
      fn(hp + "query.weight", head.query);
      fn(hp + "query.bias", head.query_bias);
      fn(hp + "key.weight", head.key);
      fn(hp + "key.bias", head.key_bias);
      fn(hp + "value.weight", head.value);
      fn(hp + "value.bias", head.value_bias);
      fn(hp + "output.weight", head.output);
    }
    fn(prefix + "attention.output.bias", layer.output_bias);
    fn(prefix + "ln1.gamma", layer.ln1_gamma);
    fn(prefix + "ln1.beta", layer.ln1_beta);
    fn(prefix + "ffn.in.weight", layer.ffn_in);
    fn(prefix + "ffn.in.bias", layer.ffn_in_bias);
    fn(prefix + "ffn.out.weight", layer.ffn_out);
    fn(prefix + "ffn.out.bias", layer.ffn_out_bias);
    fn(prefix + "ln2.gamma", layer.ln2_gamma);
    fn(prefix + "ln2.beta", layer.ln2_beta);
  }
  fn("head.pooler.weight", bundle.head.pooler);
  fn("head.pooler.bias", bundle.head.pooler_bias);
  fn("head.classifier.weight", bundle.head.classifier);
  fn("head.classifier.bias", bundle.head.classifier_bias);
}

}  // namespace alti
