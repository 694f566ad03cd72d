#include "alti/synthetic.hpp"

#include <algorithm>
#include <random>

namespace alti {
namespace {

constexpr int kHidden = 16;
constexpr int kHalf = kHidden / 2;

// Feature f is stored as (+v, -v) on dims (f, f + 8). Filler identity uses
// the remaining pairs.
constexpr int kKeywordDim = 0;
constexpr int kSentimentDim = 1;
constexpr int kDistractorDim = 2;
constexpr int kFirstFillerDim = 3;

constexpr double kFlag = 2.0;
constexpr double kSentiment = 1.5;

void set_pair(Eigen::Ref<RowVector> row, int dim, double value) {
  row(dim) = value;
  row(dim + kHalf) = -value;
}

/// Zero-mean filler noise on the free dims, scaled so the whole row has norm sqrt(d).
void fill_identity(Eigen::Ref<RowVector> row, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  RowVector noise = RowVector::Zero(kHidden);
  for (int k = kFirstFillerDim; k < kHalf; ++k) {
    noise(k) = normal(rng);
    noise(k + kHalf) = normal(rng);
  }
  noise.array() -= noise.sum() / (2.0 * (kHalf - kFirstFillerDim));
  for (int k = 0; k < kFirstFillerDim; ++k) {
    noise(k) = 0.0;
    noise(k + kHalf) = 0.0;
  }
  const double budget = static_cast<double>(kHidden) - row.squaredNorm();
  row += noise * std::sqrt(budget) / noise.norm();
}

RowVector pair_direction(int dim) {
  RowVector v = RowVector::Zero(kHidden);
  set_pair(v, dim, 0.5);
  return v;
}

}  // namespace

const std::vector<std::string>& planted_keywords() {
  static const std::vector<std::string> words = {"bad", "good"};
  return words;
}

ModelBundle planted_keyword_bundle(std::uint64_t seed) {
  ModelConfig cfg = fixture_config(2, kHidden, 2, kHidden);
  ModelBundle b = make_zero_bundle(cfg, fixture_vocab());
  std::mt19937_64 rng(seed);

  for (int id = 0; id < cfg.vocab_size; ++id) {
    auto row = b.embeddings.word.row(id);
    row.setZero();
    const std::string& tok = b.vocab.token(id);
    if (tok == "good" || tok == "bad") {
      set_pair(row, kKeywordDim, kFlag);
      set_pair(row, kSentimentDim, tok == "good" ? kSentiment : -kSentiment);
    } else if (tok == kPlantedDistractor) {
      set_pair(row, kDistractorDim, kFlag);
    }
    fill_identity(row, rng);
  }

  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(cfg.head_dim()));
  LayerWeights& layer = b.layers[0];

  // Head 0: score 12 on the distractor, nothing carried forward.
  HeadWeights& distractor = layer.heads[0];
  distractor.query_bias(0) = 1.0;
  distractor.key.row(0) = pair_direction(kDistractorDim) * (12.0 / (kFlag * inv_sqrt_dh));

  // Head 1: score 4 on the keyword, carries the sentiment pair.
  HeadWeights& keyword = layer.heads[1];
  keyword.query_bias(0) = 1.0;
  keyword.key.row(0) = pair_direction(kKeywordDim) * (4.0 / (kFlag * inv_sqrt_dh));
  keyword.value.row(0) = pair_direction(kSentimentDim);
  keyword.output.col(0) = 4.0 * pair_direction(kSentimentDim).transpose();

  b.head.pooler.row(0) = 2.0 * pair_direction(kSentimentDim);
  b.head.classifier(0, 0) = -4.0;
  b.head.classifier(1, 0) = 4.0;
  b.validate();
  return b;
}

std::vector<Example> planted_keyword_dataset(std::size_t count, std::uint64_t seed) {
  std::vector<std::string> fillers;
  for (const auto& w : fixture_words()) {
    if (std::find(planted_keywords().begin(), planted_keywords().end(), w) == planted_keywords().end()) {
      fillers.push_back(w);
    }
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> len(6, 16);
  std::uniform_int_distribution<std::size_t> pick(0, fillers.size() - 1);
  std::uniform_int_distribution<int> coin(0, 1);

  std::vector<Example> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    const int label = coin(rng);
    std::vector<std::string> words;
    const int n = len(rng);
    for (int w = 0; w < n; ++w) words.push_back(fillers[pick(rng)]);
    words.push_back(planted_keywords()[static_cast<std::size_t>(label)]);
    words.emplace_back(kPlantedDistractor);
    std::shuffle(words.begin(), words.end(), rng);
    std::string text;
    for (const auto& w : words) {
      if (!text.empty()) text += ' ';
      text += w;
    }
    out.push_back({std::move(text), label});
  }
  return out;
}

std::optional<std::size_t> keyword_position(const EncodedInput& input) {
  for (std::size_t i = 0; i < input.size(); ++i) {
    const auto& kw = planted_keywords();
    if (!input.special_mask[i] && std::find(kw.begin(), kw.end(), input.token_strings[i]) != kw.end()) {
      return i;
    }
  }
  return std::nullopt;
}

}  // namespace alti
