#pragma once

#include "alti/aggregation.hpp"

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace alti {

/// Percentages of tokens removed (comprehensiveness) or kept (sufficiency).
struct BinSet {
  std::vector<int> percentages{0, 5, 10, 20, 50};

  /// "0,5,10" -> {0,5,10}. Throws std::invalid_argument on bad, duplicate or
  /// out-of-range values; the result is sorted.
  static BinSet parse(std::string_view csv);
  void validate() const;
};

/// Non-special positions sorted by descending score, lower index first on ties.
std::vector<std::size_t> ranked_candidates(const Vector& scores, const std::vector<bool>& special_mask);

/// The ceil(k_pct/100 * n) best non-special positions, returned in rank order.
std::vector<std::size_t> top_k_tokens(const Vector& scores, int k_pct, const std::vector<bool>& special_mask);

/// Per-sentence erasure results. Deltas are f(x) - f(ablated) for each bin.
struct SentenceFaithfulness {
  double comp = 0.0;
  double suff = 0.0;
  std::vector<double> comp_deltas;
  std::vector<double> suff_deltas;
  double original_prob = 0.0;
  int predicted_class = 0;
};

/// Both metrics from one shared forward pass of the unablated input. f is the
/// probability of the class predicted on the full input.
SentenceFaithfulness faithfulness(const ModelBundle& bundle, const EncodedInput& input,
                                  const AttributionVector& attr, const BinSet& bins,
                                  Target target = Target::cls);

double comprehensiveness(const ModelBundle& bundle, const EncodedInput& input,
                         const AttributionVector& attr, const BinSet& bins, Target target = Target::cls);

double sufficiency(const ModelBundle& bundle, const EncodedInput& input, const AttributionVector& attr,
                   const BinSet& bins, Target target = Target::cls);

/// Dataset-level means; merge() sums, finish() divides by n_sentences.
struct FaithfulnessReport {
  std::vector<int> bins;
  double comp = 0.0;
  double suff = 0.0;
  std::vector<double> comp_deltas;
  std::vector<double> suff_deltas;
  std::size_t n_sentences = 0;

  explicit FaithfulnessReport(const BinSet& b = {});
  void add(const SentenceFaithfulness& s);
  void merge(const FaithfulnessReport& other);
  /// Report with means in place of sums.
  FaithfulnessReport finished() const;
};

/// f(x) followed by f after cumulatively deleting the top-1, top-2, ... tokens;
/// max_removed + 1 entries. Throws std::invalid_argument when max_removed exceeds
/// the number of non-special tokens.
std::vector<double> probability_drop_curve(const ModelBundle& bundle, const EncodedInput& input,
                                           const AttributionVector& attr, int max_removed,
                                           Target target = Target::cls);

/// |a ∩ b| / |a ∪ b|; two empty sets give 1.
double jaccard_index(std::vector<std::size_t> a, std::vector<std::size_t> b);

/// Jaccard index of the two top-25% sets. Throws ShapeError on length mismatch.
double jaccard_top25(const Vector& a, const Vector& b, const std::vector<bool>& special_mask);
double jaccard_top25(const AttributionVector& a, const AttributionVector& b,
                     const std::vector<bool>& special_mask);

/// Average ranks (1-based), ties share the mean of their positions.
Vector average_ranks(const Vector& v);

/// Spearman rank correlation; nullopt when either vector is constant.
/// Throws ShapeError on length mismatch or fewer than 2 entries.
std::optional<double> spearman(const Vector& a, const Vector& b);

/// Restriction of a score vector to non-special positions.
Vector non_special(const Vector& scores, const std::vector<bool>& special_mask);

struct AnisotropyOptions {
  std::size_t samples = 500;
  std::uint64_t seed = 0;
  /// Draw both members of a pair from the same sentence instead of two different ones.
  bool within_sentence = false;
};

/// Row `row` of sentence `sentence`; for transformed vectors `row` is T_i and
/// `source` selects the x_j term.
struct VectorRef {
  std::size_t sentence = 0;
  std::size_t row = 0;
  std::size_t source = 0;
};

struct AnisotropyPairs {
  std::vector<std::pair<VectorRef, VectorRef>> output;
  std::vector<std::pair<VectorRef, VectorRef>> transformed;
};

/// Deterministic pair sampling shared by every layer. Throws std::invalid_argument
/// when fewer than two traces are given (or, within-sentence, a sentence has one token).
AnisotropyPairs sample_pairs(const std::vector<ForwardTrace>& traces, const AnisotropyOptions& options);

struct LayerAnisotropy {
  int layer = 0;
  double output_cos = 0.0;
  double transformed_cos = 0.0;
};

/// Cosine of two rows; 0 when either is the zero vector.
double cosine(const Eigen::Ref<const RowVector>& a, const Eigen::Ref<const RowVector>& b);

/// Mean cosine per layer over the sampled attn_block_out rows and T_i(x_j) rows.
std::vector<LayerAnisotropy> anisotropy_profile(const ModelBundle& bundle,
                                                const std::vector<ForwardTrace>& traces,
                                                const AnisotropyOptions& options);

}  // namespace alti
