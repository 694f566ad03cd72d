#include "alti/evaluation.hpp"

#include "alti/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <cctype>

namespace alti {

BinSet BinSet::parse(std::string_view csv) {
  BinSet out;
  out.percentages.clear();
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = csv.find(',', start);
    std::string item(csv.substr(start, comma == std::string_view::npos ? csv.size() - start : comma - start));
    item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }),
               item.end());
    if (!item.empty()) {
      std::size_t used = 0;
      int value = 0;
      try {
        value = std::stoi(item, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != item.size()) {
        throw std::invalid_argument("bins: '" + item + "' is not an integer");
      }
      out.percentages.push_back(value);
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  std::sort(out.percentages.begin(), out.percentages.end());
  out.validate();
  return out;
}

void BinSet::validate() const {
  if (percentages.empty()) {
    throw std::invalid_argument("bins: empty bin set");
  }
  for (std::size_t i = 0; i < percentages.size(); ++i) {
    const int p = percentages[i];
    if (p < 0 || p > 100) {
      throw std::invalid_argument("bins: " + std::to_string(p) + " outside [0, 100]");
    }
    if (i > 0 && percentages[i - 1] >= p) {
      throw std::invalid_argument("bins: values must be unique and sorted");
    }
  }
}

std::vector<std::size_t> ranked_candidates(const Vector& scores, const std::vector<bool>& special_mask) {
  if (static_cast<std::size_t>(scores.size()) != special_mask.size()) {
    throw ShapeError("ranked_candidates: " + std::to_string(scores.size()) + " scores for " +
                     std::to_string(special_mask.size()) + " tokens");
  }
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < special_mask.size(); ++i) {
    if (!special_mask[i]) idx.push_back(i);
  }
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return scores(static_cast<Eigen::Index>(a)) > scores(static_cast<Eigen::Index>(b));
  });
  return idx;
}

namespace {

std::size_t count_for_percentage(int k_pct, std::size_t n) {
  if (k_pct < 0 || k_pct > 100) {
    throw std::invalid_argument("top_k_tokens: k_pct " + std::to_string(k_pct) + " outside [0, 100]");
  }
  // ceil(k * n / 100) in integer arithmetic
  return (static_cast<std::size_t>(k_pct) * n + 99) / 100;
}

double class_prob(const ModelBundle& bundle, const EncodedInput& input, Target target, int cls) {
  return forward_probs_only(bundle, input, target)(cls);
}

}  // namespace

std::vector<std::size_t> top_k_tokens(const Vector& scores, int k_pct, const std::vector<bool>& special_mask) {
  std::vector<std::size_t> ranked = ranked_candidates(scores, special_mask);
  ranked.resize(count_for_percentage(k_pct, ranked.size()));
  return ranked;
}

SentenceFaithfulness faithfulness(const ModelBundle& bundle, const EncodedInput& input,
                                  const AttributionVector& attr, const BinSet& bins, Target target) {
  bins.validate();
  const Vector probs = forward_probs_only(bundle, input, target);
  SentenceFaithfulness out;
  out.predicted_class = argmax(probs);
  out.original_prob = probs(out.predicted_class);
  const double denom = static_cast<double>(bins.percentages.size() + 1);
  for (const int k : bins.percentages) {
    const auto top = top_k_tokens(attr.scores, k, input.special_mask);
    const double removed = class_prob(bundle, remove_positions(input, top), target, out.predicted_class);
    const double kept = class_prob(bundle, keep_positions(input, top), target, out.predicted_class);
    out.comp_deltas.push_back(out.original_prob - removed);
    out.suff_deltas.push_back(out.original_prob - kept);
  }
  out.comp = std::accumulate(out.comp_deltas.begin(), out.comp_deltas.end(), 0.0) / denom;
  out.suff = std::accumulate(out.suff_deltas.begin(), out.suff_deltas.end(), 0.0) / denom;
  return out;
}

double comprehensiveness(const ModelBundle& bundle, const EncodedInput& input, const AttributionVector& attr,
                         const BinSet& bins, Target target) {
  return faithfulness(bundle, input, attr, bins, target).comp;
}

double sufficiency(const ModelBundle& bundle, const EncodedInput& input, const AttributionVector& attr,
                   const BinSet& bins, Target target) {
  return faithfulness(bundle, input, attr, bins, target).suff;
}

FaithfulnessReport::FaithfulnessReport(const BinSet& b)
    : bins(b.percentages), comp_deltas(b.percentages.size(), 0.0), suff_deltas(b.percentages.size(), 0.0) {}

void FaithfulnessReport::add(const SentenceFaithfulness& s) {
  if (s.comp_deltas.size() != bins.size()) {
    throw ShapeError("FaithfulnessReport: sentence has " + std::to_string(s.comp_deltas.size()) +
                     " bins, report has " + std::to_string(bins.size()));
  }
  comp += s.comp;
  suff += s.suff;
  for (std::size_t b = 0; b < bins.size(); ++b) {
    comp_deltas[b] += s.comp_deltas[b];
    suff_deltas[b] += s.suff_deltas[b];
  }
  ++n_sentences;
}

void FaithfulnessReport::merge(const FaithfulnessReport& other) {
  if (other.bins != bins) {
    throw std::invalid_argument("FaithfulnessReport: cannot merge reports with different bins");
  }
  comp += other.comp;
  suff += other.suff;
  for (std::size_t b = 0; b < bins.size(); ++b) {
    comp_deltas[b] += other.comp_deltas[b];
    suff_deltas[b] += other.suff_deltas[b];
  }
  n_sentences += other.n_sentences;
}

FaithfulnessReport FaithfulnessReport::finished() const {
  FaithfulnessReport out = *this;
  if (n_sentences == 0) return out;
  const double n = static_cast<double>(n_sentences);
  out.comp /= n;
  out.suff /= n;
  for (auto& v : out.comp_deltas) v /= n;
  for (auto& v : out.suff_deltas) v /= n;
  return out;
}

std::vector<double> probability_drop_curve(const ModelBundle& bundle, const EncodedInput& input,
                                           const AttributionVector& attr, int max_removed, Target target) {
  const auto ranked = ranked_candidates(attr.scores, input.special_mask);
  if (max_removed < 0 || static_cast<std::size_t>(max_removed) > ranked.size()) {
    throw std::invalid_argument("probability_drop_curve: max_removed " + std::to_string(max_removed) +
                                " outside [0, " + std::to_string(ranked.size()) + "]");
  }
  const Vector probs = forward_probs_only(bundle, input, target);
  const int cls = argmax(probs);
  std::vector<double> curve{probs(cls)};
  for (int t = 1; t <= max_removed; ++t) {
    const std::span<const std::size_t> top(ranked.data(), static_cast<std::size_t>(t));
    curve.push_back(class_prob(bundle, remove_positions(input, top), target, cls));
  }
  return curve;
}

double jaccard_index(std::vector<std::size_t> a, std::vector<std::size_t> b) {
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  if (a.empty() && b.empty()) return 1.0;
  std::vector<std::size_t> inter;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
  const std::size_t uni = a.size() + b.size() - inter.size();
  return static_cast<double>(inter.size()) / static_cast<double>(uni);
}

double jaccard_top25(const Vector& a, const Vector& b, const std::vector<bool>& special_mask) {
  if (a.size() != b.size()) {
    throw ShapeError("jaccard_top25: lengths " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()) + " differ");
  }
  return jaccard_index(top_k_tokens(a, 25, special_mask), top_k_tokens(b, 25, special_mask));
}

double jaccard_top25(const AttributionVector& a, const AttributionVector& b,
                     const std::vector<bool>& special_mask) {
  return jaccard_top25(a.scores, b.scores, special_mask);
}

Vector average_ranks(const Vector& v) {
  const auto n = static_cast<std::size_t>(v.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return v(static_cast<Eigen::Index>(a)) < v(static_cast<Eigen::Index>(b));
  });
  Vector ranks(v.size());
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v(static_cast<Eigen::Index>(order[j + 1])) == v(static_cast<Eigen::Index>(order[i]))) {
      ++j;
    }
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks(static_cast<Eigen::Index>(order[k])) = rank;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> spearman(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw ShapeError("spearman: lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()) +
                     " differ");
  }
  if (a.size() < 2) {
    throw ShapeError("spearman: need at least 2 entries");
  }
  const Vector ra = average_ranks(a);
  const Vector rb = average_ranks(b);
  const Vector ca = ra.array() - ra.mean();
  const Vector cb = rb.array() - rb.mean();
  const double sa = ca.squaredNorm();
  const double sb = cb.squaredNorm();
  if (sa == 0.0 || sb == 0.0) return std::nullopt;
  return ca.dot(cb) / std::sqrt(sa * sb);
}

Vector non_special(const Vector& scores, const std::vector<bool>& special_mask) {
  if (static_cast<std::size_t>(scores.size()) != special_mask.size()) {
    throw ShapeError("non_special: length mismatch");
  }
  std::vector<double> kept;
  for (std::size_t i = 0; i < special_mask.size(); ++i) {
    if (!special_mask[i]) kept.push_back(scores(static_cast<Eigen::Index>(i)));
  }
  return Eigen::Map<const Vector>(kept.data(), static_cast<Eigen::Index>(kept.size()));
}

AnisotropyPairs sample_pairs(const std::vector<ForwardTrace>& traces, const AnisotropyOptions& options) {
  if (options.within_sentence ? traces.empty() : traces.size() < 2) {
    throw std::invalid_argument("anisotropy: need at least two sentences");
  }
  std::mt19937_64 rng(options.seed);
  auto uniform = [&rng](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  auto draw_sentences = [&]() -> std::pair<std::size_t, std::size_t> {
    const std::size_t a = uniform(traces.size());
    if (options.within_sentence) return {a, a};
    std::size_t b = uniform(traces.size() - 1);
    if (b >= a) ++b;
    return {a, b};
  };
  // Two distinct members within one sentence: second index skips the first.
  auto distinct = [&](std::size_t n) -> std::pair<std::size_t, std::size_t> {
    if (n < 2) {
      throw std::invalid_argument("anisotropy: within-sentence sampling needs at least two vectors");
    }
    const std::size_t a = uniform(n);
    std::size_t b = uniform(n - 1);
    if (b >= a) ++b;
    return {a, b};
  };

  AnisotropyPairs out;
  for (std::size_t s = 0; s < options.samples; ++s) {
    const auto [sa, sb] = draw_sentences();
    const std::size_t ja = traces[sa].encoded.size();
    const std::size_t jb = traces[sb].encoded.size();
    if (options.within_sentence) {
      const auto [ra, rb] = distinct(ja);
      out.output.push_back({{sa, ra, 0}, {sb, rb, 0}});
      const auto [ta, tb] = distinct(ja * ja);
      out.transformed.push_back({{sa, ta / ja, ta % ja}, {sb, tb / ja, tb % ja}});
    } else {
      out.output.push_back({{sa, uniform(ja), 0}, {sb, uniform(jb), 0}});
      const std::size_t ta = uniform(ja * ja);
      const std::size_t tb = uniform(jb * jb);
      out.transformed.push_back({{sa, ta / ja, ta % ja}, {sb, tb / jb, tb % jb}});
    }
  }
  return out;
}

double cosine(const Eigen::Ref<const RowVector>& a, const Eigen::Ref<const RowVector>& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

std::vector<LayerAnisotropy> anisotropy_profile(const ModelBundle& bundle, const std::vector<ForwardTrace>& traces,
                                                const AnisotropyOptions& options) {
  const AnisotropyPairs pairs = sample_pairs(traces, options);
  const std::size_t num_layers = bundle.layers.size();
  std::vector<LayerAnisotropy> out;
  for (std::size_t l = 0; l < num_layers; ++l) {
    std::vector<TransformedSet> sets;
    sets.reserve(traces.size());
    for (const auto& t : traces) {
      sets.push_back(transformed_vectors(t.layers.at(l), bundle.layers[l]));
    }
    LayerAnisotropy layer{static_cast<int>(l) + 1, 0.0, 0.0};
    for (const auto& [a, b] : pairs.output) {
      layer.output_cos += cosine(traces[a.sentence].layers[l].attn_block_out.row(static_cast<Eigen::Index>(a.row)),
                                 traces[b.sentence].layers[l].attn_block_out.row(static_cast<Eigen::Index>(b.row)));
    }
    for (const auto& [a, b] : pairs.transformed) {
      layer.transformed_cos += cosine(sets[a.sentence].T[a.row].row(static_cast<Eigen::Index>(a.source)),
                                      sets[b.sentence].T[b.row].row(static_cast<Eigen::Index>(b.source)));
    }
    if (!pairs.output.empty()) {
      layer.output_cos /= static_cast<double>(pairs.output.size());
      layer.transformed_cos /= static_cast<double>(pairs.transformed.size());
    }
    out.push_back(layer);
  }
  return out;
}

}  // namespace alti
