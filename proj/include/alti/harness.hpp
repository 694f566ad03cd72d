#pragma once

#include "alti/evaluation.hpp"
#include "alti/methods.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace alti {

/// Calls fn(i) for i in [0, n) on up to `jobs` threads. The first exception thrown
/// by any call is rethrown after all workers stop.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

struct MethodEvaluation {
  Method method;
  std::string name;
  FaithfulnessReport report;                 // means over sentences
  std::vector<SentenceFaithfulness> detail;  // per sentence, input order
};

/// Faithfulness of each method over the inputs. Sentence results are merged in
/// input order, so the output does not depend on `jobs`.
std::vector<MethodEvaluation> evaluate_dataset(const ModelBundle& bundle, const std::vector<EncodedInput>& inputs,
                                               const std::vector<Method>& methods, const AttributionOptions& options,
                                               const BinSet& bins, int jobs = 1);

struct PairAgreement {
  std::string method;
  std::size_t bundle_a = 0;
  std::size_t bundle_b = 0;
  std::vector<double> jaccard;                 // per sentence
  std::vector<std::optional<double>> spearman; // per sentence, nullopt when undefined
};

/// Agreement between attributions of every bundle pair on the same texts. Spearman
/// is taken over non-special tokens. Throws std::invalid_argument for fewer than two
/// bundles or mismatched configs/vocabularies.
std::vector<PairAgreement> run_robustness(const std::vector<const ModelBundle*>& bundles,
                                          const std::vector<std::string>& texts, const std::vector<Method>& methods,
                                          const AttributionOptions& options, int jobs = 1);

}  // namespace alti
