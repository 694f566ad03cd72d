#pragma once

#include "alti/evaluation.hpp"
#include "alti/methods.hpp"

#include <vector>

namespace alti {

/// Mean and sample standard deviation across seeds (sd = 0 for one seed).
struct SeedStat {
  double mean = 0.0;
  double sd = 0.0;
};

SeedStat seed_stat(const std::vector<double>& values);

struct AblationRow {
  std::string method;
  SeedStat comp;
  SeedStat suff;
};

struct AblationCurve {
  std::string method;
  /// Entry t: mean over sentences of f(x) - f(x without the top-t tokens).
  std::vector<SeedStat> drop;
};

struct AblationReport {
  std::vector<int> bins;
  std::size_t n_seeds = 0;
  std::size_t n_sentences = 0;
  int max_removed = 0;
  std::vector<AblationRow> l2_vs_norms;  // alti-l2, norms
  std::vector<AblationRow> l1_vs_l2;     // alti, alti-l2
  std::vector<AblationCurve> ln2_curves; // alti, alti+ln2, globenc
  /// Mean |alti - alti+ln2| per token, averaged over sentences then seeds.
  SeedStat ln2_mean_abs_diff;
};

struct AblationOptions {
  BinSet bins;
  int max_removed = 10;
  Target target = Target::cls;
};

/// Runs every ablation over each bundle (one per seed) on the same sentences.
/// Bundles must share a config. Sentences shorter than max_removed candidates
/// hold their last curve value for the remaining steps.
AblationReport run_ablation(const std::vector<const ModelBundle*>& bundles, const std::vector<std::string>& texts,
                            const AblationOptions& options);

}  // namespace alti
