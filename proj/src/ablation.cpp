#include "alti/ablation.hpp"

#include <cmath>

namespace alti {

SeedStat seed_stat(const std::vector<double>& values) {
  SeedStat s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  for (const double v : values) s.mean += v;
  s.mean /= n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (const double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

namespace {

struct Variant {
  std::string name;
  Method method;
  AttributionOptions options;
};

/// Per-seed means for one bundle.
struct SeedResult {
  std::vector<FaithfulnessReport> faithfulness;  // aligned with table variants
  std::vector<std::vector<double>> curves;       // aligned with curve variants
  double ln2_diff = 0.0;
};

std::vector<Variant> table_variants(Target target) {
  AttributionOptions l1;
  l1.target = target;
  AttributionOptions l2 = l1;
  l2.alti_norm = Norm::l2;
  return {{"alti", Method::alti, l1}, {"alti-l2", Method::alti_l2, l2}, {"norms", Method::norms, l1}};
}

std::vector<Variant> curve_variants(Target target) {
  AttributionOptions plain;
  plain.target = target;
  AttributionOptions ln2 = plain;
  ln2.ln2 = true;
  return {{"alti", Method::alti, plain}, {"alti+ln2", Method::alti, ln2}, {"globenc", Method::globenc, plain}};
}

SeedResult run_seed(const ModelBundle& bundle, const std::vector<std::string>& texts,
                    const AblationOptions& options) {
  const auto tv = table_variants(options.target);
  const auto cv = curve_variants(options.target);
  SeedResult r;
  r.faithfulness.assign(tv.size(), FaithfulnessReport(options.bins));
  r.curves.assign(cv.size(), std::vector<double>(static_cast<std::size_t>(options.max_removed) + 1, 0.0));

  for (const auto& text : texts) {
    const EncodedInput input = tokenize(text, bundle);
    const ForwardTrace trace = forward(bundle, input, options.target);
    for (std::size_t v = 0; v < tv.size(); ++v) {
      const auto attr = attribute(bundle, trace, tv[v].method, tv[v].options);
      r.faithfulness[v].add(faithfulness(bundle, input, attr, options.bins, options.target));
    }
    std::vector<AttributionVector> curve_attrs;
    for (std::size_t v = 0; v < cv.size(); ++v) {
      curve_attrs.push_back(attribute(bundle, trace, cv[v].method, cv[v].options));
      const auto candidates = ranked_candidates(curve_attrs.back().scores, input.special_mask).size();
      const int steps = std::min(options.max_removed, static_cast<int>(candidates));
      const auto curve = probability_drop_curve(bundle, input, curve_attrs.back(), steps, options.target);
      for (int t = 0; t <= options.max_removed; ++t) {
        const double ft = curve[static_cast<std::size_t>(std::min(t, steps))];
        r.curves[v][static_cast<std::size_t>(t)] += curve.front() - ft;
      }
    }
    r.ln2_diff += (curve_attrs[0].scores - curve_attrs[1].scores).cwiseAbs().mean();
  }
  const double n = static_cast<double>(texts.size());
  for (auto& c : r.curves) {
    for (auto& v : c) v /= n;
  }
  r.ln2_diff /= n;
  for (auto& f : r.faithfulness) f = f.finished();
  return r;
}

AblationRow make_row(const std::string& name, const std::vector<SeedResult>& seeds, std::size_t variant) {
  std::vector<double> comp;
  std::vector<double> suff;
  for (const auto& s : seeds) {
    comp.push_back(s.faithfulness[variant].comp);
    suff.push_back(s.faithfulness[variant].suff);
  }
  return {name, seed_stat(comp), seed_stat(suff)};
}

}  // namespace

AblationReport run_ablation(const std::vector<const ModelBundle*>& bundles, const std::vector<std::string>& texts,
                            const AblationOptions& options) {
  if (bundles.empty()) {
    throw std::invalid_argument("ablation: no bundles");
  }
  if (texts.empty()) {
    throw std::invalid_argument("ablation: empty dataset");
  }
  if (options.max_removed < 0) {
    throw std::invalid_argument("ablation: max_removed must be >= 0");
  }
  options.bins.validate();
  for (const ModelBundle* b : bundles) {
    if (!(b->config == bundles.front()->config)) {
      throw std::invalid_argument("ablation: bundles have different configs");
    }
  }

  std::vector<SeedResult> seeds;
  for (const ModelBundle* b : bundles) {
    seeds.push_back(run_seed(*b, texts, options));
  }

  AblationReport report;
  report.bins = options.bins.percentages;
  report.n_seeds = bundles.size();
  report.n_sentences = texts.size();
  report.max_removed = options.max_removed;
  report.l2_vs_norms = {make_row("alti-l2", seeds, 1), make_row("norms", seeds, 2)};
  report.l1_vs_l2 = {make_row("alti", seeds, 0), make_row("alti-l2", seeds, 1)};

  const auto cv = curve_variants(options.target);
  for (std::size_t v = 0; v < cv.size(); ++v) {
    AblationCurve curve{cv[v].name, {}};
    for (int t = 0; t <= options.max_removed; ++t) {
      std::vector<double> per_seed;
      for (const auto& s : seeds) per_seed.push_back(s.curves[v][static_cast<std::size_t>(t)]);
      curve.drop.push_back(seed_stat(per_seed));
    }
    report.ln2_curves.push_back(std::move(curve));
  }
  std::vector<double> diffs;
  for (const auto& s : seeds) diffs.push_back(s.ln2_diff);
  report.ln2_mean_abs_diff = seed_stat(diffs);
  return report;
}

}  // namespace alti
