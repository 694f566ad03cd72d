#include "alti/report.hpp"

namespace alti {

using nlohmann::json;

namespace {

json stat_json(const SeedStat& s) { return {{"mean", s.mean}, {"sd", s.sd}}; }

json rows_json(const std::vector<AblationRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"method", r.method}, {"comp", stat_json(r.comp)}, {"suff", stat_json(r.suff)}});
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (const double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

json to_json(const EncodedInput& input, const AttributionVector& attr) {
  std::vector<double> scores(attr.scores.data(), attr.scores.data() + attr.scores.size());
  return {{"method", attr.method},
          {"predicted_class", attr.predicted_class},
          {"tokens", input.token_strings},
          {"token_ids", input.token_ids},
          {"special", std::vector<bool>(input.special_mask)},
          {"scores", scores}};
}

json to_json(const FaithfulnessReport& report) {
  json bins = json::array();
  for (std::size_t b = 0; b < report.bins.size(); ++b) {
    bins.push_back({{"k", report.bins[b]},
                    {"comp_delta", report.comp_deltas[b]},
                    {"suff_delta", report.suff_deltas[b]}});
  }
  return {{"comp", report.comp}, {"suff", report.suff}, {"n_sentences", report.n_sentences}, {"bins", bins}};
}

json to_json(const SentenceFaithfulness& s) {
  return {{"comp", s.comp},
          {"suff", s.suff},
          {"predicted_class", s.predicted_class},
          {"original_prob", s.original_prob},
          {"comp_deltas", s.comp_deltas},
          {"suff_deltas", s.suff_deltas}};
}

json to_json(const std::vector<LayerAnisotropy>& profile) {
  json out = json::array();
  for (const auto& l : profile) {
    out.push_back({{"layer", l.layer}, {"output_cos", l.output_cos}, {"transformed_cos", l.transformed_cos}});
  }
  return out;
}

json to_json(const AblationReport& report) {
  json curves = json::array();
  for (const auto& c : report.ln2_curves) {
    json mean = json::array();
    json sd = json::array();
    for (const auto& s : c.drop) {
      mean.push_back(s.mean);
      sd.push_back(s.sd);
    }
    curves.push_back({{"method", c.method}, {"mean", mean}, {"sd", sd}});
  }
  return {{"bins", report.bins},
          {"n_seeds", report.n_seeds},
          {"n_sentences", report.n_sentences},
          {"l2_vs_norms", rows_json(report.l2_vs_norms)},
          {"l1_vs_l2", rows_json(report.l1_vs_l2)},
          {"ln2_probability_drop", {{"removed", report.max_removed}, {"curves", curves}}},
          {"ln2_mean_abs_diff", stat_json(report.ln2_mean_abs_diff)}};
}

json to_json(const PairAgreement& agreement) {
  json spearman = json::array();
  std::vector<double> defined;
  for (const auto& s : agreement.spearman) {
    if (s) {
      spearman.push_back(*s);
      defined.push_back(*s);
    } else {
      spearman.push_back(nullptr);
    }
  }
  return {{"method", agreement.method},
          {"bundles", {agreement.bundle_a, agreement.bundle_b}},
          {"jaccard_top25", agreement.jaccard},
          {"spearman", spearman},
          {"mean_jaccard_top25", mean_of(agreement.jaccard)},
          {"mean_spearman", defined.empty() ? json(nullptr) : json(mean_of(defined))},
          {"spearman_missing", agreement.spearman.size() - defined.size()}};
}

json make_report(const std::string& command, json body) {
  json out = {{"schema_version", kSchemaVersion}, {"command", command}};
  for (auto& [key, value] : body.items()) out[key] = value;
  return out;
}

}  // namespace alti
