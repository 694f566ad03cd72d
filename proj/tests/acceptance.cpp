// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include "alti/ablation.hpp"
#include "alti/evaluation.hpp"
#include "alti/gradients.hpp"
#include "alti/methods.hpp"
#include "alti/report.hpp"
#include "alti/synthetic.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>

using namespace alti;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

int failures = 0;

void criterion(const char* name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%s %s (%.2fs) %s\n", o.ok ? "PASS" : "FAIL", name, secs, o.detail.c_str());
  std::fflush(stdout);
  if (!o.ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

const ModelBundle& fixture() {
  static const ModelBundle b = generate_fixture_bundle(fixture_config(4, 32, 4, 64), 7);
  return b;
}

std::vector<EncodedInput> fixture_inputs(std::size_t n, std::uint64_t seed, std::size_t max_tokens) {
  std::vector<EncodedInput> out;
  for (const auto& ex : random_sentences(4 * n, seed)) {
    auto enc = tokenize(ex.text, fixture());
    if (enc.size() <= max_tokens) out.push_back(std::move(enc));
    if (out.size() == n) break;
  }
  if (out.size() < n) throw std::runtime_error("not enough short sentences");
  return out;
}

Outcome reconstruction() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& b = fixture();
  double worst = 0;
  double worst_ln2 = 0;
  for (const auto& enc : fixture_inputs(50, 101, 24)) {
    const auto trace = forward(b, enc);
    for (std::size_t l = 0; l < trace.layers.size(); ++l) {
      const auto ts = transformed_vectors(trace.layers[l], b.layers[l]);
      worst = std::max(worst, reconstruction_error(ts, trace.layers[l].attn_block_out));
      const auto ts2 = extend_ln2(ts, trace.layers[l], b.layers[l]);
      worst_ln2 = std::max(worst_ln2, reconstruction_error(ts2, trace.layers[l].layer_out));
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-6 && worst_ln2 <= 1e-6 && secs < 10.0,
          fmt("max_err=%.3g max_err_ln2=%.3g time=%.2fs", worst, worst_ln2, secs)};
}

Outcome stochasticity() {
  const auto& b = fixture();
  double drift = 0;
  double lowest = 0;
  std::size_t checked = 0;
  auto check = [&](const Matrix& m) {
    drift = std::max(drift, (m.rowwise().sum().array() - 1.0).abs().maxCoeff());
    lowest = std::min(lowest, m.minCoeff());
    ++checked;
  };
  for (const auto& enc : fixture_inputs(50, 102, 24)) {
    const auto trace = forward(b, enc);
    for (const Method m : all_methods()) {
      for (const bool ln2 : {false, true}) {
        AttributionOptions opts;
        opts.ln2 = ln2;
        if (is_layerwise(m)) {
          const auto mats = layer_matrices(b, trace, m, opts);
          for (const Matrix& c : mats) check(c);
          for (int l = 1; l <= static_cast<int>(mats.size()); ++l) check(rollout(mats, l).R);
        }
        if (ln2 && !is_layerwise(m)) continue;
        check(attribute(b, trace, m, opts).scores.transpose());
      }
    }
  }
  return {drift <= 1e-6 && lowest >= 0.0,
          fmt("matrices=%.0f max_row_drift=%.3g min_entry=%.3g", static_cast<double>(checked), drift, lowest)};
}

Outcome rollout_oracle() {
  std::mt19937_64 rng(103);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto stochastic = [&](Eigen::Index n) {
    Matrix m(n, n);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    for (Eigen::Index i = 0; i < n; ++i) m.row(i) /= m.row(i).sum();
    return m;
  };
  const std::vector<Matrix> mats = {stochastic(4), stochastic(4), stochastic(4)};
  const Matrix r = rollout(mats, 3).R;
  double err = 0;
  for (Eigen::Index i = 0; i < 4; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) {
      double paths = 0;
      for (Eigen::Index a = 0; a < 4; ++a)
        for (Eigen::Index c = 0; c < 4; ++c) paths += mats[2](i, c) * mats[1](c, a) * mats[0](a, j);
      err = std::max(err, std::abs(r(i, j) - paths));
    }
  }
  Matrix m1(3, 3);
  Matrix m2(3, 3);
  m1 << 0.5, 0.25, 0.25, 0.125, 0.75, 0.125, 0.0, 0.375, 0.625;
  m2 << 0.25, 0.25, 0.5, 0.625, 0.125, 0.25, 0.5, 0.0, 0.5;
  const std::vector<Matrix> two = {m1, m2};
  const Matrix r2 = rollout(two, 2).R;
  bool exact = true;
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 3; ++j)
      exact = exact && r2(i, j) == m2(i, 0) * m1(0, j) + m2(i, 1) * m1(1, j) + m2(i, 2) * m1(2, j);
  return {err <= 1e-12 && exact, fmt("path_err=%.3g three_path_exact=%.0f", err, exact ? 1.0 : 0.0)};
}

Outcome gradients() {
  const auto& b = fixture();
  const auto enc = tokenize("the acting was clever but the plot was slow", b);
  const int cls = forward(b, enc).predicted_class;
  const auto f = probability_objective(b, 0, Target::cls, cls);
  const Matrix x = word_embeddings(b, enc);
  Matrix grad;
  f.eval(x, &grad);
  std::mt19937_64 rng(104);
  std::uniform_int_distribution<Eigen::Index> pick(0, x.size() - 1);
  const double h = 1e-5;
  double worst = 0;
  for (int n = 0; n < 20; ++n) {
    const Eigen::Index k = pick(rng);
    Matrix plus = x;
    Matrix minus = x;
    plus.data()[k] += h;
    minus.data()[k] -= h;
    const double fd = (f.eval(plus, nullptr) - f.eval(minus, nullptr)) / (2 * h);
    worst = std::max(worst, std::abs(grad.data()[k] - fd) / std::max(std::abs(fd), 1e-12));
  }
  std::vector<std::string> texts = {"the acting was clever but the plot was slow"};
  for (const auto& ex : random_sentences(20, 108)) texts.push_back(ex.text);
  double worst_ratio = 0;
  std::size_t within = 0;
  for (const auto& text : texts) {
    const auto e = tokenize(text, b);
    const auto g = probability_objective(b, 0, Target::cls, forward(b, e).predicted_class);
    const Matrix xe = word_embeddings(b, e);
    const Matrix base = mask_baseline(b, e);
    const double span = g.eval(xe, nullptr) - g.eval(base, nullptr);
    const double gap = std::abs(integrated_gradients_signed(g, xe, base, 300).sum() - span);
    const double ratio = gap / std::abs(span);
    worst_ratio = std::max(worst_ratio, ratio);
    within += ratio <= 0.01 ? 1 : 0;
  }
  std::ostringstream s;
  s << "fd_max_rel=" << worst << " ig_within_1pct=" << within << "/" << texts.size()
    << " ig_worst_gap_ratio=" << worst_ratio;
  return {worst <= 1e-4 && within == texts.size(), s.str()};
}

Outcome planted() {
  const auto t0 = std::chrono::steady_clock::now();
  const ModelBundle b = planted_keyword_bundle(0);
  const auto ds = planted_keyword_dataset(200, 0);
  std::size_t hits = 0;
  double comp_alti = 0;
  double comp_rollout = 0;
  const BinSet bins;
  for (const auto& ex : ds) {
    const auto enc = tokenize(ex.text, b);
    const auto trace = forward(b, enc);
    const auto alti_attr = attribute(b, trace, Method::alti, {});
    const auto roll_attr = attribute(b, trace, Method::rollout, {});
    const auto top = top_k_tokens(alti_attr.scores, 25, enc.special_mask);
    hits += std::find(top.begin(), top.end(), *keyword_position(enc)) != top.end() ? 1 : 0;
    comp_alti += comprehensiveness(b, enc, alti_attr, bins);
    comp_rollout += comprehensiveness(b, enc, roll_attr, bins);
  }
  comp_alti /= 200.0;
  comp_rollout /= 200.0;
  const double rate = static_cast<double>(hits) / 200.0;
  const double secs = seconds_since(t0);
  std::ostringstream s;
  s << "top25_rate=" << rate << " comp_alti=" << comp_alti << " comp_rollout=" << comp_rollout << " time=" << secs
    << "s";
  return {rate >= 0.95 && comp_alti > comp_rollout && secs < 60.0, s.str()};
}

Outcome metric_arithmetic() {
  const auto& b = fixture();
  const BinSet bins;
  std::mt19937_64 rng(105);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0;
  for (const auto& enc : fixture_inputs(20, 106, 64)) {
    Vector s(static_cast<Eigen::Index>(enc.size()));
    for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = u(rng);
    const AttributionVector attr{s, "random", 0};
    const auto got = faithfulness(b, enc, attr, bins);

    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t i = 0; i < enc.size(); ++i)
      if (!enc.special_mask[i]) order.push_back({-s(static_cast<Eigen::Index>(i)), i});
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& a, const auto& c) { return a.first < c.first; });
    const Vector p = forward_probs_only(b, enc);
    const int cls = argmax(p);
    double comp = 0;
    double suff = 0;
    for (int k : bins.percentages) {
      const std::size_t kk = (static_cast<std::size_t>(k) * order.size() + 99) / 100;
      std::vector<bool> top(enc.size(), false);
      for (std::size_t r = 0; r < kk; ++r) top[order[r].second] = true;
      std::vector<int> removed;
      std::vector<int> kept;
      for (std::size_t i = 0; i < enc.size(); ++i) {
        if (enc.special_mask[i] || !top[i]) removed.push_back(enc.token_ids[i]);
        if (enc.special_mask[i] || top[i]) kept.push_back(enc.token_ids[i]);
      }
      comp += p(cls) - forward_probs_only(b, encode_ids(removed, b))(cls);
      suff += p(cls) - forward_probs_only(b, encode_ids(kept, b))(cls);
    }
    const double denom = static_cast<double>(bins.percentages.size() + 1);
    worst = std::max({worst, std::abs(got.comp - comp / denom), std::abs(got.suff - suff / denom)});
  }
  Vector a(5);
  a << 1, 2, 3, 4, 5;
  Vector rev(5);
  rev << 5, 4, 3, 2, 1;
  Vector swap(5);
  swap << 2, 1, 4, 3, 5;
  const bool hand = jaccard_index({1, 2, 3}, {1, 2, 3}) == 1.0 && jaccard_index({0, 1}, {1, 2}) == 1.0 / 3.0 &&
                    *spearman(a, a) == 1.0 && *spearman(a, rev) == -1.0 && std::abs(*spearman(a, swap) - 0.8) < 1e-15;
  return {worst <= 1e-12 && hand, fmt("max_err=%.3g hand_cases=%.0f", worst, hand ? 1.0 : 0.0)};
}

Outcome ablation() {
  const ModelBundle s1 = generate_fixture_bundle(fixture_config(4, 32, 4, 64), 11);
  const ModelBundle s2 = generate_fixture_bundle(fixture_config(4, 32, 4, 64), 12);
  std::vector<std::string> texts;
  for (const auto& ex : random_sentences(10, 107)) texts.push_back(ex.text);
  AblationOptions opts;
  opts.max_removed = 5;
  const auto j1 = to_json(run_ablation({&s1, &s2}, texts, opts));
  const auto j2 = to_json(run_ablation({&s1, &s2}, texts, opts));
  bool schema = j1["n_seeds"] == 2 && j1["l2_vs_norms"].size() == 2 && j1["l1_vs_l2"].size() == 2 &&
                j1["l2_vs_norms"][0]["method"] == "alti-l2" && j1["l2_vs_norms"][1]["method"] == "norms" &&
                j1["l1_vs_l2"][0]["method"] == "alti" && j1["l1_vs_l2"][1]["method"] == "alti-l2";
  const auto& curves = j1["ln2_probability_drop"]["curves"];
  schema = schema && curves.size() == 3 && curves[0]["method"] == "alti" && curves[1]["method"] == "alti+ln2" &&
           curves[2]["method"] == "globenc";
  for (const auto& c : curves) schema = schema && c["mean"].size() == 6 && c["sd"].size() == 6;
  for (const auto& rows : {j1["l2_vs_norms"], j1["l1_vs_l2"]})
    for (const auto& r : rows) schema = schema && r["comp"].contains("mean") && r["suff"].contains("sd");
  const bool deterministic = j1.dump() == j2.dump();
  return {schema && deterministic, fmt("schema=%.0f deterministic=%.0f", schema ? 1.0 : 0.0, deterministic ? 1.0 : 0.0)};
}

}  // namespace

int main() {
  criterion("reconstruction", reconstruction);
  criterion("stochasticity", stochasticity);
  criterion("rollout-oracle", rollout_oracle);
  criterion("gradients", gradients);
  criterion("planted-model", planted);
  criterion("metric-arithmetic", metric_arithmetic);
  criterion("ablation-harness", ablation);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
