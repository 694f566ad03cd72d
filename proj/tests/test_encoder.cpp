#include "alti/encoder.hpp"

#include "test_support.hpp"

using namespace alti;

namespace {

using LD = long double;
using Rows = std::vector<std::vector<LD>>;

Rows layer_norm_oracle(const Rows& x, const Vector& g, const Vector& b, double eps) {
  Rows out = x;
  for (auto& r : out) {
    LD mean = 0;
    for (LD v : r) mean += v;
    mean /= static_cast<LD>(r.size());
    LD var = 0;
    for (LD v : r) var += (v - mean) * (v - mean);
    var /= static_cast<LD>(r.size());
    const LD sd = std::sqrt(var + eps);
    for (std::size_t k = 0; k < r.size(); ++k) r[k] = (r[k] - mean) / sd * g(static_cast<Eigen::Index>(k)) + b(static_cast<Eigen::Index>(k));
  }
  return out;
}

/// y = W x + b for every row, W given as [out x in].
Rows affine(const Rows& x, const Matrix& w, const Vector& b) {
  Rows out(x.size(), std::vector<LD>(static_cast<std::size_t>(w.rows()), 0));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (Eigen::Index o = 0; o < w.rows(); ++o) {
      LD acc = b.size() ? b(o) : 0;
      for (Eigen::Index k = 0; k < w.cols(); ++k) acc += w(o, k) * x[i][static_cast<std::size_t>(k)];
      out[i][static_cast<std::size_t>(o)] = acc;
    }
  return out;
}

/// Clean-room forward pass: explicit loops, long double, no shared helpers.
std::vector<LD> oracle_probs(const ModelBundle& m, const EncodedInput& in, std::size_t anchor, Target target) {
  const auto& cfg = m.config;
  const std::size_t n = in.size();
  const auto d = static_cast<std::size_t>(cfg.hidden);
  Rows x(n, std::vector<LD>(d));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k)
      x[i][k] = static_cast<LD>(m.embeddings.word(in.token_ids[i], static_cast<Eigen::Index>(k))) +
                m.embeddings.position(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) +
                m.embeddings.segment(0, static_cast<Eigen::Index>(k));
  x = layer_norm_oracle(x, m.embeddings.ln_gamma, m.embeddings.ln_beta, cfg.ln_eps);

  for (const auto& layer : m.layers) {
    Rows mha(n, std::vector<LD>(d, 0));
    for (const auto& h : layer.heads) {
      const Rows q = affine(x, h.query, h.query_bias);
      const Rows k = affine(x, h.key, h.key_bias);
      const Rows v = affine(x, h.value, h.value_bias);
      const std::size_t dh = q[0].size();
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<LD> s(n);
        LD mx = -1e300L;
        for (std::size_t j = 0; j < n; ++j) {
          LD dot = 0;
          for (std::size_t c = 0; c < dh; ++c) dot += q[i][c] * k[j][c];
          s[j] = dot / std::sqrt(static_cast<LD>(dh));
          mx = std::max(mx, s[j]);
        }
        LD z = 0;
        for (auto& e : s) z += (e = std::exp(e - mx));
        std::vector<LD> ctx(dh, 0);
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t c = 0; c < dh; ++c) ctx[c] += s[j] / z * v[j][c];
        for (std::size_t o = 0; o < d; ++o)
          for (std::size_t c = 0; c < dh; ++c) mha[i][o] += h.output(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(c)) * ctx[c];
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t o = 0; o < d; ++o) mha[i][o] += layer.output_bias(static_cast<Eigen::Index>(o)) + x[i][o];
    const Rows y = layer_norm_oracle(mha, layer.ln1_gamma, layer.ln1_beta, cfg.ln_eps);
    Rows hidden = affine(y, layer.ffn_in, layer.ffn_in_bias);
    for (auto& r : hidden)
      for (auto& v : r) v = cfg.activation == Activation::gelu ? 0.5L * v * (1 + std::erf(v / std::sqrt(2.0L))) : std::max<LD>(0, v);
    Rows ffn = affine(hidden, layer.ffn_out, layer.ffn_out_bias);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t o = 0; o < d; ++o) ffn[i][o] += y[i][o];
    x = layer_norm_oracle(ffn, layer.ln2_gamma, layer.ln2_beta, cfg.ln_eps);
  }

  Rows h = {x[anchor]};
  if (target == Target::cls) {
    h = affine(h, m.head.pooler, m.head.pooler_bias);
    for (auto& v : h[0]) v = std::tanh(v);
  }
  const Rows logits = affine(h, m.head.classifier, m.head.classifier_bias);
  LD mx = -1e300L;
  for (LD v : logits[0]) mx = std::max(mx, v);
  std::vector<LD> p;
  LD z = 0;
  for (LD v : logits[0]) z += p.emplace_back(std::exp(v - mx));
  for (auto& v : p) v /= z;
  return p;
}

ModelBundle scaled_fixture(double scale, std::uint64_t seed) {
  ModelBundle b = generate_fixture_bundle(fixture_config(3, 16, 4, 32), seed);
  for_each_tensor(b, [&](const std::string& name, auto& t) {
    if (name.find("gamma") == std::string::npos && name.find("beta") == std::string::npos) t *= scale;
  });
  return b;
}

}  // namespace

TEST(Forward, MatchesCleanRoomOracle) {
  for (const double scale : {1.0, 25.0}) {
    const ModelBundle b = scaled_fixture(scale, 4);
    for (const auto& text : alti::testing::sentences(8, 21)) {
      const auto enc = tokenize(text, b);
      const auto trace = forward(b, enc);
      const auto want = oracle_probs(b, enc, 0, Target::cls);
      for (std::size_t c = 0; c < want.size(); ++c) {
        EXPECT_NEAR(trace.class_probs(static_cast<Eigen::Index>(c)), static_cast<double>(want[c]), 1e-10);
      }
    }
  }
}

TEST(Forward, MaskTargetMatchesOracle) {
  ModelBundle b = scaled_fixture(20.0, 5);
  b.config.activation = Activation::relu;
  const auto enc = tokenize("the film was [MASK] and long", b);
  const auto trace = forward(b, enc, Target::mask);
  EXPECT_EQ(trace.anchor, 4u);
  const auto want = oracle_probs(b, enc, 4, Target::mask);
  for (std::size_t c = 0; c < want.size(); ++c) {
    EXPECT_NEAR(trace.class_probs(static_cast<Eigen::Index>(c)), static_cast<double>(want[c]), 1e-10);
  }
}

TEST(Forward, MissingMaskIsAnError) {
  const auto& b = alti::testing::small_fixture();
  EXPECT_THROW(forward(b, tokenize("no mask here", b), Target::mask), std::invalid_argument);
}

TEST(Forward, ProbsOnlyIsBitIdentical) {
  const auto& b = alti::testing::fixture4();
  for (const auto& text : alti::testing::sentences(10, 22)) {
    const auto enc = tokenize(text, b);
    const Vector fast = forward_probs_only(b, enc);
    const Vector traced = forward(b, enc).class_probs;
    EXPECT_TRUE(fast == traced);
  }
}

TEST(Forward, TraceInvariants) {
  const ModelBundle b = scaled_fixture(10.0, 6);
  const auto enc = tokenize("the music was sweet but the ending was slow", b);
  const auto trace = forward(b, enc);
  ASSERT_EQ(trace.layers.size(), 3u);
  for (std::size_t l = 0; l < trace.layers.size(); ++l) {
    const auto& lt = trace.layers[l];
    const auto& w = b.layers[l];
    EXPECT_LE((layer_norm_rows(lt.pre_ln1, w.ln1_gamma, w.ln1_beta, b.config.ln_eps) - lt.attn_block_out)
                  .cwiseAbs()
                  .maxCoeff(),
              1e-9);
    EXPECT_LE((lt.pre_ln1 - lt.mha_out - lt.input).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((lt.pre_ln2 - lt.ffn_out - lt.attn_block_out).cwiseAbs().maxCoeff(), 1e-12);
    for (const auto& a : lt.attention) {
      EXPECT_LE((a.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
    }
    const Matrix& next = l + 1 < trace.layers.size() ? trace.layers[l + 1].input : trace.final_hidden;
    EXPECT_EQ(next, lt.layer_out);
  }
}

TEST(Forward, HeadPermutationInvariance) {
  const ModelBundle b = scaled_fixture(15.0, 7);
  ModelBundle permuted = b;
  for (auto& layer : permuted.layers) std::reverse(layer.heads.begin(), layer.heads.end());
  for (const auto& text : alti::testing::sentences(5, 23)) {
    const auto enc = tokenize(text, b);
    EXPECT_LE((forward_probs_only(b, enc) - forward_probs_only(permuted, enc)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Forward, ZeroWeightsGiveUniformOutput) {
  const ModelBundle b = make_zero_bundle(fixture_config(2, 8, 2, 8), fixture_vocab());
  const auto trace = forward(b, tokenize("the film was good", b));
  EXPECT_DOUBLE_EQ(trace.class_probs(0), 0.5);
  EXPECT_DOUBLE_EQ(trace.class_probs(1), 0.5);
  EXPECT_EQ(trace.predicted_class, 0);
  for (const auto& lt : trace.layers)
    for (const auto& a : lt.attention) EXPECT_LE((a.array() - 1.0 / 6.0).abs().maxCoeff(), 1e-15);
}

TEST(Forward, TapeMatchesForward) {
  const ModelBundle b = scaled_fixture(10.0, 8);
  const auto enc = tokenize("clever plot and great actors", b);
  ad::Tape tape;
  const ad::Var probs = forward_on_tape(tape, b, tape.leaf(word_embeddings(b, enc)), 0, Target::cls);
  EXPECT_LE((probs.value().row(0).transpose() - forward_probs_only(b, enc)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Argmax, LowestIndexWinsTies) {
  Vector v(4);
  v << 0.1, 0.4, 0.4, 0.1;
  EXPECT_EQ(argmax(v), 1);
  EXPECT_EQ(argmax(Vector::Constant(3, 0.5)), 0);
}

TEST(Forward, TooLongInputIsRejected) {
  const auto& b = alti::testing::small_fixture();
  std::vector<int> ids(65, 10);
  ids.front() = 2;
  EXPECT_THROW(forward(b, encode_ids(ids, b)), std::invalid_argument);
}
