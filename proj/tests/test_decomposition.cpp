#include "alti/decomposition.hpp"

#include "test_support.hpp"

using namespace alti;
using alti::testing::random_matrix;

namespace {

ModelBundle scaled(double s, std::uint64_t seed) {
  ModelBundle b = generate_fixture_bundle(fixture_config(4, 32, 4, 64), seed);
  for_each_tensor(b, [&](const std::string& name, auto& t) {
    if (name.find("gamma") == std::string::npos && name.find("beta") == std::string::npos) t *= s;
  });
  return b;
}

Matrix permute_rows(const Matrix& m, const std::vector<Eigen::Index>& p) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.row(i) = m.row(p[static_cast<std::size_t>(i)]);
  return out;
}

Matrix permute_both(const Matrix& m, const std::vector<Eigen::Index>& p) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(i, j) = m(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
  return out;
}

TransformedSet random_set(Eigen::Index J, Eigen::Index d, std::mt19937_64& rng) {
  TransformedSet ts;
  for (Eigen::Index i = 0; i < J; ++i) ts.T.push_back(random_matrix(J, d, rng));
  ts.bias_term = Matrix::Zero(J, d);
  ts.beta = Vector::Zero(d);
  return ts;
}

}  // namespace

TEST(TransformedVectors, ReconstructsAttentionBlockOutput) {
  for (const double s : {1.0, 20.0}) {
    const ModelBundle b = scaled(s, 31);
    for (const auto& text : alti::testing::sentences(10, 41)) {
      const auto trace = forward(b, tokenize(text, b));
      for (std::size_t l = 0; l < trace.layers.size(); ++l) {
        const auto ts = transformed_vectors(trace.layers[l], b.layers[l]);
        EXPECT_LE(reconstruction_error(ts, trace.layers[l].attn_block_out), 1e-10);
        const auto ts2 = extend_ln2(ts, trace.layers[l], b.layers[l]);
        EXPECT_LE(reconstruction_error(ts2, trace.layers[l].layer_out), 1e-10);
      }
    }
  }
}

TEST(TransformedVectors, SingleTokenReconstructsExactly) {
  const ModelBundle b = scaled(10.0, 32);
  const std::vector<int> ids = {2};
  const auto trace = forward(b, encode_ids(ids, b));
  const auto ts = transformed_vectors(trace.layers[0], b.layers[0]);
  ASSERT_EQ(ts.num_tokens(), 1u);
  EXPECT_LE(reconstruction_error(ts, trace.layers[0].attn_block_out), 1e-12);
  const auto c = contributions_alti(ts, trace.layers[0].attn_block_out, Norm::l1);
  EXPECT_EQ(c.C, Matrix::Ones(1, 1));
}

TEST(TransformedVectors, OneHotAttentionKillsOtherTerms) {
  const ModelBundle b = scaled(5.0, 33);
  auto trace = forward(b, tokenize("the film was good fun", b));
  LayerTrace layer = trace.layers[1];
  const Eigen::Index J = layer.input.rows();
  const Eigen::Index star = 2;
  for (auto& a : layer.attention) {
    a.setZero();
    a.col(star).setOnes();
  }
  const auto ts = transformed_vectors(layer, b.layers[1]);
  for (Eigen::Index i = 0; i < J; ++i) {
    for (Eigen::Index j = 0; j < J; ++j) {
      if (j == i || j == star) continue;
      EXPECT_EQ(ts.T[static_cast<std::size_t>(i)].row(j).cwiseAbs().maxCoeff(), 0.0);
    }
  }
}

TEST(TransformedVectors, MatchesDirectFormula) {
  const ModelBundle b = scaled(8.0, 34);
  const auto trace = forward(b, tokenize("clever dull", b));
  const auto& layer = trace.layers[0];
  const auto& w = b.layers[0];
  const auto ts = transformed_vectors(layer, w);
  const Matrix L = ln_linear_part(w.ln1_gamma);
  const Eigen::Index J = layer.input.rows();
  for (Eigen::Index i = 0; i < J; ++i) {
    for (Eigen::Index j = 0; j < J; ++j) {
      Vector acc = Vector::Zero(b.config.hidden);
      for (std::size_t h = 0; h < w.heads.size(); ++h) {
        acc += w.heads[h].output * (layer.attention[h](i, j) * (w.heads[h].value * layer.input.row(j).transpose()));
      }
      if (i == j) acc += layer.input.row(j).transpose();
      const Vector want = L * acc / layer.sigma1(i);
      EXPECT_LE((ts.T[static_cast<std::size_t>(i)].row(j).transpose() - want).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(TransformedVectors, DegenerateSigmaIsAnError) {
  const ModelBundle& b = alti::testing::fixture4();
  auto trace = forward(b, tokenize("the film", b));
  trace.layers[0].sigma1(1) = 1e-9;
  EXPECT_THROW(transformed_vectors(trace.layers[0], b.layers[0]), DecompositionError);
  trace = forward(b, tokenize("the film", b));
  trace.layers[0].sigma2(0) = 0.0;
  const auto ts = transformed_vectors(trace.layers[0], b.layers[0]);
  EXPECT_THROW(extend_ln2(ts, trace.layers[0], b.layers[0]), DecompositionError);
}

TEST(ExtendLn2, ZeroFfnIsPerRowLinearMap) {
  ModelBundle b = scaled(6.0, 35);
  for (auto& layer : b.layers) {
    layer.ffn_in.setZero();
    layer.ffn_in_bias.setZero();
    layer.ffn_out.setZero();
    layer.ffn_out_bias.setZero();
  }
  const auto trace = forward(b, tokenize("a long slow story", b));
  const auto& layer = trace.layers[2];
  const auto ts = transformed_vectors(layer, b.layers[2]);
  const auto ts2 = extend_ln2(ts, layer, b.layers[2]);
  const Matrix L2 = ln_linear_part(b.layers[2].ln2_gamma);
  for (std::size_t i = 0; i < ts.num_tokens(); ++i) {
    const Matrix want = ts.T[i] * L2.transpose() / layer.sigma2(static_cast<Eigen::Index>(i));
    EXPECT_LE((ts2.T[i] - want).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ContributionsNorms, ProportionalToEuclideanNorms) {
  std::mt19937_64 rng(1);
  const auto ts = random_set(5, 7, rng);
  const auto c = contributions_norms(ts);
  for (Eigen::Index i = 0; i < 5; ++i) {
    double total = 0;
    std::vector<double> norms;
    for (Eigen::Index j = 0; j < 5; ++j) {
      double sq = 0;
      for (Eigen::Index k = 0; k < 7; ++k) sq += std::pow(ts.T[static_cast<std::size_t>(i)](j, k), 2);
      norms.push_back(std::sqrt(sq));
      total += norms.back();
    }
    for (Eigen::Index j = 0; j < 5; ++j) EXPECT_NEAR(c.C(i, j), norms[static_cast<std::size_t>(j)] / total, 1e-14);
  }
}

TEST(ContributionsNorms, EqualAndDiagonalCases) {
  TransformedSet ts;
  ts.T = {Matrix::Ones(3, 4), Matrix::Ones(3, 4), Matrix::Ones(3, 4)};
  EXPECT_LE((contributions_norms(ts).C.array() - 1.0 / 3.0).abs().maxCoeff(), 1e-15);
  for (std::size_t i = 0; i < 3; ++i) {
    ts.T[i].setZero();
    ts.T[i].row(static_cast<Eigen::Index>(i)).setConstant(2.0);
  }
  EXPECT_EQ(contributions_norms(ts).C, Matrix::Identity(3, 3));
}

TEST(ContributionsAlti, ExactMatchAndClampGiveOneHot) {
  TransformedSet ts;
  Matrix y(1, 2);
  y << 1.0, -1.0;
  Matrix t(3, 2);
  t << 1.0, -1.0,  // equals y
      -1.0, 1.0,   // distance 4 >= ||y||_1
      5.0, 5.0;
  ts.T = {t};
  Matrix y3 = Matrix::Zero(3, 2);
  y3.row(0) = y;
  ts.T.push_back(Matrix::Ones(3, 2));
  ts.T.push_back(Matrix::Ones(3, 2));
  y3.row(1) << 1.0, 1.0;
  y3.row(2) << 1.0, 1.0;
  const auto c = contributions_alti(ts, y3, Norm::l1);
  EXPECT_DOUBLE_EQ(c.C(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(c.C(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(c.C(0, 2), 0.0);
  EXPECT_LE((c.C.row(1).array() - 1.0 / 3.0).abs().maxCoeff(), 1e-15);
}

TEST(ContributionsAlti, HandComputedL1AndL2) {
  // y = (3, 0); T rows (3, 0), (1, 0), (0, 4)
  TransformedSet ts;
  Matrix t(3, 2);
  t << 3, 0, 1, 0, 0, 4;
  ts.T = {t, t, t};
  Matrix y(3, 2);
  y << 3, 0, 3, 0, 3, 0;
  // l1: ||y||=3, d = 0, 2, 7 -> raw 3, 1, 0
  const auto c1 = contributions_alti(ts, y, Norm::l1);
  EXPECT_DOUBLE_EQ(c1.C(0, 0), 0.75);
  EXPECT_DOUBLE_EQ(c1.C(0, 1), 0.25);
  EXPECT_DOUBLE_EQ(c1.C(0, 2), 0.0);
  // l2: d = 0, 2, 5 -> raw 3, 1, 0
  const auto c2 = contributions_alti(ts, y, Norm::l2);
  EXPECT_DOUBLE_EQ(c2.C(1, 0), 0.75);
  EXPECT_EQ(c2.metric, ContributionMetric::alti_l2);
}

TEST(ContributionsAlti, AllZeroRowFallsBackToUniform) {
  TransformedSet ts;
  ts.T = {Matrix::Zero(2, 3), Matrix::Zero(2, 3)};
  const auto c = contributions_alti(ts, Matrix::Zero(2, 3), Norm::l1);
  EXPECT_LE((c.C.array() - 0.5).abs().maxCoeff(), 1e-15);
}

TEST(ContributionsAlti, RowStochasticOnFixture) {
  const ModelBundle b = scaled(15.0, 36);
  for (const auto& text : alti::testing::sentences(10, 42)) {
    const auto trace = forward(b, tokenize(text, b));
    for (std::size_t l = 0; l < trace.layers.size(); ++l) {
      const auto ts = transformed_vectors(trace.layers[l], b.layers[l]);
      for (const Norm n : {Norm::l1, Norm::l2}) {
        const Matrix c = contributions_alti(ts, trace.layers[l].attn_block_out, n).C;
        EXPECT_LE((c.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
        EXPECT_GE(c.minCoeff(), 0.0);
      }
    }
  }
}

TEST(ContributionsAlti, PermutationEquivariance) {
  const ModelBundle b = scaled(12.0, 37);
  const auto trace = forward(b, tokenize("the plot was clever but slow", b));
  const LayerTrace& layer = trace.layers[1];
  const auto J = layer.input.rows();
  std::vector<Eigen::Index> p(static_cast<std::size_t>(J));
  std::iota(p.begin(), p.end(), 0);
  std::mt19937_64 rng(5);
  std::shuffle(p.begin(), p.end(), rng);

  LayerTrace permuted = layer;
  permuted.input = permute_rows(layer.input, p);
  for (auto& a : permuted.attention) a = permute_both(a, p);
  for (Eigen::Index i = 0; i < J; ++i) permuted.sigma1(i) = layer.sigma1(p[static_cast<std::size_t>(i)]);
  const Matrix y_perm = permute_rows(layer.attn_block_out, p);

  for (const Norm n : {Norm::l1, Norm::l2}) {
    const Matrix c = contributions_alti(transformed_vectors(layer, b.layers[1]), layer.attn_block_out, n).C;
    const Matrix cp = contributions_alti(transformed_vectors(permuted, b.layers[1]), y_perm, n).C;
    EXPECT_LE((cp - permute_both(c, p)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ContributionsAlti, JointScalingInvariance) {
  std::mt19937_64 rng(6);
  TransformedSet ts = random_set(6, 5, rng);
  Matrix y = random_matrix(6, 5, rng);
  const Matrix c = contributions_alti(ts, y, Norm::l1).C;
  for (auto& t : ts.T) t *= 3.7;
  y *= 3.7;
  EXPECT_LE((contributions_alti(ts, y, Norm::l1).C - c).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ContributionsAlti, ShapeMismatchThrows) {
  std::mt19937_64 rng(7);
  const auto ts = random_set(3, 4, rng);
  EXPECT_THROW(contributions_alti(ts, Matrix::Zero(2, 4), Norm::l1), ShapeError);
}
