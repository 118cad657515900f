#include <gtest/gtest.h>

#include <cmath>

#include "senti/errors.hpp"
#include "senti/experiment.hpp"
#include "senti/model.hpp"
#include "senti/training.hpp"

using namespace senti;

namespace {

Matrix random_grid(const ModelConfig& c, Rng& rng) {
  Matrix m(c.regions, c.feature_dim);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = 2.0 * uniform01(rng) - 1.0;
  return m;
}

Parameters zeroed(Parameters p) {
  for (auto& [name, entry] : p.entries()) entry.value.setZero();
  return p;
}

}  // namespace

TEST(Config, Validation) {
  ModelConfig c = tiny_config(Variant::Full);
  EXPECT_NO_THROW(c.validate());
  c.hidden = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config(Variant::Full);
  c.dropout_rate = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config(Variant::Full);
  c.vocab_size = 4;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, NamesRoundTrip) {
  for (Variant v : kVariants) EXPECT_EQ(parse_variant(to_string(v)), v);
  for (Sentiment s : kSentiments) EXPECT_EQ(parse_sentiment(to_string(s)), s);
  EXPECT_THROW(parse_variant("bogus"), ConfigError);
  EXPECT_THROW(parse_sentiment("happy"), ConfigError);
}

TEST(InitState, ZeroWeightsGiveZeroState) {
  const ModelConfig c = tiny_config(Variant::Full);
  const Parameters p = zeroed(Parameters::initialize(c, 1));
  Rng rng(3);
  const Matrix grid = random_grid(c, rng);
  Tape t;
  BoundModel m(t, c, p);
  const DecoderState s = init_state(m, t.constant_view(grid));
  EXPECT_EQ(s.h.value(), Matrix::Zero(1, c.hidden));
  EXPECT_EQ(s.c.value(), Matrix::Zero(1, c.hidden));
}

TEST(InitState, WrongGridShapeIsConfigError) {
  const ModelConfig c = tiny_config(Variant::Full);
  const Parameters p = Parameters::initialize(c, 1);
  Tape t;
  BoundModel m(t, c, p);
  EXPECT_THROW(init_state(m, t.constant(Matrix::Zero(c.regions + 1, c.feature_dim))), ConfigError);
}

TEST(Attend, IdenticalRegionsGiveUniformWeights) {
  const ModelConfig c = tiny_config(Variant::Full);
  const Parameters p = Parameters::initialize(c, 2);
  Rng rng(4);
  Matrix grid(c.regions, c.feature_dim);
  const Matrix row = random_grid(c, rng).row(0);
  for (Index k = 0; k < c.regions; ++k) grid.row(k) = row;
  Tape t;
  BoundModel m(t, c, p);
  const Tensor h = t.constant(Matrix::Constant(1, c.hidden, 0.3));
  const AttentionResult a = attend(m, t.constant_view(grid), h);
  for (Index k = 0; k < c.regions; ++k) EXPECT_NEAR(a.alpha.value()(0, k), 1.0 / c.regions, 1e-15);
  EXPECT_TRUE(a.context.value().isApprox(row, 1e-14));
}

TEST(Attend, SingleRegionHasWeightOne) {
  ModelConfig c = tiny_config(Variant::Full);
  c.regions = 1;
  const Parameters p = Parameters::initialize(c, 2);
  Rng rng(5);
  const Matrix grid = random_grid(c, rng);
  Tape t;
  BoundModel m(t, c, p);
  const AttentionResult a = attend(m, t.constant_view(grid), t.constant(Matrix::Ones(1, c.hidden)));
  EXPECT_DOUBLE_EQ(a.alpha.item(), 1.0);
  EXPECT_TRUE(a.context.value().isApprox(grid, 1e-15));
}

TEST(Attend, WeightsFormASimplex) {
  const ModelConfig c = tiny_config(Variant::Full);
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const Parameters p = Parameters::initialize(c, static_cast<std::uint64_t>(trial));
    const Matrix grid = random_grid(c, rng);
    Tape t(false);
    BoundModel m(t, c, p);
    const Matrix h = Matrix::Random(1, c.hidden);
    const AttentionResult a = attend(m, t.constant_view(grid), t.constant(h));
    EXPECT_NEAR(a.alpha.value().sum(), 1.0, 1e-12);
    EXPECT_GE(a.alpha.value().minCoeff(), 0.0);
  }
}

TEST(LstmStep, ZeroWeightsHalveTheCell) {
  const ModelConfig c = tiny_config(Variant::Full);
  const Parameters p = zeroed(Parameters::initialize(c, 1));
  Tape t;
  BoundModel m(t, c, p);
  DecoderState s;
  s.h = t.constant(Matrix::Zero(1, c.hidden));
  s.c = t.constant(Matrix::Constant(1, c.hidden, 0.8));
  const DecoderState n = lstm_step(m, s, t.constant(Matrix::Ones(1, c.word_dim)),
                                   t.constant(Matrix::Ones(1, c.feature_dim)), t.constant(Matrix::Ones(1, c.senti_dim)));
  // Gates at sigmoid(0) = 0.5, candidate tanh(0) = 0.
  for (Index j = 0; j < c.hidden; ++j) {
    EXPECT_DOUBLE_EQ(n.c.value()(0, j), 0.4);
    EXPECT_DOUBLE_EQ(n.h.value()(0, j), 0.5 * std::tanh(0.4));
  }
}

TEST(LstmStep, SaturatedGates) {
  const ModelConfig c = tiny_config(Variant::MinusE2L2);
  Parameters p = zeroed(Parameters::initialize(c, 1));
  p.mutable_value("lstm.b_i").setConstant(1e6);
  p.mutable_value("lstm.b_g").setConstant(1e6);
  p.mutable_value("lstm.b_o").setConstant(1e6);
  p.mutable_value("lstm.b_f").setConstant(-1e6);
  Tape t;
  BoundModel m(t, c, p);
  DecoderState s;
  s.h = t.constant(Matrix::Zero(1, c.hidden));
  s.c = t.constant(Matrix::Constant(1, c.hidden, 7.0));
  const DecoderState n = lstm_step(m, s, t.constant(Matrix::Zero(1, c.word_dim)),
                                   t.constant(Matrix::Zero(1, c.feature_dim)), t.constant(Matrix::Zero(1, c.senti_dim)));
  // Forget gate closed, input open: the old cell is discarded.
  for (Index j = 0; j < c.hidden; ++j) {
    EXPECT_DOUBLE_EQ(n.c.value()(0, j), 1.0);
    EXPECT_DOUBLE_EQ(n.h.value()(0, j), std::tanh(1.0));
  }
}

TEST(LstmStep, SentimentInputMustMatchVariant) {
  const ModelConfig full = tiny_config(Variant::Full);
  const Parameters pf = Parameters::initialize(full, 1);
  Tape t;
  BoundModel mf(t, full, pf);
  DecoderState s;
  s.h = t.constant(Matrix::Zero(1, full.hidden));
  s.c = t.constant(Matrix::Zero(1, full.hidden));
  const Tensor w = t.constant(Matrix::Zero(1, full.word_dim));
  const Tensor a = t.constant(Matrix::Zero(1, full.feature_dim));
  EXPECT_THROW(lstm_step(mf, s, w, a, std::nullopt), ConfigError);

  const ModelConfig att = tiny_config(Variant::Attend);
  const Parameters pa = Parameters::initialize(att, 1);
  BoundModel ma(t, att, pa);
  EXPECT_THROW(lstm_step(ma, s, w, a, t.constant(Matrix::Zero(1, att.senti_dim))), ConfigError);
  EXPECT_NO_THROW(lstm_step(ma, s, w, a, std::nullopt));
}

TEST(WordLogits, ZeroWeightsGiveBias) {
  const ModelConfig c = tiny_config(Variant::Full);
  Parameters p = zeroed(Parameters::initialize(c, 1));
  Rng rng(9);
  Matrix b(1, c.vocab_size);
  for (Index i = 0; i < b.size(); ++i) b(0, i) = uniform01(rng);
  p.mutable_value("word.b") = b;
  Tape t;
  BoundModel m(t, c, p);
  DecoderState s;
  s.h = t.constant(Matrix::Ones(1, c.hidden));
  s.c = s.h;
  const Tensor z = word_logits(m, s, t.constant(Matrix::Ones(1, c.feature_dim)), t.constant(Matrix::Ones(1, c.senti_dim)));
  EXPECT_EQ(z.value(), b);
}

TEST(WordLogits, WithoutE2TheHeadIgnoresSentiment) {
  const ModelConfig c = tiny_config(Variant::MinusE2L2);
  const Parameters p = Parameters::initialize(c, 3);
  Tape t;
  BoundModel m(t, c, p);
  DecoderState s;
  s.h = t.constant(Matrix::Constant(1, c.hidden, 0.2));
  s.c = s.h;
  const Tensor ctx = t.constant(Matrix::Constant(1, c.feature_dim, -0.1));
  const Matrix z = word_logits(m, s, ctx, std::nullopt).value();
  for (Sentiment sent : kSentiments) {
    EXPECT_FALSE(lookup_sentiment(m, sent).e2.has_value());
    EXPECT_EQ(word_logits(m, s, ctx, lookup_sentiment(m, sent).e2).value(), z);
  }
  EXPECT_THROW(word_logits(m, s, ctx, t.constant(Matrix::Zero(1, c.senti_dim))), ConfigError);
}

TEST(SentimentHead, ZeroWeightsGiveUniformDistribution) {
  const ModelConfig c = tiny_config(Variant::Full);
  const Parameters p = zeroed(Parameters::initialize(c, 1));
  Tape t;
  BoundModel m(t, c, p);
  DecoderState s;
  s.h = t.constant(Matrix::Ones(1, c.hidden));
  s.c = s.h;
  const Matrix prob = softmax(sentiment_logits(m, s)).value();
  for (Index k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(prob(0, k), 1.0 / 3.0);
}

TEST(SentimentHead, OnlyTheFullVariantUsesIt) {
  for (Variant v : {Variant::Attend, Variant::MinusE1E2L2, Variant::MinusE2L2, Variant::MinusL2}) {
    const ModelConfig c = tiny_config(v);
    const Parameters p = Parameters::initialize(c, 1);
    Tape t;
    BoundModel m(t, c, p);
    DecoderState s;
    s.h = t.constant(Matrix::Ones(1, c.hidden));
    s.c = s.h;
    EXPECT_THROW(sentiment_logits(m, s), ConfigError) << to_string(v);
  }
}

TEST(Forward, TraceLengthAndSentimentLogits) {
  for (Variant v : kVariants) {
    TinyProblem prob = tiny_problem(tiny_config(v), 5, 1, 4);
    Tape t;
    BoundModel m(t, prob.config, prob.params);
    Rng rng(1);
    const auto& cap = prob.captions[0];
    const ForwardTrace tr = forward_teacher_forced(m, t.constant_view(prob.grids[0]), cap, prob.sentiments[0], rng, false);
    EXPECT_EQ(tr.alphas.size(), cap.size() - 1);
    EXPECT_EQ(tr.word_logits.size(), cap.size() - 1);
    EXPECT_EQ(tr.sentiment_logits.size(), v == Variant::Full ? cap.size() - 1 : 0u);
    EXPECT_EQ(tr.targets, std::vector<Index>(cap.begin() + 1, cap.end()));
  }
}

TEST(Forward, RejectsMalformedCaptions) {
  TinyProblem prob = tiny_problem(tiny_config(Variant::Full), 5, 1, 2);
  Tape t;
  BoundModel m(t, prob.config, prob.params);
  Rng rng(1);
  const Tensor g = t.constant_view(prob.grids[0]);
  const std::vector<Index> no_end{token::kStart, 5};
  const std::vector<Index> out_of_vocab{token::kStart, 500, token::kEnd};
  EXPECT_THROW(forward_teacher_forced(m, g, no_end, Sentiment::Positive, rng, false), DataError);
  EXPECT_THROW(forward_teacher_forced(m, g, out_of_vocab, Sentiment::Positive, rng, false), DataError);
}

TEST(Forward, SentimentChangesFirstStepLogits) {
  for (Variant v : {Variant::MinusE1E2L2, Variant::MinusE2L2, Variant::MinusL2, Variant::Full}) {
    TinyProblem prob = tiny_problem(tiny_config(v), 8, 1, 3);
    std::vector<Matrix> first;
    for (Sentiment s : kSentiments) {
      Tape t(false);
      BoundModel m(t, prob.config, prob.params);
      Rng rng(1);
      first.push_back(forward_teacher_forced(m, t.constant_view(prob.grids[0]), prob.captions[0], s, rng, false)
                          .word_logits[0]
                          .value());
    }
    EXPECT_NE(first[0], first[1]) << to_string(v);
    EXPECT_NE(first[0], first[2]) << to_string(v);
  }
}

TEST(Forward, DeterministicInEvalMode) {
  TinyProblem prob = tiny_problem(tiny_config(Variant::Full), 8, 1, 3);
  prob.config.dropout_rate = 0.5;
  const auto run = [&](std::uint64_t seed) {
    Tape t(false);
    BoundModel m(t, prob.config, prob.params);
    Rng rng(seed);
    return Matrix(forward_teacher_forced(m, t.constant_view(prob.grids[0]), prob.captions[0], Sentiment::Negative,
                                         rng, false)
                      .word_logits.back()
                      .value());
  };
  EXPECT_EQ(run(1), run(2));
}

TEST(Parameters, CensusAcrossVariants) {
  const auto count = [](Variant v) { return Parameters::initialize(tiny_config(v), 1).trainable_scalars(); };
  const ModelConfig c = tiny_config(Variant::Full);
  const auto e2_size = static_cast<std::size_t>(3 * c.senti_dim);
  const auto we_size = static_cast<std::size_t>(c.senti_dim * c.vocab_size);
  EXPECT_EQ(count(Variant::MinusL2) - count(Variant::MinusE2L2), e2_size + we_size);
  EXPECT_EQ(count(Variant::Full), count(Variant::MinusL2));

  const Parameters attend = Parameters::initialize(tiny_config(Variant::Attend), 1);
  for (const auto& name : attend.names()) {
    EXPECT_EQ(name.find("E1"), std::string::npos);
    EXPECT_EQ(name.find("E2"), std::string::npos);
    EXPECT_EQ(name.rfind("senti.", 0), std::string::npos);
    EXPECT_EQ(name.rfind("lstm.B_", 0), std::string::npos);
    EXPECT_NE(name, "word.W_e");
  }
  const Parameters one_hot = Parameters::initialize(tiny_config(Variant::MinusE1E2L2), 1);
  EXPECT_FALSE(one_hot.trainable("E1"));
  EXPECT_FALSE(one_hot.trainable("E2"));
  EXPECT_EQ(one_hot.at("E1"), Matrix::Identity(3, 3));
}

TEST(Parameters, SeededInitializationIsReproducible) {
  const ModelConfig c = tiny_config(Variant::Full);
  EXPECT_TRUE(Parameters::initialize(c, 4) == Parameters::initialize(c, 4));
  EXPECT_FALSE(Parameters::initialize(c, 4) == Parameters::initialize(c, 5));
}

TEST(Parameters, OneHotTablesSurviveAnUpdate) {
  TinyProblem prob = tiny_problem(tiny_config(Variant::MinusE1E2L2), 2, 2, 3);
  TrainConfig tc;
  tc.learning_rate = 0.1;
  const auto ex = prob.examples();
  std::vector<Rng> rngs{Rng(1), Rng(2)};
  const auto lg = combined_loss(prob.config, prob.params, tc, ex, rngs, true);
  EXPECT_EQ(lg.gradients.count("E1"), 0u);
  EXPECT_EQ(lg.gradients.count("E2"), 0u);
  Adam adam(tc);
  const Matrix before = prob.params.at("lstm.W_i");
  adam.step(prob.params, lg.gradients);
  EXPECT_EQ(prob.params.at("E1"), Matrix::Identity(3, 3));
  EXPECT_EQ(prob.params.at("E2"), Matrix::Identity(3, 3));
  EXPECT_NE(prob.params.at("lstm.W_i"), before);
}
