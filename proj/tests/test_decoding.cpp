#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "senti/decoding.hpp"
#include "senti/errors.hpp"
#include "senti/experiment.hpp"

using namespace senti;

namespace {

// Next-token distribution from a fixed table keyed on the last token and the
// prefix length, so the search sees a genuine history dependence.
struct TableModel {
  struct State {
    std::size_t depth = 0;
  };
  std::vector<Matrix> tables;  // per depth: vocab x vocab log-probs, row = previous token

  State initial() const { return {}; }
  StepOutput<State> step(const State& s, Index previous) const {
    const Matrix& t = tables[std::min(s.depth, tables.size() - 1)];
    return {t.row(previous), State{s.depth + 1}, RowVector()};
  }
};

Matrix random_log_probs(Index vocab, Rng& rng, double sharpness) {
  Matrix m(vocab, vocab);
  for (Index r = 0; r < vocab; ++r) {
    RowVector z(vocab);
    for (Index c = 0; c < vocab; ++c) z[c] = sharpness * (2.0 * uniform01(rng) - 1.0);
    const double lse = std::log(z.array().exp().sum());
    m.row(r) = z.array() - lse;
  }
  return m;
}

TableModel random_table_model(Index vocab, std::size_t depths, Rng& rng, double sharpness = 3.0) {
  TableModel m;
  for (std::size_t d = 0; d < depths; ++d) m.tables.push_back(random_log_probs(vocab, rng, sharpness));
  return m;
}

}  // namespace

TEST(Greedy, EndPeakedModelGivesEmptyCaption) {
  TableModel m;
  Matrix t = Matrix::Constant(5, 5, std::log(0.01));
  t.col(token::kEnd).setConstant(std::log(0.96));
  m.tables.push_back(t);
  SearchOptions o;
  const DecodedCaption c = greedy_search(m, o);
  EXPECT_EQ(c.tokens, std::vector<Index>{token::kEnd});
  EXPECT_TRUE(c.finished);
  EXPECT_NEAR(c.log_prob, std::log(0.96), 1e-15);
}

TEST(Greedy, RespectsMaxLenAndBannedTokens) {
  TableModel m;
  Matrix t = Matrix::Constant(5, 5, std::log(0.05));
  t.col(token::kPad).setConstant(std::log(0.8));
  m.tables.push_back(t);
  SearchOptions o;
  o.max_len = 4;
  o.banned = {token::kPad};
  const DecodedCaption c = greedy_search(m, o);
  EXPECT_EQ(c.tokens.size(), 4u);
  EXPECT_FALSE(c.finished);
  // Remaining tokens tie; the lowest id that is not banned wins.
  for (Index tok : c.tokens) EXPECT_EQ(tok, token::kStart);
}

TEST(Options, Validation) {
  SearchOptions o;
  o.beam_width = 0;
  EXPECT_THROW(o.validate(), ConfigError);
  o = SearchOptions{};
  o.max_len = 1;
  EXPECT_THROW(o.validate(), ConfigError);
}

TEST(Beam, WidthOneEqualsGreedy) {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const TableModel m = random_table_model(6, 4, rng, 1.0 + 4.0 * uniform01(rng));
    SearchOptions o;
    o.max_len = 7;
    o.beam_width = 1;
    const DecodedCaption g = greedy_search(m, o);
    const auto b = beam_search(m, o);
    ASSERT_EQ(b.size(), 1u);
    EXPECT_EQ(b[0].tokens, g.tokens) << trial;
    EXPECT_EQ(b[0].log_prob, g.log_prob);
  }
}

TEST(Beam, WidthTwoMatchesEnumeration) {
  // Three tokens: 0 and 1 are words, 2 is <end>. The greedy first choice (0)
  // leads to a poor continuation; the best complete sequence starts with 1.
  TableModel m;
  Matrix first = Matrix::Zero(3, 3), after0 = Matrix::Zero(3, 3);
  const auto lp = [](double a, double b, double c) { return (RowVector(3) << std::log(a), std::log(b), std::log(c)).finished(); };
  first.row(1) = lp(0.5, 0.4, 0.1);  // row = <start> stand-in, id 1
  after0.row(0) = lp(0.3, 0.3, 0.4);
  after0.row(1) = lp(0.05, 0.05, 0.9);
  m.tables = {first, after0};
  SearchOptions o;
  o.start = 1;
  o.end = 2;
  o.max_len = 2;
  o.beam_width = 2;
  const auto got = beam_search(m, o);
  const auto all = oracle::enumerate(3, 2, 2, [&](const std::vector<long>& prefix) {
    const RowVector r = prefix.empty() ? RowVector(first.row(1)) : RowVector(after0.row(prefix.back()));
    return std::vector<double>(r.data(), r.data() + r.size());
  });
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(std::vector<long>(got[0].tokens.begin(), got[0].tokens.end()), all[0].tokens);
  EXPECT_NEAR(got[0].log_prob, all[0].log_prob, 1e-14);
  EXPECT_EQ(got[0].tokens, (std::vector<Index>{1, 2}));
  EXPECT_EQ(greedy_search(m, o).tokens, (std::vector<Index>{0, 2}));
}

TEST(Beam, FindsTheOptimumWhenWideEnough) {
  Rng rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const TableModel m = random_table_model(4, 3, rng);
    SearchOptions o;
    o.start = 0;
    o.end = 3;
    o.max_len = 3;
    o.beam_width = 64;  // wider than the 4^2 live prefixes
    const auto got = beam_search(m, o);
    const auto all = oracle::enumerate(4, 3, 3, [&](const std::vector<long>& prefix) {
      const Matrix& t = m.tables[std::min(prefix.size(), m.tables.size() - 1)];
      const RowVector r = t.row(prefix.empty() ? 0 : prefix.back());
      return std::vector<double>(r.data(), r.data() + r.size());
    });
    ASSERT_FALSE(got.empty());
    EXPECT_NEAR(got[0].log_prob, all[0].log_prob, 1e-12) << trial;
  }
}

TEST(Beam, ResultsAreSortedAndWithinWidth) {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const TableModel m = random_table_model(7, 5, rng);
    SearchOptions o;
    o.max_len = 6;
    o.beam_width = 3;
    o.length_penalty = trial % 2 == 0 ? 0.0 : 0.7;
    o.banned = {token::kPad, token::kStart};
    const auto got = beam_search(m, o);
    ASSERT_FALSE(got.empty());
    EXPECT_LE(got.size(), 3u);
    for (std::size_t i = 1; i < got.size(); ++i) EXPECT_GE(got[i - 1].score, got[i].score);
    for (const auto& c : got) {
      EXPECT_NEAR(c.score, normalized_score(c.log_prob, c.tokens.size(), o.length_penalty), 1e-12);
      for (Index tok : c.tokens) {
        EXPECT_NE(tok, token::kPad);
        EXPECT_NE(tok, token::kStart);
      }
      EXPECT_EQ(c.finished, !c.tokens.empty() && c.tokens.back() == token::kEnd);
    }
  }
}

TEST(Beam, BestIsNoWorseThanGreedyWithoutPenalty) {
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const TableModel m = random_table_model(6, 4, rng);
    SearchOptions o;
    o.max_len = 5;
    o.beam_width = 4;
    const DecodedCaption g = greedy_search(m, o);
    const auto b = beam_search(m, o);
    if (g.finished && b[0].finished) {
      EXPECT_GE(b[0].log_prob, g.log_prob - 1e-12) << trial;
    }
  }
}

namespace {

struct Trained {
  ModelConfig config;
  Parameters params;
  std::vector<Matrix> grids;
};

const Trained& trained_tiny() {
  static const Trained t = [] {
    TinyProblem p = tiny_problem(tiny_config(Variant::Full), 21, 3, 4);
    return Trained{p.config, p.params, p.grids};
  }();
  return t;
}

}  // namespace

TEST(ModelDecode, GreedyPicksTheLocalArgmax) {
  const Trained& m = trained_tiny();
  DecodeRequest req;
  req.max_len = 6;
  const DecodedCaption c = greedy_decode(m.config, m.params, m.grids[0], Sentiment::Positive, req);
  const ModelStepper stepper(m.config, m.params, m.grids[0], Sentiment::Positive);
  auto state = stepper.initial();
  Index prev = token::kStart;
  double total = 0.0;
  for (Index tok : c.tokens) {
    auto out = stepper.step(state, prev);
    EXPECT_NEAR(out.log_probs.array().exp().sum(), 1.0, 1e-12);
    EXPECT_NEAR(out.attention.sum(), 1.0, 1e-12);
    for (Index other = 0; other < out.log_probs.size(); ++other) {
      if (other == token::kPad || other == token::kStart) continue;
      EXPECT_LE(out.log_probs[other], out.log_probs[tok]);
    }
    total += out.log_probs[tok];
    state = out.next;
    prev = tok;
  }
  EXPECT_NEAR(total, c.log_prob, 1e-12);
  EXPECT_EQ(c.attention.size(), c.tokens.size());
}

TEST(ModelDecode, BeamOneEqualsGreedyOnRandomModels) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    TinyProblem p = tiny_problem(tiny_config(kVariants[seed % kVariants.size()]), seed, 1, 3);
    DecodeRequest req;
    req.max_len = 6;
    req.beam_width = 1;
    const Sentiment s = kSentiments[seed % 3];
    const auto g = greedy_decode(p.config, p.params, p.grids[0], s, req);
    const auto b = beam_decode(p.config, p.params, p.grids[0], s, req);
    ASSERT_EQ(b.size(), 1u);
    EXPECT_EQ(b[0].tokens, g.tokens) << seed;
  }
}

TEST(ModelDecode, NeverEmitsPadOrStartAndCanSuppressUnk) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    TinyProblem p = tiny_problem(tiny_config(Variant::Full), seed, 1, 3);
    p.params.mutable_value("word.b")(0, token::kPad) = 50.0;
    p.params.mutable_value("word.b")(0, token::kStart) = 50.0;
    p.params.mutable_value("word.b")(0, token::kUnk) = 40.0;
    DecodeRequest req;
    req.max_len = 5;
    req.suppress_unk = true;
    for (const auto& c : beam_decode(p.config, p.params, p.grids[0], Sentiment::Negative, req)) {
      for (Index tok : c.tokens) {
        EXPECT_NE(tok, token::kPad);
        EXPECT_NE(tok, token::kStart);
        EXPECT_NE(tok, token::kUnk);
      }
    }
    req.suppress_unk = false;
    EXPECT_EQ(greedy_decode(p.config, p.params, p.grids[0], Sentiment::Negative, req).tokens.front(), token::kUnk);
  }
}

TEST(ModelDecode, ContrastiveGivesOneCaptionPerSentiment) {
  const Trained& m = trained_tiny();
  DecodeRequest req;
  req.max_len = 5;
  const auto c = generate_contrastive(m.config, m.params, m.grids[1], req);
  ASSERT_EQ(c.size(), 3u);
  for (Sentiment s : kSentiments) {
    EXPECT_EQ(c.at(s).tokens, greedy_decode(m.config, m.params, m.grids[1], s, req).tokens);
  }
  const auto beam = generate_contrastive(m.config, m.params, m.grids[1], req, true);
  EXPECT_EQ(beam.size(), 3u);

  TinyProblem attend = tiny_problem(tiny_config(Variant::Attend), 2, 1, 3);
  EXPECT_THROW(generate_contrastive(attend.config, attend.params, attend.grids[0], req), ConfigError);
}

TEST(ModelDecode, RepeatableAcrossCalls) {
  const Trained& m = trained_tiny();
  DecodeRequest req;
  const auto a = beam_decode(m.config, m.params, m.grids[2], Sentiment::Neutral, req);
  const auto b = beam_decode(m.config, m.params, m.grids[2], Sentiment::Neutral, req);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].tokens, b[i].tokens);
    EXPECT_EQ(a[i].log_prob, b[i].log_prob);
  }
}
