#include "senti/model.hpp"

#include <cmath>
#include <cstring>
#include <string>
#include <utility>

#include "senti/errors.hpp"

namespace senti {
namespace {

std::string gate_name(std::string_view family, std::string_view gate) {
  return "lstm." + std::string(family) + "_" + std::string(gate);
}

Matrix uniform_matrix(Index rows, Index cols, double limit, Rng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * uniform01(rng) - 1.0) * limit;
  return m;
}

Matrix glorot(Index fan_in, Index fan_out, Rng& rng) {
  return uniform_matrix(fan_in, fan_out, std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)), rng);
}

Tensor affine(Tensor x, Tensor weight) { return matmul(x, weight); }

}  // namespace

std::string_view to_string(Sentiment s) {
  switch (s) {
    case Sentiment::Positive:
      return "pos";
    case Sentiment::Neutral:
      return "neutral";
    case Sentiment::Negative:
      return "neg";
  }
  return "?";
}

Sentiment parse_sentiment(std::string_view text) {
  if (text == "pos" || text == "positive") return Sentiment::Positive;
  if (text == "neg" || text == "negative") return Sentiment::Negative;
  if (text == "neutral") return Sentiment::Neutral;
  throw ConfigError("unknown sentiment '" + std::string(text) + "' (expected pos, neg or neutral)");
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Attend:
      return "attend";
    case Variant::MinusE1E2L2:
      return "minus_e1e2l2";
    case Variant::MinusE2L2:
      return "minus_e2l2";
    case Variant::MinusL2:
      return "minus_l2";
    case Variant::Full:
      return "full";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  for (Variant v : kVariants) {
    if (text == to_string(v)) return v;
  }
  throw ConfigError("unknown variant '" + std::string(text) +
                    "' (expected attend, minus_e1e2l2, minus_e2l2, minus_l2 or full)");
}

void ModelConfig::validate() const {
  const auto positive = [](Index v, const char* name) {
    if (v < 1) throw ConfigError(std::string("model dimension '") + name + "' must be >= 1");
  };
  positive(regions, "regions");
  positive(feature_dim, "feature_dim");
  positive(hidden, "hidden");
  positive(word_dim, "word_dim");
  positive(senti_dim, "senti_dim");
  positive(attention_hidden, "attention_hidden");
  if (vocab_size <= token::kReserved) {
    throw ConfigError("vocab_size must exceed the " + std::to_string(token::kReserved) + " reserved tokens");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must lie in [0, 1)");
}

ModelConfig ModelConfig::full_scale(Variant v) {
  ModelConfig c;
  c.variant = v;
  c.hidden = v == Variant::Attend ? 1024 : 2048;
  return c;
}

Parameters Parameters::initialize(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  Parameters p;
  const Variant v = config.variant;
  const Index F = config.sentiment_dim();
  const Index H = config.hidden;
  const Index N = config.vocab_size;
  const Index D = config.feature_dim;
  const Index M = config.word_dim;
  const Index A = config.attention_hidden;

  p.insert("word_embed", uniform_matrix(N, M, 0.1, rng));
  if (one_hot_sentiment(v)) {
    p.insert("E1", Matrix::Identity(3, 3), false);
    p.insert("E2", Matrix::Identity(3, 3), false);
  } else {
    if (has_e1(v)) p.insert("E1", uniform_matrix(3, F, 0.1, rng));
    if (has_e2(v)) p.insert("E2", uniform_matrix(3, F, 0.1, rng));
  }

  for (std::string_view g : kGates) {
    p.insert(gate_name("W", g), glorot(M, H, rng));
    p.insert(gate_name("H", g), glorot(H, H, rng));
    p.insert(gate_name("A", g), glorot(D, H, rng));
    if (has_e1(v)) p.insert(gate_name("B", g), glorot(F, H, rng));
    p.insert(gate_name("b", g), Matrix::Zero(1, H));
  }

  p.insert("word.W_h", glorot(H, N, rng));
  p.insert("word.W_a", glorot(D, N, rng));
  if (has_e2(v)) p.insert("word.W_e", glorot(F, N, rng));
  p.insert("word.b", Matrix::Zero(1, N));

  if (v != Variant::Attend) {
    p.insert("senti.W_s", glorot(H, 3, rng));
    p.insert("senti.b_s", Matrix::Zero(1, 3));
  }

  p.insert("att.U_a", glorot(D, A, rng));
  p.insert("att.U_h", glorot(H, A, rng));
  p.insert("att.b", Matrix::Zero(1, A));
  p.insert("att.v", glorot(A, 1, rng));

  p.insert("init.W_h", glorot(D, H, rng));
  p.insert("init.b_h", Matrix::Zero(1, H));
  p.insert("init.W_c", glorot(D, H, rng));
  p.insert("init.b_c", Matrix::Zero(1, H));
  return p;
}

bool Parameters::contains(std::string_view name) const { return entries_.find(name) != entries_.end(); }

const Matrix& Parameters::at(std::string_view name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("no parameter named '" + std::string(name) + "'");
  return it->second.value;
}

Matrix& Parameters::mutable_value(std::string_view name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("no parameter named '" + std::string(name) + "'");
  return it->second.value;
}

bool Parameters::trainable(std::string_view name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("no parameter named '" + std::string(name) + "'");
  return it->second.trainable;
}

void Parameters::insert(std::string name, Matrix value, bool trainable) {
  entries_.insert_or_assign(std::move(name), Param{std::move(value), trainable});
}

std::size_t Parameters::trainable_scalars() const {
  std::size_t n = 0;
  for (const auto& [name, p] : entries_) {
    if (p.trainable) n += static_cast<std::size_t>(p.value.size());
  }
  return n;
}

std::vector<std::string> Parameters::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, p] : entries_) out.push_back(name);
  return out;
}

bool operator==(const Parameters& a, const Parameters& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  auto ib = b.entries_.begin();
  for (const auto& [name, p] : a.entries_) {
    if (name != ib->first || p.trainable != ib->second.trainable) return false;
    const Matrix& x = p.value;
    const Matrix& y = ib->second.value;
    if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
    // Bitwise equality, including the sign of zero.
    for (Index i = 0; i < x.size(); ++i) {
      if (std::memcmp(&x.data()[i], &y.data()[i], sizeof(double)) != 0) return false;
    }
    ++ib;
  }
  return true;
}

BoundModel::BoundModel(Tape& tape, const ModelConfig& config, const Parameters& params)
    : tape_(&tape), config_(config), params_(&params) {
  config_.validate();
  for (const auto& [name, p] : params.entries()) {
    bound_.emplace(name, p.trainable ? tape.parameter(p.value) : tape.constant_view(p.value));
  }
}

bool BoundModel::has(std::string_view name) const { return bound_.find(name) != bound_.end(); }

Tensor BoundModel::at(std::string_view name) const {
  auto it = bound_.find(name);
  if (it == bound_.end()) {
    throw ConfigError("variant " + std::string(to_string(config_.variant)) + " has no parameter '" +
                      std::string(name) + "'");
  }
  return it->second;
}

std::map<std::string, Matrix> BoundModel::gradients() const {
  std::map<std::string, Matrix> out;
  for (const auto& [name, p] : params_->entries()) {
    if (p.trainable) out.emplace(name, tape_->grad(bound_.at(name)));
  }
  return out;
}

void check_features(const ModelConfig& config, const Matrix& grid) {
  if (grid.rows() != config.regions || grid.cols() != config.feature_dim) {
    throw ConfigError("feature grid is " + std::to_string(grid.rows()) + "x" + std::to_string(grid.cols()) +
                      ", model expects " + std::to_string(config.regions) + "x" +
                      std::to_string(config.feature_dim));
  }
}

DecoderState init_state(const BoundModel& model, Tensor features) {
  check_features(model.config(), features.value());
  const Tensor mean = reduce_mean(features, 0);
  DecoderState s;
  s.h = tanh_act(affine(mean, model.at("init.W_h")) + model.at("init.b_h"));
  s.c = tanh_act(affine(mean, model.at("init.W_c")) + model.at("init.b_c"));
  const Index K = model.config().regions;
  s.alpha = model.tape().constant(Matrix::Constant(1, K, 1.0 / static_cast<double>(K)));
  return s;
}

AttentionResult attend(const BoundModel& model, Tensor features, Tensor h_prev) {
  check_features(model.config(), features.value());
  const Tensor projected = matmul(features, model.at("att.U_a"));                // K x A
  const Tensor query = affine(h_prev, model.at("att.U_h")) + model.at("att.b");  // 1 x A
  const Tensor scores = matmul(tanh_act(add_rowwise(projected, query)), model.at("att.v"));  // K x 1
  AttentionResult r;
  r.alpha = softmax(transpose(scores), 1);
  r.context = matmul(r.alpha, features);
  return r;
}

DecoderState lstm_step(const BoundModel& model, const DecoderState& state, Tensor w_prev, Tensor context,
                       std::optional<Tensor> e1) {
  const Variant v = model.config().variant;
  if (has_e1(v) && !e1) {
    throw ConfigError("variant " + std::string(to_string(v)) + " needs a sentiment embedding E1");
  }
  if (!has_e1(v) && e1) throw ConfigError("variant attend takes no sentiment embedding");

  std::array<Tensor, 4> pre;
  for (std::size_t k = 0; k < kGates.size(); ++k) {
    const std::string_view g = kGates[k];
    Tensor z = affine(w_prev, model.at(gate_name("W", g))) + affine(state.h, model.at(gate_name("H", g))) +
               affine(context, model.at(gate_name("A", g)));
    if (e1) z = z + affine(*e1, model.at(gate_name("B", g)));
    pre[k] = z + model.at(gate_name("b", g));
  }
  const Tensor i = sigmoid(pre[0]);
  const Tensor g = tanh_act(pre[1]);
  const Tensor o = sigmoid(pre[2]);
  const Tensor f = sigmoid(pre[3]);

  DecoderState next;
  next.c = mul(f, state.c) + mul(i, g);
  next.h = mul(o, tanh_act(next.c));
  next.alpha = state.alpha;
  return next;
}

Tensor word_logits(const BoundModel& model, const DecoderState& state, Tensor context, std::optional<Tensor> e2) {
  const Variant v = model.config().variant;
  if (has_e2(v) != e2.has_value()) {
    throw ConfigError("variant " + std::string(to_string(v)) +
                      (has_e2(v) ? " needs a word-level sentiment embedding E2" : " takes no E2 input"));
  }
  Tensor z = affine(state.h, model.at("word.W_h")) + affine(context, model.at("word.W_a"));
  if (e2) z = z + affine(*e2, model.at("word.W_e"));
  return z + model.at("word.b");
}

Tensor sentiment_logits(const BoundModel& model, const DecoderState& state) {
  const Variant v = model.config().variant;
  if (!uses_sentiment_loss(v)) {
    throw ConfigError("sentiment head is only used by the full variant, not " + std::string(to_string(v)));
  }
  return affine(state.h, model.at("senti.W_s")) + model.at("senti.b_s");
}

SentimentInputs lookup_sentiment(const BoundModel& model, Sentiment s) {
  SentimentInputs in;
  const Variant v = model.config().variant;
  const auto row = static_cast<Index>(s);
  if (has_e1(v)) in.e1 = embedding_lookup(model.at("E1"), row);
  if (has_e2(v)) in.e2 = embedding_lookup(model.at("E2"), row);
  return in;
}

ForwardTrace forward_teacher_forced(const BoundModel& model, Tensor features, std::span<const Index> caption,
                                    Sentiment sentiment, Rng& rng, bool training) {
  const ModelConfig& cfg = model.config();
  if (caption.size() < 2) throw DataError("caption needs at least <start> and <end>");
  if (caption.front() != token::kStart || caption.back() != token::kEnd) {
    throw DataError("caption must begin with <start> and end with <end>");
  }
  for (Index id : caption) {
    if (id < 0 || id >= cfg.vocab_size) throw DataError("token id " + std::to_string(id) + " outside vocabulary");
  }

  const SentimentInputs senti = lookup_sentiment(model, sentiment);
  const Tensor embed = model.at("word_embed");
  DecoderState state = init_state(model, features);

  ForwardTrace trace;
  const std::size_t steps = caption.size() - 1;
  trace.alphas.reserve(steps);
  trace.word_logits.reserve(steps);
  trace.targets.reserve(steps);
  for (std::size_t t = 1; t <= steps; ++t) {
    const Tensor w_prev = embedding_lookup(embed, caption[t - 1]);
    const AttentionResult att = attend(model, features, state.h);
    std::optional<Tensor> e1;
    std::optional<Tensor> e2;
    if (senti.e1) e1 = dropout(*senti.e1, cfg.dropout_rate, training, rng);
    if (senti.e2) e2 = dropout(*senti.e2, cfg.dropout_rate, training, rng);
    state = lstm_step(model, state, w_prev, att.context, e1);
    state.alpha = att.alpha;
    trace.alphas.push_back(att.alpha);
    trace.word_logits.push_back(word_logits(model, state, att.context, e2));
    if (uses_sentiment_loss(cfg.variant)) trace.sentiment_logits.push_back(sentiment_logits(model, state));
    trace.targets.push_back(caption[t]);
  }
  return trace;
}

}  // namespace senti
