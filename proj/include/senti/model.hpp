#pragma once

// Attention LSTM caption decoder conditioned on a sentiment category.
//
// Per step t, with context a_hat_t from soft attention over the K regions:
//   gate_x = w_{t-1} W_x + h_{t-1} H_x + a_hat_t A_x + E1 B_x + b_x,  x in {i, g, o, f}
//   c_t = f * c_{t-1} + i * g,   h_t = o * tanh(c_t)
//   word logits      = h_t W_h + a_hat_t W_a + E2 W_e + b
//   sentiment logits = h_t W_s + b_s
// E1 feeds every gate, E2 is an extra energy term on the word head. The
// ablation variants drop pieces of this (see Variant).

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "senti/tensor.hpp"

namespace senti {

enum class Sentiment : int { Positive = 0, Neutral = 1, Negative = 2 };

inline constexpr std::array<Sentiment, 3> kSentiments = {Sentiment::Positive, Sentiment::Neutral,
                                                         Sentiment::Negative};

// "pos", "neutral", "neg".
std::string_view to_string(Sentiment s);
// Accepts pos/positive, neg/negative, neutral. Throws ConfigError otherwise.
Sentiment parse_sentiment(std::string_view text);

enum class Variant {
  Attend,       // no sentiment input at all
  MinusE1E2L2,  // fixed one-hot sentiment tables in place of E1/E2, no sentiment loss
  MinusE2L2,    // E1 only, no sentiment loss
  MinusL2,      // E1 and E2, no sentiment loss
  Full,
};

// Row order of the ablation table.
inline constexpr std::array<Variant, 5> kVariants = {Variant::Attend, Variant::MinusE1E2L2,
                                                     Variant::MinusE2L2, Variant::MinusL2, Variant::Full};

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view text);

constexpr bool has_e1(Variant v) { return v != Variant::Attend; }
constexpr bool has_e2(Variant v) {
  return v == Variant::Full || v == Variant::MinusL2 || v == Variant::MinusE1E2L2;
}
constexpr bool uses_sentiment_loss(Variant v) { return v == Variant::Full; }
constexpr bool one_hot_sentiment(Variant v) { return v == Variant::MinusE1E2L2; }

// Reserved vocabulary ids.
namespace token {
inline constexpr Index kPad = 0;
inline constexpr Index kStart = 1;
inline constexpr Index kEnd = 2;
inline constexpr Index kUnk = 3;
inline constexpr Index kReserved = 4;
}  // namespace token

struct ModelConfig {
  Index regions = 196;      // K
  Index feature_dim = 512;  // D
  Index hidden = 2048;
  Index word_dim = 512;   // M
  Index senti_dim = 256;  // F; forced to 3 for the one-hot variant
  Index vocab_size = 9703;
  Index attention_hidden = 512;
  Variant variant = Variant::Full;
  double dropout_rate = 0.5;

  void validate() const;
  Index sentiment_dim() const { return one_hot_sentiment(variant) ? 3 : senti_dim; }

  // Full-size dimensions for a variant (hidden 1024 for Attend, 2048 otherwise).
  static ModelConfig full_scale(Variant v);
};

struct Param {
  Matrix value;
  bool trainable = true;
};

// Named weights of one model. Iteration order is lexicographic by name, which
// fixes checkpoint layout and gradient reduction order.
class Parameters {
 public:
  Parameters() = default;

  // Random init: Glorot-uniform weights, uniform(-0.1, 0.1) embeddings, zero biases.
  static Parameters initialize(const ModelConfig& config, std::uint64_t seed);

  bool contains(std::string_view name) const;
  const Matrix& at(std::string_view name) const;
  Matrix& mutable_value(std::string_view name);
  bool trainable(std::string_view name) const;
  void insert(std::string name, Matrix value, bool trainable = true);

  const std::map<std::string, Param, std::less<>>& entries() const { return entries_; }
  std::map<std::string, Param, std::less<>>& entries() { return entries_; }

  std::size_t trainable_scalars() const;
  std::vector<std::string> names() const;

  friend bool operator==(const Parameters& a, const Parameters& b);

 private:
  std::map<std::string, Param, std::less<>> entries_;
};

// Names of the four gates in the order i, g, o, f.
inline constexpr std::array<std::string_view, 4> kGates = {"i", "g", "o", "f"};

struct SpatialFeatures {
  std::string image_id;
  Matrix grid;  // K x D
};

// Parameters placed on a tape as leaves. Trainable parameters receive
// gradients when the tape records; fixed ones are constants.
class BoundModel {
 public:
  BoundModel(Tape& tape, const ModelConfig& config, const Parameters& params);

  Tape& tape() const { return *tape_; }
  const ModelConfig& config() const { return config_; }
  bool has(std::string_view name) const;
  Tensor at(std::string_view name) const;

  // Gradient of every trainable parameter after tape().backward().
  std::map<std::string, Matrix> gradients() const;

 private:
  Tape* tape_;
  ModelConfig config_;
  const Parameters* params_;
  std::map<std::string, Tensor, std::less<>> bound_;
};

struct DecoderState {
  Tensor h;      // 1 x hidden
  Tensor c;      // 1 x hidden
  Tensor alpha;  // 1 x K, last attention weights
};

struct AttentionResult {
  Tensor context;  // 1 x D
  Tensor alpha;    // 1 x K
};

// E1 and E2 rows for one sentiment category; absent where the variant has none.
struct SentimentInputs {
  std::optional<Tensor> e1;
  std::optional<Tensor> e2;
};

// Checks a K x D grid against the config. Throws ConfigError.
void check_features(const ModelConfig& config, const Matrix& grid);

DecoderState init_state(const BoundModel& model, Tensor features);
AttentionResult attend(const BoundModel& model, Tensor features, Tensor h_prev);
DecoderState lstm_step(const BoundModel& model, const DecoderState& state, Tensor w_prev,
                       Tensor context, std::optional<Tensor> e1);
Tensor word_logits(const BoundModel& model, const DecoderState& state, Tensor context,
                   std::optional<Tensor> e2);
Tensor sentiment_logits(const BoundModel& model, const DecoderState& state);
SentimentInputs lookup_sentiment(const BoundModel& model, Sentiment s);

struct ForwardTrace {
  std::vector<Tensor> alphas;            // per step, 1 x K
  std::vector<Tensor> word_logits;       // per step, 1 x N
  std::vector<Tensor> sentiment_logits;  // per step, 1 x 3; Full only
  std::vector<Index> targets;            // gold token predicted at each step
};

// Teacher-forced pass over <start> w_1 ... <end>: T tokens give T - 1 steps.
// E1/E2 are looked up once; dropout on them is drawn per step when training.
ForwardTrace forward_teacher_forced(const BoundModel& model, Tensor features, std::span<const Index> caption,
                                    Sentiment sentiment, Rng& rng, bool training);

}  // namespace senti
