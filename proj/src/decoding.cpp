#include "senti/decoding.hpp"

namespace senti {

SearchOptions DecodeRequest::options() const {
  SearchOptions o;
  o.max_len = max_len;
  o.beam_width = beam_width;
  o.length_penalty = length_penalty;
  o.banned = {token::kPad, token::kStart};
  if (suppress_unk) o.banned.push_back(token::kUnk);
  return o;
}

ModelStepper::ModelStepper(const ModelConfig& config, const Parameters& params, const Matrix& features,
                           Sentiment sentiment)
    : config_(&config), params_(&params), features_(&features), sentiment_(sentiment) {
  check_features(config, features);
}

ModelStepper::State ModelStepper::initial() const {
  Tape tape(false);
  BoundModel model(tape, *config_, *params_);
  const DecoderState s = init_state(model, tape.constant_view(*features_));
  return {s.h.value(), s.c.value()};
}

StepOutput<ModelStepper::State> ModelStepper::step(const State& state, Index previous_token) const {
  Tape tape(false);
  BoundModel model(tape, *config_, *params_);
  const Tensor features = tape.constant_view(*features_);
  DecoderState s{tape.constant_view(state.h), tape.constant_view(state.c), Tensor{}};
  const SentimentInputs senti = lookup_sentiment(model, sentiment_);
  const Tensor w_prev = embedding_lookup(model.at("word_embed"), previous_token);
  const AttentionResult att = attend(model, features, s.h);
  s = lstm_step(model, s, w_prev, att.context, senti.e1);
  const Tensor logits = word_logits(model, s, att.context, senti.e2);
  return {log_softmax(logits).value(), State{s.h.value(), s.c.value()}, att.alpha.value()};
}

DecodedCaption greedy_decode(const ModelConfig& config, const Parameters& params, const Matrix& features,
                             Sentiment sentiment, const DecodeRequest& request) {
  return greedy_search(ModelStepper(config, params, features, sentiment), request.options());
}

std::vector<DecodedCaption> beam_decode(const ModelConfig& config, const Parameters& params, const Matrix& features,
                                        Sentiment sentiment, const DecodeRequest& request) {
  return beam_search(ModelStepper(config, params, features, sentiment), request.options());
}

std::map<Sentiment, DecodedCaption> generate_contrastive(const ModelConfig& config, const Parameters& params,
                                                         const Matrix& features, const DecodeRequest& request,
                                                         bool use_beam) {
  if (config.variant == Variant::Attend) throw ConfigError("contrastive generation needs a sentiment variant");
  std::map<Sentiment, DecodedCaption> out;
  for (Sentiment s : kSentiments) {
    out[s] = use_beam ? beam_decode(config, params, features, s, request).front()
                      : greedy_decode(config, params, features, s, request);
  }
  return out;
}

}  // namespace senti
