#pragma once

// Greedy and beam search. The search itself is generic over a step model:
//
//   struct M {
//     using State = ...;
//     State initial() const;
//     StepOutput<State> step(const State& s, Index previous_token) const;
//   };
//
// step() feeds the previously emitted token (the start token first) and
// returns log-probabilities over the next one. ModelStepper adapts a trained
// decoder to this interface.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <map>
#include <tuple>
#include <vector>

#include "senti/errors.hpp"
#include "senti/model.hpp"

namespace senti {

template <typename State>
struct StepOutput {
  RowVector log_probs;
  State next;
  RowVector attention;  // empty when the model has none
};

template <typename M>
concept StepModel = requires(const M& m, const typename M::State& s, Index token) {
  { m.initial() } -> std::convertible_to<typename M::State>;
  { m.step(s, token) } -> std::convertible_to<StepOutput<typename M::State>>;
};

struct SearchOptions {
  std::size_t max_len = 20;  // emitted tokens, <end> included
  std::size_t beam_width = 3;
  double length_penalty = 0.0;
  Index start = token::kStart;
  Index end = token::kEnd;
  std::vector<Index> banned;  // never emitted

  void validate() const {
    if (max_len < 2) throw ConfigError("max_len must be >= 2");
    if (beam_width < 1) throw ConfigError("beam_width must be >= 1");
    if (!(length_penalty >= 0.0)) throw ConfigError("length_penalty must be >= 0");
  }
};

struct DecodedCaption {
  std::vector<Index> tokens;  // emitted tokens, <start> excluded, <end> included when reached
  double log_prob = 0.0;      // sum of the emitted tokens' log-probabilities
  double score = 0.0;         // log_prob / length^penalty
  bool finished = false;      // reached <end> before max_len ran out
  std::vector<RowVector> attention;  // one map per emitted token
};

inline double normalized_score(double log_prob, std::size_t length, double penalty) {
  if (penalty == 0.0 || length == 0) return log_prob;
  return log_prob / std::pow(static_cast<double>(length), penalty);
}

namespace detail {

inline bool banned(const SearchOptions& o, Index tok) {
  return std::find(o.banned.begin(), o.banned.end(), tok) != o.banned.end();
}

template <typename State>
struct Live {
  DecodedCaption caption;
  State state;
  Index previous;
};

}  // namespace detail

// Argmax at every step, ties to the lowest token id.
template <StepModel M>
DecodedCaption greedy_search(const M& model, const SearchOptions& options) {
  options.validate();
  DecodedCaption out;
  typename M::State state = model.initial();
  Index previous = options.start;
  for (std::size_t len = 1; len <= options.max_len; ++len) {
    auto step = model.step(state, previous);
    Index best = -1;
    for (Index tok = 0; tok < step.log_probs.size(); ++tok) {
      if (detail::banned(options, tok)) continue;
      if (best < 0 || step.log_probs[tok] > step.log_probs[best]) best = tok;
    }
    if (best < 0) throw ConfigError("every token is banned");
    out.tokens.push_back(best);
    out.log_prob += step.log_probs[best];
    out.attention.push_back(std::move(step.attention));
    if (best == options.end) {
      out.finished = true;
      break;
    }
    state = std::move(step.next);
    previous = best;
  }
  out.score = normalized_score(out.log_prob, out.tokens.size(), options.length_penalty);
  return out;
}

// Length-normalized beam search. Expansions are ranked by (score desc,
// parent rank asc, token asc); an <end> expansion retires a hypothesis only
// when it ranks inside the top beam_width, and the live beam is refilled
// from the best non-<end> expansions. Stops once beam_width hypotheses are
// finished and no live one scores above the worst of them. Hypotheses still
// live at max_len are returned unfinished. Result sorted by score, best first.
template <StepModel M>
std::vector<DecodedCaption> beam_search(const M& model, const SearchOptions& options) {
  options.validate();
  using State = typename M::State;
  const std::size_t width = options.beam_width;

  std::vector<detail::Live<State>> live;
  live.push_back({DecodedCaption{}, model.initial(), options.start});
  std::vector<DecodedCaption> done;

  const auto by_score = [](const DecodedCaption& a, const DecodedCaption& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.tokens < b.tokens;
  };

  for (std::size_t len = 1; len <= options.max_len && !live.empty(); ++len) {
    struct Expansion {
      double score;
      double log_prob;
      std::size_t parent;
      Index token;
    };
    std::vector<StepOutput<State>> outputs;
    outputs.reserve(live.size());
    std::vector<Expansion> expansions;
    for (std::size_t p = 0; p < live.size(); ++p) {
      outputs.push_back(model.step(live[p].state, live[p].previous));
      const RowVector& lp = outputs.back().log_probs;
      for (Index tok = 0; tok < lp.size(); ++tok) {
        if (detail::banned(options, tok)) continue;
        const double total = live[p].caption.log_prob + lp[tok];
        expansions.push_back({normalized_score(total, len, options.length_penalty), total, p, tok});
      }
    }
    std::sort(expansions.begin(), expansions.end(), [](const Expansion& a, const Expansion& b) {
      return std::tie(b.score, a.parent, a.token) < std::tie(a.score, b.parent, b.token);
    });

    std::vector<detail::Live<State>> next;
    for (std::size_t rank = 0; rank < expansions.size() && next.size() < width; ++rank) {
      const Expansion& e = expansions[rank];
      DecodedCaption c = live[e.parent].caption;
      c.tokens.push_back(e.token);
      c.log_prob = e.log_prob;
      c.score = e.score;
      c.attention.push_back(outputs[e.parent].attention);
      if (e.token == options.end) {
        if (rank < width) {
          c.finished = true;
          done.push_back(std::move(c));
        }
        continue;
      }
      next.push_back({std::move(c), outputs[e.parent].next, e.token});
    }
    live = std::move(next);

    if (len == options.max_len) {
      for (auto& l : live) done.push_back(std::move(l.caption));
      live.clear();
      break;
    }
    if (done.size() >= width && !live.empty()) {
      std::sort(done.begin(), done.end(), by_score);
      const double worst_kept = done[width - 1].score;
      double best_live = -std::numeric_limits<double>::infinity();
      for (const auto& l : live) best_live = std::max(best_live, l.caption.score);
      if (best_live <= worst_kept) break;
    }
  }
  std::sort(done.begin(), done.end(), by_score);
  if (done.size() > width) done.resize(width);
  return done;
}

// Per-request decoding settings.
struct DecodeRequest {
  std::size_t max_len = 20;
  std::size_t beam_width = 3;
  double length_penalty = 0.0;
  bool suppress_unk = false;

  SearchOptions options() const;
};

// A trained decoder as a StepModel: evaluation mode (no dropout), sentiment
// fixed per instance. The feature grid and parameters are borrowed.
class ModelStepper {
 public:
  struct State {
    Matrix h;
    Matrix c;
  };

  ModelStepper(const ModelConfig& config, const Parameters& params, const Matrix& features, Sentiment sentiment);

  State initial() const;
  StepOutput<State> step(const State& state, Index previous_token) const;

 private:
  const ModelConfig* config_;
  const Parameters* params_;
  const Matrix* features_;
  Sentiment sentiment_;
};

DecodedCaption greedy_decode(const ModelConfig& config, const Parameters& params, const Matrix& features,
                             Sentiment sentiment, const DecodeRequest& request);
std::vector<DecodedCaption> beam_decode(const ModelConfig& config, const Parameters& params, const Matrix& features,
                                        Sentiment sentiment, const DecodeRequest& request);

// One caption per sentiment category over the same grid. Beam search with
// width request.beam_width when use_beam is set, greedy otherwise.
// ConfigError for the Attend variant.
std::map<Sentiment, DecodedCaption> generate_contrastive(const ModelConfig& config, const Parameters& params,
                                                         const Matrix& features, const DecodeRequest& request,
                                                         bool use_beam = false);

}  // namespace senti
