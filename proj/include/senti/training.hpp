#pragma once

// Losses, Adam and the epoch loop.
//
//   L1 = -sum_t log p1(x_t) + sum_k (1 - sum_t alpha_tk)^2
//   L2 = -(1/L) sum_t log p2(s | h_t)        (Full variant only)
//   total = xent + lambda_att * reg + lambda_l2 * L2, averaged over the batch

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "senti/corpus.hpp"
#include "senti/model.hpp"

namespace senti {

struct TrainConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 180;
  std::size_t epochs = 20;
  double lambda_att = 1.0;
  double lambda_l2 = 1.0;
  double clip_norm = 5.0;  // <= 0 disables clipping
  std::uint64_t seed = 1;
  std::string selection_metric = "cider";
  // Worker threads for the per-example passes of a batch. 0 reads
  // SENTI_ATTEND_THREADS and falls back to 1.
  std::size_t threads = 0;

  void validate() const;
  // Full-size batch size: 100 for Attend, 180 otherwise.
  static TrainConfig full_scale(Variant v);
};

struct LossBreakdown {
  double l1_xent = 0.0;
  double l1_reg = 0.0;
  double l2 = 0.0;
  double total = 0.0;
};

struct L1Terms {
  Tensor xent;
  Tensor reg;
};

// Cross entropy of the gold tokens and the attention regularizer, summed over
// the steps of `trace`. Throws Error when the trace does not belong to
// `caption`.
L1Terms loss_l1(const ForwardTrace& trace, std::span<const Index> caption);
// Step-averaged sentiment cross entropy. ConfigError without sentiment logits.
Tensor loss_l2(const ForwardTrace& trace, Sentiment sentiment);

// One training item: a feature grid, a <start>..<end> caption and its label.
struct Example {
  const Matrix* features = nullptr;
  std::span<const Index> tokens;
  Sentiment sentiment = Sentiment::Neutral;
};

struct LossAndGradients {
  LossBreakdown loss;
  std::map<std::string, Matrix> gradients;  // trainable parameters only
};

// Forward and backward pass for one example. The L2 term is included for the
// Full variant only.
LossAndGradients example_loss(const ModelConfig& config, const Parameters& params, const TrainConfig& train,
                              const Example& example, Rng& rng, bool training);

// Mean loss and mean gradients over a batch. rngs[i] drives example i.
// total is recomputed from the averaged components.
LossAndGradients combined_loss(const ModelConfig& config, const Parameters& params, const TrainConfig& train,
                               std::span<const Example> batch, std::span<Rng> rngs, bool training);

class Adam {
 public:
  explicit Adam(const TrainConfig& config);

  // Updates trainable parameters in place. A step whose gradients are all
  // zero only advances the timestep. Throws NumericError naming the first
  // parameter with a non-finite gradient, ShapeError on shape mismatch.
  void step(Parameters& params, const std::map<std::string, Matrix>& gradients);
  std::int64_t timestep() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::map<std::string, Matrix> m_, v_;
};

// Rescales so the global L2 norm is at most max_norm. Returns the norm
// before clipping.
double clip_global_norm(std::map<std::string, Matrix>& gradients, double max_norm);

// Index of the largest value, earliest on ties. Throws ConfigError when empty.
std::size_t select_best(std::span<const double> metric_per_epoch);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  LossBreakdown loss;     // mean over the epoch's examples
  std::optional<double> validation;
};

struct TrainResult {
  Parameters best;
  Parameters last;
  std::size_t best_epoch = 0;  // 1-based
  std::vector<EpochLog> log;
};

// Scores parameters on held-out data; larger is better.
using Validator = std::function<double(const Parameters&)>;

// Seeded shuffle per epoch, teacher forcing on every record, one Adam step
// per batch. With a validator the best epoch is selected on it, otherwise
// best == last. Records without a sentiment label count as Neutral.
// ConfigError on an empty corpus.
TrainResult train(const ModelConfig& config, Parameters init, const TrainConfig& train_config,
                  std::span<const CaptionRecord> records, const FeatureStore& features,
                  const Validator& validator = {}, const std::function<void(const EpochLog&)>& on_epoch = {});

// Worker count after applying the SENTI_ATTEND_THREADS override.
std::size_t resolve_threads(std::size_t requested);

}  // namespace senti
