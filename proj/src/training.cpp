#include "senti/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "senti/errors.hpp"

namespace senti {

void TrainConfig::validate() const {
  // lr = 0 is allowed: it freezes the parameters, which the tests rely on.
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(lambda_att >= 0.0)) throw ConfigError("lambda_att must be >= 0");
  if (!(lambda_l2 >= 0.0)) throw ConfigError("lambda_l2 must be >= 0");
  if (std::isnan(clip_norm)) throw ConfigError("clip_norm must be a number");
  if (selection_metric != "cider") {
    throw ConfigError("selection_metric '" + selection_metric + "' is not supported (use cider)");
  }
}

TrainConfig TrainConfig::full_scale(Variant v) {
  TrainConfig c;
  c.batch_size = v == Variant::Attend ? 100 : 180;
  return c;
}

L1Terms loss_l1(const ForwardTrace& trace, std::span<const Index> caption) {
  const std::size_t steps = trace.word_logits.size();
  if (steps == 0 || caption.size() != steps + 1 || trace.alphas.size() != steps || trace.targets.size() != steps) {
    throw Error("trace has " + std::to_string(steps) + " steps for a caption of " +
                std::to_string(caption.size()) + " tokens");
  }
  std::vector<Tensor> picked;
  picked.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    if (trace.targets[t] != caption[t + 1]) throw Error("trace targets do not match the caption");
    picked.push_back(pick(log_softmax(trace.word_logits[t]), 0, caption[t + 1]));
  }
  const Tensor xent = scale(sum_all(concat(picked, 1)), -1.0);

  const Tensor mass = reduce_sum(concat(trace.alphas, 0), 0);  // 1 x K
  const Tensor reg = sum_all(square(add_scalar(scale(mass, -1.0), 1.0)));
  return {xent, reg};
}

Tensor loss_l2(const ForwardTrace& trace, Sentiment sentiment) {
  if (trace.sentiment_logits.empty()) throw ConfigError("trace has no sentiment logits (Full variant only)");
  std::vector<Tensor> picked;
  picked.reserve(trace.sentiment_logits.size());
  for (const Tensor& logits : trace.sentiment_logits) {
    picked.push_back(pick(log_softmax(logits), 0, static_cast<Index>(sentiment)));
  }
  return scale(sum_all(concat(picked, 1)), -1.0 / static_cast<double>(picked.size()));
}

LossAndGradients example_loss(const ModelConfig& config, const Parameters& params, const TrainConfig& train,
                              const Example& example, Rng& rng, bool training) {
  if (example.features == nullptr) throw Error("example without features");
  check_features(config, *example.features);
  Tape tape;
  BoundModel model(tape, config, params);
  const Tensor features = tape.constant_view(*example.features);
  const ForwardTrace trace = forward_teacher_forced(model, features, example.tokens, example.sentiment, rng, training);
  const L1Terms l1 = loss_l1(trace, example.tokens);

  LossAndGradients out;
  Tensor total = l1.xent + scale(l1.reg, train.lambda_att);
  out.loss.l1_xent = l1.xent.item();
  out.loss.l1_reg = l1.reg.item();
  if (uses_sentiment_loss(config.variant)) {
    const Tensor l2 = loss_l2(trace, example.sentiment);
    out.loss.l2 = l2.item();
    total = total + scale(l2, train.lambda_l2);
  }
  out.loss.total = out.loss.l1_xent + train.lambda_att * out.loss.l1_reg + train.lambda_l2 * out.loss.l2;
  tape.backward(total);
  out.gradients = model.gradients();
  return out;
}

std::size_t resolve_threads(std::size_t requested) {
  if (const char* env = std::getenv("SENTI_ATTEND_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n >= 1) {
      return requested == 0 ? static_cast<std::size_t>(n) : std::min(requested, static_cast<std::size_t>(n));
    }
  }
  return requested == 0 ? 1 : requested;
}

LossAndGradients combined_loss(const ModelConfig& config, const Parameters& params, const TrainConfig& train,
                               std::span<const Example> batch, std::span<Rng> rngs, bool training) {
  if (batch.empty()) throw ConfigError("empty batch");
  if (rngs.size() != batch.size()) throw Error("one rng per batch element required");

  std::vector<LossAndGradients> parts(batch.size());
  const std::size_t workers = std::min(resolve_threads(train.threads), batch.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < batch.size(); ++i) parts[i] = example_loss(config, params, train, batch[i], rngs[i], training);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < batch.size(); i += workers) {
            parts[i] = example_loss(config, params, train, batch[i], rngs[i], training);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  // Reduction in example order keeps the sums independent of thread count.
  LossAndGradients out = std::move(parts.front());
  for (std::size_t i = 1; i < parts.size(); ++i) {
    out.loss.l1_xent += parts[i].loss.l1_xent;
    out.loss.l1_reg += parts[i].loss.l1_reg;
    out.loss.l2 += parts[i].loss.l2;
    for (auto& [name, g] : parts[i].gradients) out.gradients.at(name) += g;
  }
  const double n = static_cast<double>(batch.size());
  out.loss.l1_xent /= n;
  out.loss.l1_reg /= n;
  out.loss.l2 /= n;
  out.loss.total = out.loss.l1_xent + train.lambda_att * out.loss.l1_reg + train.lambda_l2 * out.loss.l2;
  for (auto& [name, g] : out.gradients) g /= n;
  return out;
}

Adam::Adam(const TrainConfig& config)
    : lr_(config.learning_rate), beta1_(config.beta1), beta2_(config.beta2), eps_(config.adam_eps) {}

void Adam::step(Parameters& params, const std::map<std::string, Matrix>& gradients) {
  bool any = false;
  for (const auto& [name, g] : gradients) {
    if (!params.contains(name)) throw ConfigError("gradient for unknown parameter '" + name + "'");
    const Matrix& value = params.at(name);
    if (g.rows() != value.rows() || g.cols() != value.cols()) {
      throw ShapeError("gradient of '" + name + "' has the wrong shape");
    }
    if (!g.allFinite()) throw NumericError("non-finite gradient in parameter '" + name + "'");
    if (params.trainable(name) && !g.isZero(0.0)) any = true;
  }
  ++t_;
  if (!any) return;

  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& [name, g] : gradients) {
    if (!params.trainable(name)) continue;
    auto [mit, fresh] = m_.try_emplace(name, Matrix::Zero(g.rows(), g.cols()));
    auto vit = v_.try_emplace(name, Matrix::Zero(g.rows(), g.cols())).first;
    Matrix& m = mit->second;
    Matrix& v = vit->second;
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    Matrix& theta = params.mutable_value(name);
    theta.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  }
}

double clip_global_norm(std::map<std::string, Matrix>& gradients, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, g] : gradients) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& [name, g] : gradients) g *= s;
  }
  return norm;
}

std::size_t select_best(std::span<const double> metric_per_epoch) {
  if (metric_per_epoch.empty()) throw ConfigError("no checkpoints to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < metric_per_epoch.size(); ++i) {
    if (metric_per_epoch[i] > metric_per_epoch[best]) best = i;
  }
  return best;
}

TrainResult train(const ModelConfig& config, Parameters init, const TrainConfig& train_config,
                  std::span<const CaptionRecord> records, const FeatureStore& features, const Validator& validator,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  config.validate();
  train_config.validate();
  if (records.empty()) throw ConfigError("training corpus is empty");

  std::vector<Example> examples;
  examples.reserve(records.size());
  for (const auto& r : records) {
    const Matrix& grid = features.get(r.image_id);
    check_features(config, grid);
    examples.push_back(Example{&grid, r.tokens, r.sentiment.value_or(Sentiment::Neutral)});
  }

  TrainResult result;
  result.last = std::move(init);
  result.best = result.last;
  Adam adam(train_config);
  std::vector<double> scores;

  for (std::size_t epoch = 1; epoch <= train_config.epochs; ++epoch) {
    std::seed_seq order_seed{train_config.seed, static_cast<std::uint64_t>(epoch), std::uint64_t{0x5eed}};
    std::uint64_t batch_seed = 0;
    {
      std::array<std::uint32_t, 2> words{};
      order_seed.generate(words.begin(), words.end());
      batch_seed = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
    }
    const std::vector<Batch> batches = make_batches(records, train_config.batch_size, batch_seed);

    LossBreakdown sum;
    std::size_t position = 0;
    for (const Batch& b : batches) {
      std::vector<Example> batch;
      std::vector<Rng> rngs;
      for (std::size_t idx : b.indices) {
        batch.push_back(examples[idx]);
        std::seed_seq s{train_config.seed, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(position++)};
        rngs.emplace_back(s);
      }
      LossAndGradients step = combined_loss(config, result.last, train_config, batch, rngs, true);
      const double n = static_cast<double>(batch.size());
      sum.l1_xent += step.loss.l1_xent * n;
      sum.l1_reg += step.loss.l1_reg * n;
      sum.l2 += step.loss.l2 * n;
      clip_global_norm(step.gradients, train_config.clip_norm);
      adam.step(result.last, step.gradients);
    }

    EpochLog log;
    log.epoch = epoch;
    const double n = static_cast<double>(records.size());
    log.loss.l1_xent = sum.l1_xent / n;
    log.loss.l1_reg = sum.l1_reg / n;
    log.loss.l2 = sum.l2 / n;
    log.loss.total = log.loss.l1_xent + train_config.lambda_att * log.loss.l1_reg + train_config.lambda_l2 * log.loss.l2;
    if (validator) {
      log.validation = validator(result.last);
      scores.push_back(*log.validation);
      if (select_best(scores) == scores.size() - 1) {
        result.best = result.last;
        result.best_epoch = epoch;
      }
    } else {
      result.best = result.last;
      result.best_epoch = epoch;
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return result;
}

}  // namespace senti
