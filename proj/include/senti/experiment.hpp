#pragma once

// End-to-end runs: load or synthesize a corpus, train a variant with
// CIDEr-based selection, and evaluate on the test split. Shared by the CLI
// and the acceptance suite.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "senti/evaluation.hpp"
#include "senti/gradcheck.hpp"
#include "senti/run_config.hpp"
#include "senti/synth.hpp"
#include "senti/training.hpp"

namespace senti {

struct Dataset {
  FeatureStore features;
  Vocabulary vocab;
  std::vector<CaptionRecord> train;
  MergeCounts counts;
  std::vector<std::string> rejected;
  ReferenceIndex val;
  ReferenceIndex test;
  std::vector<std::string> val_images;   // images with Pos or Neg references
  std::vector<std::string> test_images;
  AnpLexicon lexicon;
};

// Builds the vocabulary from the training texts, labels unlabeled or
// neutral captions Neutral, and encodes the training split.
Dataset make_dataset(FeatureStore features, std::span<const RawCaption> train, std::span<const RawCaption> val,
                     std::span<const RawCaption> test, AnpLexicon lexicon, std::size_t min_count, std::size_t cap,
                     std::size_t max_len);
// Files named in config.paths. ConfigError naming the path when one is missing.
Dataset load_dataset(const RunConfig& config);
Dataset toy_dataset(const ToyCorpus& corpus, const RunConfig& config);

// config.model with vocab_size taken from the dataset and the variant set.
ModelConfig resolve_model(const RunConfig& config, const Dataset& data, Variant variant);

struct TrainedModel {
  ModelConfig config;
  TrainResult result;
};

// Seeded initialization, training and validation-CIDEr selection.
TrainedModel train_variant(const RunConfig& config, const Dataset& data, Variant variant,
                           const std::function<void(const EpochLog&)>& on_epoch = {});

struct TestEvaluation {
  std::vector<GeneratedCaption> generated;  // Pos and Neg per test image
  std::vector<TableRow> rows;               // Pos, Neg, Avg
  ControlStats control;
  double anp_precision = 0.0;  // matched / generated over Pos and Neg
  double entropy = 0.0;        // Avg row
};

TestEvaluation evaluate_on_test(const RunConfig& config, const Dataset& data, const ModelConfig& model,
                                const Parameters& params, bool use_beam = false);

struct AblationRow {
  Variant variant;
  TrainedModel model;
  TestEvaluation eval;
};

// Trains and evaluates every variant with the shared seed, in table order.
std::vector<AblationRow> run_ablation(const RunConfig& config, const Dataset& data,
                                      const std::function<void(Variant, const EpochLog&)>& on_epoch = {});

// Avg row of each variant plus sentiment consistency.
std::string format_ablation(std::span<const AblationRow> rows, bool raw = false);

// K=4, D=8, hidden=16, N=20, M=10, F=6, attention width 8, no dropout.
ModelConfig tiny_config(Variant variant);

struct TinyProblem {
  ModelConfig config;
  Parameters params;
  std::vector<Matrix> grids;
  std::vector<std::vector<Index>> captions;
  std::vector<Sentiment> sentiments;

  std::vector<Example> examples() const;
};

// Random parameters, grids and captions for gradient checks.
TinyProblem tiny_problem(const ModelConfig& config, std::uint64_t seed, std::size_t batch = 2,
                         std::size_t caption_words = 3);

// Central-difference check of the batch loss against its tape gradient over
// every trainable parameter. ConfigError when dropout is enabled, since the
// loss would not be a deterministic function of the parameters.
GradCheckReport check_gradients(TinyProblem& problem, const TrainConfig& train, double eps = 1e-5);

}  // namespace senti
