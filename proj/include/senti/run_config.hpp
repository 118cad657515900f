#pragma once

// Everything one run needs, read from a flat JSON object. Unknown keys are
// rejected; to_json() of a loaded config reproduces the run.

#include <string>

#include "senti/decoding.hpp"
#include "senti/model.hpp"
#include "senti/training.hpp"

namespace senti {

struct DataPaths {
  std::string features;
  std::string train_captions;
  std::string val_captions;
  std::string test_captions;
  std::string lexicon;
  std::string out_dir = "run";
};

struct RunConfig {
  ModelConfig model;  // vocab_size is taken from the built vocabulary
  TrainConfig train;
  DecodeRequest decode;
  DataPaths paths;
  std::size_t min_count = 5;
  std::size_t vocab_cap = 9703;
  std::size_t max_caption_len = 30;
  bool corpus_wide_anps = false;

  void validate() const;
};

std::string to_json(const RunConfig& config);
// ConfigError on malformed JSON, unknown keys or invalid values. Relative
// paths are kept as written.
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::string& path);

// Sizes that train the synthetic corpus in well under a minute.
RunConfig toy_run_config(const std::string& data_dir);

}  // namespace senti
