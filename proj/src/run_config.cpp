#include "senti/run_config.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "json.hpp"
#include "senti/errors.hpp"

namespace senti {
namespace {

using nlohmann::json;

// One entry per config key: how to write it and how to read it back.
struct Field {
  const char* key;
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
};

template <typename T, typename Owner>
Field field(const char* key, T Owner::*member, Owner RunConfig::*part) {
  return {key, [=](const RunConfig& c) { return json((c.*part).*member); },
          [=](RunConfig& c, const json& v) { (c.*part).*member = v.get<T>(); }};
}

template <typename T>
Field top(const char* key, T RunConfig::*member) {
  return {key, [=](const RunConfig& c) { return json(c.*member); },
          [=](RunConfig& c, const json& v) { c.*member = v.get<T>(); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      field("regions", &ModelConfig::regions, &RunConfig::model),
      field("feature_dim", &ModelConfig::feature_dim, &RunConfig::model),
      field("hidden", &ModelConfig::hidden, &RunConfig::model),
      field("word_dim", &ModelConfig::word_dim, &RunConfig::model),
      field("senti_dim", &ModelConfig::senti_dim, &RunConfig::model),
      field("attention_hidden", &ModelConfig::attention_hidden, &RunConfig::model),
      {"variant", [](const RunConfig& c) { return json(std::string(to_string(c.model.variant))); },
       [](RunConfig& c, const json& v) { c.model.variant = parse_variant(v.get<std::string>()); }},
      field("dropout_rate", &ModelConfig::dropout_rate, &RunConfig::model),

      field("learning_rate", &TrainConfig::learning_rate, &RunConfig::train),
      field("beta1", &TrainConfig::beta1, &RunConfig::train),
      field("beta2", &TrainConfig::beta2, &RunConfig::train),
      field("adam_eps", &TrainConfig::adam_eps, &RunConfig::train),
      field("batch_size", &TrainConfig::batch_size, &RunConfig::train),
      field("epochs", &TrainConfig::epochs, &RunConfig::train),
      field("lambda_att", &TrainConfig::lambda_att, &RunConfig::train),
      field("lambda_l2", &TrainConfig::lambda_l2, &RunConfig::train),
      field("clip_norm", &TrainConfig::clip_norm, &RunConfig::train),
      field("seed", &TrainConfig::seed, &RunConfig::train),
      field("selection_metric", &TrainConfig::selection_metric, &RunConfig::train),
      field("threads", &TrainConfig::threads, &RunConfig::train),

      field("max_len", &DecodeRequest::max_len, &RunConfig::decode),
      field("beam_width", &DecodeRequest::beam_width, &RunConfig::decode),
      field("length_penalty", &DecodeRequest::length_penalty, &RunConfig::decode),
      field("suppress_unk", &DecodeRequest::suppress_unk, &RunConfig::decode),

      field("features", &DataPaths::features, &RunConfig::paths),
      field("train_captions", &DataPaths::train_captions, &RunConfig::paths),
      field("val_captions", &DataPaths::val_captions, &RunConfig::paths),
      field("test_captions", &DataPaths::test_captions, &RunConfig::paths),
      field("lexicon", &DataPaths::lexicon, &RunConfig::paths),
      field("out_dir", &DataPaths::out_dir, &RunConfig::paths),

      top("min_count", &RunConfig::min_count),
      top("vocab_cap", &RunConfig::vocab_cap),
      top("max_caption_len", &RunConfig::max_caption_len),
      top("corpus_wide_anps", &RunConfig::corpus_wide_anps),
  };
  return all;
}

}  // namespace

void RunConfig::validate() const {
  ModelConfig m = model;
  m.vocab_size = std::max<Index>(m.vocab_size, token::kReserved + 1);
  m.validate();
  train.validate();
  decode.options().validate();
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  if (vocab_cap < static_cast<std::size_t>(token::kReserved) + 1) throw ConfigError("vocab_cap is too small");
  if (max_caption_len < 1) throw ConfigError("max_caption_len must be >= 1");
}

std::string to_json(const RunConfig& config) {
  json j = json::object();
  for (const auto& f : fields()) j[f.key] = f.get(config);
  return j.dump(2);
}

RunConfig run_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const Field* match = nullptr;
    for (const auto& f : fields()) {
      if (it.key() == f.key) match = &f;
    }
    if (match == nullptr) throw ConfigError("unknown config key '" + it.key() + "'");
    try {
      match->set(c, it.value());
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + it.key() + "': " + e.what());
    }
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return run_config_from_json(ss.str());
}

RunConfig toy_run_config(const std::string& data_dir) {
  namespace fs = std::filesystem;
  const fs::path base(data_dir);
  RunConfig c;
  c.model.regions = 4;
  c.model.feature_dim = 16;
  c.model.hidden = 32;
  c.model.word_dim = 16;
  c.model.senti_dim = 8;
  c.model.attention_hidden = 16;
  c.model.dropout_rate = 0.2;
  c.train.learning_rate = 0.01;
  c.train.batch_size = 16;
  c.train.epochs = 15;
  c.train.seed = 7;
  c.decode.max_len = 8;
  c.decode.beam_width = 3;
  c.min_count = 1;
  c.max_caption_len = 16;
  c.paths.features = (base / "features.saft").string();
  c.paths.train_captions = (base / "train_captions.tsv").string();
  c.paths.val_captions = (base / "val_captions.tsv").string();
  c.paths.test_captions = (base / "test_captions.tsv").string();
  c.paths.lexicon = (base / "lexicon.tsv").string();
  c.paths.out_dir = (base / "run").string();
  return c;
}

}  // namespace senti
