#include "senti/experiment.hpp"

#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>

#include "senti/errors.hpp"

namespace senti {
namespace {

std::vector<std::string> sentiment_images(const ReferenceIndex& refs) {
  std::set<std::string> ids;
  for (Sentiment s : {Sentiment::Positive, Sentiment::Negative}) {
    for (auto& id : refs.images(s)) ids.insert(id);
  }
  return {ids.begin(), ids.end()};
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("no ") + what + " path configured");
  if (!std::filesystem::exists(path)) throw ConfigError(std::string(what) + " not found: " + path);
}

}  // namespace

Dataset make_dataset(FeatureStore features, std::span<const RawCaption> train, std::span<const RawCaption> val,
                     std::span<const RawCaption> test, AnpLexicon lexicon, std::size_t min_count, std::size_t cap,
                     std::size_t max_len) {
  Dataset d;
  std::vector<RawCaption> factual, sentimental;
  std::vector<std::string> texts;
  for (const auto& c : train) {
    (c.sentiment && *c.sentiment != Sentiment::Neutral ? sentimental : factual).push_back(c);
    texts.push_back(c.text);
  }
  for (auto& c : factual) c.sentiment.reset();
  const std::vector<RawCaption> merged = merge_datasets<RawCaption>(factual, sentimental, &d.counts);

  d.vocab = Vocabulary::build(texts, min_count, cap);
  CaptionLoad load = encode_captions(merged, d.vocab, max_len, &features);
  d.train = std::move(load.records);
  d.rejected = std::move(load.rejected);
  d.val = ReferenceIndex(val);
  d.test = ReferenceIndex(test);
  d.val_images = sentiment_images(d.val);
  d.test_images = sentiment_images(d.test);
  for (const auto* ids : {&d.val_images, &d.test_images}) {
    for (const auto& id : *ids) {
      if (!features.contains(id)) throw DataError("no features for held-out image '" + id + "'");
    }
  }
  d.features = std::move(features);
  d.lexicon = std::move(lexicon);
  return d;
}

Dataset load_dataset(const RunConfig& config) {
  const DataPaths& p = config.paths;
  require_file(p.features, "feature file");
  require_file(p.train_captions, "training captions");
  require_file(p.val_captions, "validation captions");
  require_file(p.test_captions, "test captions");
  require_file(p.lexicon, "lexicon");
  FeatureStore features = load_features(p.features);
  const auto train = read_captions(p.train_captions);
  const auto val = read_captions(p.val_captions);
  const auto test = read_captions(p.test_captions);
  return make_dataset(std::move(features), train, val, test, load_lexicon(p.lexicon), config.min_count,
                      config.vocab_cap, config.max_caption_len);
}

Dataset toy_dataset(const ToyCorpus& corpus, const RunConfig& config) {
  return make_dataset(corpus.features, corpus.train, corpus.val, corpus.test, corpus.lexicon, config.min_count,
                      config.vocab_cap, config.max_caption_len);
}

ModelConfig resolve_model(const RunConfig& config, const Dataset& data, Variant variant) {
  ModelConfig m = config.model;
  m.variant = variant;
  m.vocab_size = data.vocab.size();
  m.validate();
  if (data.features.size() > 0 && (m.regions != data.features.regions() || m.feature_dim != data.features.feature_dim())) {
    throw ConfigError("config expects " + std::to_string(m.regions) + "x" + std::to_string(m.feature_dim) +
                      " features, feature file holds " + std::to_string(data.features.regions()) + "x" +
                      std::to_string(data.features.feature_dim()));
  }
  return m;
}

TrainedModel train_variant(const RunConfig& config, const Dataset& data, Variant variant,
                           const std::function<void(const EpochLog&)>& on_epoch) {
  TrainedModel out;
  out.config = resolve_model(config, data, variant);
  Parameters init = Parameters::initialize(out.config, config.train.seed);
  Validator validator;
  if (!data.val_images.empty()) {
    validator = [&](const Parameters& p) {
      return validation_cider(out.config, p, data.features, data.val, data.val_images, config.decode, data.vocab);
    };
  }
  out.result = train(out.config, std::move(init), config.train, data.train, data.features, validator, on_epoch);
  return out;
}

TestEvaluation evaluate_on_test(const RunConfig& config, const Dataset& data, const ModelConfig& model,
                                const Parameters& params, bool use_beam) {
  TestEvaluation e;
  const std::array<Sentiment, 2> both = {Sentiment::Positive, Sentiment::Negative};
  e.generated = generate_captions(model, params, data.features, data.test_images, both, config.decode, use_beam,
                                  data.vocab);
  e.rows = evaluation_table(e.generated, data.test, data.lexicon, config.corpus_wide_anps);
  e.control = sentiment_control(e.generated, data.lexicon);
  const TableRow& avg = e.rows.back();
  e.anp_precision = avg.anp_generated > 0.0 ? avg.anp_matched / avg.anp_generated : 0.0;
  e.entropy = avg.report.entropy;
  return e;
}

std::vector<AblationRow> run_ablation(const RunConfig& config, const Dataset& data,
                                      const std::function<void(Variant, const EpochLog&)>& on_epoch) {
  std::vector<AblationRow> rows;
  for (Variant v : kVariants) {
    AblationRow row{v, {}, {}};
    row.model = train_variant(config, data, v, [&](const EpochLog& log) {
      if (on_epoch) on_epoch(v, log);
    });
    row.eval = evaluate_on_test(config, data, row.model.config, row.model.result.best);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_ablation(std::span<const AblationRow> rows, bool raw) {
  std::vector<TableRow> table;
  for (const auto& r : rows) {
    TableRow t = r.eval.rows.back();
    t.label = std::string(to_string(r.variant));
    table.push_back(std::move(t));
  }
  std::ostringstream os;
  os << format_table(table, raw);
  os << "\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-14s %12s %10s %14s\n", "", "consistency", "flip", "ANP precision");
  os << buf;
  const double k = raw ? 1.0 : 100.0;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, raw ? "%-14s %12.4f %10.4f %14.4f\n" : "%-14s %12.1f %10.1f %14.1f\n",
                  std::string(to_string(r.variant)).c_str(), k * r.eval.control.consistency,
                  k * r.eval.control.flip_rate, k * r.eval.anp_precision);
    os << buf;
  }
  return os.str();
}

ModelConfig tiny_config(Variant variant) {
  ModelConfig c;
  c.regions = 4;
  c.feature_dim = 8;
  c.hidden = 16;
  c.vocab_size = 20;
  c.word_dim = 10;
  c.senti_dim = 6;
  c.attention_hidden = 8;
  c.variant = variant;
  c.dropout_rate = 0.0;
  return c;
}

std::vector<Example> TinyProblem::examples() const {
  std::vector<Example> out;
  for (std::size_t i = 0; i < grids.size(); ++i) out.push_back(Example{&grids[i], captions[i], sentiments[i]});
  return out;
}

TinyProblem tiny_problem(const ModelConfig& config, std::uint64_t seed, std::size_t batch, std::size_t caption_words) {
  config.validate();
  TinyProblem p;
  p.config = config;
  p.params = Parameters::initialize(config, seed);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  // Larger than the default init so that no coordinate sits in a flat region.
  for (auto& [name, param] : p.params.entries()) {
    if (!param.trainable) continue;
    for (Index i = 0; i < param.value.size(); ++i) param.value.data()[i] = 0.6 * (2.0 * uniform01(rng) - 1.0);
  }
  for (std::size_t b = 0; b < batch; ++b) {
    Matrix grid(config.regions, config.feature_dim);
    for (Index i = 0; i < grid.size(); ++i) grid.data()[i] = 2.0 * uniform01(rng) - 1.0;
    p.grids.push_back(grid);
    std::vector<Index> cap{token::kStart};
    for (std::size_t w = 0; w < caption_words; ++w) {
      cap.push_back(token::kReserved +
                    static_cast<Index>(uniform01(rng) * static_cast<double>(config.vocab_size - token::kReserved)));
    }
    cap.push_back(token::kEnd);
    p.captions.push_back(cap);
    p.sentiments.push_back(kSentiments[b % kSentiments.size()]);
  }
  return p;
}

GradCheckReport check_gradients(TinyProblem& problem, const TrainConfig& train, double eps) {
  if (problem.config.dropout_rate > 0.0) {
    throw ConfigError("gradient check needs dropout_rate = 0 (dropout makes the loss random)");
  }
  const std::vector<Example> batch = problem.examples();
  const auto loss = [&] {
    std::vector<Rng> rngs(batch.size());
    return combined_loss(problem.config, problem.params, train, batch, rngs, false);
  };
  const LossAndGradients analytic = loss();
  std::vector<GradCheckEntry> entries;
  for (auto& [name, param] : problem.params.entries()) {
    if (!param.trainable) continue;
    entries.push_back(GradCheckEntry{name, &param.value, analytic.gradients.at(name)});
  }
  return finite_diff_check([&] { return loss().loss.total; }, entries, eps);
}

}  // namespace senti
