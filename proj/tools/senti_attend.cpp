// senti-attend: train, generate, evaluate, ablate, gradcheck, synth.
//
// Exit codes: 0 ok, 1 internal error, 2 usage or configuration error,
// 3 data error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "senti/checkpoint.hpp"
#include "senti/errors.hpp"
#include "senti/experiment.hpp"

namespace fs = std::filesystem;
using namespace senti;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::string> variant;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<double> lambda_l2;
  std::optional<double> lambda_att;
  std::optional<std::size_t> max_len;
  std::optional<std::string> out_dir;

  void add_to(CLI::App* cmd, bool training) {
    cmd->add_option("--config", config, "JSON run configuration");
    cmd->add_option("--variant", variant, "attend | minus_e1e2l2 | minus_e2l2 | minus_l2 | full");
    cmd->add_option("--seed", seed, "Random seed");
    cmd->add_option("--max-len", max_len, "Maximum decoded tokens");
    cmd->add_option("--out-dir", out_dir, "Run directory (checkpoints, vocabulary, logs)");
    if (training) {
      cmd->add_option("--epochs", epochs, "Training epochs");
      cmd->add_option("--lr", lr, "Adam learning rate");
      cmd->add_option("--lambda-l2", lambda_l2, "Weight of the sentiment loss");
      cmd->add_option("--lambda-att", lambda_att, "Weight of the attention regularizer");
    }
  }

  RunConfig resolve() const {
    RunConfig c = config.empty() ? RunConfig{} : load_run_config(config);
    if (variant) c.model.variant = parse_variant(*variant);
    if (seed) c.train.seed = *seed;
    if (epochs) c.train.epochs = *epochs;
    if (lr) c.train.learning_rate = *lr;
    if (lambda_l2) c.train.lambda_l2 = *lambda_l2;
    if (lambda_att) c.train.lambda_att = *lambda_att;
    if (max_len) c.decode.max_len = *max_len;
    if (out_dir) c.paths.out_dir = *out_dir;
    c.validate();
    return c;
  }
};

void echo_config(const RunConfig& c) {
  std::cerr << to_json(c) << '\n';
  fs::create_directories(c.paths.out_dir);
  std::ofstream(fs::path(c.paths.out_dir) / "resolved_config.json") << to_json(c) << '\n';
}

std::string epoch_line(const std::string& variant, const EpochLog& log, double lambda_att, double lambda_l2) {
  nlohmann::ordered_json j;
  j["variant"] = variant;
  j["epoch"] = log.epoch;
  j["l1_xent"] = log.loss.l1_xent;
  j["l1_reg"] = log.loss.l1_reg;
  j["l2"] = log.loss.l2;
  j["total"] = log.loss.total;
  j["lambda_att"] = lambda_att;
  j["lambda_l2"] = lambda_l2;
  j["validation_cider"] = log.validation ? nlohmann::ordered_json(*log.validation) : nlohmann::ordered_json(nullptr);
  return j.dump();
}

void write_rejected(const Dataset& data) {
  for (const auto& r : data.rejected) std::cerr << "rejected " << r << '\n';
}

int cmd_train(const Overrides& o) {
  const RunConfig c = o.resolve();
  echo_config(c);
  const Dataset data = load_dataset(c);
  write_rejected(data);
  const fs::path dir(c.paths.out_dir);
  std::ofstream log_file(dir / "train_log.jsonl", std::ios::trunc);
  const std::string name(to_string(c.model.variant));
  const TrainedModel m = train_variant(c, data, c.model.variant, [&](const EpochLog& log) {
    const std::string line = epoch_line(name, log, c.train.lambda_att, c.train.lambda_l2);
    std::cout << line << std::endl;
    log_file << line << '\n';
  });
  data.vocab.save((dir / "vocab.txt").string());
  save_checkpoint((dir / "best.sacp").string(), m.config, m.result.best);
  save_checkpoint((dir / "last.sacp").string(), m.config, m.result.last);
  std::cerr << "best epoch " << m.result.best_epoch << ", checkpoint " << (dir / "best.sacp").string() << '\n';
  return 0;
}

struct GenerateArgs {
  std::string checkpoint;
  std::string vocab;
  std::string sentiment = "pos";
  std::string split = "test";
  std::string output;
  std::optional<std::size_t> beam;
  bool contrastive = false;
  bool suppress_unk = false;
};

int cmd_generate(const Overrides& o, const GenerateArgs& a) {
  const RunConfig c = o.resolve();
  const fs::path dir(c.paths.out_dir);
  const Checkpoint ck = load_checkpoint(a.checkpoint.empty() ? (dir / "best.sacp").string() : a.checkpoint);
  if (o.variant && parse_variant(*o.variant) != ck.config.variant) {
    throw ConfigError("checkpoint holds variant " + std::string(to_string(ck.config.variant)) + ", --variant asks for " +
                      *o.variant);
  }
  const Vocabulary vocab = Vocabulary::load(a.vocab.empty() ? (dir / "vocab.txt").string() : a.vocab);
  if (vocab.size() != ck.config.vocab_size) throw ConfigError("vocabulary size does not match the checkpoint");
  const std::string& captions = a.split == "val" ? c.paths.val_captions : c.paths.test_captions;
  if (a.split != "val" && a.split != "test") throw ConfigError("--split must be val or test");
  if (!fs::exists(c.paths.features)) throw ConfigError("feature file not found: " + c.paths.features);
  const FeatureStore features = load_features(c.paths.features);
  const ReferenceIndex refs(read_captions(captions));

  std::vector<Sentiment> sentiments;
  if (a.contrastive) {
    if (ck.config.variant == Variant::Attend) throw ConfigError("--contrastive needs a sentiment variant");
    sentiments.assign(kSentiments.begin(), kSentiments.end());
  } else {
    sentiments.push_back(parse_sentiment(a.sentiment));
  }
  DecodeRequest req = c.decode;
  req.suppress_unk = req.suppress_unk || a.suppress_unk;
  if (a.beam) req.beam_width = *a.beam;
  const std::vector<std::string> ids = refs.images();
  for (const auto& id : ids) check_features(ck.config, features.get(id));
  const auto generated = generate_captions(ck.config, ck.params, features, ids, sentiments, req, a.beam.has_value(), vocab);
  if (a.output.empty()) {
    write_generated(std::cout, generated);
  } else {
    save_generated(a.output, generated);
  }
  return 0;
}

struct EvaluateArgs {
  std::string generated;
  std::string references;
  std::string lexicon;
  std::optional<std::string> sentiment;
  bool raw = false;
  bool corpus_wide = false;
};

int cmd_evaluate(const EvaluateArgs& a) {
  auto generated = load_generated(a.generated);
  if (a.sentiment) {
    const Sentiment s = parse_sentiment(*a.sentiment);
    std::erase_if(generated, [&](const GeneratedCaption& g) { return g.sentiment != s; });
  }
  const ReferenceIndex refs(read_captions(a.references));
  const AnpLexicon lexicon = load_lexicon(a.lexicon);
  const auto rows = evaluation_table(generated, refs, lexicon, a.corpus_wide);
  std::cout << format_table(rows, a.raw);
  return 0;
}

int cmd_ablate(const Overrides& o, bool raw) {
  const RunConfig c = o.resolve();
  echo_config(c);
  const Dataset data = load_dataset(c);
  write_rejected(data);
  const auto rows = run_ablation(c, data, [&](Variant v, const EpochLog& log) {
    std::cerr << epoch_line(std::string(to_string(v)), log, c.train.lambda_att, c.train.lambda_l2) << '\n';
  });
  const std::string table = format_ablation(rows, raw);
  std::cout << table;
  std::ofstream(fs::path(c.paths.out_dir) / "ablation.txt") << table;
  return 0;
}

int cmd_gradcheck(std::optional<std::string> variant, std::uint64_t seed, double dropout, double tolerance) {
  std::vector<Variant> variants(kVariants.begin(), kVariants.end());
  if (variant) variants = {parse_variant(*variant)};
  bool ok = true;
  for (Variant v : variants) {
    ModelConfig cfg = tiny_config(v);
    cfg.dropout_rate = dropout;
    if (dropout > 0.0) throw ConfigError("gradcheck refuses to run with dropout > 0: the loss would be random");
    TinyProblem p = tiny_problem(cfg, seed);
    const GradCheckReport r = check_gradients(p, TrainConfig{});
    const bool pass = r.max_rel_error < tolerance;
    ok = ok && pass;
    nlohmann::ordered_json j;
    j["variant"] = std::string(to_string(v));
    j["pass"] = pass;
    j["max_rel_error"] = r.max_rel_error;
    j["worst_parameter"] = r.worst_name;
    j["worst_index"] = {r.worst_row, r.worst_col};
    j["coordinates"] = r.coordinates;
    std::cout << j.dump() << '\n';
    if (!pass) {
      std::cerr << "gradcheck failed for " << to_string(v) << ": worst parameter " << r.worst_name << " ("
                << r.max_rel_error << ")\n";
    }
  }
  return ok ? 0 : 1;
}

int cmd_synth(const std::string& out_dir, std::uint64_t seed, std::size_t images) {
  ToySpec spec;
  spec.n_images = images;
  const ToyCorpus corpus = synth_toy_corpus(spec, seed);
  write_toy_corpus(corpus, out_dir);
  RunConfig c = toy_run_config(out_dir);
  std::ofstream(fs::path(out_dir) / "config.json") << to_json(c) << '\n';
  std::cerr << "wrote " << corpus.features.size() << " images to " << out_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sentiment-conditioned attention captioner"};
  app.require_subcommand(1);

  Overrides train_o, gen_o, ablate_o;
  auto* train = app.add_subcommand("train", "Train one variant and write best/last checkpoints");
  train_o.add_to(train, true);

  GenerateArgs gen_a;
  auto* gen = app.add_subcommand("generate", "Caption the images of a split");
  gen_o.add_to(gen, false);
  gen->add_option("--checkpoint", gen_a.checkpoint, "Checkpoint (default <out_dir>/best.sacp)");
  gen->add_option("--vocab", gen_a.vocab, "Vocabulary (default <out_dir>/vocab.txt)");
  gen->add_option("--sentiment", gen_a.sentiment, "pos | neutral | neg");
  gen->add_option("--split", gen_a.split, "val | test");
  gen->add_option("--beam", gen_a.beam, "Beam width (greedy when absent)");
  gen->add_flag("--contrastive", gen_a.contrastive, "One caption per sentiment");
  gen->add_flag("--suppress-unk", gen_a.suppress_unk, "Never emit <unk>");
  gen->add_option("--output", gen_a.output, "Output file (default stdout)");

  EvaluateArgs eval_a;
  auto* eval = app.add_subcommand("evaluate", "Score a generation file");
  eval->add_option("--generated", eval_a.generated, "Generation file")->required();
  eval->add_option("--references", eval_a.references, "Captions file with references")->required();
  eval->add_option("--lexicon", eval_a.lexicon, "Adjective-noun lexicon")->required();
  eval->add_option("--sentiment", eval_a.sentiment, "Only this sentiment");
  eval->add_flag("--raw", eval_a.raw, "Raw values instead of percent");
  eval->add_flag("--corpus-wide", eval_a.corpus_wide, "Match ANPs against every image's references");

  bool ablate_raw = false;
  auto* ablate = app.add_subcommand("ablate", "Train and compare all five variants");
  ablate_o.add_to(ablate, true);
  ablate->add_flag("--raw", ablate_raw, "Raw values instead of percent");

  std::optional<std::string> gc_variant;
  std::uint64_t gc_seed = 1;
  double gc_dropout = 0.0;
  double gc_tol = 1e-3;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check on a tiny model");
  gc->add_option("--variant", gc_variant, "Single variant (default all)");
  gc->add_option("--seed", gc_seed, "Random seed");
  gc->add_option("--dropout", gc_dropout, "Dropout rate (must be 0)");
  gc->add_option("--tolerance", gc_tol, "Maximum relative error");

  std::string synth_dir;
  std::uint64_t synth_seed = 1;
  std::size_t synth_images = 200;
  auto* synth = app.add_subcommand("synth", "Write the synthetic toy corpus and a matching config");
  synth->add_option("--out-dir", synth_dir, "Output directory")->required();
  synth->add_option("--seed", synth_seed, "Random seed");
  synth->add_option("--images", synth_images, "Number of images");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) return cmd_train(train_o);
    if (*gen) return cmd_generate(gen_o, gen_a);
    if (*eval) return cmd_evaluate(eval_a);
    if (*ablate) return cmd_ablate(ablate_o, ablate_raw);
    if (*gc) return cmd_gradcheck(gc_variant, gc_seed, gc_dropout, gc_tol);
    if (*synth) return cmd_synth(synth_dir, synth_seed, synth_images);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
