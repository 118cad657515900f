#include "senti/synth.hpp"

#include <cmath>
#include <filesystem>
#include <set>

#include "senti/errors.hpp"

namespace senti {
namespace {

const std::vector<std::string> kNouns = {"dog", "cake", "street", "beach", "train", "flower", "horse", "table"};

double normal(Rng& rng) {
  // Box-Muller on our own uniform draws so the stream is identical across
  // standard library implementations.
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::size_t below(Rng& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
}

}  // namespace

void ToySpec::validate() const {
  if (n_images < 3) throw ConfigError("toy corpus needs at least 3 images");
  if (regions < 1 || feature_dim < 1) throw ConfigError("toy grid dimensions must be positive");
  if (n_objects < 1 || n_objects > kNouns.size()) {
    throw ConfigError("n_objects must lie in [1, " + std::to_string(kNouns.size()) + "]");
  }
  if (positive.empty() || negative.empty()) throw ConfigError("toy corpus needs adjectives of both polarities");
  std::set<std::string> all(positive.begin(), positive.end());
  all.insert(negative.begin(), negative.end());
  if (all.size() != positive.size() + negative.size()) throw ConfigError("adjective sets must be disjoint");
  if (!(noise >= 0.0) || !(preferred_probability >= 0.0 && preferred_probability <= 1.0)) {
    throw ConfigError("invalid noise or preferred_probability");
  }
  if (!(val_fraction >= 0.0 && test_fraction >= 0.0 && val_fraction + test_fraction < 1.0)) {
    throw ConfigError("val_fraction + test_fraction must be below 1");
  }
}

std::vector<std::string> ToyCorpus::vocab_texts() const {
  std::vector<std::string> out;
  out.reserve(train.size());
  for (const auto& c : train) out.push_back(c.text);
  return out;
}

ToyCorpus synth_toy_corpus(const ToySpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  ToyCorpus out;
  out.spec = spec;
  out.features = FeatureStore(spec.regions, spec.feature_dim);
  out.nouns.assign(kNouns.begin(), kNouns.begin() + static_cast<std::ptrdiff_t>(spec.n_objects));

  // +-pattern_scale sign patterns, one per object.
  std::vector<RowVector> patterns;
  for (std::size_t o = 0; o < spec.n_objects; ++o) {
    RowVector p(spec.feature_dim);
    for (Index j = 0; j < p.size(); ++j) p[j] = uniform01(rng) < 0.5 ? -spec.pattern_scale : spec.pattern_scale;
    patterns.push_back(p);
  }
  // Preferred adjective of each object, per polarity.
  std::vector<std::size_t> pref_pos(spec.n_objects), pref_neg(spec.n_objects);
  for (std::size_t o = 0; o < spec.n_objects; ++o) {
    pref_pos[o] = o % spec.positive.size();
    pref_neg[o] = o % spec.negative.size();
  }

  const auto n_test = static_cast<std::size_t>(std::round(spec.test_fraction * static_cast<double>(spec.n_images)));
  const auto n_val = static_cast<std::size_t>(std::round(spec.val_fraction * static_cast<double>(spec.n_images)));
  const std::size_t n_train = spec.n_images - n_val - n_test;

  const auto pick_adjective = [&](const std::vector<std::string>& set, std::size_t preferred) {
    if (uniform01(rng) < spec.preferred_probability) return set[preferred];
    return set[below(rng, set.size())];
  };

  for (std::size_t i = 0; i < spec.n_images; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "toy%04zu", i);
    const std::size_t object = below(rng, spec.n_objects);
    const std::size_t region = below(rng, static_cast<std::size_t>(spec.regions));
    Matrix grid(spec.regions, spec.feature_dim);
    for (Index r = 0; r < grid.rows(); ++r) {
      for (Index c = 0; c < grid.cols(); ++c) grid(r, c) = spec.noise * normal(rng);
    }
    grid.row(static_cast<Index>(region)) += patterns[object];
    out.features.add(id, grid);
    out.objects[id] = object;

    const std::string& noun = out.nouns[object];
    std::vector<RawCaption> caps;
    for (std::size_t k = 0; k < spec.factual_per_image; ++k) caps.push_back({id, std::nullopt, "a " + noun});
    for (std::size_t k = 0; k < spec.sentiment_per_image; ++k) {
      caps.push_back({id, Sentiment::Positive, "a " + pick_adjective(spec.positive, pref_pos[object]) + " " + noun});
    }
    for (std::size_t k = 0; k < spec.sentiment_per_image; ++k) {
      caps.push_back({id, Sentiment::Negative, "a " + pick_adjective(spec.negative, pref_neg[object]) + " " + noun});
    }
    auto& split = i < n_train ? out.train : (i < n_train + n_val ? out.val : out.test);
    split.insert(split.end(), caps.begin(), caps.end());
  }

  for (const auto& a : spec.positive) out.lexicon.adjectives[a] = Polarity::Positive;
  for (const auto& a : spec.negative) out.lexicon.adjectives[a] = Polarity::Negative;
  for (const auto& n : out.nouns) {
    out.lexicon.nouns.insert(n);
    for (const auto& a : spec.positive) out.lexicon.anps[{a, n}] = Polarity::Positive;
    for (const auto& a : spec.negative) out.lexicon.anps[{a, n}] = Polarity::Negative;
  }
  out.lexicon.validate();
  return out;
}

void write_toy_corpus(const ToyCorpus& corpus, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path base(dir);
  save_features((base / "features.saft").string(), corpus.features);
  save_captions((base / "train_captions.tsv").string(), corpus.train);
  save_captions((base / "val_captions.tsv").string(), corpus.val);
  save_captions((base / "test_captions.tsv").string(), corpus.test);
  save_lexicon((base / "lexicon.tsv").string(), corpus.lexicon);
}

}  // namespace senti
