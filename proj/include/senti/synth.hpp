#pragma once

// Synthetic desk-scale corpus. Every image shows one latent object: one of
// its K regions carries that object's pattern plus noise, the others are
// noise only. Captions follow fixed templates:
//   factual   "a <object>"              (unlabeled)
//   positive  "a <pos adjective> <object>"
//   negative  "a <neg adjective> <object>"
// Each object prefers one adjective per polarity, so captions have a learnable
// object-adjective association as well as a sentiment one.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "senti/corpus.hpp"

namespace senti {

struct ToySpec {
  std::size_t n_images = 200;
  Index regions = 4;
  Index feature_dim = 16;
  std::size_t n_objects = 3;
  std::vector<std::string> positive = {"beautiful", "nice", "happy", "great"};
  std::vector<std::string> negative = {"dirty", "broken", "lonely", "stupid"};
  double noise = 0.3;
  double pattern_scale = 1.0;
  double preferred_probability = 0.75;  // chance of the object's preferred adjective
  std::size_t factual_per_image = 3;  // factual captions outnumber sentiment ones, as in real data
  std::size_t sentiment_per_image = 1;  // per polarity
  double val_fraction = 0.15;
  double test_fraction = 0.15;

  void validate() const;
};

struct ToyCorpus {
  ToySpec spec;
  FeatureStore features;
  std::vector<RawCaption> train, val, test;
  AnpLexicon lexicon;
  std::vector<std::string> nouns;              // object index -> noun
  std::map<std::string, std::size_t> objects;  // image id -> latent object

  // Text of every training caption, the input to build_vocab.
  std::vector<std::string> vocab_texts() const;
};

ToyCorpus synth_toy_corpus(const ToySpec& spec, std::uint64_t seed);

// Writes features.saft, {train,val,test}_captions.tsv and lexicon.tsv into dir.
void write_toy_corpus(const ToyCorpus& corpus, const std::string& dir);

}  // namespace senti
