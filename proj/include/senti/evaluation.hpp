#pragma once

// Generation files, reference lookup and the evaluation tables.
//
// Generation file: one caption per line, tab separated
//   image_id <TAB> pos|neutral|neg <TAB> caption <TAB> log_prob

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "senti/corpus.hpp"
#include "senti/decoding.hpp"
#include "senti/metrics.hpp"

namespace senti {

struct GeneratedCaption {
  std::string image_id;
  Sentiment sentiment = Sentiment::Neutral;
  std::string caption;
  double log_prob = 0.0;
};

void write_generated(std::ostream& os, std::span<const GeneratedCaption> captions);
std::vector<GeneratedCaption> read_generated(std::istream& is, const std::string& source = "<stream>");
void save_generated(const std::string& path, std::span<const GeneratedCaption> captions);
std::vector<GeneratedCaption> load_generated(const std::string& path);

// Tokenized references per (image, sentiment). Unlabeled captions count as
// Neutral.
class ReferenceIndex {
 public:
  ReferenceIndex() = default;
  explicit ReferenceIndex(std::span<const RawCaption> captions);

  const References* find(const std::string& image_id, Sentiment s) const;
  // Images with at least one reference of sentiment s, sorted.
  std::vector<std::string> images(Sentiment s) const;
  // Every image, sorted.
  std::vector<std::string> images() const;

 private:
  std::map<std::string, std::map<Sentiment, References>> refs_;
};

// Decodes every (image, sentiment) pair, images outer, sentiments inner.
std::vector<GeneratedCaption> generate_captions(const ModelConfig& config, const Parameters& params,
                                                const FeatureStore& features, std::span<const std::string> image_ids,
                                                std::span<const Sentiment> sentiments, const DecodeRequest& request,
                                                bool use_beam, const Vocabulary& vocab);

// Metrics of the captions generated for sentiment s against that image's
// references of the same sentiment. Throws DataError listing the image ids
// that have no such references.
MetricReport evaluate_generated(std::span<const GeneratedCaption> generated, const ReferenceIndex& references,
                                const AnpLexicon& lexicon, Sentiment s, bool corpus_wide_anps = false);

struct TableRow {
  std::string label;
  MetricReport report;
  double anp_generated = 0.0;
  double anp_matched = 0.0;
  std::size_t unk = 0;
};

TableRow make_row(std::string label, const MetricReport& report);
TableRow make_row(std::string label, const AveragedReport& report);

// One row per sentiment present in `generated`, plus "Avg" when both Pos and
// Neg are present.
std::vector<TableRow> evaluation_table(std::span<const GeneratedCaption> generated, const ReferenceIndex& references,
                                       const AnpLexicon& lexicon, bool corpus_wide_anps = false);

// Columns B-1..B-4, ROUGE-L, METEOR (not computed, shown as "-"), CIDEr,
// SPICE_N, Entropy, ANP generated and matched. Scores in percent with one
// decimal unless raw.
std::string format_table(std::span<const TableRow> rows, bool raw = false);

struct ControlStats {
  // Share of Pos/Neg captions whose lexicon adjectives are all of the
  // requested polarity (at least one required).
  double consistency = 0.0;
  // Share of images whose Pos and Neg captions are both consistent, i.e.
  // switching the input switched the adjective polarity.
  double flip_rate = 0.0;
  std::size_t captions = 0;
  std::size_t images = 0;
};

ControlStats sentiment_control(std::span<const GeneratedCaption> generated, const AnpLexicon& lexicon);

// Mean CIDEr of greedy Pos and Neg captions on the given images.
double validation_cider(const ModelConfig& config, const Parameters& params, const FeatureStore& features,
                        const ReferenceIndex& references, std::span<const std::string> image_ids,
                        const DecodeRequest& request, const Vocabulary& vocab);

}  // namespace senti
