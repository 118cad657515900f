#pragma once

// Caption evaluation: BLEU-1..4, ROUGE-L, CIDEr-D, adjective entropy, a
// noun-only SPICE (SPICE_N), adjective-noun pair counts and adjective rankings.
//
// All functions take pre-tokenized text (see tokenize()). candidates[i] is
// scored against references[i].

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "senti/text.hpp"

namespace senti {

enum class Polarity { Positive, Negative };

std::string_view to_string(Polarity p);

// Sentiment-bearing adjectives, nouns, adjective-noun pairs and noun synonyms.
struct AnpLexicon {
  std::map<std::string, Polarity> adjectives;
  std::set<std::string> nouns;
  std::map<std::pair<std::string, std::string>, Polarity> anps;
  std::map<std::string, std::set<std::string>> synonyms;

  bool is_adjective(const std::string& w) const { return adjectives.count(w) != 0; }
  bool is_noun(const std::string& w) const { return nouns.count(w) != 0; }
  bool synonymous(const std::string& a, const std::string& b) const;
  // Canonical member of a's synonym class (a itself when it has none).
  const std::string& canonical(const std::string& a) const;

  // Turns the synonym lists into equivalence classes and registers every
  // synonym as a noun. Idempotent.
  void close_synonyms();
  // Every ANP's adjective and noun must be listed. Throws DataError.
  void validate() const;
};

using References = std::vector<Tokens>;

// Corpus BLEU with clipped n-gram counts and brevity penalty exp(1 - r/c)
// when c < r, r being the closest reference length. Entry n-1 is BLEU-n.
std::array<double, 4> bleu(std::span<const Tokens> candidates, std::span<const References> references);

// LCS F-measure with beta = 1.2, best reference per candidate, corpus mean.
double rouge_l(std::span<const Tokens> candidates, std::span<const References> references);

// CIDEr-D: tf-idf n-gram vectors (n = 1..4) with idf from the reference
// corpus, candidate weights clipped to the reference weights, Gaussian length
// penalty sigma = 6, scaled by 10 as in the standard scorer.
double cider_d(std::span<const Tokens> candidates, std::span<const References> references);

struct EntropyResult {
  double entropy = 0.0;
  bool no_adjectives = false;
};
// Shannon entropy (bits) of lexicon-adjective token occurrences.
EntropyResult entropy_adjectives(std::span<const Tokens> candidates, const AnpLexicon& lexicon);

// Per image F1 between candidate and reference noun sets, taken over synonym
// classes; mean over images.
double spice_n(std::span<const Tokens> candidates, std::span<const References> references,
               const AnpLexicon& lexicon);

struct AnpCount {
  std::size_t generated = 0;
  std::size_t matched = 0;
};
// Adjacent (adjective, noun) bigrams that form a lexicon ANP of `polarity`.
// matched counts those also present as an adjacent bigram in the same
// image's references (any image's, when corpus_wide).
AnpCount count_anps(std::span<const Tokens> candidates, std::span<const References> references,
                    const AnpLexicon& lexicon, Polarity polarity, bool corpus_wide = false);

// Lexicon adjectives by frequency, ties lexicographic, at most k.
std::vector<std::string> top_adjectives(std::span<const Tokens> candidates, const AnpLexicon& lexicon,
                                        std::size_t k = 10);

struct MetricReport {
  std::array<double, 4> bleu{};
  double rouge_l = 0.0;
  double cider = 0.0;
  double entropy = 0.0;
  double spice_n = 0.0;
  std::size_t anp_generated = 0;
  std::size_t anp_matched = 0;
  std::vector<std::string> top_adjectives;
  bool no_adjectives = false;
};

// Whole battery. ANPs are counted for `polarity` when given.
MetricReport evaluate_metrics(std::span<const Tokens> candidates, std::span<const References> references,
                              const AnpLexicon& lexicon, std::optional<Polarity> polarity,
                              bool corpus_wide_anps = false);

// Mean of two reports; ANP counts are averaged too.
struct AveragedReport {
  MetricReport report;
  double anp_generated = 0.0;
  double anp_matched = 0.0;
};
AveragedReport average(const MetricReport& a, const MetricReport& b);

}  // namespace senti
