#pragma once

// Data ingestion: vocabulary, feature store, caption and lexicon files,
// dataset merging and batching.
//
// Feature file ("SAFT"), little-endian:
//   "SAFT" u32 version (=1) u32 n_images u32 K u32 D
//   per image: u16 id length, UTF-8 id, K*D f32 (row-major)
// Captions file: one record per line, tab separated:
//   image_id <TAB> pos|neg|neutral|none <TAB> caption text
//   ("none" marks an unlabeled factual caption). Blank lines and lines
//   starting with '#' are skipped.
// Lexicon file: tab separated records
//   ADJ <TAB> word <TAB> pos|neg
//   NOUN <TAB> word
//   ANP <TAB> adjective <TAB> noun <TAB> pos|neg
//   SYN <TAB> word <TAB> synonym

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "senti/metrics.hpp"
#include "senti/model.hpp"
#include "senti/text.hpp"

namespace senti {

class Vocabulary {
 public:
  Vocabulary();

  // Words with count >= min_count ranked by frequency then lexicographically,
  // truncated to cap - 4, after the four reserved tokens.
  static Vocabulary build(std::span<const std::string> texts, std::size_t min_count, std::size_t cap);
  // One word per line in index order, reserved tokens included.
  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  Index size() const { return static_cast<Index>(words_.size()); }
  bool frozen() const { return true; }
  bool contains(std::string_view word) const;
  // <unk> for words outside the vocabulary.
  Index id(std::string_view word) const;
  const std::string& word(Index id) const;

  // <start> w_1 ... w_n <end>.
  std::vector<Index> encode(std::string_view text) const;
  // Words of a token sequence, skipping reserved tokens other than <unk>.
  Tokens words(std::span<const Index> ids) const;
  std::string decode(std::span<const Index> ids) const { return join(words(ids)); }

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;

 private:
  std::vector<std::string> words_;
  std::map<std::string, Index, std::less<>> index_;
};

inline Vocabulary build_vocab(std::span<const std::string> texts, std::size_t min_count, std::size_t cap) {
  return Vocabulary::build(texts, min_count, cap);
}

// image id -> K x D grid. All grids share one shape; unknown ids are errors.
class FeatureStore {
 public:
  FeatureStore() = default;
  FeatureStore(Index regions, Index feature_dim);

  void add(std::string image_id, Matrix grid);
  bool contains(std::string_view image_id) const;
  const Matrix& get(std::string_view image_id) const;
  SpatialFeatures features(std::string_view image_id) const;

  Index regions() const { return regions_; }
  Index feature_dim() const { return feature_dim_; }
  std::size_t size() const { return order_.size(); }
  // Insertion order (file order for loaded stores).
  const std::vector<std::string>& ids() const { return order_; }

 private:
  Index regions_ = 0;
  Index feature_dim_ = 0;
  std::map<std::string, Matrix, std::less<>> grids_;
  std::vector<std::string> order_;
};

void write_features(std::ostream& os, const FeatureStore& store);
FeatureStore read_features(std::istream& is, const std::string& source = "<stream>");
void save_features(const std::string& path, const FeatureStore& store);
FeatureStore load_features(const std::string& path);

// One line of a captions file.
struct RawCaption {
  std::string image_id;
  std::optional<Sentiment> sentiment;  // nullopt: unlabeled factual caption
  std::string text;
};

struct CaptionRecord {
  std::string image_id;
  std::vector<Index> tokens;  // <start> ... <end>
  std::optional<Sentiment> sentiment;
  std::string raw_text;
};

std::vector<RawCaption> read_captions(std::istream& is, const std::string& source = "<stream>");
std::vector<RawCaption> read_captions(const std::string& path);
void write_captions(std::ostream& os, std::span<const RawCaption> captions);
void save_captions(const std::string& path, std::span<const RawCaption> captions);

struct CaptionLoad {
  std::vector<CaptionRecord> records;
  // Human-readable reasons for every rejected caption.
  std::vector<std::string> rejected;
};

// Encodes captions; rejects those longer than max_len words and, when a
// feature store is given, those whose image has no features.
CaptionLoad encode_captions(std::span<const RawCaption> captions, const Vocabulary& vocab, std::size_t max_len,
                            const FeatureStore* features = nullptr);
CaptionLoad load_captions(const std::string& path, const Vocabulary& vocab, std::size_t max_len,
                          const FeatureStore* features = nullptr);

AnpLexicon read_lexicon(std::istream& is, const std::string& source = "<stream>");
AnpLexicon load_lexicon(const std::string& path);
void write_lexicon(std::ostream& os, const AnpLexicon& lexicon);
void save_lexicon(const std::string& path, const AnpLexicon& lexicon);

struct MergeCounts {
  std::size_t positive = 0;
  std::size_t neutral = 0;
  std::size_t negative = 0;
};

// Labels every factual caption Neutral and appends the sentiment captions,
// which must be Positive or Negative (DataError otherwise). Works on
// RawCaption and CaptionRecord.
template <typename Record>
std::vector<Record> merge_datasets(std::span<const Record> factual, std::span<const Record> sentimental,
                                   MergeCounts* counts = nullptr);

struct Batch {
  std::vector<std::size_t> indices;  // into the record list
  MatrixX<Index> tokens;             // batch x T_max, <pad>-filled
  Matrix mask;                       // 1 on real tokens, 0 on padding
};

// Shuffled with `seed`; the last partial batch is kept.
std::vector<Batch> make_batches(std::span<const CaptionRecord> records, std::size_t batch_size,
                                std::uint64_t seed);

// Deterministic Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

}  // namespace senti
