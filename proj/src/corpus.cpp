#include "senti/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>
#include <utility>

#include "binary_io.hpp"
#include "senti/errors.hpp"

namespace senti {
namespace {

constexpr char kFeatureMagic[4] = {'S', 'A', 'F', 'T'};
constexpr std::uint32_t kFeatureVersion = 1;

const std::array<std::string, 4> kReservedWords = {"<pad>", "<start>", "<end>", "<unk>"};

std::optional<Sentiment> parse_label(std::string_view label, const std::string& where) {
  if (label == "none") return std::nullopt;
  if (label == "pos" || label == "neg" || label == "neutral") return parse_sentiment(label);
  throw ParseError(where + ": unknown sentiment label '" + std::string(label) + "'");
}

Polarity parse_polarity(std::string_view s, const std::string& where) {
  if (s == "pos") return Polarity::Positive;
  if (s == "neg") return Polarity::Negative;
  throw ParseError(where + ": polarity must be pos or neg, got '" + std::string(s) + "'");
}

}  // namespace

Vocabulary::Vocabulary() {
  for (const auto& w : kReservedWords) {
    index_.emplace(w, static_cast<Index>(words_.size()));
    words_.push_back(w);
  }
}

Vocabulary Vocabulary::build(std::span<const std::string> texts, std::size_t min_count, std::size_t cap) {
  if (cap < static_cast<std::size_t>(token::kReserved)) {
    throw ConfigError("vocabulary cap must be at least " + std::to_string(token::kReserved));
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& t : texts) {
    for (auto& w : tokenize(t)) ++counts[w];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [w, c] : counts) {
    if (c >= min_count && std::find(kReservedWords.begin(), kReservedWords.end(), w) == kReservedWords.end()) {
      ranked.emplace_back(w, c);
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t room = cap - static_cast<std::size_t>(token::kReserved);
  if (ranked.size() > room) ranked.resize(room);

  Vocabulary v;
  for (auto& [w, c] : ranked) {
    v.index_.emplace(w, static_cast<Index>(v.words_.size()));
    v.words_.push_back(w);
  }
  return v;
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open vocabulary '" + path + "'");
  Vocabulary v;
  v.words_.clear();
  v.index_.clear();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const Index id = static_cast<Index>(v.words_.size());
    if (id < token::kReserved && line != kReservedWords[static_cast<std::size_t>(id)]) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected reserved token " +
                       kReservedWords[static_cast<std::size_t>(id)]);
    }
    if (line.empty() || !v.index_.emplace(line, id).second) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": empty or duplicate word");
    }
    v.words_.push_back(line);
  }
  if (v.words_.size() < static_cast<std::size_t>(token::kReserved)) {
    throw ParseError(path + ": vocabulary lacks the reserved tokens");
  }
  return v;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  for (const auto& w : words_) os << w << '\n';
}

bool Vocabulary::contains(std::string_view word) const { return index_.find(word) != index_.end(); }

Index Vocabulary::id(std::string_view word) const {
  auto it = index_.find(word);
  return it == index_.end() ? token::kUnk : it->second;
}

const std::string& Vocabulary::word(Index id) const {
  if (id < 0 || id >= size()) throw IndexError("token id " + std::to_string(id) + " outside vocabulary");
  return words_[static_cast<std::size_t>(id)];
}

std::vector<Index> Vocabulary::encode(std::string_view text) const {
  std::vector<Index> out{token::kStart};
  for (const auto& w : tokenize(text)) out.push_back(id(w));
  out.push_back(token::kEnd);
  return out;
}

Tokens Vocabulary::words(std::span<const Index> ids) const {
  Tokens out;
  for (Index id : ids) {
    if (id == token::kPad || id == token::kStart || id == token::kEnd) continue;
    out.push_back(word(id));
  }
  return out;
}

FeatureStore::FeatureStore(Index regions, Index feature_dim) : regions_(regions), feature_dim_(feature_dim) {
  if (regions < 1 || feature_dim < 1) throw DataError("feature grid dimensions must be positive");
}

void FeatureStore::add(std::string image_id, Matrix grid) {
  if (grid.rows() != regions_ || grid.cols() != feature_dim_) {
    throw DataError("features for '" + image_id + "' are " + std::to_string(grid.rows()) + "x" +
                    std::to_string(grid.cols()) + ", store holds " + std::to_string(regions_) + "x" +
                    std::to_string(feature_dim_));
  }
  if (!grid.allFinite()) throw DataError("features for '" + image_id + "' contain non-finite values");
  if (grids_.count(image_id) != 0) throw DataError("duplicate image id '" + image_id + "'");
  order_.push_back(image_id);
  grids_.emplace(std::move(image_id), std::move(grid));
}

bool FeatureStore::contains(std::string_view image_id) const { return grids_.find(image_id) != grids_.end(); }

const Matrix& FeatureStore::get(std::string_view image_id) const {
  auto it = grids_.find(image_id);
  if (it == grids_.end()) throw DataError("no features for image '" + std::string(image_id) + "'");
  return it->second;
}

SpatialFeatures FeatureStore::features(std::string_view image_id) const {
  return SpatialFeatures{std::string(image_id), get(image_id)};
}

void write_features(std::ostream& os, const FeatureStore& store) {
  using namespace binary;
  os.write(kFeatureMagic, 4);
  write_uint<std::uint32_t>(os, kFeatureVersion);
  write_uint<std::uint32_t>(os, static_cast<std::uint32_t>(store.size()));
  write_uint<std::uint32_t>(os, static_cast<std::uint32_t>(store.regions()));
  write_uint<std::uint32_t>(os, static_cast<std::uint32_t>(store.feature_dim()));
  for (const auto& id : store.ids()) {
    if (id.size() > std::numeric_limits<std::uint16_t>::max()) throw DataError("image id too long: " + id);
    write_uint<std::uint16_t>(os, static_cast<std::uint16_t>(id.size()));
    os.write(id.data(), static_cast<std::streamsize>(id.size()));
    const Matrix& g = store.get(id);
    for (Index i = 0; i < g.size(); ++i) write_f32(os, static_cast<float>(g.data()[i]));
  }
  if (!os) throw Error("feature write failed");
}

FeatureStore read_features(std::istream& is, const std::string& source) {
  binary::Reader in(is, source);
  if (in.read_string(4, "magic") != std::string(kFeatureMagic, 4)) in.fail("not a feature file (bad magic)");
  const auto version = in.read_uint<std::uint32_t>("version");
  if (version != kFeatureVersion) in.fail("unsupported feature file version " + std::to_string(version));
  const auto n = in.read_uint<std::uint32_t>("image count");
  const auto k = in.read_uint<std::uint32_t>("K");
  const auto d = in.read_uint<std::uint32_t>("D");
  if (k == 0 || d == 0) in.fail("zero grid dimension");
  FeatureStore store(static_cast<Index>(k), static_cast<Index>(d));
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto len = in.read_uint<std::uint16_t>("id length");
    std::string id = in.read_string(len, "image id");
    Matrix grid(static_cast<Index>(k), static_cast<Index>(d));
    for (Index j = 0; j < grid.size(); ++j) grid.data()[j] = static_cast<double>(in.read_f32("features"));
    try {
      store.add(std::move(id), std::move(grid));
    } catch (const DataError& e) {
      in.fail(e.what());
    }
  }
  if (!in.at_end()) in.fail("trailing bytes after the last image");
  return store;
}

void save_features(const std::string& path, const FeatureStore& store) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  write_features(os, store);
}

FeatureStore load_features(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open feature file '" + path + "'");
  return read_features(is, path);
}

std::vector<RawCaption> read_captions(std::istream& is, const std::string& source) {
  std::vector<RawCaption> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.front() == '#') continue;
    const std::string where = source + ":" + std::to_string(lineno);
    auto fields = split(line, '\t');
    if (fields.size() != 3) throw ParseError(where + ": expected 3 tab-separated fields");
    if (fields[0].empty()) throw ParseError(where + ": empty image id");
    out.push_back(RawCaption{fields[0], parse_label(fields[1], where), fields[2]});
  }
  return out;
}

std::vector<RawCaption> read_captions(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open captions file '" + path + "'");
  return read_captions(is, path);
}

void write_captions(std::ostream& os, std::span<const RawCaption> captions) {
  for (const auto& c : captions) {
    os << c.image_id << '\t' << (c.sentiment ? to_string(*c.sentiment) : std::string_view("none")) << '\t'
       << c.text << '\n';
  }
}

void save_captions(const std::string& path, std::span<const RawCaption> captions) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  write_captions(os, captions);
}

CaptionLoad encode_captions(std::span<const RawCaption> captions, const Vocabulary& vocab, std::size_t max_len,
                            const FeatureStore* features) {
  CaptionLoad out;
  for (std::size_t i = 0; i < captions.size(); ++i) {
    const RawCaption& c = captions[i];
    if (features != nullptr && !features->contains(c.image_id)) {
      out.rejected.push_back("caption " + std::to_string(i + 1) + ": no features for image '" + c.image_id + "'");
      continue;
    }
    std::vector<Index> ids = vocab.encode(c.text);
    if (ids.size() - 2 > max_len) {
      out.rejected.push_back("caption " + std::to_string(i + 1) + ": " + std::to_string(ids.size() - 2) +
                             " words exceed max_len " + std::to_string(max_len));
      continue;
    }
    out.records.push_back(CaptionRecord{c.image_id, std::move(ids), c.sentiment, c.text});
  }
  return out;
}

CaptionLoad load_captions(const std::string& path, const Vocabulary& vocab, std::size_t max_len,
                          const FeatureStore* features) {
  const auto raw = read_captions(path);
  return encode_captions(raw, vocab, max_len, features);
}

AnpLexicon read_lexicon(std::istream& is, const std::string& source) {
  AnpLexicon lex;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.front() == '#') continue;
    const std::string where = source + ":" + std::to_string(lineno);
    auto f = split(line, '\t');
    const auto need = [&](std::size_t n) {
      if (f.size() != n) throw ParseError(where + ": " + f[0] + " record needs " + std::to_string(n) + " fields");
      for (const auto& field : f) {
        if (field.empty()) throw ParseError(where + ": empty field");
      }
    };
    if (f[0] == "ADJ") {
      need(3);
      lex.adjectives[f[1]] = parse_polarity(f[2], where);
    } else if (f[0] == "NOUN") {
      need(2);
      lex.nouns.insert(f[1]);
    } else if (f[0] == "ANP") {
      need(4);
      lex.anps[{f[1], f[2]}] = parse_polarity(f[3], where);
    } else if (f[0] == "SYN") {
      need(3);
      lex.synonyms[f[1]].insert(f[2]);
    } else {
      throw ParseError(where + ": unknown record type '" + f[0] + "'");
    }
  }
  lex.close_synonyms();
  try {
    lex.validate();
  } catch (const DataError& e) {
    throw ParseError(source + ": " + e.what());
  }
  return lex;
}

AnpLexicon load_lexicon(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open lexicon '" + path + "'");
  return read_lexicon(is, path);
}

void write_lexicon(std::ostream& os, const AnpLexicon& lexicon) {
  for (const auto& [w, p] : lexicon.adjectives) os << "ADJ\t" << w << '\t' << to_string(p) << '\n';
  for (const auto& w : lexicon.nouns) os << "NOUN\t" << w << '\n';
  for (const auto& [pair, p] : lexicon.anps) {
    os << "ANP\t" << pair.first << '\t' << pair.second << '\t' << to_string(p) << '\n';
  }
  for (const auto& [w, syns] : lexicon.synonyms) {
    for (const auto& s : syns) {
      if (w < s) os << "SYN\t" << w << '\t' << s << '\n';
    }
  }
}

void save_lexicon(const std::string& path, const AnpLexicon& lexicon) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  write_lexicon(os, lexicon);
}

template <typename Record>
std::vector<Record> merge_datasets(std::span<const Record> factual, std::span<const Record> sentimental,
                                   MergeCounts* counts) {
  std::vector<Record> out;
  out.reserve(factual.size() + sentimental.size());
  MergeCounts c;
  for (const Record& r : factual) {
    if (r.sentiment && *r.sentiment != Sentiment::Neutral) {
      throw DataError("factual caption for '" + r.image_id + "' carries a sentiment label");
    }
    Record copy = r;
    copy.sentiment = Sentiment::Neutral;
    out.push_back(std::move(copy));
    ++c.neutral;
  }
  for (const Record& r : sentimental) {
    if (!r.sentiment || *r.sentiment == Sentiment::Neutral) {
      throw DataError("sentiment caption for '" + r.image_id + "' must be labeled pos or neg");
    }
    out.push_back(r);
    ++(*r.sentiment == Sentiment::Positive ? c.positive : c.negative);
  }
  if (counts != nullptr) *counts = c;
  return out;
}

template std::vector<RawCaption> merge_datasets(std::span<const RawCaption>, std::span<const RawCaption>,
                                                MergeCounts*);
template std::vector<CaptionRecord> merge_datasets(std::span<const CaptionRecord>, std::span<const CaptionRecord>,
                                                   MergeCounts*);

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(idx[i - 1], idx[std::min(j, i - 1)]);
  }
  return idx;
}

std::vector<Batch> make_batches(std::span<const CaptionRecord> records, std::size_t batch_size,
                                std::uint64_t seed) {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  const std::vector<std::size_t> order = shuffled_indices(records.size(), seed);
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    Batch b;
    const std::size_t end = std::min(order.size(), start + batch_size);
    b.indices.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
    std::size_t t_max = 0;
    for (std::size_t i : b.indices) t_max = std::max(t_max, records[i].tokens.size());
    const auto rows = static_cast<Index>(b.indices.size());
    b.tokens = MatrixX<Index>::Constant(rows, static_cast<Index>(t_max), token::kPad);
    b.mask = Matrix::Zero(rows, static_cast<Index>(t_max));
    for (Index r = 0; r < rows; ++r) {
      const auto& toks = records[b.indices[static_cast<std::size_t>(r)]].tokens;
      for (std::size_t t = 0; t < toks.size(); ++t) {
        b.tokens(r, static_cast<Index>(t)) = toks[t];
        b.mask(r, static_cast<Index>(t)) = 1.0;
      }
    }
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace senti
