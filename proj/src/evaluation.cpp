#include "senti/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "senti/errors.hpp"

namespace senti {
namespace {

std::optional<Polarity> polarity_of(Sentiment s) {
  if (s == Sentiment::Positive) return Polarity::Positive;
  if (s == Sentiment::Negative) return Polarity::Negative;
  return std::nullopt;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string row_label(Sentiment s) {
  switch (s) {
    case Sentiment::Positive: return "Pos";
    case Sentiment::Negative: return "Neg";
    case Sentiment::Neutral: return "Neutral";
  }
  return "?";
}

}  // namespace

void write_generated(std::ostream& os, std::span<const GeneratedCaption> captions) {
  for (const auto& c : captions) {
    os << c.image_id << '\t' << to_string(c.sentiment) << '\t' << c.caption << '\t' << format_double(c.log_prob)
       << '\n';
  }
}

std::vector<GeneratedCaption> read_generated(std::istream& is, const std::string& source) {
  std::vector<GeneratedCaption> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.front() == '#') continue;
    const std::string where = source + ":" + std::to_string(lineno);
    auto f = split(line, '\t');
    if (f.size() != 4) throw ParseError(where + ": expected 4 tab-separated fields");
    GeneratedCaption g;
    g.image_id = f[0];
    try {
      g.sentiment = parse_sentiment(f[1]);
    } catch (const ConfigError& e) {
      throw ParseError(where + ": " + e.what());
    }
    g.caption = f[2];
    std::size_t used = 0;
    try {
      g.log_prob = std::stod(f[3], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != f[3].size()) throw ParseError(where + ": bad log_prob '" + f[3] + "'");
    out.push_back(std::move(g));
  }
  return out;
}

void save_generated(const std::string& path, std::span<const GeneratedCaption> captions) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  write_generated(os, captions);
}

std::vector<GeneratedCaption> load_generated(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open generation file '" + path + "'");
  return read_generated(is, path);
}

ReferenceIndex::ReferenceIndex(std::span<const RawCaption> captions) {
  for (const auto& c : captions) {
    refs_[c.image_id][c.sentiment.value_or(Sentiment::Neutral)].push_back(tokenize(c.text));
  }
}

const References* ReferenceIndex::find(const std::string& image_id, Sentiment s) const {
  auto it = refs_.find(image_id);
  if (it == refs_.end()) return nullptr;
  auto jt = it->second.find(s);
  return jt == it->second.end() ? nullptr : &jt->second;
}

std::vector<std::string> ReferenceIndex::images(Sentiment s) const {
  std::vector<std::string> out;
  for (const auto& [id, by] : refs_) {
    if (by.count(s) != 0) out.push_back(id);
  }
  return out;
}

std::vector<std::string> ReferenceIndex::images() const {
  std::vector<std::string> out;
  for (const auto& [id, by] : refs_) out.push_back(id);
  return out;
}

std::vector<GeneratedCaption> generate_captions(const ModelConfig& config, const Parameters& params,
                                                const FeatureStore& features, std::span<const std::string> image_ids,
                                                std::span<const Sentiment> sentiments, const DecodeRequest& request,
                                                bool use_beam, const Vocabulary& vocab) {
  std::vector<GeneratedCaption> out;
  for (const auto& id : image_ids) {
    const Matrix& grid = features.get(id);
    for (Sentiment s : sentiments) {
      const DecodedCaption d = use_beam ? beam_decode(config, params, grid, s, request).front()
                                        : greedy_decode(config, params, grid, s, request);
      out.push_back({id, s, vocab.decode(d.tokens), d.log_prob});
    }
  }
  return out;
}

MetricReport evaluate_generated(std::span<const GeneratedCaption> generated, const ReferenceIndex& references,
                                const AnpLexicon& lexicon, Sentiment s, bool corpus_wide_anps) {
  std::vector<Tokens> candidates;
  std::vector<References> refs;
  std::set<std::string> missing;
  for (const auto& g : generated) {
    if (g.sentiment != s) continue;
    const References* r = references.find(g.image_id, s);
    if (r == nullptr) {
      missing.insert(g.image_id);
      continue;
    }
    candidates.push_back(tokenize(g.caption));
    refs.push_back(*r);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw DataError("no " + std::string(to_string(s)) + " references for: " + list);
  }
  if (candidates.empty()) throw DataError("no " + std::string(to_string(s)) + " captions to evaluate");
  return evaluate_metrics(candidates, refs, lexicon, polarity_of(s), corpus_wide_anps);
}

TableRow make_row(std::string label, const MetricReport& report) {
  TableRow row{std::move(label), report, static_cast<double>(report.anp_generated),
               static_cast<double>(report.anp_matched), 0};
  return row;
}

TableRow make_row(std::string label, const AveragedReport& report) {
  return TableRow{std::move(label), report.report, report.anp_generated, report.anp_matched, 0};
}

std::vector<TableRow> evaluation_table(std::span<const GeneratedCaption> generated, const ReferenceIndex& references,
                                       const AnpLexicon& lexicon, bool corpus_wide_anps) {
  std::vector<TableRow> rows;
  std::map<Sentiment, MetricReport> by;
  for (Sentiment s : kSentiments) {
    const bool present = std::any_of(generated.begin(), generated.end(),
                                     [&](const GeneratedCaption& g) { return g.sentiment == s; });
    if (!present) continue;
    by[s] = evaluate_generated(generated, references, lexicon, s, corpus_wide_anps);
    TableRow row = make_row(row_label(s), by[s]);
    for (const auto& g : generated) {
      if (g.sentiment != s) continue;
      for (std::size_t pos = g.caption.find("<unk>"); pos != std::string::npos; pos = g.caption.find("<unk>", pos + 1)) {
        ++row.unk;
      }
    }
    rows.push_back(std::move(row));
  }
  if (by.count(Sentiment::Positive) != 0 && by.count(Sentiment::Negative) != 0) {
    TableRow avg = make_row("Avg", average(by[Sentiment::Positive], by[Sentiment::Negative]));
    for (const auto& r : rows) {
      if (r.label != "Neutral") avg.unk += r.unk;
    }
    rows.push_back(std::move(avg));
  }
  return rows;
}

std::string format_table(std::span<const TableRow> rows, bool raw) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-14s %7s %7s %7s %7s %8s %7s %7s %8s %8s %8s %8s %5s\n", "", "B-1", "B-2", "B-3",
                "B-4", "ROUGE-L", "METEOR", "CIDEr", "SPICE_N", "Entropy", "ANP-gen", "ANP-match", "unk");
  os << buf;
  const double k = raw ? 1.0 : 100.0;
  const char* f = raw ? "%7.4f " : "%7.1f ";
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-14s ", r.label.c_str());
    os << buf;
    for (double b : r.report.bleu) {
      std::snprintf(buf, sizeof buf, f, k * b);
      os << buf;
    }
    std::snprintf(buf, sizeof buf, raw ? "%8.4f %7s " : "%8.1f %7s ", k * r.report.rouge_l, "-");
    os << buf;
    std::snprintf(buf, sizeof buf, f, k * r.report.cider);
    os << buf;
    std::snprintf(buf, sizeof buf, raw ? "%8.4f %8.4f " : "%8.1f %8.3f ", k * r.report.spice_n, r.report.entropy);
    os << buf;
    std::snprintf(buf, sizeof buf, "%8.1f %8.1f %5zu\n", r.anp_generated, r.anp_matched, r.unk);
    os << buf;
  }
  return os.str();
}

ControlStats sentiment_control(std::span<const GeneratedCaption> generated, const AnpLexicon& lexicon) {
  ControlStats st;
  std::size_t consistent = 0;
  std::map<std::string, std::pair<int, int>> per_image;  // -1 absent, 0 inconsistent, 1 consistent
  for (const auto& g : generated) {
    const auto pol = polarity_of(g.sentiment);
    if (!pol) continue;
    bool any = false;
    bool ok = true;
    for (const auto& w : tokenize(g.caption)) {
      auto it = lexicon.adjectives.find(w);
      if (it == lexicon.adjectives.end()) continue;
      any = true;
      if (it->second != *pol) ok = false;
    }
    const bool good = any && ok;
    ++st.captions;
    if (good) ++consistent;
    auto [it, fresh] = per_image.try_emplace(g.image_id, -1, -1);
    (*pol == Polarity::Positive ? it->second.first : it->second.second) = good ? 1 : 0;
  }
  std::size_t flipped = 0;
  for (const auto& [id, pn] : per_image) {
    if (pn.first < 0 || pn.second < 0) continue;
    ++st.images;
    if (pn.first == 1 && pn.second == 1) ++flipped;
  }
  st.consistency = st.captions == 0 ? 0.0 : static_cast<double>(consistent) / static_cast<double>(st.captions);
  st.flip_rate = st.images == 0 ? 0.0 : static_cast<double>(flipped) / static_cast<double>(st.images);
  return st;
}

double validation_cider(const ModelConfig& config, const Parameters& params, const FeatureStore& features,
                        const ReferenceIndex& references, std::span<const std::string> image_ids,
                        const DecodeRequest& request, const Vocabulary& vocab) {
  double sum = 0.0;
  int n = 0;
  for (Sentiment s : {Sentiment::Positive, Sentiment::Negative}) {
    std::vector<Tokens> cands;
    std::vector<References> refs;
    for (const auto& id : image_ids) {
      const References* r = references.find(id, s);
      if (r == nullptr) continue;
      const DecodedCaption d = greedy_decode(config, params, features.get(id), s, request);
      cands.push_back(vocab.words(d.tokens));
      refs.push_back(*r);
    }
    if (cands.empty()) continue;
    sum += cider_d(cands, refs);
    ++n;
  }
  if (n == 0) throw DataError("no Pos/Neg validation references");
  return sum / n;
}

}  // namespace senti
