#include "senti/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <unordered_map>

#include "senti/errors.hpp"

namespace senti {
namespace {

using NgramCounts = std::map<std::string, double>;

// n-grams of one order, keyed by their words joined with a unit separator.
NgramCounts ngrams(const Tokens& words, std::size_t n) {
  NgramCounts out;
  if (words.size() < n) return out;
  for (std::size_t i = 0; i + n <= words.size(); ++i) {
    std::string key = words[i];
    for (std::size_t j = 1; j < n; ++j) {
      key += '\x1f';
      key += words[i + j];
    }
    out[key] += 1.0;
  }
  return out;
}

void check_corpus(std::span<const Tokens> candidates, std::span<const References> references) {
  if (candidates.empty()) throw DataError("metric on an empty candidate set");
  if (candidates.size() != references.size()) {
    throw DataError("candidate and reference sets differ in size (" + std::to_string(candidates.size()) + " vs " +
                    std::to_string(references.size()) + ")");
  }
  for (std::size_t i = 0; i < references.size(); ++i) {
    if (references[i].empty()) throw DataError("candidate " + std::to_string(i) + " has no reference");
  }
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

constexpr int kCiderOrder = 4;
constexpr double kCiderSigma = 6.0;

struct CiderVector {
  std::array<NgramCounts, kCiderOrder> weights;
  std::array<double, kCiderOrder> norms{};
  double length = 0.0;
};

CiderVector cider_vector(const Tokens& words, const std::unordered_map<std::string, double>& doc_freq,
                         double log_corpus_size) {
  CiderVector v;
  for (int n = 1; n <= kCiderOrder; ++n) {
    for (auto& [gram, tf] : ngrams(words, static_cast<std::size_t>(n))) {
      auto it = doc_freq.find(gram);
      const double df = std::log(std::max(1.0, it == doc_freq.end() ? 0.0 : it->second));
      const double w = tf * (log_corpus_size - df);
      v.weights[n - 1][gram] = w;
      v.norms[n - 1] += w * w;
    }
    v.norms[n - 1] = std::sqrt(v.norms[n - 1]);
  }
  v.length = static_cast<double>(words.size());
  return v;
}

double cider_similarity(const CiderVector& cand, const CiderVector& ref) {
  const double delta = cand.length - ref.length;
  double total = 0.0;
  for (int n = 0; n < kCiderOrder; ++n) {
    double val = 0.0;
    for (const auto& [gram, w] : cand.weights[n]) {
      auto it = ref.weights[n].find(gram);
      if (it != ref.weights[n].end()) val += std::min(w, it->second) * it->second;
    }
    if (cand.norms[n] != 0.0 && ref.norms[n] != 0.0) val /= cand.norms[n] * ref.norms[n];
    val *= std::exp(-(delta * delta) / (2.0 * kCiderSigma * kCiderSigma));
    total += val;
  }
  return total / kCiderOrder;
}

}  // namespace

std::string_view to_string(Polarity p) { return p == Polarity::Positive ? "pos" : "neg"; }

bool AnpLexicon::synonymous(const std::string& a, const std::string& b) const {
  if (a == b) return true;
  auto it = synonyms.find(a);
  return it != synonyms.end() && it->second.count(b) != 0;
}

const std::string& AnpLexicon::canonical(const std::string& a) const {
  auto it = synonyms.find(a);
  if (it == synonyms.end() || it->second.empty()) return a;
  const std::string& first = *it->second.begin();
  return first < a ? first : a;
}

void AnpLexicon::close_synonyms() {
  // Union-find over every word that appears in a synonym list.
  std::map<std::string, std::string> parent;
  std::function<std::string(const std::string&)> find = [&](const std::string& w) -> std::string {
    auto it = parent.find(w);
    if (it == parent.end()) {
      parent[w] = w;
      return w;
    }
    if (it->second == w) return w;
    std::string root = find(it->second);
    parent[w] = root;
    return root;
  };
  for (const auto& [word, syns] : synonyms) {
    for (const auto& s : syns) {
      const std::string ra = find(word);
      const std::string rb = find(s);
      if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    }
  }
  std::map<std::string, std::set<std::string>> classes;
  for (const auto& [word, p] : parent) classes[find(word)].insert(word);
  synonyms.clear();
  for (const auto& [root, members] : classes) {
    for (const auto& w : members) {
      nouns.insert(w);
      for (const auto& other : members) {
        if (other != w) synonyms[w].insert(other);
      }
    }
  }
}

void AnpLexicon::validate() const {
  for (const auto& [pair, polarity] : anps) {
    if (!is_adjective(pair.first)) throw DataError("ANP adjective '" + pair.first + "' is not a listed adjective");
    if (!is_noun(pair.second)) throw DataError("ANP noun '" + pair.second + "' is not a listed noun");
  }
}

std::array<double, 4> bleu(std::span<const Tokens> candidates, std::span<const References> references) {
  check_corpus(candidates, references);
  std::array<double, 4> clipped{};
  std::array<double, 4> totals{};
  double cand_len = 0.0;
  double ref_len = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Tokens& cand = candidates[i];
    const References& refs = references[i];
    for (std::size_t n = 1; n <= 4; ++n) {
      NgramCounts max_ref;
      for (const Tokens& r : refs) {
        for (const auto& [gram, count] : ngrams(r, n)) max_ref[gram] = std::max(max_ref[gram], count);
      }
      for (const auto& [gram, count] : ngrams(cand, n)) {
        auto it = max_ref.find(gram);
        clipped[n - 1] += std::min(count, it == max_ref.end() ? 0.0 : it->second);
      }
      totals[n - 1] += cand.size() >= n ? static_cast<double>(cand.size() - n + 1) : 0.0;
    }
    // Closest reference length, shorter on ties.
    std::size_t best = refs.front().size();
    for (const Tokens& r : refs) {
      const auto d = [&](std::size_t len) {
        return len > cand.size() ? len - cand.size() : cand.size() - len;
      };
      if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
    }
    cand_len += static_cast<double>(cand.size());
    ref_len += static_cast<double>(best);
  }

  std::array<double, 4> out{};
  if (cand_len == 0.0) return out;
  const double bp = cand_len < ref_len ? std::exp(1.0 - ref_len / cand_len) : 1.0;
  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 0; n < 4; ++n) {
    const double p = totals[n] > 0.0 ? clipped[n] / totals[n] : 0.0;
    if (p == 0.0) zero = true;
    if (!zero) log_sum += std::log(p);
    out[n] = zero ? 0.0 : bp * std::exp(log_sum / static_cast<double>(n + 1));
  }
  return out;
}

double rouge_l(std::span<const Tokens> candidates, std::span<const References> references) {
  check_corpus(candidates, references);
  constexpr double beta2 = 1.2 * 1.2;
  double sum = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    double best = 0.0;
    for (const Tokens& ref : references[i]) {
      const auto lcs = static_cast<double>(lcs_length(candidates[i], ref));
      if (lcs == 0.0) continue;
      const double p = lcs / static_cast<double>(candidates[i].size());
      const double r = lcs / static_cast<double>(ref.size());
      best = std::max(best, (1.0 + beta2) * p * r / (r + beta2 * p));
    }
    sum += best;
  }
  return sum / static_cast<double>(candidates.size());
}

double cider_d(std::span<const Tokens> candidates, std::span<const References> references) {
  check_corpus(candidates, references);
  std::unordered_map<std::string, double> doc_freq;
  for (const References& refs : references) {
    std::set<std::string> seen;
    for (const Tokens& r : refs) {
      for (int n = 1; n <= kCiderOrder; ++n) {
        for (const auto& [gram, c] : ngrams(r, static_cast<std::size_t>(n))) seen.insert(gram);
      }
    }
    for (const auto& g : seen) doc_freq[g] += 1.0;
  }
  const double log_n = std::log(static_cast<double>(references.size()));
  double sum = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const CiderVector cand = cider_vector(candidates[i], doc_freq, log_n);
    double score = 0.0;
    for (const Tokens& r : references[i]) score += cider_similarity(cand, cider_vector(r, doc_freq, log_n));
    sum += 10.0 * score / static_cast<double>(references[i].size());
  }
  return sum / static_cast<double>(candidates.size());
}

EntropyResult entropy_adjectives(std::span<const Tokens> candidates, const AnpLexicon& lexicon) {
  std::map<std::string, double> counts;
  double total = 0.0;
  for (const Tokens& c : candidates) {
    for (const auto& w : c) {
      if (lexicon.is_adjective(w)) {
        counts[w] += 1.0;
        total += 1.0;
      }
    }
  }
  EntropyResult r;
  if (total == 0.0) {
    r.no_adjectives = true;
    return r;
  }
  for (const auto& [w, c] : counts) {
    const double p = c / total;
    r.entropy -= p * std::log2(p);
  }
  // A single adjective gives -1 * log2(1) = -0.0.
  r.entropy = std::max(0.0, r.entropy);
  return r;
}

double spice_n(std::span<const Tokens> candidates, std::span<const References> references,
               const AnpLexicon& lexicon) {
  check_corpus(candidates, references);
  AnpLexicon closed = lexicon;
  closed.close_synonyms();
  const auto noun_classes = [&](const Tokens& words, std::set<std::string>& out) {
    for (const auto& w : words) {
      if (closed.is_noun(w)) out.insert(closed.canonical(w));
    }
  };
  double sum = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    std::set<std::string> cand;
    std::set<std::string> ref;
    noun_classes(candidates[i], cand);
    for (const Tokens& r : references[i]) noun_classes(r, ref);
    if (cand.empty() || ref.empty()) continue;
    std::size_t match = 0;
    for (const auto& c : cand) match += ref.count(c);
    if (match == 0) continue;
    const double p = static_cast<double>(match) / static_cast<double>(cand.size());
    const double r = static_cast<double>(match) / static_cast<double>(ref.size());
    sum += 2.0 * p * r / (p + r);
  }
  return sum / static_cast<double>(candidates.size());
}

AnpCount count_anps(std::span<const Tokens> candidates, std::span<const References> references,
                    const AnpLexicon& lexicon, Polarity polarity, bool corpus_wide) {
  if (candidates.size() != references.size()) throw DataError("candidate and reference sets differ in size");
  using Bigram = std::pair<std::string, std::string>;
  const auto collect = [](const References& refs, std::set<Bigram>& out) {
    for (const Tokens& r : refs) {
      for (std::size_t j = 0; j + 1 < r.size(); ++j) out.emplace(r[j], r[j + 1]);
    }
  };
  std::set<Bigram> all_refs;
  if (corpus_wide) {
    for (const References& refs : references) collect(refs, all_refs);
  }
  AnpCount out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    std::set<Bigram> local;
    if (!corpus_wide) collect(references[i], local);
    const std::set<Bigram>& ref_bigrams = corpus_wide ? all_refs : local;
    const Tokens& c = candidates[i];
    for (std::size_t j = 0; j + 1 < c.size(); ++j) {
      Bigram b{c[j], c[j + 1]};
      auto it = lexicon.anps.find(b);
      if (it == lexicon.anps.end() || it->second != polarity) continue;
      ++out.generated;
      if (ref_bigrams.count(b) != 0) ++out.matched;
    }
  }
  return out;
}

std::vector<std::string> top_adjectives(std::span<const Tokens> candidates, const AnpLexicon& lexicon,
                                        std::size_t k) {
  std::map<std::string, std::size_t> counts;
  for (const Tokens& c : candidates) {
    for (const auto& w : c) {
      if (lexicon.is_adjective(w)) ++counts[w];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i) out.push_back(ranked[i].first);
  return out;
}

MetricReport evaluate_metrics(std::span<const Tokens> candidates, std::span<const References> references,
                              const AnpLexicon& lexicon, std::optional<Polarity> polarity,
                              bool corpus_wide_anps) {
  MetricReport r;
  r.bleu = bleu(candidates, references);
  r.rouge_l = rouge_l(candidates, references);
  r.cider = cider_d(candidates, references);
  const EntropyResult e = entropy_adjectives(candidates, lexicon);
  r.entropy = e.entropy;
  r.no_adjectives = e.no_adjectives;
  r.spice_n = spice_n(candidates, references, lexicon);
  if (polarity) {
    const AnpCount anp = count_anps(candidates, references, lexicon, *polarity, corpus_wide_anps);
    r.anp_generated = anp.generated;
    r.anp_matched = anp.matched;
  }
  r.top_adjectives = top_adjectives(candidates, lexicon);
  return r;
}

AveragedReport average(const MetricReport& a, const MetricReport& b) {
  AveragedReport out;
  MetricReport& r = out.report;
  for (std::size_t n = 0; n < 4; ++n) r.bleu[n] = 0.5 * (a.bleu[n] + b.bleu[n]);
  r.rouge_l = 0.5 * (a.rouge_l + b.rouge_l);
  r.cider = 0.5 * (a.cider + b.cider);
  r.entropy = 0.5 * (a.entropy + b.entropy);
  r.spice_n = 0.5 * (a.spice_n + b.spice_n);
  r.no_adjectives = a.no_adjectives && b.no_adjectives;
  out.anp_generated = 0.5 * static_cast<double>(a.anp_generated + b.anp_generated);
  out.anp_matched = 0.5 * static_cast<double>(a.anp_matched + b.anp_matched);
  return out;
}

}  // namespace senti
