#pragma once

// Brute-force reference implementations for the metric and search tests.
// Deliberately naive: plain vectors, no shared helpers with the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace oracle {

using Words = std::vector<std::string>;

inline std::vector<Words> grams(const Words& w, std::size_t n) {
  std::vector<Words> out;
  for (std::size_t i = 0; i + n <= w.size(); ++i) out.emplace_back(w.begin() + i, w.begin() + i + n);
  return out;
}

inline double occurrences(const std::vector<Words>& list, const Words& g) {
  return static_cast<double>(std::count(list.begin(), list.end(), g));
}

// Corpus BLEU-n, n = 1..4, closest reference length (shorter on ties).
inline std::vector<double> bleu(const std::vector<Words>& cands, const std::vector<std::vector<Words>>& refs) {
  std::vector<double> match(4, 0.0), total(4, 0.0);
  double c = 0.0, r = 0.0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto cg = grams(cands[i], n);
      std::vector<Words> distinct;
      for (const auto& g : cg) {
        if (std::find(distinct.begin(), distinct.end(), g) == distinct.end()) distinct.push_back(g);
      }
      for (const auto& g : distinct) {
        double best = 0.0;
        for (const auto& ref : refs[i]) best = std::max(best, occurrences(grams(ref, n), g));
        match[n - 1] += std::min(occurrences(cg, g), best);
      }
      total[n - 1] += static_cast<double>(cg.size());
    }
    c += static_cast<double>(cands[i].size());
    double closest = 1e300, diff = 1e300;
    for (const auto& ref : refs[i]) {
      const double len = static_cast<double>(ref.size());
      const double d = std::abs(len - static_cast<double>(cands[i].size()));
      if (d < diff || (d == diff && len < closest)) {
        diff = d;
        closest = len;
      }
    }
    r += closest;
  }
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  std::vector<double> out(4, 0.0);
  for (std::size_t n = 1; n <= 4; ++n) {
    double prod = 1.0;
    for (std::size_t k = 0; k < n; ++k) prod *= total[k] > 0 ? match[k] / total[k] : 0.0;
    out[n - 1] = prod > 0.0 ? bp * std::pow(prod, 1.0 / static_cast<double>(n)) : 0.0;
  }
  return out;
}

inline bool is_subsequence(const Words& sub, const Words& of) {
  std::size_t j = 0;
  for (const auto& w : of) {
    if (j < sub.size() && sub[j] == w) ++j;
  }
  return j == sub.size();
}

// Longest common subsequence by enumerating every subsequence of `a`.
inline std::size_t lcs_bruteforce(const Words& a, const Words& b) {
  std::size_t best = 0;
  const std::size_t n = a.size();
  for (unsigned long mask = 0; mask < (1UL << n); ++mask) {
    Words sub;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1UL << i)) sub.push_back(a[i]);
    }
    if (sub.size() > best && is_subsequence(sub, b)) best = sub.size();
  }
  return best;
}

inline double rouge_l(const std::vector<Words>& cands, const std::vector<std::vector<Words>>& refs) {
  const double b2 = 1.44;
  double sum = 0.0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    double best = 0.0;
    for (const auto& ref : refs[i]) {
      const double l = static_cast<double>(lcs_bruteforce(cands[i], ref));
      if (l == 0.0) continue;
      const double p = l / static_cast<double>(cands[i].size());
      const double r = l / static_cast<double>(ref.size());
      best = std::max(best, (1 + b2) * p * r / (r + b2 * p));
    }
    sum += best;
  }
  return sum / static_cast<double>(cands.size());
}

// CIDEr-D with dense vectors over an explicit n-gram list.
inline double cider_d(const std::vector<Words>& cands, const std::vector<std::vector<Words>>& refs) {
  const double N = static_cast<double>(cands.size());
  double corpus = 0.0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    double image_score = 0.0;
    for (const auto& ref : refs[i]) {
      double pair = 0.0;
      for (std::size_t n = 1; n <= 4; ++n) {
        std::vector<Words> space;
        for (const auto& g : grams(cands[i], n)) space.push_back(g);
        for (const auto& g : grams(ref, n)) space.push_back(g);
        std::sort(space.begin(), space.end());
        space.erase(std::unique(space.begin(), space.end()), space.end());
        std::vector<double> vc, vr;
        for (const auto& g : space) {
          double df = 0.0;
          for (const auto& image_refs : refs) {
            bool seen = false;
            for (const auto& rr : image_refs) seen = seen || occurrences(grams(rr, n), g) > 0;
            df += seen ? 1.0 : 0.0;
          }
          const double idf = std::log(N) - std::log(std::max(1.0, df));
          vc.push_back(occurrences(grams(cands[i], n), g) * idf);
          vr.push_back(occurrences(grams(ref, n), g) * idf);
        }
        double dot = 0.0, nc = 0.0, nr = 0.0;
        for (std::size_t k = 0; k < space.size(); ++k) {
          dot += std::min(vc[k], vr[k]) * vr[k];
          nc += vc[k] * vc[k];
          nr += vr[k] * vr[k];
        }
        double sim = dot;
        if (nc > 0 && nr > 0) sim /= std::sqrt(nc) * std::sqrt(nr);
        const double delta = static_cast<double>(cands[i].size()) - static_cast<double>(ref.size());
        pair += sim * std::exp(-delta * delta / 72.0);
      }
      image_score += pair / 4.0;
    }
    corpus += 10.0 * image_score / static_cast<double>(refs[i].size());
  }
  return corpus / N;
}

inline double entropy(const std::vector<Words>& cands, const std::set<std::string>& adjectives) {
  std::vector<std::string> seen;
  for (const auto& c : cands) {
    for (const auto& w : c) {
      if (adjectives.count(w)) seen.push_back(w);
    }
  }
  if (seen.empty()) return 0.0;
  std::set<std::string> unique(seen.begin(), seen.end());
  double h = 0.0;
  for (const auto& u : unique) {
    const double p = static_cast<double>(std::count(seen.begin(), seen.end(), u)) / static_cast<double>(seen.size());
    h -= p * std::log(p) / std::log(2.0);
  }
  return h;
}

// Synonymy as graph reachability over the listed pairs.
inline bool same_class(const std::string& a, const std::string& b,
                       const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::set<std::string> reached{a};
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& [x, y] : pairs) {
      if (reached.count(x) && !reached.count(y)) grew = reached.insert(y).second;
      if (reached.count(y) && !reached.count(x)) grew = reached.insert(x).second || grew;
    }
  }
  return reached.count(b) != 0;
}

// Noun F1 where each noun set is first reduced to one element per synonym class.
inline double spice_n(const std::vector<Words>& cands, const std::vector<std::vector<Words>>& refs,
                      const std::set<std::string>& nouns,
                      const std::vector<std::pair<std::string, std::string>>& synonyms) {
  std::set<std::string> all_nouns = nouns;
  for (const auto& [a, b] : synonyms) {
    all_nouns.insert(a);
    all_nouns.insert(b);
  }
  const auto classes = [&](const std::vector<Words>& texts) {
    std::vector<std::string> reps;
    for (const auto& t : texts) {
      for (const auto& w : t) {
        if (!all_nouns.count(w)) continue;
        bool known = false;
        for (const auto& r : reps) known = known || same_class(r, w, synonyms);
        if (!known) reps.push_back(w);
      }
    }
    return reps;
  };
  double sum = 0.0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const auto c = classes({cands[i]});
    const auto r = classes(refs[i]);
    if (c.empty() || r.empty()) continue;
    double m = 0.0;
    for (const auto& x : c) {
      for (const auto& y : r) m += same_class(x, y, synonyms) ? 1.0 : 0.0;
    }
    if (m == 0.0) continue;
    const double p = m / static_cast<double>(c.size());
    const double rr = m / static_cast<double>(r.size());
    sum += 2 * p * rr / (p + rr);
  }
  return sum / static_cast<double>(cands.size());
}

// Every sequence over `vocab` tokens of length <= max_len that either ends
// with `end` or has exactly max_len tokens and no `end`, with its summed
// log-probability. `log_probs(prefix)` gives the next-token distribution.
struct Sequence {
  std::vector<long> tokens;
  double log_prob;
};

inline std::vector<Sequence> enumerate(long vocab, long end, std::size_t max_len,
                                       const std::function<std::vector<double>(const std::vector<long>&)>& log_probs) {
  std::vector<Sequence> out;
  std::function<void(std::vector<long>&, double)> walk = [&](std::vector<long>& prefix, double lp) {
    const auto dist = log_probs(prefix);
    for (long t = 0; t < vocab; ++t) {
      prefix.push_back(t);
      const double next = lp + dist[static_cast<std::size_t>(t)];
      if (t == end || prefix.size() == max_len) {
        out.push_back({prefix, next});
      } else {
        walk(prefix, next);
      }
      prefix.pop_back();
    }
  };
  std::vector<long> start;
  walk(start, 0.0);
  std::sort(out.begin(), out.end(), [](const Sequence& a, const Sequence& b) { return a.log_prob > b.log_prob; });
  return out;
}

}  // namespace oracle
