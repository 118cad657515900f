#pragma once

// Frozen 12-caption evaluation fixture. Do not edit: the oracle comparisons
// and the formatted-table test are pinned to it.

#include <string>
#include <utility>
#include <vector>

#include "senti/metrics.hpp"

namespace fixture {

struct Item {
  std::string candidate;
  std::vector<std::string> references;
};

inline const std::vector<Item>& items() {
  static const std::vector<Item> all = {
      {"a dirty toilet in a dirty bathroom", {"a dirty toilet in a bathroom", "an old dirty bathroom with a toilet"}},
      {"a nice dog on the beach", {"a happy dog runs on the beach", "a nice dog playing on a sunny beach"}},
      {"a broken train on the tracks", {"a broken down train sits on the tracks"}},
      {"a beautiful cake with candles", {"a beautiful cake with many candles", "a lovely cake on a table"}},
      {"a lonely man on a road", {"a lonely man walks down the street", "a man standing alone on a street"}},
      {"a happy family at a table", {"a happy family eating at a table", "people sitting at a table"}},
      {"a stupid cat on a couch", {"a silly cat sleeping on a couch", "a cat lying on a couch"}},
      {"a great view of the city", {"a great view of a big city", "the city skyline at night"}},
      {"a dead plant in a pot", {"a dead plant in a broken pot"}},
      {"a horse in a field", {"a beautiful horse in a green field", "a horse grazing in the field"}},
      {"a nice street with cars", {"a nice road with parked cars", "cars parked along a street"}},
      {"a bad pizza on a plate", {"a bad looking pizza on a plate", "a pizza on a white plate"}},
  };
  return all;
}

inline senti::AnpLexicon lexicon() {
  using senti::Polarity;
  senti::AnpLexicon lex;
  for (const char* a : {"nice", "happy", "beautiful", "great", "lovely", "sunny"}) lex.adjectives[a] = Polarity::Positive;
  for (const char* a : {"dirty", "broken", "lonely", "stupid", "dead", "bad", "silly", "old"}) {
    lex.adjectives[a] = Polarity::Negative;
  }
  for (const char* n : {"toilet", "bathroom", "dog", "beach", "train", "tracks", "cake", "candles", "man", "road",
                        "family", "table", "cat", "couch", "view", "city", "plant", "pot", "horse", "field",
                        "cars", "pizza", "plate", "people", "skyline"}) {
    lex.nouns.insert(n);
  }
  lex.anps[{"dirty", "toilet"}] = Polarity::Negative;
  lex.anps[{"dirty", "bathroom"}] = Polarity::Negative;
  lex.anps[{"nice", "dog"}] = Polarity::Positive;
  lex.anps[{"happy", "dog"}] = Polarity::Positive;
  lex.anps[{"broken", "train"}] = Polarity::Negative;
  lex.anps[{"beautiful", "cake"}] = Polarity::Positive;
  lex.anps[{"lonely", "man"}] = Polarity::Negative;
  lex.anps[{"happy", "family"}] = Polarity::Positive;
  lex.anps[{"stupid", "cat"}] = Polarity::Negative;
  lex.anps[{"great", "view"}] = Polarity::Positive;
  lex.anps[{"dead", "plant"}] = Polarity::Negative;
  lex.anps[{"nice", "street"}] = Polarity::Positive;
  lex.anps[{"nice", "road"}] = Polarity::Positive;
  lex.anps[{"bad", "pizza"}] = Polarity::Negative;
  lex.synonyms["street"].insert("road");
  lex.synonyms["cars"].insert("automobiles");
  lex.close_synonyms();
  return lex;
}

inline std::vector<std::pair<std::string, std::string>> synonym_pairs() {
  return {{"street", "road"}, {"cars", "automobiles"}};
}

}  // namespace fixture
