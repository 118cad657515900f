#pragma once

// Binary checkpoint, little-endian throughout:
//   "SACP"  u32 version (=1)
//   config: u64 regions, feature_dim, hidden, word_dim, senti_dim, vocab_size,
//           attention_hidden; u8 variant; f64 dropout_rate
//   u32 parameter count, then per parameter in name order:
//           u16 name length, name bytes, u8 trainable, u32 rank (=2),
//           u64 rows, u64 cols, rows*cols f64 (row-major)

#include <iosfwd>
#include <string>

#include "senti/model.hpp"

namespace senti {

struct Checkpoint {
  ModelConfig config;
  Parameters params;
};

void write_checkpoint(std::ostream& os, const ModelConfig& config, const Parameters& params);
Checkpoint read_checkpoint(std::istream& is, const std::string& source = "<stream>");

void save_checkpoint(const std::string& path, const ModelConfig& config, const Parameters& params);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace senti
