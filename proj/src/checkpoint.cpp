#include "senti/checkpoint.hpp"

#include <fstream>
#include <limits>

#include "binary_io.hpp"
#include "senti/errors.hpp"

namespace senti {
namespace {

constexpr char kMagic[4] = {'S', 'A', 'C', 'P'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void write_checkpoint(std::ostream& os, const ModelConfig& config, const Parameters& params) {
  using namespace binary;
  os.write(kMagic, 4);
  write_uint<std::uint32_t>(os, kVersion);
  for (Index v : {config.regions, config.feature_dim, config.hidden, config.word_dim, config.senti_dim,
                  config.vocab_size, config.attention_hidden}) {
    write_uint<std::uint64_t>(os, static_cast<std::uint64_t>(v));
  }
  write_uint<std::uint8_t>(os, static_cast<std::uint8_t>(config.variant));
  write_f64(os, config.dropout_rate);

  write_uint<std::uint32_t>(os, static_cast<std::uint32_t>(params.entries().size()));
  for (const auto& [name, p] : params.entries()) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) throw ConfigError("parameter name too long");
    write_uint<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_uint<std::uint8_t>(os, p.trainable ? 1 : 0);
    write_uint<std::uint32_t>(os, 2);
    write_uint<std::uint64_t>(os, static_cast<std::uint64_t>(p.value.rows()));
    write_uint<std::uint64_t>(os, static_cast<std::uint64_t>(p.value.cols()));
    for (Index i = 0; i < p.value.size(); ++i) write_f64(os, p.value.data()[i]);
  }
  if (!os) throw Error("checkpoint write failed");
}

Checkpoint read_checkpoint(std::istream& is, const std::string& source) {
  binary::Reader in(is, source);
  if (in.read_string(4, "magic") != std::string(kMagic, 4)) in.fail("not a checkpoint (bad magic)");
  const auto version = in.read_uint<std::uint32_t>("version");
  if (version != kVersion) in.fail("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ck;
  ModelConfig& c = ck.config;
  for (Index* field : {&c.regions, &c.feature_dim, &c.hidden, &c.word_dim, &c.senti_dim, &c.vocab_size,
                       &c.attention_hidden}) {
    *field = static_cast<Index>(in.read_uint<std::uint64_t>("config"));
  }
  const auto variant = in.read_uint<std::uint8_t>("variant");
  if (variant > static_cast<std::uint8_t>(Variant::Full)) in.fail("unknown variant code");
  c.variant = static_cast<Variant>(variant);
  c.dropout_rate = in.read_f64("dropout rate");
  try {
    c.validate();
  } catch (const ConfigError& e) {
    in.fail(std::string("invalid config block: ") + e.what());
  }

  const auto count = in.read_uint<std::uint32_t>("parameter count");
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = in.read_uint<std::uint16_t>("name length");
    std::string name = in.read_string(len, "name");
    const bool trainable = in.read_uint<std::uint8_t>("trainable flag") != 0;
    const auto rank = in.read_uint<std::uint32_t>("rank");
    if (rank != 2) in.fail("parameter '" + name + "' has unsupported rank " + std::to_string(rank));
    const auto rows = in.read_uint<std::uint64_t>("rows");
    const auto cols = in.read_uint<std::uint64_t>("cols");
    if (rows == 0 || cols == 0 || rows > (1ULL << 32) || cols > (1ULL << 32)) {
      in.fail("parameter '" + name + "' has implausible shape");
    }
    Matrix value(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index i = 0; i < value.size(); ++i) value.data()[i] = in.read_f64("payload");
    if (ck.params.contains(name)) in.fail("duplicate parameter '" + name + "'");
    ck.params.insert(std::move(name), std::move(value), trainable);
  }
  return ck;
}

void save_checkpoint(const std::string& path, const ModelConfig& config, const Parameters& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  write_checkpoint(os, config, params);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint '" + path + "'");
  return read_checkpoint(is, path);
}

}  // namespace senti
