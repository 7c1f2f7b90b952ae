#include "fcs/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "fcs/errors.hpp"

namespace fcs {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'F', 'C', 'S', 'C', 'K', 'P', 'T', '\0'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  if (pos + sizeof(T) > bytes.size()) throw ChecksumError("checkpoint truncated");
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t chunk = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    crc = crc32(crc, bytes.data() + off, static_cast<uInt>(chunk));
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

json shape_json(const Shape& s) { return json::array({s.n, s.c, s.h, s.w}); }

}  // namespace

json model_config_to_json(const ModelConfig& c) {
  return {{"rate", c.rate},
          {"seed", c.seed},
          {"features", c.features},
          {"resblocks", c.resblocks},
          {"kernel", c.conv.kernel},
          {"stride", c.conv.stride},
          {"block_size", c.block_size}};
}

ModelConfig model_config_from_json(const json& doc, ModelConfig base) {
  if (!doc.is_object()) throw ConfigError("model: expected an object");
  auto read = [&](const char* key, auto& field) {
    if (!doc.contains(key)) return;
    try {
      doc.at(key).get_to(field);
    } catch (const json::exception&) {
      throw ConfigError(std::string("model.") + key + ": wrong type");
    }
  };
  read("rate", base.rate);
  read("seed", base.seed);
  read("features", base.features);
  read("resblocks", base.resblocks);
  read("kernel", base.conv.kernel);
  read("stride", base.conv.stride);
  read("block_size", base.block_size);
  return base;
}

std::vector<std::uint8_t> encode_checkpoint(const Model& model, const json& config,
                                            const std::vector<double>& history) {
  json header;
  header["arch"] = std::string(arch_name(model.arch()));
  header["model"] = model_config_to_json(model.config());
  header["config"] = config;
  header["history_len"] = history.size();
  json params = json::array();
  for (const Parameter* p : model.parameters())
    params.push_back({{"name", p->name}, {"shape", shape_json(p->value.shape())}, {"trainable", p->trainable}});
  header["params"] = params;
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const Parameter* p : model.parameters())
    for (double v : p->value.values()) put<double>(out, v);
  for (double v : history) put<double>(out, v);
  put<std::uint32_t>(out, crc_of(out));
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kMagic) throw ChecksumError("checkpoint truncated");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) throw FormatError("not a checkpoint file");
  if (bytes.size() < sizeof kMagic + 4 + 8 + 4) throw ChecksumError("checkpoint truncated");

  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body, 4);
  if (stored != crc_of(bytes.first(body))) throw ChecksumError("checkpoint checksum mismatch");

  std::size_t pos = sizeof kMagic;
  const auto version = get<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion) {
    throw MigrationError("checkpoint format version " + std::to_string(version) +
                         " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_len = get<std::uint64_t>(bytes, pos);
  if (header_len > body - pos) throw ChecksumError("checkpoint truncated");
  json header;
  try {
    header = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                         bytes.begin() + static_cast<std::ptrdiff_t>(pos + header_len));
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  pos += header_len;

  try {
    const Arch arch = parse_arch(header.at("arch").get<std::string>());
    const ModelConfig mc = model_config_from_json(header.at("model"));
    Checkpoint ck{build_model(arch, mc), header.value("config", json()), {}};

    for (const json& entry : header.at("params")) {
      const std::string name = entry.at("name").get<std::string>();
      if (!ck.model.has_param(name)) throw FormatError("checkpoint parameter '" + name + "' unknown to " + std::string(arch_name(arch)));
      Parameter& p = ck.model.param(name);
      const auto dims = entry.at("shape").get<std::vector<std::size_t>>();
      const Shape s = p.value.shape();
      if (dims.size() != 4 || Shape{dims[0], dims[1], dims[2], dims[3]} != s)
        throw FormatError("checkpoint parameter '" + name + "' has shape " + entry.at("shape").dump() +
                          ", expected " + s.str());
      for (auto& v : p.value.data()) v = get<double>(bytes.first(body), pos);
    }
    const auto history_len = header.at("history_len").get<std::size_t>();
    ck.history.reserve(history_len);
    for (std::size_t i = 0; i < history_len; ++i) ck.history.push_back(get<double>(bytes.first(body), pos));
    if (pos != body) throw FormatError("checkpoint has trailing bytes");
    return ck;
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
}

void save_checkpoint(const fs::path& path, const Model& model, const json& config,
                     const std::vector<double>& history) {
  const std::vector<std::uint8_t> bytes = encode_checkpoint(model, config, history);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw Error("write failed: " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path, std::optional<Arch> expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Checkpoint ck = decode_checkpoint(bytes);
  if (expected && *expected != ck.model.arch()) {
    throw ArchMismatchError("checkpoint " + path.string() + " holds " + std::string(arch_name(ck.model.arch())) +
                            ", expected " + std::string(arch_name(*expected)));
  }
  return ck;
}

}  // namespace fcs
