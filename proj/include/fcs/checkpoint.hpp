#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <span>
#include <vector>

#include "fcs/model.hpp"

// Checkpoint layout (all integers little-endian):
//
//   magic "FCSCKPT\0"        8 bytes
//   format version           u32
//   header length            u64
//   header                   UTF-8 JSON: arch, model config, training config
//                            echo, history length, [{name, shape, trainable}]
//   parameter payload        IEEE-754 binary64 LE, parameters in header order
//   history payload          binary64 LE, one per epoch
//   CRC-32 of all of above   u32

namespace fcs {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  nlohmann::json config;  // training config echo; null when absent
  std::vector<double> history;
};

std::vector<std::uint8_t> encode_checkpoint(const Model& model, const nlohmann::json& config,
                                            const std::vector<double>& history);
/// Throws ChecksumError (truncation/corruption), FormatError (not a
/// checkpoint) or MigrationError (unknown version).
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

/// Writes through a temporary file and renames, so a failed write never
/// leaves a partial checkpoint at `path`.
void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const nlohmann::json& config = nullptr,
                     const std::vector<double>& history = {});
/// With `expected` set, a checkpoint of another arch raises ArchMismatchError.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<Arch> expected = std::nullopt);

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& doc, ModelConfig base = {});

}  // namespace fcs
