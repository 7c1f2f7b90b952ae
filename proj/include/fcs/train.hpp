#pragma once

#include <filesystem>
#include <functional>
#include <json.hpp>
#include <vector>

#include "fcs/model.hpp"
#include "fcs/optim.hpp"

namespace fcs {

/// Everything that determines a training run. JSON keys are listed in README.md.
struct TrainConfig {
  Arch arch = Arch::FullyConvRes;
  ModelConfig model{};
  std::size_t epochs = 200;
  std::size_t batch_size = 8;
  AdamConfig adam{};
  std::size_t patch_size = 96;
  std::size_t patches_per_image = 1;
  std::vector<std::filesystem::path> train_paths;
  std::filesystem::path checkpoint_path;
  std::filesystem::path history_csv;
  /// Also checkpoint after every this many epochs; 0 writes only at the end.
  std::size_t checkpoint_every = 0;
  /// fully-conv-res only: first train the measurement and deconvolution path
  /// alone for this many epochs, then zero the residual exit conv and train
  /// everything jointly for `epochs`. 0 trains jointly from the start.
  std::size_t warmup_epochs = 0;

  double rate() const { return model.rate; }
  std::uint64_t seed() const { return model.seed; }

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
/// Missing keys keep their defaults; malformed values raise ConfigError naming the key.
TrainConfig train_config_from_json(const nlohmann::json& doc);
TrainConfig load_train_config(const std::filesystem::path& path);

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  std::size_t steps = 0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

struct TrainResult {
  Model model;
  /// Mean minibatch loss per epoch.
  std::vector<double> history;
};

/// Minibatch Adam on mse(f(x), x) over the given patches (each 1×1×P×P).
/// History and callbacks cover warm-up epochs first, numbered continuously.
/// Frozen measurement matrices are never updated. When checkpoint_path is
/// set, checkpoints are written every `checkpoint_every` epochs and at the end.
/// A non-finite loss raises DivergenceError; earlier checkpoints stay on disk.
TrainResult train(const TrainConfig& config, const std::vector<Tensor>& patches,
                  const EpochCallback& on_epoch = {});

/// Loads the corpus from `train_paths`, extracts patches, trains, and writes
/// the checkpoint plus a history CSV when those paths are set.
TrainResult train(const TrainConfig& config, const EpochCallback& on_epoch = {});

void write_history_csv(const std::filesystem::path& path, const std::vector<double>& history);

}  // namespace fcs
