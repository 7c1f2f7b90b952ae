#include "fcs/train.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "fcs/checkpoint.hpp"
#include "fcs/corpus.hpp"
#include "fcs/errors.hpp"

namespace fcs {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kPatchStream = 3;

template <typename T>
void read_field(const json& doc, const char* key, T& field, const std::string& prefix = "") {
  if (!doc.contains(key)) return;
  try {
    doc.at(key).get_to(field);
  } catch (const json::exception&) {
    throw ConfigError(prefix + key + ": wrong type");
  }
}

void require_positive(std::size_t v, const char* field) {
  if (v == 0) throw ConfigError(std::string(field) + " must be positive");
}

void check_keys(const json& doc, const std::set<std::string>& allowed, const std::string& prefix) {
  for (const auto& [key, _] : doc.items())
    if (!allowed.contains(key)) throw ConfigError("unknown config key: " + prefix + key);
}

}  // namespace

void TrainConfig::validate() const {
  model.validate();
  require_positive(epochs, "epochs");
  require_positive(batch_size, "batch_size");
  require_positive(patch_size, "patch_size");
  require_positive(patches_per_image, "patches_per_image");
  if (!(adam.lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw ConfigError("adam.beta1 must lie in [0, 1)");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw ConfigError("adam.beta2 must lie in [0, 1)");
  if (!(adam.eps > 0.0)) throw ConfigError("adam.eps must be positive");
  if (warmup_epochs > 0 && arch != Arch::FullyConvRes)
    throw ConfigError("warmup_epochs applies only to fully-conv-res");
  if (!is_blockwise(arch) && patch_size % model.conv.stride != 0) {
    throw ConfigError("patch_size " + std::to_string(patch_size) + " must be a multiple of the measurement stride " +
                      std::to_string(model.conv.stride));
  }
}

json to_json(const TrainConfig& c) {
  json paths = json::array();
  for (const fs::path& p : c.train_paths) paths.push_back(p.string());
  json model = model_config_to_json(c.model);
  model.erase("rate");
  model.erase("seed");
  return {{"arch", std::string(arch_name(c.arch))},
          {"rate", c.model.rate},
          {"seed", c.model.seed},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.adam.lr},
          {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}}},
          {"patch_size", c.patch_size},
          {"patches_per_image", c.patches_per_image},
          {"train_dir", paths},
          {"checkpoint", c.checkpoint_path.string()},
          {"history_csv", c.history_csv.string()},
          {"checkpoint_every", c.checkpoint_every},
          {"warmup_epochs", c.warmup_epochs},
          {"model", model}};
}

TrainConfig train_config_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config: expected a JSON object");
  check_keys(doc,
             {"arch", "rate", "seed", "epochs", "batch_size", "lr", "adam", "patch_size", "patches_per_image",
              "train_dir", "checkpoint", "history_csv", "checkpoint_every", "warmup_epochs", "model"},
             "");
  TrainConfig c;
  if (doc.contains("arch")) {
    if (!doc["arch"].is_string()) throw ConfigError("arch: expected a string");
    c.arch = parse_arch(doc["arch"].get<std::string>());
  }
  read_field(doc, "rate", c.model.rate);
  read_field(doc, "seed", c.model.seed);
  read_field(doc, "epochs", c.epochs);
  read_field(doc, "batch_size", c.batch_size);
  read_field(doc, "lr", c.adam.lr);
  if (doc.contains("adam")) {
    const json& a = doc["adam"];
    if (!a.is_object()) throw ConfigError("adam: expected an object");
    check_keys(a, {"beta1", "beta2", "eps"}, "adam.");
    read_field(a, "beta1", c.adam.beta1, "adam.");
    read_field(a, "beta2", c.adam.beta2, "adam.");
    read_field(a, "eps", c.adam.eps, "adam.");
  }
  read_field(doc, "patch_size", c.patch_size);
  read_field(doc, "patches_per_image", c.patches_per_image);
  if (doc.contains("train_dir")) {
    const json& t = doc["train_dir"];
    if (t.is_string()) {
      c.train_paths = {t.get<std::string>()};
    } else if (t.is_array()) {
      for (const json& p : t) {
        if (!p.is_string()) throw ConfigError("train_dir: expected strings");
        c.train_paths.emplace_back(p.get<std::string>());
      }
    } else {
      throw ConfigError("train_dir: expected a path or a list of paths");
    }
  }
  std::string path;
  if (doc.contains("checkpoint")) {
    read_field(doc, "checkpoint", path);
    c.checkpoint_path = path;
  }
  if (doc.contains("history_csv")) {
    read_field(doc, "history_csv", path);
    c.history_csv = path;
  }
  read_field(doc, "checkpoint_every", c.checkpoint_every);
  read_field(doc, "warmup_epochs", c.warmup_epochs);
  if (doc.contains("model")) {
    const json& m = doc["model"];
    if (!m.is_object()) throw ConfigError("model: expected an object");
    check_keys(m, {"features", "resblocks", "kernel", "stride", "block_size"}, "model.");
    c.model = model_config_from_json(m, c.model);
  }
  return c;
}

TrainConfig load_train_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  return train_config_from_json(doc);
}

void write_history_csv(const fs::path& path, const std::vector<double>& history) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "epoch,loss\n" << std::setprecision(17);
  for (std::size_t i = 0; i < history.size(); ++i) out << i + 1 << ',' << history[i] << '\n';
}

TrainResult train(const TrainConfig& config, const std::vector<Tensor>& patches, const EpochCallback& on_epoch) {
  config.validate();
  if (patches.empty()) throw ConfigError("training corpus is empty");
  const Shape first = patches.front().shape();
  for (const Tensor& p : patches)
    if (p.shape() != first || first.n != 1 || first.c != 1)
      throw DimensionError("training patches must all be 1x1xHxW of one size; got " + p.shape().str() +
                           " and " + first.str());

  TrainResult result{build_model(config.arch, config.model), {}};
  Rng shuffle_rng(derive_seed(config.seed(), kShuffleStream));
  const json echo = to_json(config);
  std::vector<std::size_t> order(patches.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  auto run = [&](Model& model, std::size_t epochs, bool save) {
    Adam adam(model.parameters(), config.adam);
    for (std::size_t e = 1; e <= epochs; ++e) {
      const std::size_t epoch = result.history.size() + 1;
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.index(i)]);

      double loss_sum = 0.0;
      std::size_t steps = 0;
      for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t stop = std::min(order.size(), start + config.batch_size);
        std::vector<const Tensor*> members;
        for (std::size_t k = start; k < stop; ++k) members.push_back(&patches[order[k]]);
        const Tensor batch = stack(members);

        adam.zero_grad();
        const double loss = value_and_grad([&](Tape& tape) {
          const Var recon = record_reconstruction(model, tape, batch);
          return mse_loss(recon, tape.constant(batch));
        });
        if (!std::isfinite(loss)) {
          throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                                std::to_string(adam.steps() + 1) + " (loss " + std::to_string(loss) + ")");
        }
        adam.step();
        loss_sum += loss;
        ++steps;
      }
      result.history.push_back(loss_sum / static_cast<double>(steps));
      if (on_epoch) on_epoch({epoch, result.history.back(), steps});

      const bool periodic = config.checkpoint_every > 0 && e % config.checkpoint_every == 0;
      if (save && !config.checkpoint_path.empty() && (periodic || e == epochs))
        save_checkpoint(config.checkpoint_path, model, echo, result.history);
    }
  };

  if (config.warmup_epochs > 0) {
    // Same seed, so the tiny model starts from the same measurement and deconv weights.
    Model front = build_model(Arch::FullyConvTiny, config.model);
    run(front, config.warmup_epochs, false);
    for (const Parameter* p : front.parameters()) result.model.param(p->name).value = p->value;
    result.model.param("res.exit.weight").value.fill(0.0);
  }
  run(result.model, config.epochs, true);
  return result;
}

TrainResult train(const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (config.train_paths.empty()) throw ConfigError("train_dir: no corpus paths given");
  const std::vector<NamedImage> corpus = load_corpus(config.train_paths);
  if (corpus.empty()) throw ConfigError("training corpus is empty");
  PatchSet set = extract_patches(corpus, config.patch_size, config.patches_per_image,
                                 derive_seed(config.seed(), kPatchStream));
  if (set.patches.empty()) {
    throw ConfigError("no training image is at least " + std::to_string(config.patch_size) + " px on each side");
  }
  TrainResult result = train(config, set.patches, on_epoch);
  if (!config.history_csv.empty()) write_history_csv(config.history_csv, result.history);
  return result;
}

}  // namespace fcs
