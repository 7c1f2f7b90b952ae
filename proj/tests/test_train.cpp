#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "fcs/checkpoint.hpp"
#include "fcs/corpus.hpp"
#include "fcs/errors.hpp"
#include "fcs/evaluate.hpp"
#include "fcs/train.hpp"
#include "helpers.hpp"

using namespace fcs;
using fcs::test::read_bytes;
using fcs::test::scratch_dir;

namespace {

TrainConfig quick_config(Arch arch, double rate = 0.1, std::size_t epochs = 2) {
  TrainConfig c;
  c.arch = arch;
  c.model.rate = rate;
  c.model.seed = 5;
  c.model.features = 6;
  c.model.resblocks = 1;
  c.epochs = epochs;
  c.batch_size = 4;
  c.patch_size = 32;
  return c;
}

std::vector<Tensor> quick_patches(std::size_t count, std::size_t size = 32, std::uint64_t seed = 2) {
  const auto corpus = synthesize_corpus(count, size, size, seed);
  std::vector<Tensor> out;
  for (const auto& n : corpus) out.push_back(n.image);
  return out;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

Model identity_block_model() {
  ModelConfig c;
  c.rate = 1.0;
  c.features = 4;
  Model m = build_model(Arch::GaussianBlock, c);
  Tensor eye(Shape{1, 1, 1089, 1089});
  for (std::size_t i = 0; i < 1089; ++i) eye.at(0, 0, i, i) = 1.0;
  block_phi(m.measurer()).value = eye;
  m.param("recover.matrix").value = eye;
  for (Parameter* p : m.parameters())
    if (p->name.starts_with("refine.")) p->value.fill(0.0);
  return m;
}

}  // namespace

TEST_CASE("train config json") {
  SUBCASE("round trip") {
    TrainConfig c = quick_config(Arch::AdaptiveFcBlock, 0.25, 7);
    c.adam.lr = 3e-4;
    c.train_paths = {"a", "b"};
    c.checkpoint_path = "out.ckpt";
    c.checkpoint_every = 2;
    const TrainConfig back = train_config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
    CHECK(back.arch == Arch::AdaptiveFcBlock);
    CHECK(back.model == c.model);
    CHECK(back.adam.lr == 3e-4);
    CHECK(back.train_paths.size() == 2);
  }
  SUBCASE("defaults and single path") {
    const TrainConfig c = train_config_from_json(nlohmann::json{{"rate", 0.01}, {"train_dir", "imgs"}});
    CHECK(c.arch == Arch::FullyConvRes);
    CHECK(c.rate() == 0.01);
    CHECK(c.epochs == 200);
    CHECK(c.model.features == 64);
    REQUIRE(c.train_paths.size() == 1);
    CHECK(c.train_paths[0] == "imgs");
  }
  SUBCASE("errors name the field") {
    CHECK(message_of([] { train_config_from_json(nlohmann::json{{"epoch", 3}}); }).find("unknown config key: epoch") !=
          std::string::npos);
    CHECK(message_of([] { train_config_from_json(nlohmann::json{{"model", {{"feature", 3}}}}); })
              .find("model.feature") != std::string::npos);
    CHECK(message_of([] { train_config_from_json(nlohmann::json{{"batch_size", "eight"}}); }).find("batch_size") !=
          std::string::npos);
    CHECK(message_of([] { train_config_from_json(nlohmann::json{{"arch", "vgg"}}); }).find("vgg") !=
          std::string::npos);
    CHECK_THROWS_AS(train_config_from_json(nlohmann::json::array()), ConfigError);
  }
  SUBCASE("validation") {
    TrainConfig c = quick_config(Arch::FullyConvRes);
    CHECK_NOTHROW(c.validate());
    c.model.rate = 0.0;
    CHECK(message_of([&] { c.validate(); }).find("rate out of range") != std::string::npos);
    c = quick_config(Arch::FullyConvRes);
    c.adam.lr = -1;
    CHECK(message_of([&] { c.validate(); }).find("lr") != std::string::npos);
    c = quick_config(Arch::FullyConvRes);
    c.patch_size = 40;
    CHECK(message_of([&] { c.validate(); }).find("patch_size") != std::string::npos);
    c = quick_config(Arch::FullyConvRes);
    c.batch_size = 0;
    CHECK(message_of([&] { c.validate(); }).find("batch_size") != std::string::npos);
  }
  SUBCASE("files") {
    const auto dir = scratch_dir("train_cfg");
    std::ofstream(dir / "ok.json") << R"({"arch": "fully-conv-tiny", "rate": 0.25, "epochs": 3})";
    CHECK(load_train_config(dir / "ok.json").epochs == 3);
    std::ofstream(dir / "bad.json") << "{ not json";
    CHECK_THROWS_AS(load_train_config(dir / "bad.json"), ConfigError);
    CHECK_THROWS_AS(load_train_config(dir / "absent.json"), ConfigError);
  }
}

TEST_CASE("measurement freeze and joint training") {
  const auto patches = quick_patches(4, 33);
  SUBCASE("gaussian sensing matrix is untouched") {
    TrainConfig c = quick_config(Arch::GaussianBlock, 0.1, 2);
    c.patch_size = 33;
    const Tensor before = build_model(Arch::GaussianBlock, c.model).param("measure.phi").value;
    const TrainResult r = train(c, patches);
    CHECK(bitwise_equal(r.model.param("measure.phi").value, before));
    CHECK_FALSE(bitwise_equal(r.model.param("recover.matrix").value,
                              build_model(Arch::GaussianBlock, c.model).param("recover.matrix").value));
  }
  SUBCASE("adaptive sensing matrix moves after one step") {
    TrainConfig c = quick_config(Arch::AdaptiveFcBlock, 0.1, 1);
    c.patch_size = 33;
    c.batch_size = 4;
    const Tensor before = build_model(Arch::AdaptiveFcBlock, c.model).param("measure.phi").value;
    const TrainResult r = train(c, patches);
    CHECK_FALSE(bitwise_equal(r.model.param("measure.phi").value, before));
  }
  SUBCASE("convolutional kernel moves after one step") {
    const auto p32 = quick_patches(4, 32);
    for (Arch arch : {Arch::FullyConvTiny, Arch::FullyConvRes}) {
      TrainConfig c = quick_config(arch, 0.1, 1);
      const Tensor before = build_model(arch, c.model).param("measure.kernel").value;
      const TrainResult r = train(c, p32);
      CHECK_FALSE(bitwise_equal(r.model.param("measure.kernel").value, before));
    }
  }
}

TEST_CASE("training is deterministic") {
  const auto dir = scratch_dir("train_det");
  const auto patches = quick_patches(6);
  TrainConfig c = quick_config(Arch::FullyConvRes, 0.1, 3);
  c.checkpoint_path = dir / "run.ckpt";
  const TrainResult a = train(c, patches);
  const auto first = read_bytes(c.checkpoint_path);
  const Checkpoint loaded = load_checkpoint(c.checkpoint_path, Arch::FullyConvRes);
  const TrainResult b = train(c, patches);
  REQUIRE(a.history.size() == 3);
  CHECK(a.history == b.history);
  CHECK(read_bytes(c.checkpoint_path) == first);

  c.model.seed = 6;
  train(c, patches);
  CHECK(read_bytes(c.checkpoint_path) != first);
  CHECK(loaded.history == a.history);
  CHECK(loaded.config["epochs"] == 3);
}

TEST_CASE("residual warm-up") {
  const auto patches = quick_patches(6);
  TrainConfig c = quick_config(Arch::FullyConvRes, 0.1, 1);
  c.warmup_epochs = 3;
  std::vector<std::size_t> numbers;
  const TrainResult r = train(c, patches, [&](const EpochStats& s) { numbers.push_back(s.epoch); });
  CHECK(numbers == std::vector<std::size_t>{1, 2, 3, 4});
  REQUIRE(r.history.size() == 4);

  // The warm-up is exactly a tiny-model run with the same seed.
  TrainConfig tiny = quick_config(Arch::FullyConvTiny, 0.1, 3);
  const TrainResult t = train(tiny, patches);
  CHECK(std::vector<double>(r.history.begin(), r.history.begin() + 3) == t.history);

  CHECK(r.history[3] < r.history[0]);

  CHECK(train_config_from_json(to_json(c)).warmup_epochs == 3);
  tiny.warmup_epochs = 2;
  CHECK_THROWS_AS(tiny.validate(), ConfigError);
}

TEST_CASE("loss decreases over fifty epochs") {
  const auto corpus = synthesize_corpus(4, 64, 64, 31);
  TrainConfig c = quick_config(Arch::FullyConvRes, 0.1, 50);
  c.patches_per_image = 2;
  const PatchSet ps = extract_patches(corpus, 32, 2, 1);
  std::vector<EpochStats> seen;
  const TrainResult r = train(c, ps.patches, [&](const EpochStats& s) { seen.push_back(s); });
  REQUIRE(r.history.size() == 50);
  REQUIRE(seen.size() == 50);
  CHECK(seen.front().epoch == 1);
  CHECK(seen.front().steps == 2);
  CHECK(seen.back().mean_loss == r.history.back());
  CHECK(r.history[49] < r.history[0]);
}

TEST_CASE("divergence keeps the last good checkpoint") {
  const auto dir = scratch_dir("train_div");
  TrainConfig c = quick_config(Arch::FullyConvTiny, 0.1, 5);
  c.batch_size = 8;
  c.adam.lr = 1e80;
  c.checkpoint_every = 1;
  c.checkpoint_path = dir / "run.ckpt";
  CHECK_THROWS_AS(train(c, quick_patches(4)), DivergenceError);
  REQUIRE(std::filesystem::exists(c.checkpoint_path));
  const Checkpoint last = load_checkpoint(c.checkpoint_path);
  REQUIRE_FALSE(last.history.empty());
  for (double v : last.history) CHECK(std::isfinite(v));
  for (const Parameter* p : last.model.parameters()) CHECK(p->value.all_finite());
}

TEST_CASE("training from a corpus directory") {
  const auto dir = scratch_dir("train_dir");
  write_corpus(synthesize_corpus(3, 40, 40, 8), dir / "imgs");
  TrainConfig c = quick_config(Arch::FullyConvTiny, 0.25, 2);
  c.train_paths = {dir / "imgs"};
  c.checkpoint_path = dir / "m.ckpt";
  c.history_csv = dir / "h.csv";
  const TrainResult r = train(c);
  CHECK(std::filesystem::exists(c.checkpoint_path));
  std::ifstream in(c.history_csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,loss");
  std::getline(in, line);
  CHECK(line.starts_with("1,"));
  CHECK(std::stod(line.substr(2)) == r.history[0]);

  c.train_paths = {dir / "missing"};
  CHECK(message_of([&] { train(c); }).find("missing") != std::string::npos);
  c.train_paths = {dir / "imgs"};
  c.patch_size = 64;
  CHECK_THROWS_AS(train(c), ConfigError);
  std::filesystem::create_directories(dir / "empty");
  c.train_paths = {dir / "empty"};
  c.patch_size = 32;
  CHECK_THROWS_AS(train(c), ConfigError);
}

TEST_CASE("evaluation") {
  const auto corpus = synthesize_corpus(3, 66, 66, 4);
  SUBCASE("perfect reconstruction") {
    Model m = identity_block_model();
    const MetricsReport r = evaluate(m, corpus);
    REQUIRE(r.rows.size() == 3);
    for (const MetricsRow& row : r.rows) {
      CHECK(row.psnr == 99.0);
      CHECK(std::abs(row.ssim - 1.0) < 1e-9);
      CHECK(row.achieved_rate == 1.0);
    }
    CHECK(r.arch == "gaussian-block");
    CHECK_FALSE(r.reference.has_value());
    CHECK(r.note.find("no published reference") != std::string::npos);
  }
  SUBCASE("means, reference deltas and repeatability") {
    ModelConfig mc;
    mc.rate = 0.1;
    mc.features = 6;
    mc.resblocks = 1;
    Model m = build_model(Arch::FullyConvRes, mc);
    const MetricsReport r = evaluate(m, corpus);
    double psnr = 0, ssim = 0, blk = 0, rate = 0;
    for (const MetricsRow& row : r.rows) {
      psnr += row.psnr;
      ssim += row.ssim;
      blk += row.blockiness;
      rate += row.achieved_rate;
    }
    CHECK(r.mean.name == "mean");
    CHECK(r.mean.psnr == doctest::Approx(psnr / 3).epsilon(1e-14));
    CHECK(r.mean.ssim == doctest::Approx(ssim / 3).epsilon(1e-14));
    CHECK(r.mean.blockiness == doctest::Approx(blk / 3).epsilon(1e-14));
    CHECK(r.mean.achieved_rate == doctest::Approx(rate / 3).epsilon(1e-14));
    REQUIRE(r.reference.has_value());
    CHECK(r.reference->method == Method::Proposed);
    CHECK(r.reference->published_psnr == 28.30);
    CHECK(r.reference->delta_psnr == doctest::Approx(r.mean.psnr - 28.30).epsilon(1e-14));

    const MetricsReport again = evaluate(m, corpus);
    CHECK(to_json(again) == to_json(r));
    CHECK(to_csv(again) == to_csv(r));

    std::istringstream csv(to_csv(r));
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(csv, line)) lines.push_back(line);
    REQUIRE(lines.size() == 5);
    CHECK(lines[0] == "name,psnr,ssim,blockiness,achieved_rate");
    CHECK(lines[4].starts_with("mean,"));
  }
  SUBCASE("reconstruction images and report files") {
    const auto dir = scratch_dir("eval_out");
    Model m = identity_block_model();
    EvalOptions opt;
    opt.reconstruction_dir = dir / "recon";
    const MetricsReport r = evaluate(m, corpus, opt);
    const auto& name = corpus[0].name;
    CHECK(std::filesystem::exists(dir / "recon" / (name + "_recon.pgm")));
    CHECK(std::filesystem::exists(dir / "recon" / (name + "_pair.pgm")));
    write_report(r, dir / "r.json", dir / "r.csv");
    std::ifstream js(dir / "r.json");
    const auto doc = nlohmann::json::parse(js);
    CHECK(doc["rows"].size() == 3);
    CHECK(std::filesystem::exists(dir / "r.csv"));
  }
  SUBCASE("empty corpus") {
    Model m = identity_block_model();
    CHECK_THROWS_AS(evaluate(m, {}), ConfigError);
  }
  SUBCASE("comparison tables") {
    Model m = identity_block_model();
    const MetricsReport r = evaluate(m, corpus);
    const std::string csv = comparison_csv({r, r}, {"a", "b"});
    CHECK(csv.find("\na,") != std::string::npos);
    CHECK(csv.find("\nb,") != std::string::npos);
    CHECK(comparison_json({r, r}, {"a", "b"}).size() == 2);
  }
}
