#include "fcs/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include "fcs/checkpoint.hpp"
#include "fcs/corpus.hpp"
#include "fcs/errors.hpp"
#include "fcs/evaluate.hpp"
#include "fcs/image_io.hpp"
#include "fcs/metrics.hpp"
#include "fcs/train.hpp"

namespace fcs {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct FaultGuard {
  explicit FaultGuard(bool on) { testing::set_backward_fault(on); }
  ~FaultGuard() { testing::set_backward_fault(false); }
};

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
}

// Flag values; each overrides the config only when given.
struct TrainFlags {
  std::string config;
  std::string arch;
  double rate = 0, lr = 0, beta1 = 0, beta2 = 0, eps = 0;
  std::uint64_t seed = 0;
  std::size_t epochs = 0, batch_size = 0, patch_size = 0, patches_per_image = 0, checkpoint_every = 0, warmup_epochs = 0;
  std::size_t features = 0, resblocks = 0, kernel = 0, stride = 0, block_size = 0;
  std::vector<std::string> train_dir;
  std::string checkpoint, history_csv;
  bool quiet = false;
};

struct EvalFlags {
  std::string checkpoint;
  std::vector<std::string> test_dir;
  double rate = 0;
  std::string arch;
  std::string json_path, csv_path, recon_dir;
};

struct ReconstructFlags {
  std::string checkpoint, input, output;
  bool no_clamp = false;
};

struct VisualizeFlags {
  std::string checkpoint, out_dir;
  std::vector<std::string> images;
};

struct GradcheckFlags {
  std::string arch = "fully-conv-res";
  double rate = 0.1;
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
  std::size_t size = 32;
  bool corrupt = false;
};

struct CompareFlags {
  std::vector<std::string> checkpoints;
  std::vector<std::string> test_dir;
  std::string json_path, csv_path;
};

struct SynthFlags {
  std::string out_dir;
  std::size_t count = 8, height = 96, width = 96;
  std::uint64_t seed = 0;
};

std::vector<fs::path> as_paths(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

int cmd_train(CLI::App& sub, const TrainFlags& f, std::ostream& out) {
  std::string config_path = f.config;
  if (config_path.empty()) {
    if (const char* env = std::getenv(kConfigEnv)) config_path = env;
  }
  TrainConfig c = config_path.empty() ? TrainConfig{} : load_train_config(config_path);

  auto given = [&](const char* name) { return sub.get_option(name)->count() > 0; };
  if (given("--arch")) c.arch = parse_arch(f.arch);
  if (given("--rate")) c.model.rate = f.rate;
  if (given("--seed")) c.model.seed = f.seed;
  if (given("--epochs")) c.epochs = f.epochs;
  if (given("--batch-size")) c.batch_size = f.batch_size;
  if (given("--lr")) c.adam.lr = f.lr;
  if (given("--beta1")) c.adam.beta1 = f.beta1;
  if (given("--beta2")) c.adam.beta2 = f.beta2;
  if (given("--eps")) c.adam.eps = f.eps;
  if (given("--patch-size")) c.patch_size = f.patch_size;
  if (given("--patches-per-image")) c.patches_per_image = f.patches_per_image;
  if (given("--train-dir")) c.train_paths = as_paths(f.train_dir);
  if (given("--checkpoint")) c.checkpoint_path = f.checkpoint;
  if (given("--history-csv")) c.history_csv = f.history_csv;
  if (given("--checkpoint-every")) c.checkpoint_every = f.checkpoint_every;
  if (given("--warmup-epochs")) c.warmup_epochs = f.warmup_epochs;
  if (given("--features")) c.model.features = f.features;
  if (given("--resblocks")) c.model.resblocks = f.resblocks;
  if (given("--kernel")) c.model.conv.kernel = f.kernel;
  if (given("--stride")) c.model.conv.stride = f.stride;
  if (given("--block-size")) c.model.block_size = f.block_size;
  if (c.checkpoint_path.empty()) throw ConfigError("checkpoint: no output path given");
  if (c.history_csv.empty()) {
    c.history_csv = c.checkpoint_path;
    c.history_csv.replace_extension(".history.csv");
  }

  const TrainResult r = train(c, [&](const EpochStats& s) {
    if (!f.quiet) out << "epoch " << s.epoch << "/" << c.warmup_epochs + c.epochs << "  loss " << fmt("%.6e", s.mean_loss) << "\n";
  });
  out << "wrote " << c.checkpoint_path.string() << "\n"
      << "wrote " << c.history_csv.string() << "\n"
      << "final loss " << fmt("%.6e", r.history.back()) << "\n";
  return kExitOk;
}

void print_report(const MetricsReport& r, std::ostream& out) {
  char buf[256];
  out << "arch " << r.arch << "  rate " << r.rate << "\n";
  std::snprintf(buf, sizeof buf, "%-20s %9s %8s %11s %9s\n", "image", "psnr", "ssim", "blockiness", "rate");
  out << buf;
  auto line = [&](const MetricsRow& m) {
    std::snprintf(buf, sizeof buf, "%-20s %9.3f %8.4f %11.4f %9.5f\n", m.name.c_str(), m.psnr, m.ssim,
                  m.blockiness, m.achieved_rate);
    out << buf;
  };
  for (const MetricsRow& m : r.rows) line(m);
  line(r.mean);
  if (r.reference) {
    const ReferenceDelta& d = *r.reference;
    out << "published " << method_name(d.method) << " mean psnr " << fmt("%.2f", d.published_psnr) << " dB, delta "
        << fmt("%+.2f", d.delta_psnr) << " dB";
    if (d.published_ssim) out << "; mean ssim " << fmt("%.4f", *d.published_ssim) << ", delta " << fmt("%+.4f", *d.delta_ssim);
    out << "\n";
  }
  if (!r.note.empty()) out << "note: " << r.note << "\n";
}

int cmd_eval(CLI::App& sub, const EvalFlags& f, std::ostream& out) {
  std::optional<Arch> expected;
  if (sub.get_option("--arch")->count() > 0) expected = parse_arch(f.arch);
  Checkpoint ck = load_checkpoint(f.checkpoint, expected);
  if (sub.get_option("--rate")->count() > 0) {
    validate_rate(f.rate);
    if (std::abs(f.rate - ck.model.config().rate) > 1e-9) {
      throw ConfigError("rate mismatch: checkpoint was trained at " + std::to_string(ck.model.config().rate) +
                        ", requested " + std::to_string(f.rate));
    }
  }
  const std::vector<NamedImage> corpus = load_corpus(as_paths(f.test_dir));
  EvalOptions opt;
  opt.reconstruction_dir = f.recon_dir;
  const MetricsReport r = evaluate(ck.model, corpus, opt);
  print_report(r, out);
  write_report(r, f.json_path, f.csv_path);
  return kExitOk;
}

int cmd_reconstruct(const ReconstructFlags& f, std::ostream& out) {
  Checkpoint ck = load_checkpoint(f.checkpoint);
  const Tensor image = read_image(f.input);
  Tensor recon = reconstruct(ck.model, image);
  if (!f.no_clamp) recon = clamp(recon, 0.0, 1.0);
  write_pgm(f.output, recon);
  const Shape s = image.shape();
  out << "wrote " << f.output << " (" << s.h << "x" << s.w << ", achieved rate "
      << fmt("%.5f", achieved_rate(ck.model.measurer(), s.h, s.w)) << ")\n";
  return kExitOk;
}

int cmd_visualize(const VisualizeFlags& f, std::ostream& out) {
  Checkpoint ck = load_checkpoint(f.checkpoint);
  const fs::path dir = f.out_dir;
  const KernelAtlas atlas = export_kernels(ck.model.measurer());
  for (std::size_t i = 0; i < atlas.spatial.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "spatial_%03zu.pgm", i);
    write_pgm(dir / "kernels" / name, atlas.spatial[i]);
    std::snprintf(name, sizeof name, "frequency_%03zu.pgm", i);
    write_pgm(dir / "kernels" / name, atlas.frequency[i]);
  }
  write_pgm(dir / "kernels_spatial.pgm", tile_grid(atlas.spatial));
  write_pgm(dir / "kernels_frequency.pgm", tile_grid(atlas.frequency));
  out << atlas.spatial.size() << " kernel tiles (" << atlas.tile << "x" << atlas.tile << ") written to "
      << dir.string() << "\n";

  json summary = {{"arch", std::string(arch_name(ck.model.arch()))},
                  {"rate", ck.model.config().rate},
                  {"kernel_tiles", atlas.spatial.size()},
                  {"tile", atlas.tile}};
  json images = json::array();
  for (const std::string& p : f.images) {
    const Tensor image = read_image(p);
    const std::string stem = fs::path(p).stem().string();
    json entry = {{"name", stem}};
    if (is_blockwise(ck.model.arch())) {
      const Tensor final = reconstruct(ck.model, image);
      write_pgm(dir / (stem + "_final.pgm"), clamp(final, 0.0, 1.0));
      write_pgm(dir / (stem + "_final_spectrum.pgm"), dft2_log_magnitude(final));
      entry["note"] = "block architectures have no preliminary/residual split";
    } else {
      const ReconstructionTriple t = forward_full(ck.model, image);
      write_pgm(dir / (stem + "_preliminary.pgm"), clamp(t.preliminary, 0.0, 1.0));
      write_pgm(dir / (stem + "_residual.pgm"), minmax_normalize(t.residual));
      write_pgm(dir / (stem + "_final.pgm"), clamp(t.final, 0.0, 1.0));
      write_pgm(dir / (stem + "_preliminary_spectrum.pgm"), dft2_log_magnitude(t.preliminary));
      write_pgm(dir / (stem + "_residual_spectrum.pgm"), dft2_log_magnitude(t.residual));
      write_pgm(dir / (stem + "_final_spectrum.pgm"), dft2_log_magnitude(t.final));
      const double hp = highfreq_energy_ratio(t.preliminary), hr = highfreq_energy_ratio(t.residual);
      entry["highfreq_preliminary"] = hp;
      entry["highfreq_residual"] = hr;
      entry["residual_max_abs"] = max_abs(t.residual);
      out << stem << ": high-frequency energy ratio preliminary " << fmt("%.4f", hp) << ", residual "
          << fmt("%.4f", hr) << "\n";
    }
    images.push_back(entry);
  }
  summary["images"] = images;
  write_text(dir / "visualize.json", summary.dump(2) + "\n");
  return kExitOk;
}

int cmd_gradcheck(const GradcheckFlags& f, std::ostream& out) {
  const Arch arch = parse_arch(f.arch);
  Model model = build_model(arch, miniature_config(f.rate, f.seed));
  Rng rng(derive_seed(f.seed, 7));
  const Tensor input = rand_uniform(Shape{1, 1, f.size, f.size}, rng);
  GradCheckOptions opt;
  opt.tolerance = f.tolerance;
  opt.step = 1e-5;
  opt.seed = f.seed;
  FaultGuard guard(f.corrupt);
  const GradCheckReport rep = finite_diff_check(model, input, opt);

  char buf[256];
  out << "gradcheck " << f.arch << " rate " << f.rate << " seed " << f.seed << " input " << f.size << "x" << f.size
      << "\n";
  for (const ParamCheck& p : rep.params) {
    std::snprintf(buf, sizeof buf, "  %-24s probes %5zu  max rel err %.3e", p.name.c_str(), p.probes,
                  p.max_rel_error);
    out << buf;
    if (p.reprobed > 0) out << "  (" << p.reprobed << " re-probed across a kink)";
    if (p.skipped > 0) out << "  (" << p.skipped << " skipped at a kink)";
    out << "\n";
  }
  for (const std::string& name : rep.excluded) out << "  " << name << "  non-trainable, excluded\n";
  std::snprintf(buf, sizeof buf, "max rel err %.3e (tolerance %.1e): %s\n", rep.max_rel_error, rep.tolerance,
                rep.pass ? "PASS" : "FAIL");
  out << buf;
  return rep.pass ? kExitOk : kExitRuntime;
}

int cmd_compare(const CompareFlags& f, std::ostream& out) {
  const std::vector<NamedImage> corpus = load_corpus(as_paths(f.test_dir));
  std::vector<MetricsReport> reports;
  std::vector<std::string> labels;
  for (const std::string& p : f.checkpoints) {
    Checkpoint ck = load_checkpoint(p);
    reports.push_back(evaluate(ck.model, corpus));
    labels.push_back(fs::path(p).stem().string());
  }
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-24s %-18s %6s %9s %8s %11s %11s\n", "checkpoint", "arch", "rate", "psnr", "ssim",
                "blockiness", "published psnr");
  out << buf;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const MetricsReport& r = reports[i];
    const std::string published = r.reference ? fmt("%.2f", r.reference->published_psnr) : "-";
    std::snprintf(buf, sizeof buf, "%-24s %-18s %6.3f %9.3f %8.4f %11.4f %11s\n", labels[i].c_str(), r.arch.c_str(),
                  r.rate, r.mean.psnr, r.mean.ssim, r.mean.blockiness, published.c_str());
    out << buf;
  }
  if (!f.csv_path.empty()) write_text(f.csv_path, comparison_csv(reports, labels));
  if (!f.json_path.empty()) write_text(f.json_path, comparison_json(reports, labels).dump(2) + "\n");
  return kExitOk;
}

int cmd_synth(const SynthFlags& f, std::ostream& out) {
  write_corpus(synthesize_corpus(f.count, f.height, f.width, f.seed), f.out_dir);
  out << "wrote " << f.count << " images to " << f.out_dir << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fully convolutional compressive sensing: train, evaluate and inspect models"};
  app.require_subcommand(1);

  TrainFlags tf;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model from a JSON config (flags override config keys)");
  train_cmd->add_option("config", tf.config, "Config file (default: $FCS_CONFIG)");
  train_cmd->add_option("--arch", tf.arch, "gaussian-block | adaptive-fc-block | fully-conv-tiny | fully-conv-res");
  train_cmd->add_option("--rate", tf.rate, "Measurement rate in (0, 1]");
  train_cmd->add_option("--seed", tf.seed);
  train_cmd->add_option("--epochs", tf.epochs);
  train_cmd->add_option("--batch-size", tf.batch_size);
  train_cmd->add_option("--lr", tf.lr);
  train_cmd->add_option("--beta1", tf.beta1);
  train_cmd->add_option("--beta2", tf.beta2);
  train_cmd->add_option("--eps", tf.eps);
  train_cmd->add_option("--patch-size", tf.patch_size);
  train_cmd->add_option("--patches-per-image", tf.patches_per_image);
  train_cmd->add_option("--train-dir", tf.train_dir, "Training images or directories");
  train_cmd->add_option("--checkpoint", tf.checkpoint, "Output checkpoint");
  train_cmd->add_option("--history-csv", tf.history_csv, "Per-epoch loss CSV (default: next to the checkpoint)");
  train_cmd->add_option("--checkpoint-every", tf.checkpoint_every);
  train_cmd->add_option("--warmup-epochs", tf.warmup_epochs);
  train_cmd->add_option("--features", tf.features);
  train_cmd->add_option("--resblocks", tf.resblocks);
  train_cmd->add_option("--kernel", tf.kernel);
  train_cmd->add_option("--stride", tf.stride);
  train_cmd->add_option("--block-size", tf.block_size);
  train_cmd->add_flag("-q,--quiet", tf.quiet, "Do not print per-epoch losses");

  EvalFlags ef;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on a test corpus");
  eval_cmd->add_option("checkpoint", ef.checkpoint)->required();
  eval_cmd->add_option("--test-dir", ef.test_dir)->required();
  eval_cmd->add_option("--rate", ef.rate, "Expected rate; a mismatch with the checkpoint is an error");
  eval_cmd->add_option("--arch", ef.arch, "Expected architecture");
  eval_cmd->add_option("--json", ef.json_path, "Report JSON path");
  eval_cmd->add_option("--csv", ef.csv_path, "Report CSV path");
  eval_cmd->add_option("--recon-dir", ef.recon_dir, "Write reconstructions and side-by-side pairs here");

  ReconstructFlags rf;
  CLI::App* rec_cmd = app.add_subcommand("reconstruct", "Measure and reconstruct one image");
  rec_cmd->add_option("checkpoint", rf.checkpoint)->required();
  rec_cmd->add_option("input", rf.input)->required();
  rec_cmd->add_option("-o,--output", rf.output)->required();
  rec_cmd->add_flag("--no-clamp", rf.no_clamp, "Keep values outside [0, 1] (they are still clipped in the PGM)");

  VisualizeFlags vf;
  CLI::App* vis_cmd = app.add_subcommand("visualize-kernels", "Export measurement kernels and reconstruction stages");
  vis_cmd->add_option("checkpoint", vf.checkpoint)->required();
  vis_cmd->add_option("-o,--out", vf.out_dir)->required();
  vis_cmd->add_option("--image", vf.images, "Images whose preliminary/residual/final stages are exported");

  GradcheckFlags gf;
  CLI::App* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient check of a miniature model");
  gc_cmd->add_option("--arch", gf.arch, "Architecture")->capture_default_str();
  gc_cmd->add_option("--rate", gf.rate)->capture_default_str();
  gc_cmd->add_option("--seed", gf.seed)->capture_default_str();
  gc_cmd->add_option("--tolerance", gf.tolerance)->capture_default_str();
  gc_cmd->add_option("--size", gf.size, "Input height and width")->capture_default_str();
  gc_cmd->add_flag("--corrupt-backward", gf.corrupt)->group("");

  CompareFlags cf;
  CLI::App* cmp_cmd = app.add_subcommand("compare", "Evaluate several checkpoints into one table");
  cmp_cmd->add_option("checkpoints", cf.checkpoints)->required();
  cmp_cmd->add_option("--test-dir", cf.test_dir)->required();
  cmp_cmd->add_option("--json", cf.json_path);
  cmp_cmd->add_option("--csv", cf.csv_path);

  SynthFlags sf;
  CLI::App* syn_cmd = app.add_subcommand("synth-corpus", "Write a seeded synthetic grayscale corpus as PGM files");
  syn_cmd->add_option("-o,--out", sf.out_dir)->required();
  syn_cmd->add_option("--count", sf.count)->capture_default_str();
  syn_cmd->add_option("--height", sf.height)->capture_default_str();
  syn_cmd->add_option("--width", sf.width)->capture_default_str();
  syn_cmd->add_option("--seed", sf.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(*train_cmd, tf, out);
    if (*eval_cmd) return cmd_eval(*eval_cmd, ef, out);
    if (*rec_cmd) return cmd_reconstruct(rf, out);
    if (*vis_cmd) return cmd_visualize(vf, out);
    if (*gc_cmd) return cmd_gradcheck(gf, out);
    if (*cmp_cmd) return cmd_compare(cf, out);
    if (*syn_cmd) return cmd_synth(sf, out);
  } catch (const ConfigError& e) {
    err << "fcs: error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "fcs: error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

int run_cli(int argc, const char* const* argv) { return run_cli(argc, argv, std::cout, std::cerr); }

}  // namespace fcs
