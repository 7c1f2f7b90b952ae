#include "fcs/model.hpp"

#include <cmath>

#include "fcs/errors.hpp"

namespace fcs {

namespace {

constexpr std::string_view kArchNames[] = {"gaussian-block", "adaptive-fc-block",
                                           "fully-conv-tiny", "fully-conv-res"};

Parameter he_kernel(std::string name, Shape shape, std::size_t fan_in, Rng& rng) {
  return Parameter(std::move(name),
                   randn(shape, rng, std::sqrt(2.0 / static_cast<double>(fan_in))));
}

Parameter zero_bias(std::string name, std::size_t channels) {
  return Parameter(std::move(name), Tensor(Shape{1, channels, 1, 1}));
}

void add_conv(std::vector<Parameter>& out, const std::string& prefix, std::size_t cout,
              std::size_t cin, std::size_t k, Rng& rng) {
  out.push_back(he_kernel(prefix + ".weight", Shape{cout, cin, k, k}, cin * k * k, rng));
  out.push_back(zero_bias(prefix + ".bias", cout));
}

}  // namespace

std::string_view arch_name(Arch arch) { return kArchNames[static_cast<int>(arch)]; }

Arch parse_arch(std::string_view name) {
  for (int i = 0; i < 4; ++i)
    if (kArchNames[i] == name) return static_cast<Arch>(i);
  throw ConfigError("unknown arch '" + std::string(name) +
                    "' (expected gaussian-block, adaptive-fc-block, fully-conv-tiny or "
                    "fully-conv-res)");
}

bool is_blockwise(Arch arch) { return arch == Arch::GaussianBlock || arch == Arch::AdaptiveFcBlock; }

void ModelConfig::validate() const {
  validate_rate(rate);
  if (features == 0) throw ConfigError("features must be positive");
  if (block_size == 0) throw ConfigError("block_size must be positive");
  conv.validate();
}

Model::Model(Arch arch, ModelConfig config, Measurer measurer, std::vector<Parameter> recon)
    : arch_(arch), config_(config), measurer_(std::move(measurer)), recon_(std::move(recon)) {}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out;
  std::visit(
      [&](auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LearnedConvMeasurer>) {
          out.push_back(&m.kernel());
        } else {
          out.push_back(&m.phi());
        }
      },
      measurer_);
  for (auto& p : recon_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> Model::parameters() const {
  std::vector<const Parameter*> out;
  for (Parameter* p : const_cast<Model*>(this)->parameters()) out.push_back(p);
  return out;
}

Parameter& Model::param(std::string_view name) {
  for (Parameter* p : parameters())
    if (p->name == name) return *p;
  throw ContractError("model has no parameter named '" + std::string(name) + "'");
}

const Parameter& Model::param(std::string_view name) const {
  return const_cast<Model*>(this)->param(name);
}

bool Model::has_param(std::string_view name) const {
  for (const Parameter* p : parameters())
    if (p->name == name) return true;
  return false;
}

std::size_t Model::parameter_count(bool trainable_only) const {
  std::size_t n = 0;
  for (const Parameter* p : parameters())
    if (!trainable_only || p->trainable) n += p->value.numel();
  return n;
}

Model build_model(Arch arch, const ModelConfig& config) {
  config.validate();
  Rng measure_rng(derive_seed(config.seed, 0));
  Rng recon_rng(derive_seed(config.seed, 1));
  const std::size_t f = config.features;
  std::vector<Parameter> recon;

  if (is_blockwise(arch)) {
    const std::size_t bs = config.block_size;
    const std::size_t n = bs * bs;
    Measurer measurer = arch == Arch::GaussianBlock
                            ? Measurer(GaussianBlockMeasurer(config.rate, config.seed, bs))
                            : Measurer(LearnedFCBlockMeasurer(config.rate, measure_rng, bs));
    const std::size_t m = block_phi(measurer).value.shape().h;
    recon.push_back(he_kernel("recover.matrix", Shape{1, 1, n, m}, m, recon_rng));
    add_conv(recon, "refine.conv1", f, 1, 3, recon_rng);
    add_conv(recon, "refine.conv2", 1, f, 3, recon_rng);
    return Model(arch, config, std::move(measurer), std::move(recon));
  }

  LearnedConvMeasurer measurer(config.rate, config.conv, measure_rng);
  const std::size_t c = measurer.channels();
  const std::size_t k = config.conv.kernel;
  recon.push_back(he_kernel("deconv.weight", Shape{c, 1, k, k}, c * k * k, recon_rng));
  recon.push_back(zero_bias("deconv.bias", 1));
  if (arch == Arch::FullyConvRes) {
    add_conv(recon, "res.entry", f, 1, 3, recon_rng);
    for (std::size_t r = 0; r < config.resblocks; ++r) {
      const std::string prefix = "res.block" + std::to_string(r);
      add_conv(recon, prefix + ".conv1", f, f, 3, recon_rng);
      add_conv(recon, prefix + ".conv2", f, f, 3, recon_rng);
    }
    add_conv(recon, "res.exit", 1, f, 3, recon_rng);
  }
  return Model(arch, config, Measurer(std::move(measurer)), std::move(recon));
}

namespace {

void require_batch_plane(const Tensor& images, const char* op) {
  if (images.shape().c != 1 || images.shape().n == 0) {
    throw DimensionError(std::string(op) + ": expected Nx1xHxW images, got " +
                         images.shape().str());
  }
}

}  // namespace

GraphTriple record_full(Model& model, Tape& tape, const Tensor& images) {
  if (is_blockwise(model.arch())) {
    throw ContractError("forward_full requires a fully convolutional arch, got " +
                        std::string(arch_name(model.arch())));
  }
  require_batch_plane(images, "forward_full");
  const auto& measurer = std::get<LearnedConvMeasurer>(model.measurer());
  const ConvGeometry& g = measurer.geometry();
  const ConvParams cp{g.stride, g.pad()};
  const std::size_t h = images.shape().h, w = images.shape().w;

  Var x = tape.constant(reflect_pad(images, round_up(h, g.stride), round_up(w, g.stride)));
  Var y = conv2d(x, tape.param(model.param("measure.kernel")), Var{}, cp);
  Var pre = deconv2d(y, tape.param(model.param("deconv.weight")),
                     tape.param(model.param("deconv.bias")), cp);

  GraphTriple out;
  if (model.arch() == Arch::FullyConvRes) {
    const ConvParams same{1, 1};
    auto conv = [&](Var in, const std::string& prefix) {
      return conv2d(in, tape.param(model.param(prefix + ".weight")),
                    tape.param(model.param(prefix + ".bias")), same);
    };
    Var e = conv(pre, "res.entry");
    for (std::size_t r = 0; r < model.config().resblocks; ++r) {
      const std::string prefix = "res.block" + std::to_string(r);
      e = residual_block(e, tape.param(model.param(prefix + ".conv1.weight")),
                         tape.param(model.param(prefix + ".conv1.bias")),
                         tape.param(model.param(prefix + ".conv2.weight")),
                         tape.param(model.param(prefix + ".conv2.bias")));
    }
    Var res = conv(e, "res.exit");
    out.preliminary = crop(pre, h, w);
    out.residual = crop(res, h, w);
    out.final = crop(add(pre, res), h, w);
  } else {
    out.preliminary = crop(pre, h, w);
    out.final = out.preliminary;
  }
  return out;
}

Var record_blockwise(Model& model, Tape& tape, const Tensor& images) {
  if (!is_blockwise(model.arch())) {
    throw ContractError("forward_blockwise requires a block arch, got " +
                        std::string(arch_name(model.arch())));
  }
  require_batch_plane(images, "forward_blockwise");
  const std::size_t bs = block_size_of(model.measurer());
  const std::size_t n = bs * bs;
  const std::size_t batch = images.shape().n;
  const std::size_t h = images.shape().h, w = images.shape().w;
  const std::size_t hp = round_up(h, bs), wp = round_up(w, bs);

  Var x = tape.constant(reflect_pad(images, hp, wp));
  Var blocks = extract_blocks(x, bs);
  const std::size_t count = blocks.shape().n;
  Var rows = reshape(blocks, Shape{count, n, 1, 1});
  Var measured = linear(rows, tape.param(block_phi(model.measurer())));
  Var initial_rows = linear(measured, tape.param(model.param("recover.matrix")));
  Var initial = reshape(initial_rows, Shape{count, 1, bs, bs});

  const ConvParams same{1, 1};
  Var hidden = relu(conv2d(initial, tape.param(model.param("refine.conv1.weight")),
                           tape.param(model.param("refine.conv1.bias")), same));
  Var refined = add(initial, conv2d(hidden, tape.param(model.param("refine.conv2.weight")),
                                    tape.param(model.param("refine.conv2.bias")), same));
  return crop(assemble_blocks(refined, batch, hp, wp), h, w);
}

Var record_reconstruction(Model& model, Tape& tape, const Tensor& images) {
  if (is_blockwise(model.arch())) return record_blockwise(model, tape, images);
  return record_full(model, tape, images).final;
}

ReconstructionTriple forward_full(Model& model, const Tensor& image) {
  Tape tape;
  GraphTriple g = record_full(model, tape, image);
  ReconstructionTriple out;
  out.preliminary = g.preliminary.value();
  out.final = g.final.value();
  out.residual = g.residual.tape ? g.residual.value() : Tensor(out.preliminary.shape());
  return out;
}

Tensor forward_blockwise(Model& model, const Tensor& image) {
  Tape tape;
  return record_blockwise(model, tape, image).value();
}

Tensor reconstruct(Model& model, const Tensor& image) {
  Tape tape;
  return record_reconstruction(model, tape, image).value();
}

GradCheckReport finite_diff_check(Model& model, const Tensor& input,
                                  const GradCheckOptions& options) {
  auto loss_of = [&](Tape& tape) {
    return mse_loss(record_reconstruction(model, tape, input), tape.constant(input));
  };
  return finite_diff_check(loss_of, model.parameters(), options);
}

ModelConfig miniature_config(double rate, std::uint64_t seed) {
  ModelConfig c;
  c.rate = rate;
  c.seed = seed;
  c.features = 4;
  c.resblocks = 1;
  c.conv = ConvGeometry{8, 4};
  c.block_size = 8;
  return c;
}

}  // namespace fcs
