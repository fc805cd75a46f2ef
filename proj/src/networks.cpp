// SPDX-License-Identifier: Apache-2.0

#include "xmodal/networks.hpp"

#include <set>

#include "xmodal/error.hpp"
#include "xmodal/random.hpp"

namespace xmodal {

using ag::ConvGeometry;
using ag::Var;

namespace {

constexpr double kInitStd = 0.02;
constexpr ConvGeometry kDown{3, 2, 1};
constexpr ConvGeometry kSame{3, 1, 1};
constexpr ConvGeometry kUp{4, 2, 1};
constexpr ConvGeometry kDiscDown{4, 2, 1};

template <class T>
Var<T> normal_param(const Shape& shape, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, kInitStd);
  Tensor<T> t(shape);
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return Var<T>(std::move(t), true);
}

template <class T>
Var<T> zero_param(const Shape& shape) {
  return Var<T>(Tensor<T>(shape), true);
}

}  // namespace

void validate(const GeneratorSpec& spec) {
  if (spec.in_channels < 1 || spec.out_channels < 1)
    throw UsageError("generator channel counts must be positive");
  if (spec.encoder_channels.empty()) throw UsageError("generator needs at least one encoder stage");
  for (int c : spec.encoder_channels)
    if (c < 1) throw UsageError("generator encoder channels must be positive");
  if (spec.resnet_blocks < 0) throw UsageError("generator resnet_blocks must be >= 0");
  if (!(spec.decoder_dropout >= 0.0 && spec.decoder_dropout < 1.0))
    throw UsageError("generator decoder_dropout must be in [0,1)");
}

void validate(const DiscriminatorSpec& spec) {
  if (spec.in_channels < 1) throw UsageError("discriminator in_channels must be positive");
  if (spec.conv_channels.empty()) throw UsageError("discriminator needs convolution layers");
  const std::int64_t factor = std::int64_t{1} << spec.conv_channels.size();
  for (auto e : {spec.input.d, spec.input.h, spec.input.w})
    if (e < factor || e % factor != 0)
      throw UsageError("discriminator input " + to_string(spec.input) + " too small for " +
                       std::to_string(spec.conv_channels.size()) +
                       " stride-2 stages (each extent must be a multiple of " +
                       std::to_string(factor) + ")");
}

template <class T>
std::int64_t count_parameters(const std::vector<Parameter<T>>& params) {
  std::int64_t n = 0;
  for (const auto& p : params) n += p.var.value().size();
  return n;
}

// ---------------------------------------------------------------- Generator

template <class T>
typename Generator<T>::ConvLayer Generator<T>::make_conv(const std::string& name, int cin, int cout,
                                                         ConvGeometry g, bool transposed,
                                                         std::mt19937_64& rng) {
  const std::int64_t k = g.kernel;
  ConvLayer layer{transposed ? normal_param<T>({cin, cout, k, k, k}, rng)
                             : normal_param<T>({cout, cin, k, k, k}, rng),
                  zero_param<T>({cout}), g};
  params_.push_back({name + ".weight", layer.weight});
  params_.push_back({name + ".bias", layer.bias});
  return layer;
}

template <class T>
Generator<T>::Generator(GeneratorSpec spec, ConditioningMode mode, std::uint64_t seed)
    : spec_(std::move(spec)), mode_(mode) {
  validate(spec_);
  std::mt19937_64 rng(seed);
  int cin = spec_.in_channels;
  for (std::size_t i = 0; i < spec_.encoder_channels.size(); ++i) {
    encoder_.push_back(make_conv("enc" + std::to_string(i), cin, spec_.encoder_channels[i], kDown, false, rng));
    cin = spec_.encoder_channels[i];
  }
  const int width = spec_.bottleneck_channels();
  if (mode_ == ConditioningMode::latent_concat) {
    FusionConv<T> f{normal_param<T>({width, width + 1, 1, 1, 1}, rng), zero_param<T>({width})};
    params_.push_back({"fusion.weight", f.weight});
    params_.push_back({"fusion.bias", f.bias});
    fusion_ = std::move(f);
  }
  for (int b = 0; b < spec_.resnet_blocks; ++b) {
    const std::string name = "res" + std::to_string(b);
    auto c0 = make_conv(name + ".conv0", width, width, kSame, false, rng);
    auto c1 = make_conv(name + ".conv1", width, width, kSame, false, rng);
    blocks_.emplace_back(std::move(c0), std::move(c1));
  }
  const auto stages = spec_.encoder_channels.size();
  for (std::size_t i = 0; i < stages; ++i) {
    const int cout = i + 1 < stages ? spec_.encoder_channels[stages - 2 - i] : spec_.out_channels;
    decoder_.push_back(make_conv("dec" + std::to_string(i), cin, cout, kUp, true, rng));
    cin = cout;
  }
}

template <class T>
void Generator<T>::check_input(const Var<T>& x, const Var<T>& abeta) const {
  const Shape& s = x.shape();
  if (s.size() != 5 || s[1] != spec_.in_channels)
    throw UsageError("generator expects (N," + std::to_string(spec_.in_channels) +
                     ",D,H,W) input, got " + to_string(s));
  const std::int64_t f = spec_.downsampling();
  for (std::size_t a = 2; a < 5; ++a)
    if (s[a] < f || s[a] % f != 0)
      throw UsageError("unsupported spatial size " + to_string(s) + ": extents must be multiples of " +
                       std::to_string(f));
  if (mode_ != ConditioningMode::none &&
      (!abeta.defined() || abeta.shape().size() != 1 || abeta.shape()[0] != s[0]))
    throw UsageError("conditioned generator needs one abeta value per sample");
}

template <class T>
Var<T> Generator<T>::encode(const Var<T>& x, const Var<T>& abeta_norm, BottleneckTrace* trace) const {
  check_input(x, abeta_norm);
  Var<T> h = x;
  if (mode_ == ConditioningMode::image_add) h = condition_image_add(h, abeta_norm);
  for (const auto& layer : encoder_)
    h = ag::relu(ag::instance_norm(ag::conv3d(h, layer.weight, layer.bias, layer.geom)));
  if (trace) trace->bottleneck = h.shape();
  if (mode_ == ConditioningMode::latent_add)
    h = condition_latent_add(h, abeta_norm, spec_.bottleneck_channels());
  else if (mode_ == ConditioningMode::latent_concat)
    h = condition_latent_concat(h, abeta_norm, *fusion_, trace);
  if (trace) trace->conditioned = h.shape();
  return h;
}

template <class T>
Var<T> Generator<T>::forward(const Var<T>& x, const Var<T>& abeta_norm, Mode mode,
                             std::mt19937_64* rng, BottleneckTrace* trace) const {
  Var<T> h = encode(x, abeta_norm, trace);
  for (const auto& [c0, c1] : blocks_) {
    Var<T> r = ag::relu(ag::instance_norm(ag::conv3d(h, c0.weight, c0.bias, c0.geom)));
    r = ag::instance_norm(ag::conv3d(r, c1.weight, c1.bias, c1.geom));
    h = ag::add(h, r);
  }
  const bool use_dropout = mode == Mode::train && spec_.decoder_dropout > 0.0;
  if (use_dropout && !rng) throw UsageError("train-mode generator with dropout needs an rng");
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    const auto& layer = decoder_[i];
    h = ag::conv_transpose3d(h, layer.weight, layer.bias, layer.geom);
    if (i + 1 < decoder_.size()) {
      h = ag::relu(ag::instance_norm(h));
      if (use_dropout) h = ag::dropout(h, static_cast<T>(spec_.decoder_dropout), *rng);
    }
  }
  return ag::tanh(h);
}

template <class T>
void Generator<T>::zero_output_layer() {
  decoder_.back().weight.mutable_value().fill(T(0));
  decoder_.back().bias.mutable_value().fill(T(0));
}

// ------------------------------------------------------------ Discriminator

template <class T>
Discriminator<T>::Discriminator(DiscriminatorSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  validate(spec_);
  std::mt19937_64 rng(seed);
  std::int64_t cin = spec_.in_channels;
  const std::int64_t k = kDiscDown.kernel;
  for (std::size_t i = 0; i < spec_.conv_channels.size(); ++i) {
    const std::int64_t cout = spec_.conv_channels[i];
    auto w = normal_param<T>({cout, cin, k, k, k}, rng);
    auto b = zero_param<T>({cout});
    params_.push_back({"conv" + std::to_string(i) + ".weight", w});
    params_.push_back({"conv" + std::to_string(i) + ".bias", b});
    convs_.emplace_back(w, b);
    cin = cout;
  }
  const std::int64_t factor = std::int64_t{1} << spec_.conv_channels.size();
  std::int64_t features = cin * (spec_.input.d / factor) * (spec_.input.h / factor) * (spec_.input.w / factor);
  std::vector<int> widths = spec_.fc_hidden;
  widths.push_back(1);
  for (std::size_t i = 0; i < widths.size(); ++i) {
    auto w = normal_param<T>({widths[i], features}, rng);
    auto b = zero_param<T>({widths[i]});
    params_.push_back({"fc" + std::to_string(i) + ".weight", w});
    params_.push_back({"fc" + std::to_string(i) + ".bias", b});
    fcs_.emplace_back(w, b);
    features = widths[i];
  }
}

template <class T>
Var<T> Discriminator<T>::forward(const Var<T>& x) const {
  const Shape& s = x.shape();
  if (s.size() != 5 || s[1] != spec_.in_channels || s[2] != spec_.input.d || s[3] != spec_.input.h ||
      s[4] != spec_.input.w)
    throw UsageError("discriminator built for (N," + std::to_string(spec_.in_channels) + "," +
                     to_string(spec_.input) + ") input, got " + to_string(s));
  const T slope = static_cast<T>(spec_.leaky_slope);
  Var<T> h = x;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    h = ag::conv3d(h, convs_[i].first, convs_[i].second, kDiscDown);
    // First and last stages are left unnormalised; the last may be 1 voxel.
    if (i > 0 && i + 1 < convs_.size()) h = ag::instance_norm(h);
    h = ag::leaky_relu(h, slope);
  }
  h = ag::flatten(h);
  for (std::size_t i = 0; i < fcs_.size(); ++i) {
    h = ag::linear(h, fcs_[i].first, fcs_[i].second);
    if (i + 1 < fcs_.size()) h = ag::leaky_relu(h, slope);
  }
  return h;
}

template <class T>
std::shared_ptr<Generator<T>> build_generator(const GeneratorSpec& spec, ConditioningMode mode,
                                              std::uint64_t seed) {
  return std::make_shared<Generator<T>>(spec, mode, seed);
}

template <class T>
std::shared_ptr<Discriminator<T>> build_discriminator(const DiscriminatorSpec& spec, std::uint64_t seed) {
  return std::make_shared<Discriminator<T>>(spec, seed);
}

template <class T>
std::int64_t GeneratorPair<T>::parameter_count() const {
  std::int64_t n = mri_to_pet ? mri_to_pet->parameter_count() : 0;
  if (pet_to_mri && !tied()) n += pet_to_mri->parameter_count();
  return n;
}

template <class T>
GeneratorPair<T> tie_generators(std::shared_ptr<Generator<T>> g1, std::shared_ptr<Generator<T>> g2) {
  if (!g1 || !g2) throw UsageError("tie_generators needs two generators");
  if (!(g1->spec() == g2->spec()) || g1->conditioning() != g2->conditioning())
    throw UsageError("tie_generators requires identical generator specs");
  return {g1, g1};
}

// ------------------------------------------------------------------ Models

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::pix2pix:
      return "pix2pix";
    case ModelKind::cyclegan:
      return "cyclegan";
    case ModelKind::sharegan:
      return "sharegan";
  }
  return "cyclegan";
}

ModelKind parse_model_kind(std::string_view text) {
  for (auto k : {ModelKind::pix2pix, ModelKind::cyclegan, ModelKind::sharegan})
    if (text == to_string(k)) return k;
  throw UsageError("unknown model '" + std::string(text) + "' (expected pix2pix|cyclegan|sharegan)");
}

GeneratorSpec default_generator_spec(ModelKind kind) {
  GeneratorSpec spec;
  if (kind == ModelKind::pix2pix) spec.decoder_dropout = 0.5;
  return spec;
}

DiscriminatorSpec default_discriminator_spec(ModelKind kind, Dims input) {
  DiscriminatorSpec spec;
  spec.in_channels = kind == ModelKind::pix2pix ? 2 : 1;
  spec.input = input;
  return spec;
}

namespace {
template <class T>
void append_prefixed(std::vector<Parameter<T>>& out, const std::string& prefix,
                     const std::vector<Parameter<T>>& params) {
  for (const auto& p : params) out.push_back({prefix + p.name, p.var});
}
}  // namespace

template <class T>
std::vector<Parameter<T>> TranslationModel<T>::generator_parameters() const {
  std::vector<Parameter<T>> out;
  if (generators.tied()) {
    append_prefixed(out, "g_shared.", generators.mri_to_pet->parameters());
    return out;
  }
  append_prefixed(out, "g_m2p.", generators.mri_to_pet->parameters());
  if (generators.pet_to_mri) append_prefixed(out, "g_p2m.", generators.pet_to_mri->parameters());
  return out;
}

template <class T>
std::vector<Parameter<T>> TranslationModel<T>::discriminator_parameters() const {
  std::vector<Parameter<T>> out;
  append_prefixed(out, "d_pet.", disc_pet->parameters());
  if (disc_mri) append_prefixed(out, "d_mri.", disc_mri->parameters());
  return out;
}

template <class T>
std::vector<Parameter<T>> TranslationModel<T>::all_parameters() const {
  auto out = generator_parameters();
  auto d = discriminator_parameters();
  out.insert(out.end(), d.begin(), d.end());
  return out;
}

template <class T>
TranslationModel<T> build_model(ModelKind kind, ConditioningMode conditioning, const GeneratorSpec& gspec,
                                const DiscriminatorSpec& dspec, std::uint64_t seed) {
  TranslationModel<T> m;
  m.kind = kind;
  m.conditioning = conditioning;
  m.generator_spec = gspec;
  m.discriminator_spec = dspec;
  m.generators.mri_to_pet = build_generator<T>(gspec, conditioning, derive_seed(seed, 1));
  m.disc_pet = build_discriminator<T>(dspec, derive_seed(seed, 3));
  if (kind == ModelKind::pix2pix) return m;
  auto second = build_generator<T>(gspec, conditioning, derive_seed(seed, 2));
  if (kind == ModelKind::sharegan)
    m.generators = tie_generators(m.generators.mri_to_pet, second);
  else
    m.generators.pet_to_mri = second;
  m.disc_mri = build_discriminator<T>(dspec, derive_seed(seed, 4));
  return m;
}

#define XMODAL_INSTANTIATE_NETWORKS(T)                                                                  \
  template std::int64_t count_parameters(const std::vector<Parameter<T>>&);                             \
  template class Generator<T>;                                                                          \
  template class Discriminator<T>;                                                                      \
  template struct GeneratorPair<T>;                                                                     \
  template struct TranslationModel<T>;                                                                  \
  template std::shared_ptr<Generator<T>> build_generator(const GeneratorSpec&, ConditioningMode,        \
                                                         std::uint64_t);                                \
  template std::shared_ptr<Discriminator<T>> build_discriminator(const DiscriminatorSpec&, std::uint64_t); \
  template GeneratorPair<T> tie_generators(std::shared_ptr<Generator<T>>, std::shared_ptr<Generator<T>>); \
  template TranslationModel<T> build_model(ModelKind, ConditioningMode, const GeneratorSpec&,           \
                                           const DiscriminatorSpec&, std::uint64_t);

XMODAL_INSTANTIATE_NETWORKS(float)
XMODAL_INSTANTIATE_NETWORKS(double)

}  // namespace xmodal
