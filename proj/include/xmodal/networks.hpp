// SPDX-License-Identifier: Apache-2.0
//
// 3-D encoder / residual / decoder generators and strided-conv + fully
// connected discriminators, plus the model bundles for the three
// translation setups.

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "xmodal/autograd.hpp"
#include "xmodal/conditioning.hpp"
#include "xmodal/ops.hpp"
#include "xmodal/volume.hpp"

namespace xmodal {

struct GeneratorSpec {
  int in_channels = 1;
  std::vector<int> encoder_channels{32, 64, 128};
  int resnet_blocks = 6;
  int out_channels = 1;
  /// Train-time dropout after the hidden decoder layers (0 disables).
  double decoder_dropout = 0.0;

  /// Spatial reduction factor of the encoder (2 per stage).
  std::int64_t downsampling() const { return std::int64_t{1} << encoder_channels.size(); }
  int bottleneck_channels() const { return encoder_channels.back(); }
  bool operator==(const GeneratorSpec&) const = default;
};

struct DiscriminatorSpec {
  int in_channels = 1;
  std::vector<int> conv_channels{32, 64, 128, 256, 512};
  /// Hidden widths of the fully connected head; a final 1-unit layer follows.
  std::vector<int> fc_hidden{256, 64};
  double leaky_slope = 0.2;
  /// Spatial extent the discriminator is built for (sizes the first FC layer).
  Dims input{128, 128, 128};
  bool operator==(const DiscriminatorSpec&) const = default;
};

void validate(const GeneratorSpec& spec);
void validate(const DiscriminatorSpec& spec);

template <class T>
struct Parameter {
  std::string name;
  ag::Var<T> var;
};

template <class T>
std::int64_t count_parameters(const std::vector<Parameter<T>>& params);

enum class Mode { train, eval };

template <class T>
class Generator {
 public:
  Generator(GeneratorSpec spec, ConditioningMode mode, std::uint64_t seed);

  /// x is (N, in_channels, D, H, W) with every extent divisible by
  /// spec().downsampling(); abeta_norm is (N) and may be undefined only when
  /// mode() is none. `rng` drives decoder dropout in train mode.
  ag::Var<T> forward(const ag::Var<T>& x, const ag::Var<T>& abeta_norm, Mode mode = Mode::eval,
                     std::mt19937_64* rng = nullptr, BottleneckTrace* trace = nullptr) const;

  /// Encoder output after conditioning: what the residual blocks see.
  ag::Var<T> encode(const ag::Var<T>& x, const ag::Var<T>& abeta_norm,
                    BottleneckTrace* trace = nullptr) const;

  const GeneratorSpec& spec() const { return spec_; }
  ConditioningMode conditioning() const { return mode_; }
  const std::vector<Parameter<T>>& parameters() const { return params_; }
  std::int64_t parameter_count() const { return count_parameters(params_); }
  const std::optional<FusionConv<T>>& fusion() const { return fusion_; }

  /// Zeroes the last decoder layer, making the output identically tanh(0).
  void zero_output_layer();

 private:
  struct ConvLayer {
    ag::Var<T> weight, bias;
    ag::ConvGeometry geom;
  };
  ConvLayer make_conv(const std::string& name, int cin, int cout, ag::ConvGeometry g,
                      bool transposed, std::mt19937_64& rng);
  void check_input(const ag::Var<T>& x, const ag::Var<T>& abeta) const;

  GeneratorSpec spec_;
  ConditioningMode mode_;
  std::vector<Parameter<T>> params_;
  std::vector<ConvLayer> encoder_;
  std::vector<std::pair<ConvLayer, ConvLayer>> blocks_;
  std::vector<ConvLayer> decoder_;
  std::optional<FusionConv<T>> fusion_;
};

template <class T>
class Discriminator {
 public:
  Discriminator(DiscriminatorSpec spec, std::uint64_t seed);

  /// x (N, in_channels, D, H, W) matching spec().input -> (N, 1) logits.
  ag::Var<T> forward(const ag::Var<T>& x) const;

  const DiscriminatorSpec& spec() const { return spec_; }
  const std::vector<Parameter<T>>& parameters() const { return params_; }
  std::int64_t parameter_count() const { return count_parameters(params_); }

 private:
  DiscriminatorSpec spec_;
  std::vector<Parameter<T>> params_;
  std::vector<std::pair<ag::Var<T>, ag::Var<T>>> convs_;
  std::vector<std::pair<ag::Var<T>, ag::Var<T>>> fcs_;
};

template <class T>
std::shared_ptr<Generator<T>> build_generator(const GeneratorSpec& spec, ConditioningMode mode,
                                              std::uint64_t seed);
template <class T>
std::shared_ptr<Discriminator<T>> build_discriminator(const DiscriminatorSpec& spec,
                                                      std::uint64_t seed);

/// The two translation directions. When tied both members are the same
/// object, so a single parameter set serves MRI->PET and PET->MRI.
template <class T>
struct GeneratorPair {
  std::shared_ptr<Generator<T>> mri_to_pet;
  std::shared_ptr<Generator<T>> pet_to_mri;

  bool tied() const { return mri_to_pet && mri_to_pet == pet_to_mri; }
  /// Parameters of distinct generators only.
  std::int64_t parameter_count() const;
};

/// Shares g1's parameters between both directions; g2 is discarded. Throws
/// UsageError when the specs or conditioning modes differ.
template <class T>
GeneratorPair<T> tie_generators(std::shared_ptr<Generator<T>> g1, std::shared_ptr<Generator<T>> g2);

enum class ModelKind { pix2pix, cyclegan, sharegan };
std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

/// Networks of one translation setup. Pix2pix has one generator and a
/// paired-input discriminator on PET; the cycle models have two directions
/// and one discriminator per domain.
template <class T>
struct TranslationModel {
  ModelKind kind = ModelKind::cyclegan;
  ConditioningMode conditioning = ConditioningMode::none;
  GeneratorSpec generator_spec;
  DiscriminatorSpec discriminator_spec;
  GeneratorPair<T> generators;
  std::shared_ptr<Discriminator<T>> disc_pet;
  std::shared_ptr<Discriminator<T>> disc_mri;

  /// Unique generator parameters with checkpoint names.
  std::vector<Parameter<T>> generator_parameters() const;
  std::vector<Parameter<T>> discriminator_parameters() const;
  std::vector<Parameter<T>> all_parameters() const;
};

/// Default generator/discriminator specs for a setup at the given input size.
GeneratorSpec default_generator_spec(ModelKind kind);
DiscriminatorSpec default_discriminator_spec(ModelKind kind, Dims input);

template <class T>
TranslationModel<T> build_model(ModelKind kind, ConditioningMode conditioning,
                                const GeneratorSpec& gspec, const DiscriminatorSpec& dspec,
                                std::uint64_t seed);

}  // namespace xmodal
