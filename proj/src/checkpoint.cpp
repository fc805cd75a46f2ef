// SPDX-License-Identifier: Apache-2.0

#include "xmodal/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "json.hpp"
#include "xmodal/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace xmodal {

namespace {

constexpr char kMagic[6] = {'X', 'C', 'K', 'P', 'T', '1'};

json range_json(const IntensityRange& r) { return json::array({r.lo, r.hi}); }
IntensityRange range_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

json to_json(const GeneratorSpec& s) {
  return {{"in_channels", s.in_channels},   {"encoder_channels", s.encoder_channels},
          {"resnet_blocks", s.resnet_blocks}, {"out_channels", s.out_channels},
          {"decoder_dropout", s.decoder_dropout}};
}

GeneratorSpec generator_spec_from(const json& j) {
  GeneratorSpec s;
  s.in_channels = j.at("in_channels").get<int>();
  s.encoder_channels = j.at("encoder_channels").get<std::vector<int>>();
  s.resnet_blocks = j.at("resnet_blocks").get<int>();
  s.out_channels = j.at("out_channels").get<int>();
  s.decoder_dropout = j.at("decoder_dropout").get<double>();
  return s;
}

json to_json(const DiscriminatorSpec& s) {
  return {{"in_channels", s.in_channels}, {"conv_channels", s.conv_channels},
          {"fc_hidden", s.fc_hidden},     {"leaky_slope", s.leaky_slope},
          {"input", {s.input.d, s.input.h, s.input.w}}};
}

DiscriminatorSpec discriminator_spec_from(const json& j) {
  DiscriminatorSpec s;
  s.in_channels = j.at("in_channels").get<int>();
  s.conv_channels = j.at("conv_channels").get<std::vector<int>>();
  s.fc_hidden = j.at("fc_hidden").get<std::vector<int>>();
  s.leaky_slope = j.at("leaky_slope").get<double>();
  const auto& in = j.at("input");
  s.input = {in.at(0).get<std::int64_t>(), in.at(1).get<std::int64_t>(), in.at(2).get<std::int64_t>()};
  return s;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  const auto params = ckpt.model.all_parameters();
  json header;
  header["model"] = std::string(to_string(ckpt.model.kind));
  header["conditioning"] = std::string(to_string(ckpt.model.conditioning));
  header["generator"] = to_json(ckpt.model.generator_spec);
  header["discriminator"] = to_json(ckpt.model.discriminator_spec);
  header["stats"] = {{"mri", range_json(ckpt.stats.mri)},
                     {"pet", range_json(ckpt.stats.pet)},
                     {"abeta", range_json(ckpt.stats.abeta)}};
  header["config"] = ckpt.config;
  header["epoch"] = ckpt.epoch;
  header["val_ssim"] = ckpt.val_ssim;
  json table = json::array();
  for (const auto& p : params) table.push_back({{"name", p.name}, {"shape", p.var.shape()}});
  header["tensors"] = table;
  const std::string text = header.dump();

  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof kMagic);
    const auto len = static_cast<std::uint32_t>(text.size());
    unsigned char le[4] = {static_cast<unsigned char>(len), static_cast<unsigned char>(len >> 8),
                           static_cast<unsigned char>(len >> 16), static_cast<unsigned char>(len >> 24)};
    out.write(reinterpret_cast<const char*>(le), 4);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& p : params)
      out.write(reinterpret_cast<const char*>(p.var.value().data()),
                static_cast<std::streamsize>(p.var.value().size() * static_cast<std::int64_t>(sizeof(float))));
    if (!out) throw DataError("write failed: " + path.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw DataError("cannot finalize checkpoint " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("missing checkpoint " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path.string());
  char magic[6];
  unsigned char le[4];
  in.read(magic, 6);
  in.read(reinterpret_cast<char*>(le), 4);
  if (!in || std::memcmp(magic, kMagic, 6) != 0) throw DataError(path.string() + ": not a checkpoint");
  const std::uint32_t len = le[0] | (le[1] << 8) | (le[2] << 16) | (static_cast<std::uint32_t>(le[3]) << 24);
  std::string text(len, '\0');
  in.read(text.data(), len);
  if (!in) throw DataError(path.string() + ": truncated header");

  Checkpoint ckpt;
  try {
    const json header = json::parse(text);
    const auto kind = parse_model_kind(header.at("model").get<std::string>());
    const auto cond = parse_conditioning_mode(header.at("conditioning").get<std::string>());
    ckpt.model = build_model<float>(kind, cond, generator_spec_from(header.at("generator")),
                                    discriminator_spec_from(header.at("discriminator")), 0);
    const auto& st = header.at("stats");
    ckpt.stats = {range_from(st.at("mri")), range_from(st.at("pet")), range_from(st.at("abeta"))};
    ckpt.config = header.at("config").get<std::string>();
    ckpt.epoch = header.at("epoch").get<int>();
    ckpt.val_ssim = header.at("val_ssim").get<double>();
    validate(ckpt.stats);

    std::map<std::string, ag::Var<float>> by_name;
    for (auto& p : ckpt.model.all_parameters()) by_name.emplace(p.name, p.var);
    const auto& table = header.at("tensors");
    if (table.size() != by_name.size())
      throw DataError(path.string() + ": tensor count " + std::to_string(table.size()) + " does not match model (" +
                      std::to_string(by_name.size()) + ")");
    for (const auto& t : table) {
      const auto name = t.at("name").get<std::string>();
      auto it = by_name.find(name);
      if (it == by_name.end()) throw DataError(path.string() + ": unknown tensor " + name);
      const auto shape = t.at("shape").get<Shape>();
      auto& value = it->second.mutable_value();
      if (shape != value.shape())
        throw DataError(path.string() + ": tensor " + name + " has shape " + to_string(shape) + ", model expects " +
                        to_string(value.shape()));
      in.read(reinterpret_cast<char*>(value.data()),
              static_cast<std::streamsize>(value.size() * static_cast<std::int64_t>(sizeof(float))));
      if (!in) throw DataError(path.string() + ": truncated tensor data at " + name);
    }
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": malformed header: " + e.what());
  } catch (const UsageError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return ckpt;
}

}  // namespace xmodal
