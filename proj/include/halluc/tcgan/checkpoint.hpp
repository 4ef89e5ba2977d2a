#pragma once

#include <string>

#include "halluc/core/io.hpp"
#include "halluc/nn/checkpoint.hpp"
#include "halluc/tcgan/networks.hpp"

namespace halluc::tcgan {

inline constexpr const char* kCheckpointFormatVersion = "1";

inline io::json arch_to_json(const GanArch& a) {
  return {{"image_shape", {a.image.height, a.image.width, a.image.channels}},
          {"embed_dim", a.embed_dim},
          {"noise_dim", a.noise_dim},
          {"num_classes", a.num_classes},
          {"g_channels", a.widths.g_channels},
          {"d_channels", a.widths.d_channels},
          {"text_proj", a.widths.text_proj},
          {"joint_channels", a.widths.joint_channels}};
}

inline GanArch arch_from_json(const io::json& j) {
  GanArch a;
  const auto s = j.at("image_shape").get<std::vector<int>>();
  if (s.size() != 3) throw FormatError("checkpoint: image_shape must be [H, W, C]");
  a.image = {s[2], s[0], s[1]};
  a.embed_dim = j.at("embed_dim").get<int>();
  a.noise_dim = j.at("noise_dim").get<int>();
  a.num_classes = j.at("num_classes").get<int>();
  a.widths.g_channels = j.at("g_channels").get<std::vector<int>>();
  a.widths.d_channels = j.at("d_channels").get<std::vector<int>>();
  a.widths.text_proj = j.at("text_proj").get<int>();
  a.widths.joint_channels = j.at("joint_channels").get<int>();
  a.validate();
  return a;
}

/// model_manifest.json plus one float32 blob per parameter. The directory is
/// staged and renamed into place.
template <class S>
void save_gan(GanModel<S>& model, const io::fs::path& dir) {
  const io::fs::path staging = dir.string() + ".staging";
  io::fs::remove_all(staging);
  io::fs::create_directories(staging);
  io::json manifest = {
      {"format_version", kCheckpointFormatVersion},
      {"phase", model.phase},
      {"architecture", arch_to_json(model.arch)},
      {"d_z", model.arch.noise_dim},
      {"d_T", model.arch.embed_dim},
      {"image_shape", {model.arch.image.height, model.arch.image.width, model.arch.image.channels}},
      {"class_count", model.class_ids.size()},
      {"class_ids", model.class_ids},
  };
  manifest["tensors"] = nn::write_tensors(staging, model.params());
  io::write_json(staging / "model_manifest.json", manifest);
  io::commit_directory(staging, dir);
}

template <class S = float>
GanModel<S> load_gan(const io::fs::path& dir) {
  const auto manifest = io::read_json(dir / "model_manifest.json");
  try {
    if (manifest.at("format_version").get<std::string>() != kCheckpointFormatVersion)
      throw FormatError("checkpoint: unsupported format_version " + manifest.at("format_version").dump());
    const auto phase = manifest.at("phase").get<std::string>();
    if (phase != "pretrained" && phase != "finetuned" && phase != "initialized")
      throw FormatError("checkpoint: unknown phase " + phase);
    auto arch = arch_from_json(manifest.at("architecture"));
    auto ids = manifest.at("class_ids").get<std::vector<data::ClassId>>();
    if (manifest.at("class_count").get<std::size_t>() != ids.size() || static_cast<int>(ids.size()) != arch.num_classes)
      throw FormatError("checkpoint: class_count disagrees with class_ids / architecture");
    if (manifest.at("d_z").get<int>() != arch.noise_dim || manifest.at("d_T").get<int>() != arch.embed_dim)
      throw FormatError("checkpoint: d_z / d_T disagree with architecture");
    GanModel<S> model{arch, Generator<S>(arch), Discriminator<S>(arch), std::move(ids), phase};
    nn::read_tensors(dir, manifest.at("tensors"), model.params());
    return model;
  } catch (const io::json::exception& e) {
    throw FormatError(std::string("checkpoint manifest: ") + e.what());
  }
}

}  // namespace halluc::tcgan
