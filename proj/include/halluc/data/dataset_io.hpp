#pragma once

#include <string>
#include <vector>

#include "halluc/core/io.hpp"
#include "halluc/data/dataset.hpp"
#include "halluc/data/episode.hpp"

namespace halluc::data {

inline constexpr const char* kDatasetFormatVersion = "1";

// Directory layout:
//   manifest.json  {format_version, image_shape [H, W, C], embed_dim, classes, sample_count}
//   images.f32     sample_count * H*W*C little-endian float32, HWC per sample
//   embeds.f32     sample_count * embed_dim little-endian float32
//   labels.u32     sample_count little-endian uint32

inline void save_dataset(const Dataset& ds, const io::fs::path& dir) {
  const auto shape = ds.image_shape();
  io::json manifest = {
      {"format_version", kDatasetFormatVersion},
      {"image_shape", {shape.height, shape.width, shape.channels}},
      {"embed_dim", ds.embed_dim()},
      {"classes", ds.classes()},
      {"sample_count", ds.size()},
  };
  std::vector<float> images, embeds;
  std::vector<std::uint32_t> labels;
  images.reserve(ds.size() * static_cast<std::size_t>(shape.size()));
  for (const auto& s : ds.samples()) {
    images.insert(images.end(), s.image.begin(), s.image.end());
    embeds.insert(embeds.end(), s.text_embedding.begin(), s.text_embedding.end());
    labels.push_back(s.label);
  }
  io::fs::create_directories(dir);
  io::write_pod_array<float>(dir / "images.f32", images);
  io::write_pod_array<float>(dir / "embeds.f32", embeds);
  io::write_pod_array<std::uint32_t>(dir / "labels.u32", labels);
  io::write_json(dir / "manifest.json", manifest);
}

inline Dataset load_dataset(const io::fs::path& dir) {
  const auto manifest = io::read_json(dir / "manifest.json");
  ImageShape shape;
  int embed_dim = 0;
  std::size_t count = 0;
  std::vector<ClassId> classes;
  try {
    if (manifest.at("format_version").get<std::string>() != kDatasetFormatVersion)
      throw FormatError("dataset: unsupported format_version " + manifest.at("format_version").dump());
    const auto& s = manifest.at("image_shape");
    if (!s.is_array() || s.size() != 3) throw FormatError("dataset: image_shape must be [H, W, C]");
    shape = {s[2].get<int>(), s[0].get<int>(), s[1].get<int>()};
    embed_dim = manifest.at("embed_dim").get<int>();
    count = manifest.at("sample_count").get<std::size_t>();
    classes = manifest.at("classes").get<std::vector<ClassId>>();
  } catch (const io::json::exception& e) {
    throw FormatError(std::string("dataset manifest: ") + e.what());
  }

  const auto images = io::read_pod_array<float>(dir / "images.f32");
  const auto embeds = io::read_pod_array<float>(dir / "embeds.f32");
  const auto labels = io::read_pod_array<std::uint32_t>(dir / "labels.u32");
  const auto img_sz = static_cast<std::size_t>(shape.size());
  if (images.size() != count * img_sz)
    throw FormatError("dataset: images.f32 holds " + std::to_string(images.size()) + " floats, manifest implies " +
                      std::to_string(count * img_sz));
  if (embeds.size() != count * static_cast<std::size_t>(embed_dim))
    throw FormatError("dataset: embeds.f32 size does not match manifest");
  if (labels.size() != count) throw FormatError("dataset: labels.u32 size does not match manifest");

  Dataset ds(shape, embed_dim);
  for (auto c : classes) ds.declare_class(c);
  for (std::size_t i = 0; i < count; ++i) {
    Sample s;
    s.image.assign(images.begin() + static_cast<long>(i * img_sz), images.begin() + static_cast<long>((i + 1) * img_sz));
    s.text_embedding.assign(embeds.begin() + static_cast<long>(i * embed_dim),
                            embeds.begin() + static_cast<long>((i + 1) * embed_dim));
    s.label = labels[i];
    if (!ds.class_set().contains(s.label))
      throw FormatError("dataset: label " + std::to_string(s.label) + " not in manifest class list");
    ds.add(std::move(s));
  }
  return ds;
}

inline io::json split_to_json(const SplitConfig& s) {
  return {{"base_classes", s.base_classes}, {"novel_classes", s.novel_classes}, {"seed", s.seed}};
}

inline SplitConfig split_from_json(const io::json& j) {
  SplitConfig s;
  s.base_classes = j.at("base_classes").get<std::set<ClassId>>();
  s.novel_classes = j.at("novel_classes").get<std::set<ClassId>>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

inline io::json episode_to_json(const Episode& e) {
  return {{"n_shot", e.n_shot},
          {"novel_classes", e.novel_classes},
          {"support", e.support_ids},
          {"query", e.query_ids}};
}

inline Episode episode_from_json(const io::json& j, const Dataset& ds) {
  return materialize_episode(ds, j.at("n_shot").get<int>(), j.at("novel_classes").get<std::vector<ClassId>>(),
                             j.at("support").get<std::vector<std::size_t>>(),
                             j.at("query").get<std::vector<std::size_t>>());
}

}  // namespace halluc::data
