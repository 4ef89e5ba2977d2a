#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "halluc/core/io.hpp"
#include "halluc/selection/selection.hpp"

namespace halluc::harness {

inline constexpr const char* kPoolFormatVersion = "1";

// Directory layout:
//   manifest.json  {format_version, image_shape [H, W, C], pool_size, scoring_rule, count}
//   pool.jsonl     one candidate per line, in class then generation order
//   images.f32     count * H*W*C little-endian float32, line order

inline void save_pool(const selection::CandidatePool& pool, const data::ImageShape& shape, const io::fs::path& dir) {
  const io::fs::path staging = dir.string() + ".staging";
  io::fs::remove_all(staging);
  io::fs::create_directories(staging);
  std::ostringstream lines;
  std::vector<float> images;
  std::size_t count = 0;
  for (const auto& [c, cands] : pool.per_class) {
    for (const auto& cand : cands) {
      if (cand.image.size() != static_cast<std::size_t>(shape.size()))
        throw DimensionError("save_pool: candidate image size does not match the image shape");
      io::json j = {{"intended_class", cand.intended_class},
                    {"source_embedding_index", cand.source_embedding_index},
                    {"z_seed", cand.z_seed},
                    {"generation_index", cand.generation_index},
                    {"realism_score", cand.realism_score},
                    {"class_posterior", cand.class_posterior},
                    {"combined_score", cand.combined_score},
                    {"text_embedding", cand.text_embedding}};
      lines << j.dump() << '\n';
      images.insert(images.end(), cand.image.begin(), cand.image.end());
      ++count;
    }
  }
  io::write_file_atomic(staging / "pool.jsonl", lines.str());
  io::write_pod_array<float>(staging / "images.f32", images);
  io::write_json(staging / "manifest.json", {{"format_version", kPoolFormatVersion},
                                             {"image_shape", {shape.height, shape.width, shape.channels}},
                                             {"pool_size", pool.pool_size},
                                             {"scoring_rule", selection::to_string(pool.rule)},
                                             {"count", count}});
  io::commit_directory(staging, dir);
}

struct LoadedPool {
  selection::CandidatePool pool;
  data::ImageShape image_shape;
};

inline LoadedPool load_pool(const io::fs::path& dir) {
  const auto manifest = io::read_json(dir / "manifest.json");
  LoadedPool out;
  try {
    if (manifest.at("format_version").get<std::string>() != kPoolFormatVersion)
      throw FormatError("pool: unsupported format_version");
    const auto s = manifest.at("image_shape").get<std::vector<int>>();
    if (s.size() != 3) throw FormatError("pool: image_shape must be [H, W, C]");
    out.image_shape = {s[2], s[0], s[1]};
    out.pool.pool_size = manifest.at("pool_size").get<int>();
    out.pool.rule = selection::scoring_rule_from_string(manifest.at("scoring_rule").get<std::string>());
    const auto count = manifest.at("count").get<std::size_t>();
    const auto pixels = static_cast<std::size_t>(out.image_shape.size());
    const auto images = io::read_pod_array<float>(dir / "images.f32");
    if (images.size() != count * pixels) throw FormatError("pool: images.f32 size does not match the manifest");

    std::istringstream lines(io::read_file(dir / "pool.jsonl"));
    std::string line;
    std::size_t i = 0;
    while (std::getline(lines, line)) {
      if (line.empty()) continue;
      if (i >= count) throw FormatError("pool: more lines than the manifest count");
      const auto j = io::json::parse(line);
      selection::Candidate c;
      c.intended_class = j.at("intended_class").get<data::ClassId>();
      c.source_embedding_index = j.at("source_embedding_index").get<std::size_t>();
      c.z_seed = j.at("z_seed").get<std::uint64_t>();
      c.generation_index = j.at("generation_index").get<std::size_t>();
      c.realism_score = j.at("realism_score").get<double>();
      c.class_posterior = j.at("class_posterior").get<double>();
      c.combined_score = j.at("combined_score").get<double>();
      c.text_embedding = j.at("text_embedding").get<std::vector<float>>();
      c.image.assign(images.begin() + static_cast<long>(i * pixels), images.begin() + static_cast<long>((i + 1) * pixels));
      out.pool.per_class[c.intended_class].push_back(std::move(c));
      ++i;
    }
    if (i != count) throw FormatError("pool: fewer lines than the manifest count");
  } catch (const io::json::exception& e) {
    throw FormatError(std::string("pool: ") + e.what());
  }
  return out;
}

}  // namespace halluc::harness
