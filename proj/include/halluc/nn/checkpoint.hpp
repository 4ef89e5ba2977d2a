#pragma once

#include <string>
#include <vector>

#include "halluc/core/io.hpp"
#include "halluc/nn/params.hpp"

namespace halluc::nn {

// A checkpoint is a directory holding a manifest plus one little-endian
// float32 blob per parameter, named "<param name>.f32" and stored
// column-major. The manifest's "tensors" array records name, shape and file.

/// Writes `params` into `dir` and returns the "tensors" manifest entry.
template <class S>
io::json write_tensors(const io::fs::path& dir, const ParamList<S>& params) {
  io::json entries = io::json::array();
  for (const auto& p : params) {
    std::vector<float> blob(static_cast<std::size_t>(p.value->size()));
    for (Eigen::Index i = 0; i < p.value->size(); ++i) blob[static_cast<std::size_t>(i)] = static_cast<float>(p.value->data()[i]);
    const std::string file = p.name + ".f32";
    io::write_pod_array<float>(dir / file, blob);
    entries.push_back({{"name", p.name}, {"shape", {p.value->rows(), p.value->cols()}}, {"file", file}});
  }
  return entries;
}

/// Fills `params` from `dir`. Every parameter must be listed with exactly
/// its current shape, and every blob must have the listed size.
template <class S>
void read_tensors(const io::fs::path& dir, const io::json& entries, const ParamList<S>& params) {
  if (!entries.is_array()) throw FormatError("checkpoint: tensors must be an array");
  if (entries.size() != params.size())
    throw FormatError("checkpoint: manifest lists " + std::to_string(entries.size()) + " tensors, model has " +
                      std::to_string(params.size()));
  for (const auto& p : params) {
    const io::json* entry = nullptr;
    for (const auto& e : entries)
      if (e.at("name").get<std::string>() == p.name) entry = &e;
    if (!entry) throw FormatError("checkpoint: tensor " + p.name + " missing from manifest");
    const auto shape = entry->at("shape").get<std::vector<long>>();
    if (shape.size() != 2 || shape[0] != p.value->rows() || shape[1] != p.value->cols())
      throw FormatError("checkpoint: tensor " + p.name + " has shape " + entry->at("shape").dump() + ", expected [" +
                        std::to_string(p.value->rows()) + "," + std::to_string(p.value->cols()) + "]");
    const auto blob = io::read_pod_array<float>(dir / entry->at("file").get<std::string>());
    if (static_cast<Eigen::Index>(blob.size()) != p.value->size())
      throw FormatError("checkpoint: blob for " + p.name + " holds " + std::to_string(blob.size()) + " floats");
    for (Eigen::Index i = 0; i < p.value->size(); ++i) p.value->data()[i] = static_cast<S>(blob[static_cast<std::size_t>(i)]);
  }
}

}  // namespace halluc::nn
