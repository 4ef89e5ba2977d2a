#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "halluc/core/error.hpp"
#include "halluc/nn/tensor.hpp"

namespace halluc::data {

using ClassId = std::uint32_t;
using ImageShape = nn::Shape3;

/// One (image, text embedding, label) triple. Images are stored H x W x C,
/// row-major, values in [-1, 1].
struct Sample {
  std::vector<float> image;
  std::vector<float> text_embedding;
  ClassId label = 0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

class Dataset {
 public:
  Dataset() = default;
  Dataset(ImageShape image_shape, int embed_dim) : image_shape_(image_shape), embed_dim_(embed_dim) {
    if (image_shape.channels <= 0 || image_shape.height <= 0 || image_shape.width <= 0)
      throw ConfigError("Dataset: image dimensions must be positive");
    if (embed_dim <= 0) throw ConfigError("Dataset: embed_dim must be positive");
  }

  /// Validates the sample against the dataset's shape contract and appends it.
  void add(Sample s) {
    if (s.image.size() != static_cast<std::size_t>(image_shape_.size()))
      throw DimensionError("Dataset::add: image size does not match image_shape");
    if (s.text_embedding.size() != static_cast<std::size_t>(embed_dim_))
      throw DimensionError("Dataset::add: embedding size does not match embed_dim");
    for (float v : s.image)
      if (!(v >= -1.0f && v <= 1.0f)) throw DataError("Dataset::add: image value outside [-1, 1]");
    for (float v : s.text_embedding)
      if (!std::isfinite(v)) throw DataError("Dataset::add: non-finite embedding entry");
    class_set_.insert(s.label);
    samples_.push_back(std::move(s));
  }

  /// Declares a class even when no sample carries it yet.
  void declare_class(ClassId c) { class_set_.insert(c); }

  const std::vector<Sample>& samples() const { return samples_; }
  const Sample& operator[](std::size_t i) const { return samples_.at(i); }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const std::set<ClassId>& class_set() const { return class_set_; }
  std::vector<ClassId> classes() const { return {class_set_.begin(), class_set_.end()}; }
  ImageShape image_shape() const { return image_shape_; }
  int embed_dim() const { return embed_dim_; }

  /// Indices of all samples carrying `label`, in dataset order.
  std::vector<std::size_t> indices_of(ClassId label) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < samples_.size(); ++i)
      if (samples_[i].label == label) out.push_back(i);
    return out;
  }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.image_shape_ == b.image_shape_ && a.embed_dim_ == b.embed_dim_ &&
           a.class_set_ == b.class_set_ && a.samples_ == b.samples_;
  }

 private:
  ImageShape image_shape_{};
  int embed_dim_ = 0;
  std::set<ClassId> class_set_;
  std::vector<Sample> samples_;
};

/// Packs HWC images into the spatial layout C x (N*H*W) used by the networks.
template <class S>
nn::Matrix<S> images_to_spatial(const std::vector<const std::vector<float>*>& images, ImageShape shape) {
  const int hw = shape.pixels();
  nn::Matrix<S> out(shape.channels, static_cast<Eigen::Index>(images.size()) * hw);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const auto& img = *images[n];
    if (img.size() != static_cast<std::size_t>(shape.size())) throw DimensionError("image size mismatch");
    for (int p = 0; p < hw; ++p)
      for (int c = 0; c < shape.channels; ++c)
        out(c, static_cast<Eigen::Index>(n) * hw + p) = static_cast<S>(img[p * shape.channels + c]);
  }
  return out;
}

/// Unpacks column block `n` of a spatial-layout batch back into an HWC image.
template <class S>
std::vector<float> spatial_to_image(const nn::Matrix<S>& x, ImageShape shape, Eigen::Index n) {
  const int hw = shape.pixels();
  std::vector<float> img(static_cast<std::size_t>(shape.size()));
  for (int p = 0; p < hw; ++p)
    for (int c = 0; c < shape.channels; ++c) img[p * shape.channels + c] = static_cast<float>(x(c, n * hw + p));
  return img;
}

template <class S>
nn::Matrix<S> embeddings_to_features(const std::vector<const std::vector<float>*>& embeds, int dim) {
  nn::Matrix<S> out(dim, static_cast<Eigen::Index>(embeds.size()));
  for (std::size_t n = 0; n < embeds.size(); ++n) {
    if (embeds[n]->size() != static_cast<std::size_t>(dim)) throw DimensionError("embedding size mismatch");
    for (int i = 0; i < dim; ++i) out(i, static_cast<Eigen::Index>(n)) = static_cast<S>((*embeds[n])[i]);
  }
  return out;
}

}  // namespace halluc::data
