#pragma once

#include <string>
#include <vector>

#include "halluc/core/rng.hpp"
#include "halluc/data/dataset.hpp"
#include "halluc/nn/layers.hpp"

namespace halluc::tcgan {

using nn::Matrix;
using nn::Shape3;

/// Widths of the DCGAN-style networks. `g_channels[i]` is the generator's
/// channel count at the i-th resolution counted up from the base grid;
/// `d_channels[i]` is the discriminator's after its i-th downsampling.
/// Both lists have one entry per 2x resolution stage.
struct ArchWidths {
  std::vector<int> g_channels{64, 32, 16};
  std::vector<int> d_channels{16, 32, 64};
  int text_proj = 16;       // text embedding projection fed into D's trunk
  int joint_channels = 32;  // 1x1 conv width after (trunk ++ text) concat

  friend bool operator==(const ArchWidths&, const ArchWidths&) = default;
};

struct GanArch {
  Shape3 image{3, 32, 32};
  int embed_dim = 16;
  int noise_dim = 16;
  int num_classes = 2;  // class-head width K
  ArchWidths widths;

  int stages() const { return static_cast<int>(widths.g_channels.size()); }
  Shape3 base_grid(int channels) const {
    return {channels, image.height >> stages(), image.width >> stages()};
  }

  void validate() const {
    if (widths.g_channels.empty() || widths.g_channels.size() != widths.d_channels.size())
      throw ConfigError("GanArch: g_channels and d_channels must be non-empty and the same length");
    const int s = stages();
    if (image.height < (1 << s) || image.width < (1 << s) || (image.height >> s) << s != image.height ||
        (image.width >> s) << s != image.width)
      throw ConfigError("GanArch: image size must be a multiple of 2^stages");
    if (image.channels <= 0 || embed_dim <= 0 || noise_dim <= 0 || num_classes <= 0 || widths.text_proj <= 0 ||
        widths.joint_channels <= 0)
      throw ConfigError("GanArch: all dimensions must be positive");
    for (int c : widths.g_channels)
      if (c <= 0) throw ConfigError("GanArch: channel widths must be positive");
    for (int c : widths.d_channels)
      if (c <= 0) throw ConfigError("GanArch: channel widths must be positive");
  }

  friend bool operator==(const GanArch&, const GanArch&) = default;
};

/// G(T, z): [T; z] -> dense -> base grid -> (transposed conv, ReLU)* -> tanh.
template <class S>
class Generator {
 public:
  Generator() = default;
  explicit Generator(const GanArch& arch) : arch_(arch) {
    arch.validate();
    const auto& ch = arch.widths.g_channels;
    base_ = arch.base_grid(ch[0]);
    fc_ = nn::Linear<S>(arch.embed_dim + arch.noise_dim, base_.size());
    acts_.emplace_back(S(0));
    Shape3 at = base_;
    for (std::size_t i = 0; i < ch.size(); ++i) {
      const int out_c = i + 1 < ch.size() ? ch[i + 1] : arch.image.channels;
      ups_.emplace_back(at, out_c, 4, 2, 1);
      at = ups_.back().output_shape();
      if (i + 1 < ch.size()) acts_.emplace_back(S(0));
    }
  }

  void init(Rng& rng) {
    fc_.init(rng, std::sqrt(2.0));
    for (std::size_t i = 0; i < ups_.size(); ++i) ups_[i].init(rng, i + 1 < ups_.size() ? std::sqrt(2.0) : 1.0);
  }

  /// text: d_T x N, noise: d_z x N -> images in spatial layout.
  Matrix<S> apply(const Matrix<S>& text, const Matrix<S>& noise) const {
    check(text, noise);
    Matrix<S> in(text.rows() + noise.rows(), text.cols());
    in << text, noise;
    Matrix<S> x = nn::features_to_spatial<S>(acts_[0].apply(fc_.apply(in)), base_);
    for (std::size_t i = 0; i < ups_.size(); ++i) {
      x = ups_[i].apply(x);
      x = i + 1 < ups_.size() ? acts_[i + 1].apply(x) : out_.apply(x);
    }
    return x;
  }

  Matrix<S> forward(const Matrix<S>& text, const Matrix<S>& noise) {
    check(text, noise);
    Matrix<S> in(text.rows() + noise.rows(), text.cols());
    in << text, noise;
    Matrix<S> x = nn::features_to_spatial<S>(acts_[0].forward(fc_.forward(in)), base_);
    for (std::size_t i = 0; i < ups_.size(); ++i) {
      x = ups_[i].forward(x);
      x = i + 1 < ups_.size() ? acts_[i + 1].forward(x) : out_.forward(x);
    }
    return x;
  }

  /// Accumulates parameter gradients from dL/d(images).
  void backward(const Matrix<S>& d_images) {
    Matrix<S> g = d_images;
    for (std::size_t i = ups_.size(); i-- > 0;) {
      g = i + 1 < ups_.size() ? acts_[i + 1].backward(g) : out_.backward(g);
      g = ups_[i].backward(g);
    }
    fc_.backward(acts_[0].backward(nn::spatial_to_features<S>(g, base_)));
  }

  nn::ParamList<S> params() {
    nn::ParamList<S> out;
    fc_.collect(out, "g.fc");
    for (std::size_t i = 0; i < ups_.size(); ++i) ups_[i].collect(out, "g.up" + std::to_string(i));
    return out;
  }

  S kink_margin() const {
    S m = S(1e30);
    for (const auto& a : acts_) m = std::min(m, a.kink_margin());
    return m;
  }

  const GanArch& arch() const { return arch_; }

 private:
  void check(const Matrix<S>& text, const Matrix<S>& noise) const {
    if (text.rows() != arch_.embed_dim) throw DimensionError("generator: text embedding dimension mismatch");
    if (noise.rows() != arch_.noise_dim) throw DimensionError("generator: noise dimension mismatch");
    if (text.cols() != noise.cols()) throw DimensionError("generator: batch size mismatch");
  }

  GanArch arch_;
  Shape3 base_;
  nn::Linear<S> fc_;
  std::vector<nn::ConvTranspose2d<S>> ups_;
  std::vector<nn::LeakyRelu<S>> acts_;
  nn::Tanh<S> out_;
};

template <class S>
struct DiscriminatorOutput {
  Matrix<S> realism;       // 1 x N logits
  Matrix<S> class_logits;  // K x N
};

/// D(I, T). A convolutional trunk over the image feeds two heads:
///  - class head: dense layer on the flattened trunk (image only, so the
///    posterior P(c | I) cannot read the label off the text);
///  - realism head: trunk feature map concatenated with a tiled projection of
///    T, a 1x1 conv, then a dense layer to one logit.
template <class S>
class Discriminator {
 public:
  Discriminator() = default;
  explicit Discriminator(const GanArch& arch) : arch_(arch) {
    arch.validate();
    Shape3 at = arch.image;
    for (int c : arch.widths.d_channels) {
      convs_.emplace_back(at, c, 4, 2, 1);
      at = convs_.back().output_shape();
      acts_.emplace_back(S(0.2));
    }
    trunk_ = at;
    class_head_ = nn::Linear<S>(trunk_.size(), arch.num_classes);
    text_proj_ = nn::Linear<S>(arch.embed_dim, arch.widths.text_proj);
    text_act_ = nn::LeakyRelu<S>(S(0.2));
    joint_ = nn::Linear<S>(trunk_.channels + arch.widths.text_proj, arch.widths.joint_channels);
    joint_act_ = nn::LeakyRelu<S>(S(0.2));
    joint_shape_ = {arch.widths.joint_channels, trunk_.height, trunk_.width};
    realism_head_ = nn::Linear<S>(joint_shape_.size(), 1);
  }

  void init(Rng& rng) {
    for (auto& c : convs_) c.init(rng, std::sqrt(2.0));
    class_head_.init(rng, 1.0);
    text_proj_.init(rng, std::sqrt(2.0));
    joint_.init(rng, std::sqrt(2.0));
    realism_head_.init(rng, 1.0);
  }

  /// Fresh class head of width k; the trunk is untouched.
  void reset_class_head(int k, Rng& rng) {
    arch_.num_classes = k;
    class_head_ = nn::Linear<S>(trunk_.size(), k);
    class_head_.init(rng, 1.0);
  }

  DiscriminatorOutput<S> apply(const Matrix<S>& images, const Matrix<S>& text) const {
    check(images, text);
    Matrix<S> x = images;
    for (std::size_t i = 0; i < convs_.size(); ++i) x = acts_[i].apply(convs_[i].apply(x));
    DiscriminatorOutput<S> out;
    out.class_logits = class_head_.apply(nn::spatial_to_features<S>(x, trunk_));
    Matrix<S> t = nn::tile_columns<S>(text_act_.apply(text_proj_.apply(text)), trunk_.pixels());
    Matrix<S> cat(x.rows() + t.rows(), x.cols());
    cat << x, t;
    out.realism = realism_head_.apply(nn::spatial_to_features<S>(joint_act_.apply(joint_.apply(cat)), joint_shape_));
    return out;
  }

  DiscriminatorOutput<S> forward(const Matrix<S>& images, const Matrix<S>& text) {
    check(images, text);
    Matrix<S> x = images;
    for (std::size_t i = 0; i < convs_.size(); ++i) x = acts_[i].forward(convs_[i].forward(x));
    DiscriminatorOutput<S> out;
    out.class_logits = class_head_.forward(nn::spatial_to_features<S>(x, trunk_));
    Matrix<S> t = nn::tile_columns<S>(text_act_.forward(text_proj_.forward(text)), trunk_.pixels());
    Matrix<S> cat(x.rows() + t.rows(), x.cols());
    cat << x, t;
    out.realism =
        realism_head_.forward(nn::spatial_to_features<S>(joint_act_.forward(joint_.forward(cat)), joint_shape_));
    return out;
  }

  /// Accumulates parameter gradients; returns dL/d(images).
  Matrix<S> backward(const Matrix<S>& d_realism, const Matrix<S>& d_class) {
    Matrix<S> d_joint = nn::features_to_spatial<S>(realism_head_.backward(d_realism), joint_shape_);
    Matrix<S> d_cat = joint_.backward(joint_act_.backward(d_joint));
    const auto tc = trunk_.channels;
    Matrix<S> d_tiled = d_cat.bottomRows(d_cat.rows() - tc);
    text_proj_.backward(text_act_.backward(nn::untile_columns<S>(d_tiled, trunk_.pixels())));

    Matrix<S> dx = d_cat.topRows(tc);
    dx += nn::features_to_spatial<S>(class_head_.backward(d_class), trunk_);
    for (std::size_t i = convs_.size(); i-- > 0;) dx = convs_[i].backward(acts_[i].backward(dx));
    return dx;
  }

  nn::ParamList<S> params() {
    nn::ParamList<S> out;
    for (std::size_t i = 0; i < convs_.size(); ++i) convs_[i].collect(out, "d.conv" + std::to_string(i));
    class_head_.collect(out, "d.class_head");
    text_proj_.collect(out, "d.text_proj");
    joint_.collect(out, "d.joint");
    realism_head_.collect(out, "d.realism_head");
    return out;
  }

  S kink_margin() const {
    S m = std::min(text_act_.kink_margin(), joint_act_.kink_margin());
    for (const auto& a : acts_) m = std::min(m, a.kink_margin());
    return m;
  }

  const GanArch& arch() const { return arch_; }
  int num_classes() const { return arch_.num_classes; }

 private:
  void check(const Matrix<S>& images, const Matrix<S>& text) const {
    if (images.rows() != arch_.image.channels || images.cols() % arch_.image.pixels() != 0)
      throw DimensionError("discriminator: image batch shape mismatch");
    if (text.rows() != arch_.embed_dim) throw DimensionError("discriminator: text embedding dimension mismatch");
    if (images.cols() / arch_.image.pixels() != text.cols())
      throw DimensionError("discriminator: image and text batch sizes differ");
  }

  GanArch arch_;
  std::vector<nn::Conv2d<S>> convs_;
  std::vector<nn::LeakyRelu<S>> acts_;
  Shape3 trunk_;
  nn::Linear<S> class_head_;
  nn::Linear<S> text_proj_;
  nn::LeakyRelu<S> text_act_;
  nn::Linear<S> joint_;
  nn::LeakyRelu<S> joint_act_;
  Shape3 joint_shape_;
  nn::Linear<S> realism_head_;
};

/// The generator/discriminator pair plus the mapping from class-head index to
/// dataset class identifier.
template <class S>
struct GanModel {
  GanArch arch;
  Generator<S> g;
  Discriminator<S> d;
  std::vector<data::ClassId> class_ids;
  std::string phase = "initialized";

  /// Head index of class `c`, or -1.
  int head_index(data::ClassId c) const {
    for (std::size_t i = 0; i < class_ids.size(); ++i)
      if (class_ids[i] == c) return static_cast<int>(i);
    return -1;
  }

  nn::ParamList<S> params() {
    auto p = g.params();
    auto q = d.params();
    p.insert(p.end(), q.begin(), q.end());
    return p;
  }
};

/// Seeded initial model; the class head covers `class_ids`.
template <class S>
GanModel<S> init_model(GanArch arch, std::vector<data::ClassId> class_ids, std::uint64_t seed) {
  arch.num_classes = static_cast<int>(class_ids.size());
  GanModel<S> m{arch, Generator<S>(arch), Discriminator<S>(arch), std::move(class_ids), "initialized"};
  Rng rng(seed);
  m.g.init(rng);
  m.d.init(rng);
  return m;
}

}  // namespace halluc::tcgan
