#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "halluc/core/io.hpp"
#include "halluc/core/rng.hpp"
#include "halluc/nn/adam.hpp"
#include "halluc/nn/checkpoint.hpp"
#include "halluc/nn/layers.hpp"
#include "halluc/selection/selection.hpp"
#include "halluc/tcgan/losses.hpp"

namespace halluc::classifier {

using data::ClassId;
using nn::Matrix;

struct ClsHyper {
  double lr = 1e-3;
  int steps = 300;
  int batch_size = 32;
  std::uint64_t seed = 0;
  /// Loss weight of hallucinated samples relative to real ones.
  double hallucinated_weight = 1.0;
  std::vector<int> channels{16, 32, 64};

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("ClsHyper: lr must be positive");
    if (steps < 0) throw ConfigError("ClsHyper: steps must be >= 0");
    if (batch_size <= 0) throw ConfigError("ClsHyper: batch_size must be positive");
    if (!(hallucinated_weight >= 0.0)) throw ConfigError("ClsHyper: hallucinated_weight must be >= 0");
    if (channels.empty()) throw ConfigError("ClsHyper: channels must be non-empty");
    for (int c : channels)
      if (c <= 0) throw ConfigError("ClsHyper: channel widths must be positive");
  }

  friend bool operator==(const ClsHyper&, const ClsHyper&) = default;
};

/// (conv 4x4 stride 2, leaky ReLU) blocks followed by a dense head.
template <class S>
class ClassifierModel {
 public:
  ClassifierModel() = default;
  ClassifierModel(data::ImageShape image, std::vector<int> channels, std::vector<ClassId> class_ids)
      : image_(image), channels_(std::move(channels)), class_ids_(std::move(class_ids)) {
    if (class_ids_.empty()) throw ConfigError("classifier: no classes");
    nn::Shape3 at = image;
    for (int c : channels_) {
      if (at.height < 2 || at.width < 2 || at.height % 2 || at.width % 2)
        throw ConfigError("classifier: image too small for the number of blocks");
      convs_.emplace_back(at, c, 4, 2, 1);
      at = convs_.back().output_shape();
      acts_.emplace_back(S(0.2));
    }
    trunk_ = at;
    head_ = nn::Linear<S>(trunk_.size(), static_cast<int>(class_ids_.size()));
  }

  void init(Rng& rng) {
    for (auto& c : convs_) c.init(rng, std::sqrt(2.0));
    head_.init(rng, 1.0);
  }

  Matrix<S> apply(const Matrix<S>& images) const {
    Matrix<S> x = images;
    for (std::size_t i = 0; i < convs_.size(); ++i) x = acts_[i].apply(convs_[i].apply(x));
    return head_.apply(nn::spatial_to_features<S>(x, trunk_));
  }

  Matrix<S> forward(const Matrix<S>& images) {
    Matrix<S> x = images;
    for (std::size_t i = 0; i < convs_.size(); ++i) x = acts_[i].forward(convs_[i].forward(x));
    return head_.forward(nn::spatial_to_features<S>(x, trunk_));
  }

  void backward(const Matrix<S>& d_logits) {
    Matrix<S> g = nn::features_to_spatial<S>(head_.backward(d_logits), trunk_);
    for (std::size_t i = convs_.size(); i-- > 0;) g = convs_[i].backward(acts_[i].backward(g));
  }

  nn::ParamList<S> params() {
    nn::ParamList<S> out;
    for (std::size_t i = 0; i < convs_.size(); ++i) convs_[i].collect(out, "c.conv" + std::to_string(i));
    head_.collect(out, "c.head");
    return out;
  }

  int head_index(ClassId c) const {
    const auto it = std::find(class_ids_.begin(), class_ids_.end(), c);
    return it == class_ids_.end() ? -1 : static_cast<int>(it - class_ids_.begin());
  }

  const std::vector<ClassId>& class_ids() const { return class_ids_; }
  const std::vector<int>& channels() const { return channels_; }
  data::ImageShape image_shape() const { return image_; }
  int num_classes() const { return static_cast<int>(class_ids_.size()); }

 private:
  data::ImageShape image_;
  std::vector<int> channels_;
  std::vector<ClassId> class_ids_;
  std::vector<nn::Conv2d<S>> convs_;
  std::vector<nn::LeakyRelu<S>> acts_;
  nn::Shape3 trunk_;
  nn::Linear<S> head_;
};

/// Minimizes (provenance-weighted) cross-entropy over the concatenated set
/// with uniformly drawn minibatches. Seed streams: 0 init, 1 minibatches.
/// `classes` fixes the output space; when empty it is the sorted label set.
template <class S = float>
ClassifierModel<S> train_classifier(const selection::AugmentedDataset& data, const ClsHyper& hyper,
                                    std::vector<ClassId> classes = {}, std::vector<double>* loss_trace = nullptr) {
  hyper.validate();
  const auto all = data.all();
  if (all.empty()) throw DataError("train_classifier: empty training set");
  if (classes.empty()) {
    std::set<ClassId> labels;
    for (const auto& [s, _] : all) labels.insert(s->label);
    classes.assign(labels.begin(), labels.end());
  }
  std::sort(classes.begin(), classes.end());

  for (const auto& [smp, _] : all)
    if (!std::binary_search(classes.begin(), classes.end(), smp->label))
      throw DataError("train_classifier: label " + std::to_string(smp->label) + " outside the class list");

  ClassifierModel<S> model(data.image_shape, hyper.channels, classes);
  Rng init_rng(derive_seed(hyper.seed, 0));
  model.init(init_rng);

  nn::Adam<S> opt(model.params(), {hyper.lr, 0.9, 0.999, 1e-8});
  Rng rng(derive_seed(hyper.seed, 1));
  std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
  std::vector<std::size_t> idx(static_cast<std::size_t>(hyper.batch_size));
  for (int step = 0; step < hyper.steps; ++step) {
    for (auto& i : idx) i = pick(rng);
    std::vector<const std::vector<float>*> imgs;
    std::vector<int> labels;
    Matrix<S> weights(1, hyper.batch_size);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const auto& [smp, prov] = all[idx[b]];
      imgs.push_back(&smp->image);
      labels.push_back(model.head_index(smp->label));
      weights(0, static_cast<Eigen::Index>(b)) =
          static_cast<S>(prov == selection::Provenance::hallucinated ? hyper.hallucinated_weight : 1.0);
    }
    const S wsum = weights.sum();
    opt.zero_grad();
    const Matrix<S> logits = model.forward(data::images_to_spatial<S>(imgs, data.image_shape));
    // Per-sample cross-entropy gradients (each scaled by 1/N by class_loss_grad)
    // reweighted to a weighted mean.
    auto ce = tcgan::class_loss_grad<S>(logits, labels);
    double loss = 0.0;
    if (wsum > S(0)) {
      Matrix<S> g = ce.d_logits;
      for (Eigen::Index j = 0; j < g.cols(); ++j) g.col(j) *= weights(0, j) * static_cast<S>(g.cols()) / wsum;
      for (Eigen::Index j = 0; j < logits.cols(); ++j) {
        const auto col = logits.col(j);
        const S mx = col.maxCoeff();
        const S lse = mx + std::log((col.array() - mx).exp().sum());
        loss += static_cast<double>(weights(0, j) * (lse - col(labels[static_cast<std::size_t>(j)])));
      }
      loss /= static_cast<double>(wsum);
      model.backward(g);
      opt.step();
    }
    if (!std::isfinite(loss))
      throw NumericalError("train_classifier: loss became non-finite at step " + std::to_string(step));
    if (loss_trace) loss_trace->push_back(loss);
  }
  return model;
}

/// Fraction of `samples` whose argmax prediction is their label.
template <class S>
double accuracy(const ClassifierModel<S>& model, const std::vector<data::Sample>& samples) {
  if (samples.empty()) return 0.0;
  std::vector<const std::vector<float>*> imgs;
  for (const auto& s : samples) imgs.push_back(&s.image);
  const auto logits = model.apply(data::images_to_spatial<S>(imgs, model.image_shape()));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (nn::argmax_column<S>(logits, static_cast<Eigen::Index>(i)) == model.head_index(samples[i].label)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

struct EvalReport {
  double top1_accuracy = 0;
  std::map<ClassId, double> per_class_accuracy;
  std::vector<ClassId> classes;                        // row/column order of the confusion matrix
  std::vector<std::vector<long>> confusion_matrix;     // [true][predicted]
  int n_shot = 0;
  int m = 0;
  std::uint64_t seed = 0;
  std::string arm;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Confusion counts from predicted head indices.
inline EvalReport make_report(const std::vector<ClassId>& classes, const std::vector<int>& truth,
                              const std::vector<int>& predicted) {
  const auto k = classes.size();
  EvalReport r;
  r.classes = classes;
  r.confusion_matrix.assign(k, std::vector<long>(k, 0));
  for (std::size_t i = 0; i < truth.size(); ++i)
    ++r.confusion_matrix[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  long trace = 0;
  for (std::size_t c = 0; c < k; ++c) {
    long row = 0;
    for (auto v : r.confusion_matrix[c]) row += v;
    trace += r.confusion_matrix[c][c];
    if (row > 0) r.per_class_accuracy[classes[c]] = static_cast<double>(r.confusion_matrix[c][c]) / static_cast<double>(row);
  }
  r.top1_accuracy = truth.empty() ? 0.0 : static_cast<double>(trace) / static_cast<double>(truth.size());
  return r;
}

/// Argmax prediction per query sample (ties to the lowest class index).
template <class S>
EvalReport evaluate(const ClassifierModel<S>& model, const std::vector<data::Sample>& query) {
  if (query.empty()) throw DataError("evaluate: empty query set");
  std::vector<int> truth, pred;
  for (const auto& s : query) {
    const int h = model.head_index(s.label);
    if (h < 0) throw DataError("evaluate: query label " + std::to_string(s.label) + " outside the classifier head");
    truth.push_back(h);
  }
  constexpr std::size_t kBatch = 128;
  for (std::size_t start = 0; start < query.size(); start += kBatch) {
    const std::size_t end = std::min(query.size(), start + kBatch);
    std::vector<const std::vector<float>*> imgs;
    for (std::size_t i = start; i < end; ++i) imgs.push_back(&query[i].image);
    const auto logits = model.apply(data::images_to_spatial<S>(imgs, model.image_shape()));
    for (Eigen::Index j = 0; j < logits.cols(); ++j) pred.push_back(static_cast<int>(nn::argmax_column<S>(logits, j)));
  }
  return make_report(model.class_ids(), truth, pred);
}

inline io::json report_to_json(const EvalReport& r) {
  io::json per_class = io::json::object();
  for (const auto& [c, a] : r.per_class_accuracy) per_class[std::to_string(c)] = a;
  std::vector<long> flat;
  for (const auto& row : r.confusion_matrix) flat.insert(flat.end(), row.begin(), row.end());
  return {{"top1_accuracy", r.top1_accuracy},
          {"per_class_accuracy", per_class},
          {"classes", r.classes},
          {"confusion_matrix", flat},
          {"n_shot", r.n_shot},
          {"m", r.m},
          {"seed", r.seed},
          {"arm", r.arm}};
}

inline EvalReport report_from_json(const io::json& j) {
  EvalReport r;
  r.top1_accuracy = j.at("top1_accuracy").get<double>();
  for (const auto& [k, v] : j.at("per_class_accuracy").items())
    r.per_class_accuracy[static_cast<ClassId>(std::stoul(k))] = v.get<double>();
  r.classes = j.at("classes").get<std::vector<ClassId>>();
  const auto flat = j.at("confusion_matrix").get<std::vector<long>>();
  const auto k = r.classes.size();
  if (flat.size() != k * k) throw FormatError("EvalReport: confusion_matrix size does not match classes");
  r.confusion_matrix.assign(k, std::vector<long>(k));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t c = 0; c < k; ++c) r.confusion_matrix[i][c] = flat[i * k + c];
  r.n_shot = j.at("n_shot").get<int>();
  r.m = j.at("m").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.arm = j.at("arm").get<std::string>();
  return r;
}

inline constexpr const char* kClassifierFormatVersion = "1";

template <class S>
void save_classifier(ClassifierModel<S>& model, const io::fs::path& dir) {
  const io::fs::path staging = dir.string() + ".staging";
  io::fs::remove_all(staging);
  io::fs::create_directories(staging);
  const auto shape = model.image_shape();
  io::json manifest = {{"format_version", kClassifierFormatVersion},
                       {"kind", "classifier"},
                       {"image_shape", {shape.height, shape.width, shape.channels}},
                       {"channels", model.channels()},
                       {"class_ids", model.class_ids()}};
  manifest["tensors"] = nn::write_tensors(staging, model.params());
  io::write_json(staging / "model_manifest.json", manifest);
  io::commit_directory(staging, dir);
}

template <class S = float>
ClassifierModel<S> load_classifier(const io::fs::path& dir) {
  const auto manifest = io::read_json(dir / "model_manifest.json");
  try {
    if (manifest.at("format_version").get<std::string>() != kClassifierFormatVersion ||
        manifest.at("kind").get<std::string>() != "classifier")
      throw FormatError("classifier checkpoint: unsupported format");
    const auto s = manifest.at("image_shape").get<std::vector<int>>();
    if (s.size() != 3) throw FormatError("classifier checkpoint: image_shape must be [H, W, C]");
    ClassifierModel<S> model({s[2], s[0], s[1]}, manifest.at("channels").get<std::vector<int>>(),
                             manifest.at("class_ids").get<std::vector<ClassId>>());
    nn::read_tensors(dir, manifest.at("tensors"), model.params());
    return model;
  } catch (const io::json::exception& e) {
    throw FormatError(std::string("classifier checkpoint: ") + e.what());
  }
}

}  // namespace halluc::classifier
