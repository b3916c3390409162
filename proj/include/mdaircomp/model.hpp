#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mdaircomp/common.hpp"

namespace mdaircomp {

/// Labelled samples, one feature vector per column.
struct Dataset {
  RealMatrix features;  // feature_dim x n
  std::vector<int> labels;
  int classes = 0;

  int size() const { return static_cast<int>(labels.size()); }
  int feature_dim() const { return static_cast<int>(features.rows()); }
  Dataset subset(std::span<const int> rows) const;
};

struct DeviceShard {
  int device_id = 0;
  Dataset data;
};

/// Differentiable per-sample loss averaged over a minibatch.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual int dim() const = 0;
  virtual int sample_count() const = 0;
  virtual double loss(const RealVector& w, std::span<const int> batch) const = 0;
  virtual RealVector gradient(const RealVector& w, std::span<const int> batch) const = 0;
};

/// Multinomial logistic regression. Parameter layout: the classes x
/// feature_dim weight matrix in column-major order, then one bias per class,
/// so W = feature_dim * classes + classes.
class SoftmaxRegression final : public Objective {
 public:
  explicit SoftmaxRegression(const Dataset& data);

  static int parameter_count(int feature_dim, int classes) {
    return feature_dim * classes + classes;
  }

  int dim() const override { return parameter_count(data_->feature_dim(), data_->classes); }
  int sample_count() const override { return data_->size(); }
  double loss(const RealVector& w, std::span<const int> batch) const override;
  RealVector gradient(const RealVector& w, std::span<const int> batch) const override;

 private:
  const Dataset* data_;
};

struct Model {
  RealVector weights;
  int feature_dim = 0;
  int classes = 0;

  static Model zeros(int feature_dim, int classes);
  int dim() const { return static_cast<int>(weights.size()); }
  RealVector logits(const Eigen::Ref<const RealVector>& x) const;
};

/// T_l minibatch SGD steps from w0; returns w_final - w0. Each step draws
/// `batch` distinct samples (the whole set when batch >= sample_count).
RealVector local_train(const Objective& objective, const RealVector& w0, double eta_l,
                       int local_steps, int batch, std::uint64_t seed);

RealVector local_train(const Model& model, const DeviceShard& shard, double eta_l,
                       int local_steps, int batch, std::uint64_t seed);

/// Fraction of argmax-correct predictions; ties go to the lowest class.
double evaluate(const Model& model, const Dataset& test);

/// Each device first gets floor(random_frac * n / K) samples drawn uniformly,
/// the rest is sorted by label and cut into K equal shards handed out in a
/// random order. Samples that do not divide evenly are left unused.
std::vector<DeviceShard> make_noniid_split(const Dataset& data, int devices,
                                           double random_frac, std::uint64_t seed);

/// Mean over devices of sum_c |p_k(c) - p(c)|, p being the pooled label
/// distribution. Zero for identical label mixes.
double label_emd(const std::vector<DeviceShard>& shards, int classes);

/// Gaussian-blob classification task: class means drawn once from the seed,
/// samples are mean + N(0, noise^2 I).
class BlobTask {
 public:
  BlobTask(int feature_dim, int classes, double separation, double noise, std::uint64_t seed);

  /// `per_class` samples of every class, shuffled.
  Dataset sample(int per_class, std::uint64_t seed) const;

  int feature_dim() const { return static_cast<int>(means_.rows()); }
  int classes() const { return static_cast<int>(means_.cols()); }

 private:
  RealMatrix means_;
  double noise_;
};

}  // namespace mdaircomp
