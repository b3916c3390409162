#include "mdaircomp/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace mdaircomp {

namespace {

// Weight matrix view (classes x feature_dim) and bias view over a flat vector.
Eigen::Map<const RealMatrix> weight_view(const RealVector& w, int classes, int feature_dim) {
  return {w.data(), classes, feature_dim};
}

RealVector softmax(const RealVector& z) {
  const RealVector e = (z.array() - z.maxCoeff()).exp().matrix();
  return e / e.sum();
}

}  // namespace

Dataset Dataset::subset(std::span<const int> rows) const {
  Dataset out;
  out.classes = classes;
  out.features.resize(features.rows(), static_cast<Eigen::Index>(rows.size()));
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.col(static_cast<Eigen::Index>(i)) = features.col(rows[i]);
    out.labels.push_back(labels[rows[i]]);
  }
  return out;
}

SoftmaxRegression::SoftmaxRegression(const Dataset& data) : data_(&data) {
  if (data.size() == 0) throw std::invalid_argument("empty shard");
  if (data.classes < 1) throw std::invalid_argument("dataset needs at least one class");
}

double SoftmaxRegression::loss(const RealVector& w, std::span<const int> batch) const {
  const int c = data_->classes;
  const int f = data_->feature_dim();
  const auto weights = weight_view(w, c, f);
  const auto bias = w.tail(c);
  double total = 0.0;
  for (int i : batch) {
    const RealVector z = weights * data_->features.col(i) + bias;
    const double top = z.maxCoeff();
    const double lse = top + std::log((z.array() - top).exp().sum());
    total += lse - z(data_->labels[i]);
  }
  return total / static_cast<double>(batch.size());
}

RealVector SoftmaxRegression::gradient(const RealVector& w, std::span<const int> batch) const {
  const int c = data_->classes;
  const int f = data_->feature_dim();
  const auto weights = weight_view(w, c, f);
  const auto bias = w.tail(c);
  RealVector grad = RealVector::Zero(w.size());
  Eigen::Map<RealMatrix> grad_w(grad.data(), c, f);
  auto grad_b = grad.tail(c);
  for (int i : batch) {
    const auto x = data_->features.col(i);
    RealVector p = softmax(weights * x + bias);
    p(data_->labels[i]) -= 1.0;
    grad_w.noalias() += p * x.transpose();
    grad_b += p;
  }
  return grad / static_cast<double>(batch.size());
}

Model Model::zeros(int feature_dim, int classes) {
  return {RealVector::Zero(SoftmaxRegression::parameter_count(feature_dim, classes)),
          feature_dim, classes};
}

RealVector Model::logits(const Eigen::Ref<const RealVector>& x) const {
  return weight_view(weights, classes, feature_dim) * x + weights.tail(classes);
}

RealVector local_train(const Objective& objective, const RealVector& w0, double eta_l,
                       int local_steps, int batch, std::uint64_t seed) {
  if (!(eta_l > 0.0)) throw std::invalid_argument("local learning rate must be > 0");
  if (local_steps < 1) throw std::invalid_argument("local steps must be >= 1");
  if (batch < 1) throw std::invalid_argument("batch size must be >= 1");
  const int n = objective.sample_count();
  if (n < 1) throw std::invalid_argument("empty shard");

  Rng rng(seed);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  const int take = std::min(batch, n);
  RealVector w = w0;
  for (int step = 0; step < local_steps; ++step) {
    if (take < n) {
      // partial Fisher-Yates: the first `take` entries form a uniform draw
      for (int i = 0; i < take; ++i) {
        std::uniform_int_distribution<int> pick(i, n - 1);
        std::swap(order[i], order[pick(rng)]);
      }
    }
    w -= eta_l * objective.gradient(w, std::span<const int>(order.data(), take));
  }
  return w - w0;
}

RealVector local_train(const Model& model, const DeviceShard& shard, double eta_l,
                       int local_steps, int batch, std::uint64_t seed) {
  const SoftmaxRegression objective(shard.data);
  if (objective.dim() != model.dim())
    throw std::invalid_argument("model and shard dimensions disagree");
  return local_train(objective, model.weights, eta_l, local_steps, batch, seed);
}

double evaluate(const Model& model, const Dataset& test) {
  if (test.size() == 0) throw std::invalid_argument("empty test set");
  int correct = 0;
  for (int i = 0; i < test.size(); ++i) {
    const RealVector z = model.logits(test.features.col(i));
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < z.size(); ++c)
      if (z(c) > z(best)) best = c;
    if (best == test.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / test.size();
}

std::vector<DeviceShard> make_noniid_split(const Dataset& data, int devices,
                                           double random_frac, std::uint64_t seed) {
  if (devices < 1) throw std::invalid_argument("need at least one device");
  if (!(random_frac >= 0.0 && random_frac <= 1.0))
    throw std::invalid_argument("random fraction must lie in [0, 1]");
  const int n = data.size();
  if (n < devices)
    throw std::invalid_argument("dataset too small: " + std::to_string(n) + " samples for " +
                                std::to_string(devices) + " devices");

  Rng rng(seed);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  const int per_random =
      static_cast<int>(std::floor(random_frac * n / devices + 1e-9));
  std::vector<std::vector<int>> rows(devices);
  for (int k = 0; k < devices; ++k)
    rows[k].assign(order.begin() + static_cast<std::ptrdiff_t>(k) * per_random,
                   order.begin() + static_cast<std::ptrdiff_t>(k + 1) * per_random);

  std::vector<int> rest(order.begin() + static_cast<std::ptrdiff_t>(devices) * per_random,
                        order.end());
  std::stable_sort(rest.begin(), rest.end(),
                   [&](int a, int b) { return data.labels[a] < data.labels[b]; });
  const int shard = static_cast<int>(rest.size()) / devices;
  std::vector<int> owner(devices);
  std::iota(owner.begin(), owner.end(), 0);
  std::shuffle(owner.begin(), owner.end(), rng);
  for (int s = 0; s < devices; ++s) {
    auto& dst = rows[owner[s]];
    dst.insert(dst.end(), rest.begin() + static_cast<std::ptrdiff_t>(s) * shard,
               rest.begin() + static_cast<std::ptrdiff_t>(s + 1) * shard);
  }

  std::vector<DeviceShard> out;
  out.reserve(devices);
  for (int k = 0; k < devices; ++k) {
    if (rows[k].empty()) throw std::invalid_argument("dataset too small: empty shard");
    out.push_back({k, data.subset(rows[k])});
  }
  return out;
}

double label_emd(const std::vector<DeviceShard>& shards, int classes) {
  RealVector pooled = RealVector::Zero(classes);
  std::vector<RealVector> local;
  for (const auto& s : shards) {
    RealVector h = RealVector::Zero(classes);
    for (int y : s.data.labels) h(y) += 1.0;
    pooled += h;
    local.push_back(h / std::max(1, s.data.size()));
  }
  pooled /= pooled.sum();
  double total = 0.0;
  for (const auto& h : local) total += (h - pooled).lpNorm<1>();
  return total / static_cast<double>(shards.size());
}

BlobTask::BlobTask(int feature_dim, int classes, double separation, double noise,
                   std::uint64_t seed)
    : means_(feature_dim, classes), noise_(noise) {
  if (feature_dim < 1 || classes < 1) throw std::invalid_argument("bad blob task shape");
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, separation / std::sqrt(static_cast<double>(feature_dim)));
  for (int c = 0; c < classes; ++c)
    for (int f = 0; f < feature_dim; ++f) means_(f, c) = g(rng);
}

Dataset BlobTask::sample(int per_class, std::uint64_t seed) const {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, noise_);
  const int n = per_class * classes();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  Dataset out;
  out.classes = classes();
  out.features.resize(feature_dim(), n);
  out.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const int slot = order[i];
    const int c = i % classes();
    for (int f = 0; f < feature_dim(); ++f) out.features(f, slot) = means_(f, c) + g(rng);
    out.labels[slot] = c;
  }
  return out;
}

}  // namespace mdaircomp
