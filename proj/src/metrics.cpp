#include "mdaircomp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mdaircomp {

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

}  // namespace

double nmse_db(const std::vector<RealVector>& truth, const std::vector<RealVector>& estimate) {
  if (truth.size() != estimate.size()) throw std::invalid_argument("block count mismatch");
  double err = 0.0;
  double ref = 0.0;
  for (std::size_t d = 0; d < truth.size(); ++d) {
    if (truth[d].size() != estimate[d].size())
      throw std::invalid_argument("block length mismatch");
    err += (truth[d] - estimate[d]).squaredNorm();
    ref += truth[d].squaredNorm();
  }
  if (!(ref > 0.0)) throw std::invalid_argument("undefined NMSE");
  if (err == 0.0) return kNmseFloorDb;
  return std::max(kNmseFloorDb, 10.0 * std::log10(err / ref));
}

CollisionStats collision_stats(const std::vector<RealVector>& counts, int ka) {
  CollisionStats out;
  if (counts.empty()) return out;
  const double blocks = static_cast<double>(counts.size());
  double nonzeros = 0.0;
  int exact = 0;
  int one_short = 0;
  for (const auto& x : counts) {
    const int l0 = static_cast<int>((x.array() != 0.0).count());
    nonzeros += l0;
    if (l0 == ka) ++exact;
    if (l0 == ka - 1) ++one_short;
  }
  out.sparsity = nonzeros / (static_cast<double>(counts.front().size()) * blocks);
  out.p_c1 = 1.0 - exact / blocks;
  out.p_c2 = out.p_c1 - one_short / blocks;
  return out;
}

OverheadRow overhead_table(std::int64_t w, std::int64_t q, std::int64_t l, std::int64_t k,
                           std::int64_t subcarriers) {
  if (w < 1 || q < 1 || l < 1 || k < 1 || subcarriers < 1)
    throw std::invalid_argument("overhead arguments must be positive");
  const std::int64_t blocks = ceil_div(w, q);
  return {ceil_div(blocks * k, subcarriers), ceil_div(2 * w, subcarriers),
          ceil_div(w, subcarriers), ceil_div(blocks * l, subcarriers)};
}

std::map<int, double> error_pmf(const std::vector<int>& errors) {
  std::map<int, double> pmf;
  for (int e : errors) pmf[e] += 1.0;
  for (auto& [e, p] : pmf) p /= static_cast<double>(errors.size());
  return pmf;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty set");
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  if (values.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(values.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace mdaircomp
