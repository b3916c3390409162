#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "mdaircomp/common.hpp"

namespace mdaircomp {

inline constexpr double kNmseFloorDb = -300.0;

/// 10 log10(sum_d ||x_d - x_hat_d||^2 / sum_d ||x_d||^2), floored at -300 dB.
/// Throws std::invalid_argument for mismatched shapes or an all-zero truth.
double nmse_db(const std::vector<RealVector>& truth, const std::vector<RealVector>& estimate);

struct CollisionStats {
  double sparsity = 0.0;  // P_s
  double p_c1 = 0.0;
  double p_c2 = 0.0;
};

/// P_s = sum_d ||x_d||_0 / (N D), P_c1 = 1 - #{||x_d||_0 = ka} / D,
/// P_c2 = P_c1 - #{||x_d||_0 = ka - 1} / D.
CollisionStats collision_stats(const std::vector<RealVector>& counts, int ka);

/// Uplink time slots per scheme, each rounded up.
struct OverheadRow {
  std::int64_t vq_ofdma = 0;  // ceil(ceil(W/Q) K / P)
  std::int64_t fsk_mv = 0;    // ceil(2W / P)
  std::int64_t obda = 0;      // ceil(W / P)
  std::int64_t md_aircomp = 0;  // ceil(ceil(W/Q) L / P)
};

OverheadRow overhead_table(std::int64_t w, std::int64_t q, std::int64_t l, std::int64_t k,
                           std::int64_t subcarriers);

/// Empirical PMF of (ka_hat - ka) as an ordered map error -> fraction.
std::map<int, double> error_pmf(const std::vector<int>& errors);

double median(std::vector<double> values);

}  // namespace mdaircomp
