#pragma once

#include <filesystem>
#include <vector>

#include "mdaircomp/channel.hpp"
#include "mdaircomp/common.hpp"
#include "mdaircomp/modcodebook.hpp"
#include "mdaircomp/quantizer.hpp"

namespace mdaircomp {

enum class ResidualRule {
  PerBlock,  // each block stops on its own residual
  Joint,     // all blocks iterate in lockstep on the mean residual
};

struct DetectorConfig {
  int max_iters = 50;
  double damping = 0.3;
  // Upper end of the uniform integer-count prior on antenna 1.
  int ka_prior = 16;
  int min_iters_before_stop = 15;
  ResidualRule residual_rule = ResidualRule::PerBlock;

  void validate() const;
};

/// Lower bound applied to variances and to sigma^2 + V denominators.
inline constexpr double kVarianceFloor = 1e-12;
/// pi and the activity indicators are kept inside [eps, 1 - eps].
inline constexpr double kProbabilityFloor = 1e-12;

/// Everything one AMP-DA iteration reads or writes for one block.
struct AmpState {
  ComplexMatrix x_hat;   // N x M posterior means
  RealMatrix v_hat;      // N x M posterior variances
  RealMatrix V;          // L x M
  ComplexMatrix Z;       // L x M
  RealMatrix phi;        // N x M decoupled noise variances
  ComplexMatrix r;       // N x M decoupled observations
  RealVector activity;   // N, shared across antennas
  double noise_var = 100.0;
  cd mu0{0.0, 0.0};
  double tau0 = 1.0;
  int iter = 0;
  double residual = 100.0;

  // Denoiser by-products consumed by the EM step.
  RealVector active_mass;     // N: posterior mass on nonzero counts (antenna 1)
  RealMatrix pi;              // N x M, column 0 unused
  ComplexMatrix mu_post;      // N x M, column 0 unused
  RealMatrix tau_post;        // N x M, column 0 unused

  static AmpState initial(const ReceivedBlock& y, int codewords);
};

struct CountPosterior {
  double mean = 0.0;
  double var = 0.0;
  double active_mass = 0.0;  // P(x != 0 | r)
};

/// Posterior of x in {0, 1, ..., ka_prior} under the prior
/// (1-a) delta(x) + a/ka_prior sum_s delta(x - s) and likelihood CN(r; x, phi).
CountPosterior denoise_antenna1(cd r, double phi, double a, int ka_prior);

struct BernoulliGaussPosterior {
  cd mean{0.0, 0.0};
  double var = 0.0;
  double pi = 0.0;
  cd mu{0.0, 0.0};
  double tau = 0.0;
};

/// Posterior of x under (1-a) delta(x) + a CN(x; mu0, tau0) and likelihood
/// CN(r; x, phi): a spike at zero plus CN(mu, tau), with
///   mu  = (mu0 phi + tau0 r) / (phi + tau0),  tau = tau0 phi / (phi + tau0),
///   L   = ln(phi / (tau0 + phi)) - |r - mu0|^2 / (tau0 + phi) + |r|^2 / phi,
///   pi  = a / (a + (1 - a) e^{-L}).
BernoulliGaussPosterior denoise_antenna_m(cd r, double phi, double a, cd mu0,
                                          double tau0);

/// Stateless helpers bound to one modulation codebook.
class AmpDetector {
 public:
  AmpDetector(const ModCodebook& p, DetectorConfig cfg);

  const DetectorConfig& config() const { return cfg_; }

  /// Factor-node (V, Z) update, variable-node (phi, r) update from those,
  /// then V and Z are damped against their previous values for the next
  /// iteration.
  void decouple_step(const ReceivedBlock& y, AmpState& s) const;
  /// Antenna 1 with the integer-count prior, antennas 2..M Bernoulli-Gaussian.
  void denoise(AmpState& s) const;
  /// Activity, sigma^2, mu0, tau0 re-estimation.
  void em_update(const ReceivedBlock& y, AmpState& s) const;
  /// (1/L) ||Y - P X_hat||_F.
  double residual(const ReceivedBlock& y, const AmpState& s) const;

  /// Single iteration: decouple, denoise, EM, residual.
  void iterate(const ReceivedBlock& y, AmpState& s) const;

 private:
  const ModCodebook* p_;
  ComplexMatrix p_adj_;
  RealMatrix p_abs2_;
  DetectorConfig cfg_;
};

struct IterationTrace {
  int iteration = 0;
  double residual = 0.0;
  double noise_var = 0.0;
  double tau0 = 0.0;
  double mu0_abs = 0.0;
  double activity_sum = 0.0;
};

struct DetectionResult {
  RealVector counts;   // real part of column 1 of X_hat
  ComplexMatrix x_hat;
  std::vector<IterationTrace> trace;
  int iterations = 0;
};

/// Runs AMP-DA on one block. The returned iterate is the last one before the
/// residual stopped decreasing (after min_iters_before_stop), or the final
/// one at max_iters. Throws std::runtime_error if the state turns NaN.
DetectionResult detect_block(const ReceivedBlock& y, const ModCodebook& p,
                             const DetectorConfig& cfg);

/// Detects every block; honours cfg.residual_rule. Per-block detection runs
/// on up to `workers` threads.
std::vector<DetectionResult> detect_blocks(const std::vector<ReceivedBlock>& blocks,
                                           const ModCodebook& p,
                                           const DetectorConfig& cfg, int workers = 1);

/// Mode of floor(||x_d||_1 + 1/2) over the blocks; ties go to the larger count.
int estimate_ka(const std::vector<RealVector>& x_hat_blocks);

/// floor(mean_d ||x_d||_1 + 1/2); the baseline the majority vote is compared to.
int estimate_ka_mean(const std::vector<RealVector>& x_hat_blocks);

/// (1/ka_hat) concat_d(U x_d), truncated to `dim` entries.
RealVector aggregate(const QuantCodebook& u, const std::vector<RealVector>& x_hat_blocks,
                     int ka_hat, int dim);

void write_trace_csv(const std::vector<IterationTrace>& trace,
                     const std::filesystem::path& path);

}  // namespace mdaircomp
