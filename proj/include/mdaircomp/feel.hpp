#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mdaircomp/channel.hpp"
#include "mdaircomp/detector.hpp"
#include "mdaircomp/model.hpp"
#include "mdaircomp/modcodebook.hpp"
#include "mdaircomp/quantizer.hpp"

namespace mdaircomp {

enum class Scheme {
  IFed,       // ideal links, unquantized averaging
  PA,         // quantized with error feedback, exact averaging
  MDAirComp,  // quantize, modulate, transmit, detect, aggregate
};

std::string_view scheme_name(Scheme s);
/// Accepts "ifed", "pa", "mdaircomp" (case-insensitive).
Scheme parse_scheme(std::string_view name);

/// Gaussian-blob task and how it is split across devices.
struct TaskConfig {
  int feature_dim = 500;
  int classes = 3;
  double separation = 2.0;
  double noise = 1.0;
  int train_per_class = 800;
  int test_per_class = 300;
  int bs_per_class = 40;
  double random_frac = 0.2;
};

struct FeelConfig {
  int devices = 40;
  double activity_ratio = 0.3;
  double eps_h = kDefaultDeepFadeThreshold;
  int antennas = 4;
  int bits = 6;  // J, N = 2^J
  int block_dim = 20;
  int seq_len = 20;
  double snr_db = 20.0;
  double phase_max = 0.0;
  // Zero selects ceil(0.4 K).
  int ka_prior = 0;
  DetectorConfig detector;
  double eta = 1.0;
  double eta_l = 0.01;
  int local_steps = 3;
  int batch = 20;
  int lloyd_iters = kDefaultLloydIters;
  bool refresh_codebook = true;
  bool oracle_ka = false;
  // DFT sequences with L = N instead of random QPSK; for ideal-link runs.
  bool orthogonal_codebook = false;
  TaskConfig task;
  std::uint64_t seed = 1;
  int workers = 1;

  int codewords() const { return 1 << bits; }
  int resolved_ka_prior() const;
  DetectorConfig detector_config() const;
  void validate() const;
};

struct RoundRecord {
  int round = 0;
  Scheme scheme = Scheme::IFed;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double nmse_db = std::numeric_limits<double>::quiet_NaN();
  int ka_true = 0;
  int ka_hat = 0;
  double sparsity = std::numeric_limits<double>::quiet_NaN();
  double p_c1 = std::numeric_limits<double>::quiet_NaN();
  double p_c2 = std::numeric_limits<double>::quiet_NaN();
  std::int64_t symbols_sent = 0;
  bool skipped = false;
  double inversion_power = 0.0;
};

/// Column names of the per-round results CSV, in order.
const std::vector<std::string>& round_csv_header();
std::vector<std::string> round_csv_row(const RoundRecord& r);

/// Everything one scheme arm needs across rounds. All randomness is derived
/// from cfg.seed and the round index, so arms built from the same config see
/// the same data, channels and participants.
class FeelSimulation {
 public:
  FeelSimulation(FeelConfig cfg, Scheme scheme);

  /// Runs the next round (rounds count from 1).
  RoundRecord run_round();

  const Model& model() const { return model_; }
  const FeelConfig& config() const { return cfg_; }
  Scheme scheme() const { return scheme_; }
  int rounds_done() const { return round_; }
  int dim() const { return model_.dim(); }
  const std::vector<DeviceShard>& shards() const { return shards_; }
  const Dataset& test_set() const { return test_; }
  const ErrorState& device_error(int k) const { return errors_.at(k); }
  const std::optional<QuantCodebook>& codebook() const { return codebook_; }
  /// Participants of the last round (empty if it was skipped).
  const std::vector<int>& last_participants() const { return last_participants_; }
  /// Local updates Delta_k and quantized s_k of the last round, by participant
  /// order; quantized is empty for IFed.
  const std::vector<RealVector>& last_deltas() const { return last_deltas_; }
  const std::vector<RealVector>& last_quantized() const { return last_quantized_; }

 private:
  void refresh_codebook();

  FeelConfig cfg_;
  Scheme scheme_;
  DetectorConfig det_cfg_;
  std::vector<DeviceShard> shards_;
  DeviceShard bs_shard_;
  Dataset test_;
  Model model_;
  std::vector<ErrorState> errors_;
  ErrorState bs_error_;
  std::optional<QuantCodebook> codebook_;
  ModCodebook mod_;
  int round_ = 0;
  std::vector<int> last_participants_;
  std::vector<RealVector> last_deltas_;
  std::vector<RealVector> last_quantized_;
};

/// Runs `rounds` rounds and returns every record.
std::vector<RoundRecord> run_feel(const FeelConfig& cfg, Scheme scheme, int rounds);

/// One weight per line, 17 significant digits, header `index,weight`.
void write_weights_csv(const Model& model, const std::filesystem::path& path);

}  // namespace mdaircomp
