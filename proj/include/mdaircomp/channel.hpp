#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mdaircomp/common.hpp"
#include "mdaircomp/modcodebook.hpp"

namespace mdaircomp {

/// Uplink gains, row k = h_k over the M base-station antennas.
struct ChannelRealization {
  ComplexMatrix gains;

  int devices() const { return static_cast<int>(gains.rows()); }
  int antennas() const { return static_cast<int>(gains.cols()); }
};

/// Superposed selections of one block: counts is column 1 of X_d, x_full all
/// of X_d (N x M).
struct EquivalentSignal {
  std::vector<int> counts;
  ComplexMatrix x_full;

  RealVector counts_vector() const;
};

struct ReceivedBlock {
  ComplexMatrix y;
  double noise_var = 0.0;
};

/// Raised when every sampled device is in a deep fade; the round is skipped.
class NoParticipantsError : public std::runtime_error {
 public:
  NoParticipantsError() : std::runtime_error("no participants") {}
};

inline constexpr double kDefaultDeepFadeThreshold = 0.14;

ChannelRealization sample_channels(int devices, int antennas, std::uint64_t seed);

/// ceil(ratio * count), tolerant of ratio * count landing a hair above an
/// integer.
int active_count(int count, double activity_ratio);

/// Samples ceil(ratio * |candidates|) devices uniformly, then drops any whose
/// first-antenna gain magnitude is below eps_h. Returns the survivors in
/// ascending id order. Throws NoParticipantsError if none survive.
std::vector<int> select_participants(const std::vector<int>& candidates,
                                     double activity_ratio,
                                     const ChannelRealization& h, double eps_h,
                                     std::uint64_t seed);

struct TransmitOptions {
  double snr_db = std::numeric_limits<double>::infinity();
  // Max residual phase after pre-equalization; 0 means perfect CSI.
  double phase_max = 0.0;
  std::uint64_t noise_seed = 0;
  // Phase offsets are drawn per device from this seed, so one value shared by
  // all blocks of a round keeps each device's offset fixed within the round.
  std::uint64_t phase_seed = 0;
};

struct Transmission {
  ReceivedBlock received;
  EquivalentSignal truth;
};

/// One block of Y = P X + Z with channel inversion on antenna 1.
/// `selections` holds (device id, codeword index) pairs.
Transmission transmit_block(const ModCodebook& p,
                            const std::vector<std::pair<int, int>>& selections,
                            const ChannelRealization& h, const TransmitOptions& opts);

/// sigma_n^2 for a noiseless signal at the given SNR:
/// ||S||_F^2 / (L M 10^(snr/10)); 0 for infinite SNR.
double noise_variance_for(const ComplexMatrix& noiseless, double snr_db);

/// Sum over `devices` of 1/|h_k1|^2, the total pre-equalization power.
double inversion_power(const ChannelRealization& h, const std::vector<int>& devices);

/// Per-device phase offset used by transmit_block.
double phase_offset(std::uint64_t phase_seed, int device, double phase_max);

void write_channel_csv(const ChannelRealization& h, const std::filesystem::path& path);

}  // namespace mdaircomp
