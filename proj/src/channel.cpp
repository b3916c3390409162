#include "mdaircomp/channel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <string>

namespace mdaircomp {

RealVector EquivalentSignal::counts_vector() const {
  RealVector v(static_cast<Eigen::Index>(counts.size()));
  for (std::size_t n = 0; n < counts.size(); ++n) v(static_cast<Eigen::Index>(n)) = counts[n];
  return v;
}

ChannelRealization sample_channels(int devices, int antennas, std::uint64_t seed) {
  if (devices < 1 || antennas < 1)
    throw std::invalid_argument("channel dimensions must be >= 1");
  Rng rng(seed);
  ComplexMatrix g(devices, antennas);
  for (int k = 0; k < devices; ++k)
    for (int m = 0; m < antennas; ++m) g(k, m) = complex_normal(rng, 1.0);
  return {std::move(g)};
}

int active_count(int count, double activity_ratio) {
  return static_cast<int>(std::ceil(activity_ratio * count - 1e-9));
}

std::vector<int> select_participants(const std::vector<int>& candidates,
                                     double activity_ratio,
                                     const ChannelRealization& h, double eps_h,
                                     std::uint64_t seed) {
  if (!(activity_ratio > 0.0 && activity_ratio <= 1.0))
    throw std::invalid_argument("activity ratio must lie in (0, 1]");
  if (!(eps_h >= 0.0)) throw std::invalid_argument("deep-fade threshold must be >= 0");

  std::vector<int> pool = candidates;
  Rng rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  const int want = std::min<int>(active_count(static_cast<int>(pool.size()), activity_ratio),
                                 static_cast<int>(pool.size()));
  pool.resize(want);

  std::vector<int> survivors;
  for (int k : pool) {
    if (k < 0 || k >= h.devices()) throw std::out_of_range("device id without a channel");
    if (std::abs(h.gains(k, 0)) >= eps_h) survivors.push_back(k);
  }
  if (survivors.empty()) throw NoParticipantsError();
  std::sort(survivors.begin(), survivors.end());
  return survivors;
}

double noise_variance_for(const ComplexMatrix& noiseless, double snr_db) {
  if (std::isinf(snr_db) && snr_db > 0) return 0.0;
  const double entries = static_cast<double>(noiseless.rows() * noiseless.cols());
  return noiseless.squaredNorm() / (entries * std::pow(10.0, snr_db / 10.0));
}

double phase_offset(std::uint64_t phase_seed, int device, double phase_max) {
  if (phase_max <= 0.0) return 0.0;
  Rng rng(derive_seed(phase_seed, "phase", static_cast<std::uint64_t>(device)));
  std::uniform_real_distribution<double> u(0.0, phase_max);
  return u(rng);
}

Transmission transmit_block(const ModCodebook& p,
                            const std::vector<std::pair<int, int>>& selections,
                            const ChannelRealization& h, const TransmitOptions& opts) {
  if (selections.empty()) throw std::invalid_argument("no selections to transmit");
  const int n_words = p.size();
  const int antennas = h.antennas();

  Transmission out;
  out.truth.counts.assign(n_words, 0);
  out.truth.x_full = ComplexMatrix::Zero(n_words, antennas);
  for (const auto& [device, index] : selections) {
    if (index < 0 || index >= n_words)
      throw std::out_of_range("codeword index " + std::to_string(index) + " out of range");
    if (device < 0 || device >= h.devices()) throw std::out_of_range("unknown device");
    const cd h1 = h.gains(device, 0);
    if (h1 == cd(0.0, 0.0))
      throw std::invalid_argument("device " + std::to_string(device) +
                                  " has a zero first-antenna gain");
    // (1/h_k1) h_k^T, with the antenna-1 entry pinned to exactly 1.
    Eigen::RowVectorXcd row = h.gains.row(device) / h1;
    row(0) = cd(1.0, 0.0);
    const double phi = phase_offset(opts.phase_seed, device, opts.phase_max);
    if (phi != 0.0) row *= std::polar(1.0, phi);
    out.truth.x_full.row(index) += row;
    ++out.truth.counts[index];
  }

  const ComplexMatrix clean = p.sequences() * out.truth.x_full;
  const double noise_var = noise_variance_for(clean, opts.snr_db);
  out.received.noise_var = noise_var;
  out.received.y = clean;
  if (noise_var > 0.0) {
    Rng rng(opts.noise_seed);
    for (Eigen::Index m = 0; m < clean.cols(); ++m)
      for (Eigen::Index l = 0; l < clean.rows(); ++l)
        out.received.y(l, m) += complex_normal(rng, noise_var);
  }
  return out;
}

double inversion_power(const ChannelRealization& h, const std::vector<int>& devices) {
  return std::accumulate(devices.begin(), devices.end(), 0.0, [&](double acc, int k) {
    return acc + 1.0 / std::norm(h.gains(k, 0));
  });
}

void write_channel_csv(const ChannelRealization& h, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "device";
  for (int m = 0; m < h.antennas(); ++m) out << ",re_" << m << ",im_" << m;
  out << '\n' << std::setprecision(17);
  for (int k = 0; k < h.devices(); ++k) {
    out << k;
    for (int m = 0; m < h.antennas(); ++m)
      out << ',' << h.gains(k, m).real() << ',' << h.gains(k, m).imag();
    out << '\n';
  }
}

}  // namespace mdaircomp
