#include "mdaircomp/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mdaircomp/channel.hpp"
#include "mdaircomp/manifest.hpp"
#include "mdaircomp/metrics.hpp"
#include "mdaircomp/modcodebook.hpp"
#include "mdaircomp/parallel.hpp"

namespace mdaircomp {

void BenchSettings::validate() const {
  if (codewords < 1) throw std::invalid_argument("codewords must be >= 1");
  if (devices < 1) throw std::invalid_argument("devices must be >= 1");
  if (!(activity_ratio > 0.0 && activity_ratio <= 1.0))
    throw std::invalid_argument("activity_ratio must lie in (0, 1]");
  if (fixed_active < 0 || fixed_active > devices)
    throw std::invalid_argument("fixed_active must lie in [0, devices]");
  if (blocks < 1) throw std::invalid_argument("blocks must be >= 1");
  if (hot_codewords < 0 || hot_codewords > codewords)
    throw std::invalid_argument("hot_codewords must lie in [0, codewords]");
  if (distinct && (fixed_active > 0 ? fixed_active : devices) > codewords)
    throw std::invalid_argument("distinct selections need at least as many codewords as devices");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  detector.validate();
}

BenchTrial run_bench_trial(const BenchSettings& s, const BenchPoint& point, int trial) {
  if (point.seq_len < 1 || point.antennas < 1)
    throw std::invalid_argument("bench point needs seq_len, antennas >= 1");
  const std::uint64_t ts = derive_seed(s.seed, "bench-trial", static_cast<std::uint64_t>(trial));
  const ModCodebook p = ModCodebook::generate(point.seq_len, s.codewords, derive_seed(ts, "modcodebook"));
  const ChannelRealization h = sample_channels(s.devices, point.antennas, derive_seed(ts, "channel"));
  std::vector<int> candidates(s.devices);
  std::iota(candidates.begin(), candidates.end(), 0);

  std::vector<int> active;
  if (s.fixed_active > 0) {
    active = select_participants(candidates, 1.0, h, s.eps_h, derive_seed(ts, "select"));
    Rng rng(derive_seed(ts, "select-fixed"));
    std::shuffle(active.begin(), active.end(), rng);
    if (static_cast<int>(active.size()) < s.fixed_active)
      throw std::runtime_error("too few non-faded devices for fixed_active");
    active.resize(s.fixed_active);
    std::sort(active.begin(), active.end());
  } else {
    active = select_participants(candidates, s.activity_ratio, h, s.eps_h, derive_seed(ts, "select"));
  }

  BenchTrial out;
  out.trial = trial;
  out.point = point;
  out.ka_true = static_cast<int>(active.size());

  Rng pick(derive_seed(ts, "selections"));
  std::vector<int> order(s.codewords);
  std::vector<ReceivedBlock> received;
  std::vector<RealVector> truth;
  TransmitOptions opts;
  opts.snr_db = point.snr_db;
  opts.phase_max = s.phase_max;
  opts.phase_seed = derive_seed(ts, "phase");
  for (int d = 0; d < s.blocks; ++d) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), pick);
    const int pool = s.hot_codewords > 0 ? s.hot_codewords : s.codewords;
    std::uniform_int_distribution<int> u(0, pool - 1);
    std::vector<std::pair<int, int>> sel;
    for (std::size_t i = 0; i < active.size(); ++i)
      sel.emplace_back(active[i], s.distinct ? order[i] : order[u(pick)]);
    opts.noise_seed = derive_seed(ts, "noise", static_cast<std::uint64_t>(d));
    Transmission tx = transmit_block(p, sel, h, opts);
    received.push_back(std::move(tx.received));
    truth.push_back(tx.truth.counts_vector());
  }

  const auto results = detect_blocks(received, p, s.detector, 1);
  std::vector<RealVector> x_hat;
  double iterations = 0.0;
  for (std::size_t d = 0; d < results.size(); ++d) {
    x_hat.push_back(results[d].counts);
    iterations += results[d].iterations;
    const RealVector rounded = results[d].counts.array().round().matrix();
    if (rounded == truth[d]) ++out.exact_blocks;
  }
  out.mean_iterations = iterations / static_cast<double>(results.size());
  out.nmse_db = nmse_db(truth, x_hat);
  out.ka_mv = estimate_ka(x_hat);
  out.ka_me = estimate_ka_mean(x_hat);
  return out;
}

std::vector<BenchTrial> run_bench(const BenchSettings& s, const std::vector<BenchPoint>& points,
                                  int trials) {
  s.validate();
  if (trials < 0) throw std::invalid_argument("trials must be >= 0");
  const int per_point = trials;
  std::vector<BenchTrial> out(points.size() * static_cast<std::size_t>(per_point));
  parallel_for(static_cast<int>(out.size()), s.workers, [&](int i) {
    out[i] = run_bench_trial(s, points[i / per_point], i % per_point);
  });
  return out;
}

std::vector<BenchSummary> summarize(const std::vector<BenchTrial>& trials) {
  auto same = [](const BenchPoint& a, const BenchPoint& b) {
    return a.snr_db == b.snr_db && a.seq_len == b.seq_len && a.antennas == b.antennas;
  };
  std::vector<BenchPoint> points;
  for (const auto& t : trials)
    if (std::none_of(points.begin(), points.end(), [&](const auto& p) { return same(p, t.point); }))
      points.push_back(t.point);

  std::vector<BenchSummary> out;
  for (const auto& p : points) {
    std::vector<double> nmse;
    std::vector<int> mv_err;
    std::vector<int> me_err;
    for (const auto& t : trials) {
      if (!same(t.point, p)) continue;
      nmse.push_back(t.nmse_db);
      mv_err.push_back(t.ka_mv - t.ka_true);
      me_err.push_back(t.ka_me - t.ka_true);
    }
    BenchSummary s;
    s.point = p;
    s.trials = static_cast<int>(nmse.size());
    s.median_nmse_db = median(nmse);
    s.mv_error_pmf = error_pmf(mv_err);
    s.me_error_pmf = error_pmf(me_err);
    s.mv_hit_rate = s.mv_error_pmf.contains(0) ? s.mv_error_pmf.at(0) : 0.0;
    s.me_hit_rate = s.me_error_pmf.contains(0) ? s.me_error_pmf.at(0) : 0.0;
    out.push_back(std::move(s));
  }
  return out;
}

const std::vector<std::string>& bench_csv_header() {
  static const std::vector<std::string> h = {"trial",  "snr_db", "seq_len", "antennas",
                                             "ka_true", "ka_mv", "ka_me",   "nmse_db",
                                             "exact_blocks", "mean_iterations"};
  return h;
}

std::vector<std::string> bench_csv_row(const BenchTrial& t) {
  return {std::to_string(t.trial),      format_double(t.point.snr_db),
          std::to_string(t.point.seq_len), std::to_string(t.point.antennas),
          std::to_string(t.ka_true),    std::to_string(t.ka_mv),
          std::to_string(t.ka_me),      format_double(t.nmse_db),
          std::to_string(t.exact_blocks), format_double(t.mean_iterations)};
}

const std::vector<std::string>& bench_summary_header() {
  static const std::vector<std::string> h = {"snr_db",         "seq_len",     "antennas", "trials",
                                             "median_nmse_db", "mv_hit_rate", "me_hit_rate"};
  return h;
}

std::vector<std::string> bench_summary_row(const BenchSummary& s) {
  return {format_double(s.point.snr_db), std::to_string(s.point.seq_len),
          std::to_string(s.point.antennas), std::to_string(s.trials),
          format_double(s.median_nmse_db), format_double(s.mv_hit_rate),
          format_double(s.me_hit_rate)};
}

const std::vector<std::string>& pmf_csv_header() {
  static const std::vector<std::string> h = {"snr_db", "seq_len", "antennas",
                                             "estimator", "ka_error", "probability"};
  return h;
}

std::vector<std::vector<std::string>> pmf_csv_rows(const BenchSummary& s) {
  std::vector<std::vector<std::string>> rows;
  auto emit = [&](const char* name, const std::map<int, double>& pmf) {
    for (const auto& [err, prob] : pmf)
      rows.push_back({format_double(s.point.snr_db), std::to_string(s.point.seq_len),
                      std::to_string(s.point.antennas), name, std::to_string(err),
                      format_double(prob)});
  };
  emit("mv", s.mv_error_pmf);
  emit("me", s.me_error_pmf);
  return rows;
}

}  // namespace mdaircomp
