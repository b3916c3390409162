#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mdaircomp/detector.hpp"

namespace mdaircomp {

/// Synthetic detector benchmark: random participants, synthetic selections,
/// channel, AMP-DA, then NMSE and K_a estimates per trial.
struct BenchSettings {
  int codewords = 64;
  int devices = 40;
  double activity_ratio = 0.3;
  double eps_h = 0.14;
  // When > 0, exactly this many non-faded devices are active instead.
  int fixed_active = 0;
  int blocks = 1;
  // Each block draws this many distinct codewords and every device picks one
  // of them uniformly; 0 means uniform over the whole codebook.
  int hot_codewords = 0;
  // Every device in a block picks a different codeword (unit counts).
  bool distinct = false;
  double phase_max = 0.0;
  DetectorConfig detector;
  std::uint64_t seed = 1;
  int workers = 1;

  void validate() const;
};

struct BenchPoint {
  double snr_db = 20.0;
  int seq_len = 20;
  int antennas = 4;
};

struct BenchTrial {
  int trial = 0;
  BenchPoint point;
  int ka_true = 0;
  int ka_mv = 0;  // majority vote
  int ka_me = 0;  // mean estimator
  double nmse_db = 0.0;
  int exact_blocks = 0;  // blocks whose rounded counts equal the truth
  double mean_iterations = 0.0;
};

/// Trial `trial` at `point`. The participants, selections and codebook depend
/// only on (seed, trial), so different points see the same traffic.
BenchTrial run_bench_trial(const BenchSettings& s, const BenchPoint& point, int trial);

/// Every trial of every point, trials in parallel on s.workers threads.
std::vector<BenchTrial> run_bench(const BenchSettings& s, const std::vector<BenchPoint>& points,
                                  int trials);

struct BenchSummary {
  BenchPoint point;
  int trials = 0;
  double median_nmse_db = 0.0;
  double mv_hit_rate = 0.0;
  double me_hit_rate = 0.0;
  std::map<int, double> mv_error_pmf;
  std::map<int, double> me_error_pmf;
};

/// One summary per distinct point, in first-seen order.
std::vector<BenchSummary> summarize(const std::vector<BenchTrial>& trials);

const std::vector<std::string>& bench_csv_header();
std::vector<std::string> bench_csv_row(const BenchTrial& t);
const std::vector<std::string>& bench_summary_header();
std::vector<std::string> bench_summary_row(const BenchSummary& s);
const std::vector<std::string>& pmf_csv_header();
std::vector<std::vector<std::string>> pmf_csv_rows(const BenchSummary& s);

}  // namespace mdaircomp
