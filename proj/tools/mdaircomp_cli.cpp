// mdaircomp: command-line front end (overhead, detect-bench, feel, sweep).

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mdaircomp/config.hpp"
#include "mdaircomp/experiments.hpp"
#include "mdaircomp/feel.hpp"
#include "mdaircomp/manifest.hpp"
#include "mdaircomp/metrics.hpp"

namespace fs = std::filesystem;
using namespace mdaircomp;

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::string out_dir;
};

struct BenchArgs {
  std::vector<double> snr;
  std::vector<int> seq_len;
  std::vector<int> antennas;
};

struct Axis {
  std::string key;
  std::vector<std::string> values;
};

std::string default_out_dir() {
  if (const char* env = std::getenv("MDAIRCOMP_OUT_DIR"); env && *env) return env;
  return "results";
}

std::pair<std::string, std::string> split_assignment(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + s + "'");
  return {s.substr(0, eq), s.substr(eq + 1)};
}

ExperimentConfig resolve(const Common& c, const std::vector<std::pair<std::string, std::string>>& flags) {
  ExperimentConfig cfg;
  cfg.out_dir = default_out_dir();
  if (!c.config_file.empty()) cfg = load_config(c.config_file, cfg);
  for (const auto& s : c.sets) {
    const auto [k, v] = split_assignment(s);
    apply_setting(cfg, k, v);
  }
  for (const auto& [k, v] : flags) apply_setting(cfg, k, v);
  if (!c.out_dir.empty()) cfg.out_dir = c.out_dir;
  cfg.validate();
  return cfg;
}

RunManifest start_manifest(const std::string& command, const ExperimentConfig& cfg) {
  RunManifest m;
  m.command = command;
  m.git_describe = build_git_describe();
  m.master_seed = cfg.feel.seed;
  m.config = to_json(cfg);
  return m;
}

int run_overhead(std::int64_t w, std::int64_t q, std::int64_t l, std::int64_t k, std::int64_t p,
                 const fs::path& out_dir) {
  const OverheadRow row = overhead_table(w, q, l, k, p);
  std::cout << "scheme,slots\n"
            << "vq_ofdma," << row.vq_ofdma << "\n"
            << "fsk_mv," << row.fsk_mv << "\n"
            << "obda," << row.obda << "\n"
            << "md_aircomp," << row.md_aircomp << "\n";
  RunManifest m;
  m.command = "overhead";
  m.git_describe = build_git_describe();
  m.config = {{"w", w}, {"q", q}, {"l", l}, {"k", k}, {"p", p}};
  m.outputs = {"overhead.csv"};
  m.write(out_dir / "overhead_manifest.json");
  CsvWriter csv(out_dir / "overhead.csv", {"w", "q", "l", "k", "p", "vq_ofdma", "fsk_mv", "obda",
                                           "md_aircomp"});
  csv.write_row({std::to_string(w), std::to_string(q), std::to_string(l), std::to_string(k),
                 std::to_string(p), std::to_string(row.vq_ofdma), std::to_string(row.fsk_mv),
                 std::to_string(row.obda), std::to_string(row.md_aircomp)});
  return 0;
}

void run_detect_bench(const ExperimentConfig& cfg, const BenchArgs& args, const fs::path& out) {
  std::vector<BenchPoint> points;
  const auto snrs = args.snr.empty() ? std::vector<double>{cfg.feel.snr_db} : args.snr;
  const auto ls = args.seq_len.empty() ? std::vector<int>{cfg.feel.seq_len} : args.seq_len;
  const auto ms = args.antennas.empty() ? std::vector<int>{cfg.feel.antennas} : args.antennas;
  for (int m : ms)
    for (int l : ls)
      for (double snr : snrs) points.push_back({snr, l, m});

  RunManifest manifest = start_manifest("detect-bench", cfg);
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : points)
    pts.push_back({{"snr_db", format_double(p.snr_db)}, {"seq_len", p.seq_len}, {"antennas", p.antennas}});
  manifest.config["bench_points"] = pts;
  manifest.seeds["bench_trial_0"] = derive_seed(cfg.feel.seed, "bench-trial", 0);
  manifest.outputs = {"bench_trials.csv", "bench_summary.csv", "bench_pmf.csv"};
  manifest.write(out / "detect_bench_manifest.json");

  const BenchSettings settings = cfg.bench_settings();
  CsvWriter trials_csv(out / "bench_trials.csv", bench_csv_header());
  CsvWriter summary_csv(out / "bench_summary.csv", bench_summary_header());
  CsvWriter pmf_csv(out / "bench_pmf.csv", pmf_csv_header());
  for (const auto& p : points) {
    const auto trials = run_bench(settings, {p}, cfg.trials);
    for (const auto& t : trials) trials_csv.write_row(bench_csv_row(t));
    if (trials.empty()) continue;
    for (const auto& s : summarize(trials)) {
      summary_csv.write_row(bench_summary_row(s));
      for (const auto& row : pmf_csv_rows(s)) pmf_csv.write_row(row);
      std::cout << "snr=" << format_double(p.snr_db) << " L=" << p.seq_len << " M=" << p.antennas
                << " median_nmse_db=" << format_double(s.median_nmse_db)
                << " mv_hit=" << format_double(s.mv_hit_rate)
                << " me_hit=" << format_double(s.me_hit_rate) << "\n";
    }
  }
}

void run_feel_cmd(const ExperimentConfig& cfg, const fs::path& out) {
  RunManifest manifest = start_manifest("feel", cfg);
  for (int r = 0; r < cfg.replicates; ++r)
    manifest.seeds["replicate_" + std::to_string(r)] = cfg.replicate_seed(r);
  manifest.outputs = {"feel_rounds.csv"};
  for (int r = 0; r < cfg.replicates; ++r)
    for (Scheme s : cfg.schemes)
      manifest.outputs.push_back("weights_" + std::string(scheme_name(s)) + "_" +
                                 std::to_string(cfg.replicate_seed(r)) + ".csv");
  manifest.write(out / "feel_manifest.json");

  CsvWriter rounds_csv(out / "feel_rounds.csv", round_csv_header());
  std::map<Scheme, double> final_acc;
  for (int r = 0; r < cfg.replicates; ++r) {
    FeelConfig fc = cfg.feel;
    fc.seed = cfg.replicate_seed(r);
    for (Scheme s : cfg.schemes) {
      if (cfg.rounds == 0) continue;
      FeelSimulation sim(fc, s);
      RoundRecord last;
      for (int t = 0; t < cfg.rounds; ++t) {
        last = sim.run_round();
        rounds_csv.write_row(round_csv_row(last));
      }
      final_acc[s] += last.accuracy / cfg.replicates;
      write_weights_csv(sim.model(), out / ("weights_" + std::string(scheme_name(s)) + "_" +
                                            std::to_string(fc.seed) + ".csv"));
    }
  }
  for (const auto& [s, acc] : final_acc)
    std::cout << scheme_name(s) << " mean_final_accuracy=" << format_double(acc) << "\n";
}

void run_sweep(const ExperimentConfig& base, const std::string& target,
               const std::vector<Axis>& axes, const BenchArgs& bench, const fs::path& out) {
  if (axes.empty()) throw ConfigError("sweep needs at least one --axis");
  std::size_t total = 1;
  for (const auto& a : axes) total *= a.values.size();

  std::vector<std::string> header = {"point"};
  for (const auto& a : axes) header.push_back(a.key);
  header.push_back("dir");

  // Validate every grid point before running any of them.
  std::vector<ExperimentConfig> grid;
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < total; ++i) {
    ExperimentConfig cfg = base;
    std::vector<std::string> row = {std::to_string(i)};
    std::size_t rest = i;
    for (const auto& a : axes) {
      const auto& v = a.values[rest % a.values.size()];
      rest /= a.values.size();
      apply_setting(cfg, a.key, v);
      row.push_back(setting_text(cfg, a.key));
    }
    char dir[32];
    std::snprintf(dir, sizeof dir, "point_%03zu", i);
    cfg.out_dir = base.out_dir / dir;
    cfg.validate();
    row.push_back(dir);
    grid.push_back(std::move(cfg));
    rows.push_back(std::move(row));
  }

  RunManifest manifest = start_manifest("sweep", base);
  manifest.config["target"] = target;
  for (const auto& a : axes) manifest.config["axes"][a.key] = a.values;
  manifest.outputs = {"sweep_index.csv"};
  manifest.write(out / "sweep_manifest.json");

  CsvWriter index(out / "sweep_index.csv", header);
  for (std::size_t i = 0; i < total; ++i) {
    index.write_row(rows[i]);
    if (target == "feel")
      run_feel_cmd(grid[i], grid[i].out_dir);
    else
      run_detect_bench(grid[i], bench, grid[i].out_dir);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Digital over-the-air aggregation simulator"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_file, "key = value config file")
        ->check(CLI::ExistingFile);
    sub->add_option("--set", common.sets, "override one config key (key=value)");
    sub->add_option("--out", common.out_dir,
                    "output directory (default $MDAIRCOMP_OUT_DIR or ./results)");
  };

  std::int64_t ow = 269722, oq = 20, ol = 20, ok = 40, op = 1024;
  std::string o_out;
  auto* overhead = app.add_subcommand("overhead", "uplink time slots per scheme");
  overhead->add_option("--w", ow, "model dimension W");
  overhead->add_option("--q", oq, "VQ block length Q");
  overhead->add_option("--l", ol, "sequence length L");
  overhead->add_option("--k", ok, "devices K");
  overhead->add_option("--p", op, "subcarriers P");
  overhead->add_option("--out", o_out, "output directory");

  std::vector<std::pair<std::string, std::string>> flags;
  auto flag_setter = [&](std::string key) {
    return [&flags, key](const std::string& v) { flags.emplace_back(key, v); };
  };

  BenchArgs bench_args;
  bool b_distinct = false;
  auto* bench = app.add_subcommand("detect-bench", "synthetic AMP-DA benchmark");
  add_common(bench);
  bench->add_option("--snr", bench_args.snr, "SNR points in dB")->delimiter(',');
  bench->add_option("--l", bench_args.seq_len, "sequence lengths")->delimiter(',');
  bench->add_option("--m", bench_args.antennas, "antenna counts")->delimiter(',');
  bench->add_option_function<std::string>("--trials", flag_setter("trials"), "trials per point");
  bench->add_option_function<std::string>("--blocks", flag_setter("blocks"), "blocks D per trial");
  bench->add_option_function<std::string>("--hot", flag_setter("hot_codewords"),
                                          "codewords in play per block (0 = all)");
  bench->add_option_function<std::string>("--fixed-active", flag_setter("fixed_active"),
                                          "exact number of active devices");
  bench->add_flag("--distinct", b_distinct, "unit counts: every device picks its own codeword");
  bench->add_option_function<std::string>("--seed", flag_setter("seed"), "master seed");
  bench->add_option_function<std::string>("--workers", flag_setter("workers"), "threads");

  std::vector<std::string> f_schemes;
  auto* feel = app.add_subcommand("feel", "federated training with the chosen scheme arms");
  add_common(feel);
  feel->add_option("--scheme", f_schemes, "ifed, pa, mdaircomp (repeat or comma-separate)")
      ->delimiter(',');
  feel->add_option_function<std::string>("--rounds", flag_setter("rounds"), "training rounds T");
  feel->add_option_function<std::string>("--replicates", flag_setter("replicates"), "seeds");
  feel->add_option_function<std::string>("--snr", flag_setter("snr_db"), "SNR in dB");
  feel->add_option_function<std::string>("--m", flag_setter("antennas"), "antennas M");
  feel->add_option_function<std::string>("--l", flag_setter("seq_len"), "sequence length L");
  feel->add_option_function<std::string>("--seed", flag_setter("seed"), "master seed");
  feel->add_option_function<std::string>("--workers", flag_setter("workers"), "threads");

  std::string s_target = "detect-bench";
  std::vector<std::string> s_axes;
  auto* sweep = app.add_subcommand("sweep", "grid over config keys");
  add_common(sweep);
  sweep->add_option("--target", s_target, "detect-bench or feel")
      ->check(CLI::IsMember({"detect-bench", "feel"}));
  sweep->add_option("--axis", s_axes, "key=v1,v2,... (repeatable)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (overhead->parsed()) {
      fs::path out = o_out.empty() ? fs::path(default_out_dir()) : fs::path(o_out);
      return run_overhead(ow, oq, ol, ok, op, out);
    }
    if (bench->parsed()) {
      if (b_distinct) flags.emplace_back("distinct", "true");
      const ExperimentConfig cfg = resolve(common, flags);
      run_detect_bench(cfg, bench_args, cfg.out_dir);
      return 0;
    }
    if (feel->parsed()) {
      if (!f_schemes.empty()) {
        std::string joined;
        for (const auto& s : f_schemes) joined += (joined.empty() ? "" : ",") + s;
        flags.emplace_back("schemes", joined);
      }
      const ExperimentConfig cfg = resolve(common, flags);
      run_feel_cmd(cfg, cfg.out_dir);
      return 0;
    }
    if (sweep->parsed()) {
      const ExperimentConfig cfg = resolve(common, flags);
      std::vector<Axis> axes;
      for (const auto& a : s_axes) {
        const auto [k, v] = split_assignment(a);
        Axis axis{k, {}};
        std::string item;
        for (char ch : v + ",") {
          if (ch == ',') {
            if (!item.empty()) axis.values.push_back(item);
            item.clear();
          } else {
            item += ch;
          }
        }
        if (axis.values.empty()) throw ConfigError("axis " + k + " has no values");
        setting_text(cfg, k);  // rejects unknown keys up front
        axes.push_back(std::move(axis));
      }
      run_sweep(cfg, s_target, axes, {}, cfg.out_dir);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
