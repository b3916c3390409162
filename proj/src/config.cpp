#include "mdaircomp/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "mdaircomp/manifest.hpp"

namespace mdaircomp {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* type) {
  throw ConfigError("bad value for " + std::string(key) + ": '" + std::string(value) +
                    "' (expected " + type + ")");
}

template <typename T>
T parse_integer(std::string_view key, std::string_view v) {
  T out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) bad_value(key, v, "integer");
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
  if (v == "-inf") return -std::numeric_limits<double>::infinity();
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size() || std::isnan(out))
    bad_value(key, v, "real");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true/false");
}

std::vector<std::string_view> split_list(std::string_view v) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = v.find(',');
    out.push_back(trim(v.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

std::string_view rule_name(ResidualRule r) {
  return r == ResidualRule::Joint ? "joint" : "per_block";
}

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> text;
  std::function<nlohmann::json(const ExperimentConfig&)> json;
};

nlohmann::json real_json(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

// `get` maps a (possibly const) config to the slot the key controls.
template <typename Get>
Field int_field(std::string key, Get get) {
  return {key,
          [key, get](ExperimentConfig& c, std::string_view v) { get(c) = parse_integer<int>(key, v); },
          [get](const ExperimentConfig& c) { return std::to_string(get(c)); },
          [get](const ExperimentConfig& c) -> nlohmann::json { return get(c); }};
}

template <typename Get>
Field real_field(std::string key, Get get) {
  return {key,
          [key, get](ExperimentConfig& c, std::string_view v) { get(c) = parse_real(key, v); },
          [get](const ExperimentConfig& c) { return format_double(get(c)); },
          [get](const ExperimentConfig& c) { return real_json(get(c)); }};
}

template <typename Get>
Field bool_field(std::string key, Get get) {
  return {key,
          [key, get](ExperimentConfig& c, std::string_view v) { get(c) = parse_bool(key, v); },
          [get](const ExperimentConfig& c) -> std::string { return get(c) ? "true" : "false"; },
          [get](const ExperimentConfig& c) -> nlohmann::json { return get(c); }};
}

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(int_field("devices", [](auto& c) -> auto& { return c.feel.devices; }));
    f.push_back(real_field("activity_ratio", [](auto& c) -> auto& { return c.feel.activity_ratio; }));
    f.push_back(real_field("eps_h", [](auto& c) -> auto& { return c.feel.eps_h; }));
    f.push_back(int_field("antennas", [](auto& c) -> auto& { return c.feel.antennas; }));
    f.push_back(int_field("bits", [](auto& c) -> auto& { return c.feel.bits; }));
    f.push_back(int_field("block_dim", [](auto& c) -> auto& { return c.feel.block_dim; }));
    f.push_back(int_field("seq_len", [](auto& c) -> auto& { return c.feel.seq_len; }));
    f.push_back(real_field("snr_db", [](auto& c) -> auto& { return c.feel.snr_db; }));
    f.push_back(real_field("phase_max", [](auto& c) -> auto& { return c.feel.phase_max; }));
    f.push_back(int_field("ka_prior", [](auto& c) -> auto& { return c.feel.ka_prior; }));
    f.push_back(int_field("max_iters", [](auto& c) -> auto& { return c.feel.detector.max_iters; }));
    f.push_back(real_field("damping", [](auto& c) -> auto& { return c.feel.detector.damping; }));
    f.push_back(int_field("min_iters_before_stop",
                          [](auto& c) -> auto& { return c.feel.detector.min_iters_before_stop; }));
    f.push_back({"residual_rule",
                 [](C& c, std::string_view v) {
                   if (v == "per_block") c.feel.detector.residual_rule = ResidualRule::PerBlock;
                   else if (v == "joint") c.feel.detector.residual_rule = ResidualRule::Joint;
                   else bad_value("residual_rule", v, "per_block/joint");
                 },
                 [](const C& c) { return std::string(rule_name(c.feel.detector.residual_rule)); },
                 [](const C& c) -> nlohmann::json { return rule_name(c.feel.detector.residual_rule); }});
    f.push_back(real_field("eta", [](auto& c) -> auto& { return c.feel.eta; }));
    f.push_back(real_field("eta_l", [](auto& c) -> auto& { return c.feel.eta_l; }));
    f.push_back(int_field("local_steps", [](auto& c) -> auto& { return c.feel.local_steps; }));
    f.push_back(int_field("batch", [](auto& c) -> auto& { return c.feel.batch; }));
    f.push_back(int_field("lloyd_iters", [](auto& c) -> auto& { return c.feel.lloyd_iters; }));
    f.push_back(bool_field("refresh_codebook", [](auto& c) -> auto& { return c.feel.refresh_codebook; }));
    f.push_back(bool_field("oracle_ka", [](auto& c) -> auto& { return c.feel.oracle_ka; }));
    f.push_back(bool_field("orthogonal_codebook",
                           [](auto& c) -> auto& { return c.feel.orthogonal_codebook; }));
    f.push_back(int_field("feature_dim", [](auto& c) -> auto& { return c.feel.task.feature_dim; }));
    f.push_back(int_field("classes", [](auto& c) -> auto& { return c.feel.task.classes; }));
    f.push_back(real_field("separation", [](auto& c) -> auto& { return c.feel.task.separation; }));
    f.push_back(real_field("noise", [](auto& c) -> auto& { return c.feel.task.noise; }));
    f.push_back(int_field("train_per_class", [](auto& c) -> auto& { return c.feel.task.train_per_class; }));
    f.push_back(int_field("test_per_class", [](auto& c) -> auto& { return c.feel.task.test_per_class; }));
    f.push_back(int_field("bs_per_class", [](auto& c) -> auto& { return c.feel.task.bs_per_class; }));
    f.push_back(real_field("random_frac", [](auto& c) -> auto& { return c.feel.task.random_frac; }));
    f.push_back({"seed",
                 [](C& c, std::string_view v) { c.feel.seed = parse_integer<std::uint64_t>("seed", v); },
                 [](const C& c) { return std::to_string(c.feel.seed); },
                 [](const C& c) -> nlohmann::json { return c.feel.seed; }});
    f.push_back(int_field("workers", [](auto& c) -> auto& { return c.feel.workers; }));
    f.push_back(int_field("rounds", [](auto& c) -> auto& { return c.rounds; }));
    f.push_back(int_field("replicates", [](auto& c) -> auto& { return c.replicates; }));
    f.push_back({"schemes",
                 [](C& c, std::string_view v) {
                   std::vector<Scheme> out;
                   try {
                     for (auto item : split_list(v)) out.push_back(parse_scheme(item));
                   } catch (const std::invalid_argument&) {
                     bad_value("schemes", v, "comma list of ifed/pa/mdaircomp");
                   }
                   c.schemes = std::move(out);
                 },
                 [](const C& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.schemes.size(); ++i)
                     s += (i ? "," : "") + std::string(scheme_name(c.schemes[i]));
                   return s;
                 },
                 [](const C& c) {
                   nlohmann::json j = nlohmann::json::array();
                   for (auto s : c.schemes) j.push_back(scheme_name(s));
                   return j;
                 }});
    f.push_back(int_field("trials", [](auto& c) -> auto& { return c.trials; }));
    f.push_back(int_field("blocks", [](auto& c) -> auto& { return c.blocks; }));
    f.push_back(int_field("hot_codewords", [](auto& c) -> auto& { return c.hot_codewords; }));
    f.push_back(int_field("fixed_active", [](auto& c) -> auto& { return c.fixed_active; }));
    f.push_back(bool_field("distinct", [](auto& c) -> auto& { return c.distinct; }));
    f.push_back({"out_dir",
                 [](C& c, std::string_view v) {
                   if (v.empty()) bad_value("out_dir", v, "path");
                   c.out_dir = std::string(v);
                 },
                 [](const C& c) { return c.out_dir.string(); },
                 [](const C& c) -> nlohmann::json { return c.out_dir.string(); }});
    return f;
  }();
  return table;
}

const Field& field(std::string_view key) {
  for (const auto& f : fields())
    if (f.key == key) return f;
  throw ConfigError("unknown config key: " + std::string(key));
}

}  // namespace

std::uint64_t ExperimentConfig::replicate_seed(int r) const {
  return derive_seed(feel.seed, "replicate", static_cast<std::uint64_t>(r));
}

BenchSettings ExperimentConfig::bench_settings() const {
  BenchSettings s;
  s.codewords = feel.codewords();
  s.devices = feel.devices;
  s.activity_ratio = feel.activity_ratio;
  s.eps_h = feel.eps_h;
  s.fixed_active = fixed_active;
  s.blocks = blocks;
  s.hot_codewords = hot_codewords;
  s.distinct = distinct;
  s.phase_max = feel.phase_max;
  s.detector = feel.detector_config();
  s.seed = feel.seed;
  s.workers = feel.workers;
  return s;
}

void ExperimentConfig::validate() const {
  try {
    feel.validate();
    bench_settings().validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (rounds < 0) throw ConfigError("rounds must be >= 0");
  if (replicates < 1) throw ConfigError("replicates must be >= 1");
  if (schemes.empty()) throw ConfigError("schemes must not be empty");
  if (trials < 0) throw ConfigError("trials must be >= 0");
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  field(trim(key)).set(cfg, trim(value));
}

ExperimentConfig parse_config(std::string_view text, ExperimentConfig base) {
  std::set<std::string, std::less<>> seen;
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    const std::string_view key = trim(line.substr(0, eq));
    if (!seen.insert(std::string(key)).second)
      throw ConfigError(where + "repeated key " + std::string(key));
    try {
      apply_setting(base, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::move(base));
}

std::string setting_text(const ExperimentConfig& cfg, std::string_view key) {
  return field(key).text(cfg);
}

std::string to_config_text(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.text(cfg) + "\n";
  return out;
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& f : fields()) j[f.key] = f.json(cfg);
  j["codewords"] = cfg.feel.codewords();
  j["resolved_ka_prior"] = cfg.feel.resolved_ka_prior();
  return j;
}

}  // namespace mdaircomp
