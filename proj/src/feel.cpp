#include "mdaircomp/feel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "mdaircomp/manifest.hpp"
#include "mdaircomp/metrics.hpp"
#include "mdaircomp/parallel.hpp"

namespace mdaircomp {

std::string_view scheme_name(Scheme s) {
  switch (s) {
    case Scheme::IFed: return "ifed";
    case Scheme::PA: return "pa";
    case Scheme::MDAirComp: return "mdaircomp";
  }
  return "?";
}

Scheme parse_scheme(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "ifed") return Scheme::IFed;
  if (lower == "pa") return Scheme::PA;
  if (lower == "mdaircomp" || lower == "md-aircomp") return Scheme::MDAirComp;
  throw std::invalid_argument("unknown scheme: " + std::string(name));
}

int FeelConfig::resolved_ka_prior() const {
  return ka_prior > 0 ? ka_prior : static_cast<int>(std::ceil(0.4 * devices - 1e-9));
}

DetectorConfig FeelConfig::detector_config() const {
  DetectorConfig d = detector;
  d.ka_prior = resolved_ka_prior();
  return d;
}

void FeelConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
  };
  require(devices >= 1, "devices must be >= 1");
  require(activity_ratio > 0.0 && activity_ratio <= 1.0, "activity_ratio must lie in (0, 1]");
  require(eps_h >= 0.0, "eps_h must be >= 0");
  require(antennas >= 1, "antennas must be >= 1");
  require(bits >= 1 && bits <= 16, "bits must lie in [1, 16]");
  require(block_dim >= 1, "block_dim must be >= 1");
  require(seq_len >= 1, "seq_len must be >= 1");
  require(!std::isnan(snr_db), "snr_db must be a number");
  require(phase_max >= 0.0, "phase_max must be >= 0");
  require(ka_prior >= 0, "ka_prior must be >= 0");
  require(eta >= 0.0, "eta must be >= 0");
  require(eta_l > 0.0, "eta_l must be > 0");
  require(local_steps >= 1, "local_steps must be >= 1");
  require(batch >= 1, "batch must be >= 1");
  require(lloyd_iters >= 1, "lloyd_iters must be >= 1");
  require(workers >= 1, "workers must be >= 1");
  require(task.feature_dim >= 1 && task.classes >= 2, "task needs feature_dim >= 1, classes >= 2");
  require(task.noise >= 0.0 && task.separation >= 0.0, "task noise/separation must be >= 0");
  require(task.train_per_class >= 1 && task.test_per_class >= 1 && task.bs_per_class >= 1,
          "task sample counts must be >= 1");
  require(task.random_frac >= 0.0 && task.random_frac <= 1.0, "random_frac must lie in [0, 1]");
  const int w = SoftmaxRegression::parameter_count(task.feature_dim, task.classes);
  const int blocks = block_count(w, block_dim);
  require(blocks >= codewords(),
          "codebook training needs ceil(W/Q) >= 2^J blocks (W=" + std::to_string(w) +
              ", Q=" + std::to_string(block_dim) + ", 2^J=" + std::to_string(codewords()) + ")");
  detector_config().validate();
}

const std::vector<std::string>& round_csv_header() {
  static const std::vector<std::string> header = {
      "round",   "scheme", "seed", "accuracy",     "nmse_db", "ka_true",
      "ka_hat",  "sparsity", "p_c1", "p_c2", "symbols_sent", "skipped", "inversion_power"};
  return header;
}

std::vector<std::string> round_csv_row(const RoundRecord& r) {
  return {std::to_string(r.round),
          std::string(scheme_name(r.scheme)),
          std::to_string(r.seed),
          format_double(r.accuracy),
          format_double(r.nmse_db),
          std::to_string(r.ka_true),
          std::to_string(r.ka_hat),
          format_double(r.sparsity),
          format_double(r.p_c1),
          format_double(r.p_c2),
          std::to_string(r.symbols_sent),
          r.skipped ? "1" : "0",
          format_double(r.inversion_power)};
}

FeelSimulation::FeelSimulation(FeelConfig cfg, Scheme scheme)
    : cfg_(std::move(cfg)), scheme_(scheme) {
  cfg_.validate();
  det_cfg_ = cfg_.detector_config();
  const auto& t = cfg_.task;
  const BlobTask task(t.feature_dim, t.classes, t.separation, t.noise,
                      derive_seed(cfg_.seed, "task"));
  const Dataset train = task.sample(t.train_per_class, derive_seed(cfg_.seed, "train"));
  test_ = task.sample(t.test_per_class, derive_seed(cfg_.seed, "test"));
  bs_shard_ = {-1, task.sample(t.bs_per_class, derive_seed(cfg_.seed, "bs-data"))};
  shards_ = make_noniid_split(train, cfg_.devices, t.random_frac, derive_seed(cfg_.seed, "split"));
  model_ = Model::zeros(t.feature_dim, t.classes);
  errors_.assign(cfg_.devices, ErrorState::zeros(model_.dim()));
  bs_error_ = ErrorState::zeros(model_.dim());
  if (scheme_ == Scheme::MDAirComp) {
    mod_ = cfg_.orthogonal_codebook
               ? ModCodebook::orthogonal(cfg_.codewords())
               : ModCodebook::generate(cfg_.seq_len, cfg_.codewords(),
                                       derive_seed(cfg_.seed, "modcodebook"));
  }
}

void FeelSimulation::refresh_codebook() {
  const std::uint64_t rs = derive_seed(cfg_.seed, "round", static_cast<std::uint64_t>(round_));
  const RealVector delta = local_train(model_, bs_shard_, cfg_.eta_l, cfg_.local_steps,
                                       cfg_.batch, derive_seed(rs, "bs-train"));
  const RealVector s_bar = delta + bs_error_.residual;
  codebook_ = learn_codebook(split_blocks(s_bar, cfg_.block_dim), cfg_.codewords(),
                             cfg_.lloyd_iters, derive_seed(rs, "codebook"));
  bs_error_ = accumulate_error(delta, bs_error_, encode_update(s_bar, *codebook_).quantized);
}

RoundRecord FeelSimulation::run_round() {
  ++round_;
  RoundRecord rec;
  rec.round = round_;
  rec.scheme = scheme_;
  rec.seed = cfg_.seed;
  last_participants_.clear();
  last_deltas_.clear();
  last_quantized_.clear();

  const std::uint64_t rs = derive_seed(cfg_.seed, "round", static_cast<std::uint64_t>(round_));
  const ChannelRealization h =
      sample_channels(cfg_.devices, cfg_.antennas, derive_seed(rs, "channel"));
  std::vector<int> candidates(cfg_.devices);
  for (int k = 0; k < cfg_.devices; ++k) candidates[k] = k;

  std::vector<int> active;
  try {
    active = select_participants(candidates, cfg_.activity_ratio, h, cfg_.eps_h,
                                 derive_seed(rs, "select"));
  } catch (const NoParticipantsError&) {
    rec.skipped = true;
    rec.accuracy = evaluate(model_, test_);
    return rec;
  }
  last_participants_ = active;
  const int ka = static_cast<int>(active.size());
  rec.ka_true = ka;
  rec.ka_hat = ka;
  rec.inversion_power = inversion_power(h, active);

  const int w = model_.dim();
  last_deltas_.resize(active.size());
  parallel_for(ka, cfg_.workers, [&](int i) {
    const int k = active[i];
    last_deltas_[i] = local_train(model_, shards_[k], cfg_.eta_l, cfg_.local_steps, cfg_.batch,
                                  derive_seed(rs, "local", static_cast<std::uint64_t>(k)));
  });

  RealVector update;
  if (scheme_ == Scheme::IFed) {
    update = RealVector::Zero(w);
    for (const auto& d : last_deltas_) update += d;
    update /= static_cast<double>(ka);
    rec.symbols_sent = w;
  } else {
    if (!codebook_ || cfg_.refresh_codebook) refresh_codebook();
    const QuantCodebook& u = *codebook_;
    const int blocks = block_count(w, cfg_.block_dim);
    std::vector<IndexVector> indices(active.size());
    last_quantized_.resize(active.size());
    for (int i = 0; i < ka; ++i) {
      ErrorState& e = errors_[active[i]];
      const EncodedUpdate enc = encode_update(last_deltas_[i] + e.residual, u);
      e = accumulate_error(last_deltas_[i], e, enc.quantized);
      indices[i] = enc.indices;
      last_quantized_[i] = enc.quantized;
    }

    std::vector<RealVector> truth(blocks, RealVector::Zero(cfg_.codewords()));
    for (const auto& b : indices)
      for (int d = 0; d < blocks; ++d) truth[d](b.indices[d]) += 1.0;
    const CollisionStats cs = collision_stats(truth, ka);
    rec.sparsity = cs.sparsity;
    rec.p_c1 = cs.p_c1;
    rec.p_c2 = cs.p_c2;

    if (scheme_ == Scheme::PA) {
      update = RealVector::Zero(w);
      for (const auto& q : last_quantized_) update += q;
      update /= static_cast<double>(ka);
      rec.symbols_sent = blocks;
    } else {
      TransmitOptions opts;
      opts.snr_db = cfg_.snr_db;
      opts.phase_max = cfg_.phase_max;
      opts.phase_seed = derive_seed(rs, "phase");
      std::vector<ReceivedBlock> received(blocks);
      std::vector<std::pair<int, int>> selections(active.size());
      for (int d = 0; d < blocks; ++d) {
        for (int i = 0; i < ka; ++i) selections[i] = {active[i], indices[i].indices[d]};
        opts.noise_seed = derive_seed(rs, "noise", static_cast<std::uint64_t>(d));
        received[d] = transmit_block(mod_, selections, h, opts).received;
      }
      const auto results = detect_blocks(received, mod_, det_cfg_, cfg_.workers);
      std::vector<RealVector> x_hat;
      x_hat.reserve(results.size());
      for (const auto& r : results) x_hat.push_back(r.counts);
      rec.nmse_db = nmse_db(truth, x_hat);
      rec.ka_hat = cfg_.oracle_ka ? ka : estimate_ka(x_hat);
      rec.symbols_sent = static_cast<std::int64_t>(blocks) * mod_.seq_len();
      if (rec.ka_hat < 1) {
        // Nothing detected: devices have spent their updates but the model
        // cannot move this round.
        rec.skipped = true;
        rec.accuracy = evaluate(model_, test_);
        return rec;
      }
      update = aggregate(u, x_hat, rec.ka_hat, w);
    }
  }

  model_.weights += cfg_.eta * update;
  rec.accuracy = evaluate(model_, test_);
  return rec;
}

std::vector<RoundRecord> run_feel(const FeelConfig& cfg, Scheme scheme, int rounds) {
  if (rounds < 0) throw std::invalid_argument("rounds must be >= 0");
  std::vector<RoundRecord> out;
  if (rounds == 0) return out;
  FeelSimulation sim(cfg, scheme);
  out.reserve(rounds);
  for (int t = 0; t < rounds; ++t) out.push_back(sim.run_round());
  return out;
}

void write_weights_csv(const Model& model, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "index,weight\n";
  for (Eigen::Index i = 0; i < model.weights.size(); ++i)
    out << i << ',' << format_double(model.weights(i)) << '\n';
}

}  // namespace mdaircomp
