#include "mdaircomp/detector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

#include "mdaircomp/parallel.hpp"

namespace mdaircomp {

namespace {

double clamp_probability(double p) {
  return std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor);
}

// Numerically stable 1 / (1 + e^{-x}).
double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

void DetectorConfig::validate() const {
  if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  if (!(damping >= 0.0 && damping < 1.0))
    throw std::invalid_argument("damping must lie in [0, 1)");
  if (ka_prior < 1) throw std::invalid_argument("ka_prior must be >= 1");
  if (min_iters_before_stop < 0) throw std::invalid_argument("min_iters_before_stop must be >= 0");
}

AmpState AmpState::initial(const ReceivedBlock& y, int codewords) {
  const Eigen::Index l = y.y.rows();
  const Eigen::Index m = y.y.cols();
  AmpState s;
  s.x_hat = ComplexMatrix::Zero(codewords, m);
  s.v_hat = RealMatrix::Ones(codewords, m);
  s.V = RealMatrix::Ones(l, m);
  s.Z = y.y;
  s.phi = RealMatrix::Ones(codewords, m);
  s.r = ComplexMatrix::Zero(codewords, m);
  s.activity = RealVector::Constant(codewords, 0.5);
  s.noise_var = 100.0;
  s.mu0 = cd(0.0, 0.0);
  s.tau0 = 1.0;
  s.iter = 0;
  s.residual = 100.0;
  s.active_mass = RealVector::Zero(codewords);
  s.pi = RealMatrix::Zero(codewords, m);
  s.mu_post = ComplexMatrix::Zero(codewords, m);
  s.tau_post = RealMatrix::Zero(codewords, m);
  return s;
}

CountPosterior denoise_antenna1(cd r, double phi, double a, int ka_prior) {
  if (ka_prior < 1) throw std::invalid_argument("ka_prior must be >= 1");
  phi = std::max(phi, kVarianceFloor);
  if (a <= 0.0) return {};

  // log weights up to a shared constant; -inf marks a zero prior atom
  std::vector<double> logw(static_cast<std::size_t>(ka_prior) + 1);
  const double neg_inf = -std::numeric_limits<double>::infinity();
  logw[0] = a < 1.0 ? std::log1p(-a) - std::norm(r) / phi : neg_inf;
  const double log_prior_s = std::log(a / ka_prior);
  for (int s = 1; s <= ka_prior; ++s) logw[s] = log_prior_s - std::norm(r - cd(s, 0.0)) / phi;

  const double top = *std::max_element(logw.begin(), logw.end());
  double z = 0.0;
  double m1 = 0.0;
  double m2 = 0.0;
  double active = 0.0;
  for (int s = 0; s <= ka_prior; ++s) {
    const double w = std::exp(logw[s] - top);
    z += w;
    m1 += w * s;
    m2 += w * static_cast<double>(s) * s;
    if (s > 0) active += w;
  }
  CountPosterior out;
  out.mean = m1 / z;
  out.var = std::max(m2 / z - out.mean * out.mean, 0.0);
  out.active_mass = active / z;
  return out;
}

BernoulliGaussPosterior denoise_antenna_m(cd r, double phi, double a, cd mu0,
                                          double tau0) {
  phi = std::max(phi, kVarianceFloor);
  tau0 = std::max(tau0, kVarianceFloor);
  BernoulliGaussPosterior out;
  out.mu = (mu0 * phi + tau0 * r) / (phi + tau0);
  out.tau = tau0 * phi / (phi + tau0);
  if (a <= 0.0) return out;

  const double llr = std::log(phi / (tau0 + phi)) - std::norm(r - mu0) / (tau0 + phi) +
                     std::norm(r) / phi;
  if (a >= 1.0) {
    out.pi = 1.0;
  } else {
    // a / (a + (1-a) e^{-L}) = logistic(L + ln a - ln(1-a))
    out.pi = logistic(llr + std::log(a) - std::log1p(-a));
  }
  out.mean = out.pi * out.mu;
  out.var = std::max(out.pi * (std::norm(out.mu) + out.tau) - std::norm(out.mean), 0.0);
  return out;
}

AmpDetector::AmpDetector(const ModCodebook& p, DetectorConfig cfg)
    : p_(&p), p_adj_(p.sequences().adjoint()), p_abs2_(p.sequences().cwiseAbs2()), cfg_(cfg) {
  cfg_.validate();
}

void AmpDetector::decouple_step(const ReceivedBlock& y, AmpState& s) const {
  const ComplexMatrix& p = p_->sequences();
  if (y.y.rows() != p.rows() || s.x_hat.rows() != p.cols() || s.x_hat.cols() != y.y.cols())
    throw std::invalid_argument("AMP state does not match (L, N, M)");

  const RealMatrix prev_denom = (s.V.array() + s.noise_var).cwiseMax(kVarianceFloor).matrix();
  const RealMatrix v_new = p_abs2_ * s.v_hat;
  const ComplexMatrix onsager =
      (v_new.array().cast<cd>() * (y.y - s.Z).array() / prev_denom.array().cast<cd>()).matrix();
  const ComplexMatrix z_new = p * s.x_hat - onsager;

  const RealMatrix denom = (v_new.array() + s.noise_var).cwiseMax(kVarianceFloor).matrix();
  const RealMatrix precision = p_abs2_.transpose() * denom.cwiseInverse();
  s.phi = precision.cwiseInverse().cwiseMax(kVarianceFloor);
  const ComplexMatrix weighted =
      ((y.y - z_new).array() / denom.array().cast<cd>()).matrix();
  s.r = s.x_hat + (s.phi.array().cast<cd>() * (p_adj_ * weighted).array()).matrix();

  const double t = cfg_.damping;
  s.V = t * s.V + (1.0 - t) * v_new;
  s.Z = t * s.Z + (1.0 - t) * z_new;
}

void AmpDetector::denoise(AmpState& s) const {
  const Eigen::Index n_words = s.r.rows();
  const Eigen::Index antennas = s.r.cols();
  for (Eigen::Index n = 0; n < n_words; ++n) {
    const CountPosterior c = denoise_antenna1(s.r(n, 0), s.phi(n, 0), s.activity(n), cfg_.ka_prior);
    s.x_hat(n, 0) = cd(c.mean, 0.0);
    s.v_hat(n, 0) = c.var;
    s.active_mass(n) = c.active_mass;
    for (Eigen::Index m = 1; m < antennas; ++m) {
      const BernoulliGaussPosterior b =
          denoise_antenna_m(s.r(n, m), s.phi(n, m), s.activity(n), s.mu0, s.tau0);
      s.x_hat(n, m) = b.mean;
      s.v_hat(n, m) = b.var;
      s.pi(n, m) = b.pi;
      s.mu_post(n, m) = b.mu;
      s.tau_post(n, m) = b.tau;
    }
  }
}

void AmpDetector::em_update(const ReceivedBlock& y, AmpState& s) const {
  const Eigen::Index n_words = s.x_hat.rows();
  const Eigen::Index antennas = s.x_hat.cols();

  for (Eigen::Index n = 0; n < n_words; ++n) {
    double sum = s.active_mass(n);
    for (Eigen::Index m = 1; m < antennas; ++m) sum += s.pi(n, m);
    s.activity(n) = clamp_probability(sum / static_cast<double>(antennas));
  }

  // sigma^2: average over the L x M observations of
  //   |Y - Z|^2 / (1 + V/sigma^2)^2 + sigma^2 V / (V + sigma^2)
  const double sig = s.noise_var;
  const RealMatrix denom = (s.V.array() + sig).cwiseMax(kVarianceFloor).matrix();
  const RealMatrix resid2 = (y.y - s.Z).cwiseAbs2();
  const double total =
      (resid2.array() * (sig * sig) / denom.array().square() + sig * s.V.array() / denom.array())
          .sum();
  s.noise_var = std::max(total / static_cast<double>(y.y.size()), kVarianceFloor);

  if (antennas < 2) return;
  double weight = 0.0;
  cd weighted_mu(0.0, 0.0);
  for (Eigen::Index m = 1; m < antennas; ++m)
    for (Eigen::Index n = 0; n < n_words; ++n) {
      weight += s.pi(n, m);
      weighted_mu += s.pi(n, m) * s.mu_post(n, m);
    }
  if (weight <= std::numeric_limits<double>::min()) return;  // hold previous mu0, tau0
  const cd mu0 = weighted_mu / weight;
  double spread = 0.0;
  for (Eigen::Index m = 1; m < antennas; ++m)
    for (Eigen::Index n = 0; n < n_words; ++n)
      spread += s.pi(n, m) * (std::norm(mu0 - s.mu_post(n, m)) + s.tau_post(n, m));
  s.mu0 = mu0;
  s.tau0 = std::max(spread / weight, kVarianceFloor);
}

double AmpDetector::residual(const ReceivedBlock& y, const AmpState& s) const {
  return (y.y - p_->sequences() * s.x_hat).norm() / static_cast<double>(y.y.rows());
}

void AmpDetector::iterate(const ReceivedBlock& y, AmpState& s) const {
  decouple_step(y, s);
  denoise(s);
  em_update(y, s);
  s.residual = residual(y, s);
  ++s.iter;
  if (!s.x_hat.allFinite() || !std::isfinite(s.noise_var) || !std::isfinite(s.residual))
    throw std::runtime_error("AMP-DA diverged to NaN at iteration " + std::to_string(s.iter) +
                             " (noise_var=" + std::to_string(s.noise_var) +
                             "); increase damping");
}

namespace {

IterationTrace trace_of(const AmpState& s) {
  return {s.iter, s.residual, s.noise_var, s.tau0, std::abs(s.mu0), s.activity.sum()};
}

DetectionResult finish(const ComplexMatrix& x_hat, std::vector<IterationTrace> trace,
                       int iterations) {
  DetectionResult out;
  out.x_hat = x_hat;
  out.counts = x_hat.col(0).real();
  out.trace = std::move(trace);
  out.iterations = iterations;
  return out;
}

}  // namespace

DetectionResult detect_block(const ReceivedBlock& y, const ModCodebook& p,
                             const DetectorConfig& cfg) {
  const AmpDetector amp(p, cfg);
  AmpState s = AmpState::initial(y, p.size());
  std::vector<IterationTrace> trace;
  double prev_residual = s.residual;
  for (int i = 1; i <= cfg.max_iters; ++i) {
    ComplexMatrix before = s.x_hat;
    amp.iterate(y, s);
    trace.push_back(trace_of(s));
    if (i > cfg.min_iters_before_stop && s.residual >= prev_residual)
      return finish(before, std::move(trace), i - 1);
    prev_residual = s.residual;
  }
  return finish(s.x_hat, std::move(trace), cfg.max_iters);
}

std::vector<DetectionResult> detect_blocks(const std::vector<ReceivedBlock>& blocks,
                                           const ModCodebook& p, const DetectorConfig& cfg,
                                           int workers) {
  const int count = static_cast<int>(blocks.size());
  std::vector<DetectionResult> out(count);
  if (cfg.residual_rule == ResidualRule::PerBlock) {
    parallel_for(count, workers, [&](int d) { out[d] = detect_block(blocks[d], p, cfg); });
    return out;
  }

  const AmpDetector amp(p, cfg);
  std::vector<AmpState> states;
  states.reserve(count);
  for (const auto& b : blocks) states.push_back(AmpState::initial(b, p.size()));
  std::vector<std::vector<IterationTrace>> traces(count);
  std::vector<ComplexMatrix> before(count);
  double prev_mean = 100.0;
  for (int i = 1; i <= cfg.max_iters; ++i) {
    parallel_for(count, workers, [&](int d) {
      before[d] = states[d].x_hat;
      amp.iterate(blocks[d], states[d]);
      traces[d].push_back(trace_of(states[d]));
    });
    double mean = 0.0;
    for (const auto& s : states) mean += s.residual;
    mean /= std::max(count, 1);
    if (i > cfg.min_iters_before_stop && mean >= prev_mean) {
      for (int d = 0; d < count; ++d) out[d] = finish(before[d], std::move(traces[d]), i - 1);
      return out;
    }
    prev_mean = mean;
  }
  for (int d = 0; d < count; ++d)
    out[d] = finish(states[d].x_hat, std::move(traces[d]), cfg.max_iters);
  return out;
}

int estimate_ka(const std::vector<RealVector>& x_hat_blocks) {
  if (x_hat_blocks.empty()) throw std::invalid_argument("no blocks to estimate K_a from");
  std::map<long long, int> votes;
  for (const auto& x : x_hat_blocks)
    ++votes[static_cast<long long>(std::floor(x.lpNorm<1>() + 0.5))];
  long long best = 0;
  int best_votes = -1;
  for (const auto& [count, n] : votes)
    if (n >= best_votes) {  // ascending keys, so >= favours the larger count
      best = count;
      best_votes = n;
    }
  return static_cast<int>(best);
}

int estimate_ka_mean(const std::vector<RealVector>& x_hat_blocks) {
  if (x_hat_blocks.empty()) throw std::invalid_argument("no blocks to estimate K_a from");
  double sum = 0.0;
  for (const auto& x : x_hat_blocks) sum += x.lpNorm<1>();
  return static_cast<int>(std::floor(sum / static_cast<double>(x_hat_blocks.size()) + 0.5));
}

RealVector aggregate(const QuantCodebook& u, const std::vector<RealVector>& x_hat_blocks,
                     int ka_hat, int dim) {
  if (ka_hat <= 0) throw std::invalid_argument("no active devices detected");
  const int q = u.block_dim();
  const auto blocks = static_cast<Eigen::Index>(x_hat_blocks.size());
  if (dim < 0 || dim > blocks * q)
    throw std::invalid_argument("requested length exceeds the detected blocks");
  RealVector full(blocks * q);
  for (Eigen::Index d = 0; d < blocks; ++d) {
    if (x_hat_blocks[d].size() != u.size())
      throw std::invalid_argument("detected block length does not match the codebook size");
    full.segment(d * q, q) = u.codewords() * x_hat_blocks[d];
  }
  return full.head(dim) / static_cast<double>(ka_hat);
}

void write_trace_csv(const std::vector<IterationTrace>& trace,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "iteration,residual,noise_var,tau0,mu0_abs,activity_sum\n" << std::setprecision(10);
  for (const auto& t : trace)
    out << t.iteration << ',' << t.residual << ',' << t.noise_var << ',' << t.tau0 << ','
        << t.mu0_abs << ',' << t.activity_sum << '\n';
}

}  // namespace mdaircomp
