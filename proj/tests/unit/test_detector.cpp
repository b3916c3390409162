#include <doctest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "mdaircomp/detector.hpp"
#include "mdaircomp/metrics.hpp"
#include "oracles.hpp"

using namespace mdaircomp;

namespace {

cd crandn(Rng& rng, double var = 1.0) { return complex_normal(rng, var); }

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double log_uniform(Rng& rng, double lo, double hi) {
  return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}

AmpState random_state(Rng& rng, int l, int n, int m) {
  AmpState s;
  s.x_hat = ComplexMatrix(n, m);
  s.v_hat = RealMatrix(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      s.x_hat(i, j) = crandn(rng);
      s.v_hat(i, j) = uniform(rng, 0.01, 1.0);
    }
  s.V = RealMatrix(l, m);
  s.Z = ComplexMatrix(l, m);
  for (int i = 0; i < l; ++i)
    for (int j = 0; j < m; ++j) {
      s.V(i, j) = uniform(rng, 0.1, 2.0);
      s.Z(i, j) = crandn(rng);
    }
  s.noise_var = 0.7;
  s.activity = RealVector::Constant(n, 0.5);
  s.active_mass = RealVector::Zero(n);
  s.pi = RealMatrix::Zero(n, m);
  s.mu_post = ComplexMatrix::Zero(n, m);
  s.tau_post = RealMatrix::Zero(n, m);
  s.phi = RealMatrix::Ones(n, m);
  s.r = ComplexMatrix::Zero(n, m);
  return s;
}

// Selections of `count` distinct codewords by distinct non-faded devices.
Transmission unit_count_block(int n, int m, int count, double snr_db, std::uint64_t seed,
                              const ModCodebook& p) {
  const auto h = sample_channels(40, m, derive_seed(seed, "h"));
  std::vector<int> ids;
  for (int k = 0; k < 40 && static_cast<int>(ids.size()) < count; ++k)
    if (std::abs(h.gains(k, 0)) >= 0.14) ids.push_back(k);
  std::vector<int> words(n);
  std::iota(words.begin(), words.end(), 0);
  Rng rng(derive_seed(seed, "words"));
  std::shuffle(words.begin(), words.end(), rng);
  std::vector<std::pair<int, int>> sel;
  for (int i = 0; i < count; ++i) sel.emplace_back(ids[i], words[i]);
  TransmitOptions o;
  o.snr_db = snr_db;
  o.noise_seed = derive_seed(seed, "noise");
  return transmit_block(p, sel, h, o);
}

}  // namespace

TEST_SUITE("detector") {
  TEST_CASE("antenna-1 denoiser: a = 0 is a point mass at zero") {
    const auto c = denoise_antenna1(cd(3.0, 0.0), 0.5, 0.0, 4);
    CHECK(c.mean == 0.0);
    CHECK(c.var == 0.0);
  }

  TEST_CASE("antenna-1 denoiser: sharp likelihood picks the nearest count") {
    const auto c = denoise_antenna1(cd(1.95, 0.0), 0.01, 1.0, 2);
    CHECK(std::abs(c.mean - 2.0) < 1e-3);
    CHECK(c.var < 1e-2);
    const auto o = oracle::count_prior(cd(1.95, 0.0), 0.01, 1.0, 2);
    CHECK(c.mean == doctest::Approx(o.mean.real()).epsilon(1e-12));
  }

  TEST_CASE("antenna-1 denoiser: flat likelihood returns the prior mean") {
    const auto c = denoise_antenna1(cd(0.5, 0.0), 1e12, 1.0, 2);
    CHECK(c.mean == doctest::Approx(1.5).epsilon(1e-9));
    CHECK(c.var == doctest::Approx(0.25).epsilon(1e-6));
  }

  TEST_CASE("antenna-1 denoiser matches explicit normalization") {
    Rng rng(1);
    for (int t = 0; t < 500; ++t) {
      const int ka = std::uniform_int_distribution<int>(1, 16)(rng);
      const cd r(uniform(rng, -1.0, ka + 1.0), uniform(rng, -1.0, 1.0));
      const double phi = log_uniform(rng, 0.05, 20.0);
      const double a = uniform(rng, 0.0, 1.0);
      const auto c = denoise_antenna1(r, phi, a, ka);
      const auto o = oracle::count_prior(r, phi, a, ka);
      CHECK(std::abs(c.mean - o.mean.real()) <= 1e-10 * std::max(1.0, o.mean.real()));
      CHECK(std::abs(c.var - o.var) <= 1e-10 * std::max(1.0, o.var));
      CHECK(std::abs(c.active_mass - o.pi) <= 1e-10);
      CHECK(c.mean >= 0.0);
      CHECK(c.mean <= ka);
    }
  }

  TEST_CASE("antenna-1 denoiser survives likelihoods that underflow") {
    const auto c = denoise_antenna1(cd(7.0, 0.0), 1e-6, 0.3, 16);
    CHECK(std::isfinite(c.mean));
    CHECK(c.mean == doctest::Approx(7.0));
  }

  TEST_CASE("Bernoulli-Gaussian denoiser worked example") {
    const auto b = denoise_antenna_m(cd(1.0, 0.0), 1.0, 0.5, cd(0.0, 0.0), 1.0);
    CHECK(b.mu.real() == doctest::Approx(0.5));
    CHECK(b.tau == doctest::Approx(0.5));
    const double llr = std::log(0.5) - 0.5 + 1.0;
    CHECK(llr == doctest::Approx(-0.1931).epsilon(1e-3));
    CHECK(b.pi == doctest::Approx(0.4518).epsilon(1e-3));
    CHECK(b.mean.real() == doctest::Approx(0.2259).epsilon(1e-3));
    const auto o = oracle::bernoulli_gauss(cd(1.0, 0.0), 1.0, 0.5, cd(0.0, 0.0), 1.0);
    CHECK(std::abs(b.mean - o.mean) < 1e-9);
  }

  TEST_CASE("Bernoulli-Gaussian denoiser: a = 0 and the small-phi limit") {
    const auto z = denoise_antenna_m(cd(1.0, 2.0), 0.3, 0.0, cd(0.5, 0.0), 1.0);
    CHECK(z.pi == 0.0);
    CHECK(z.mean == cd(0.0, 0.0));
    CHECK(z.var == 0.0);
    const cd r(0.7, -1.3);
    const auto s = denoise_antenna_m(r, 1e-10, 1.0, cd(0.0, 0.0), 1.0);
    CHECK(std::abs(s.mean - r) < 1e-8);
  }

  TEST_CASE("Bernoulli-Gaussian denoiser matches quadrature") {
    Rng rng(2);
    for (int t = 0; t < 300; ++t) {
      const cd r(uniform(rng, -3, 3), uniform(rng, -3, 3));
      const double phi = log_uniform(rng, 1e-2, 10.0);
      const double a = uniform(rng, 0.01, 0.99);
      const cd mu0(uniform(rng, -2, 2), uniform(rng, -2, 2));
      const double tau0 = log_uniform(rng, 1e-2, 10.0);
      const auto b = denoise_antenna_m(r, phi, a, mu0, tau0);
      const auto o = oracle::bernoulli_gauss(r, phi, a, mu0, tau0);
      CHECK(std::abs(b.mean - o.mean) <= 1e-6 * std::abs(o.mean));
      CHECK(std::abs(b.var - o.var) <= 1e-6 * std::abs(o.var));
    }
  }

  TEST_CASE("posterior variances are never negative") {
    Rng rng(3);
    for (int t = 0; t < 2000; ++t) {
      const cd r(uniform(rng, -50, 50), uniform(rng, -50, 50));
      const double phi = log_uniform(rng, 1e-14, 1e6);
      const double a = uniform(rng, 0.0, 1.0);
      CHECK(denoise_antenna_m(r, phi, a, crandn(rng), log_uniform(rng, 1e-14, 1e6)).var >= 0.0);
      CHECK(denoise_antenna1(r, phi, a, 16).var >= 0.0);
    }
  }

  TEST_CASE("decouple step: zero means and variances") {
    const auto p = ModCodebook::generate(4, 6, 1);
    DetectorConfig cfg;
    cfg.damping = 0.0;
    const AmpDetector amp(p, cfg);
    Rng rng(4);
    AmpState s = random_state(rng, 4, 6, 2);
    s.x_hat.setZero();
    s.v_hat.setZero();
    ReceivedBlock y{s.Z, 0.0};
    amp.decouple_step(y, s);
    CHECK(s.V.isZero(0.0));
    CHECK(s.Z.isZero(0.0));
  }

  TEST_CASE("decouple step: unit-modulus rows give V = column sums of v_hat") {
    const auto p = ModCodebook::generate(5, 7, 2);
    DetectorConfig cfg;
    cfg.damping = 0.0;
    const AmpDetector amp(p, cfg);
    Rng rng(5);
    AmpState s = random_state(rng, 5, 7, 3);
    ReceivedBlock y{ComplexMatrix::Random(5, 3), 0.0};
    const RealVector colsum = s.v_hat.colwise().sum();
    amp.decouple_step(y, s);
    for (int l = 0; l < 5; ++l)
      for (int m = 0; m < 3; ++m) CHECK(s.V(l, m) == doctest::Approx(colsum(m)).epsilon(1e-14));
  }

  TEST_CASE("decouple step matches a straight-line transcription") {
    const int L = 4, N = 4, M = 2;
    const auto p = ModCodebook::generate(L, N, 3);
    DetectorConfig cfg;
    cfg.damping = 0.3;
    const AmpDetector amp(p, cfg);
    Rng rng(6);
    AmpState s = random_state(rng, L, N, M);
    ComplexMatrix Y(L, M);
    for (int l = 0; l < L; ++l)
      for (int m = 0; m < M; ++m) Y(l, m) = crandn(rng, 2.0);
    const AmpState before = s;
    amp.decouple_step({Y, 0.0}, s);

    const auto& P = p.sequences();
    const double sig = before.noise_var;
    const double t = cfg.damping;
    for (int m = 0; m < M; ++m) {
      double vn[L];
      cd zn[L];
      for (int l = 0; l < L; ++l) {
        double v = 0;
        cd px = 0;
        for (int n = 0; n < N; ++n) {
          v += std::norm(P(l, n)) * before.v_hat(n, m);
          px += P(l, n) * before.x_hat(n, m);
        }
        vn[l] = v;
        zn[l] = px - v * (Y(l, m) - before.Z(l, m)) / (sig + before.V(l, m));
        CHECK(std::abs(s.V(l, m) - (t * before.V(l, m) + (1 - t) * vn[l])) < 1e-13);
        CHECK(std::abs(s.Z(l, m) - (t * before.Z(l, m) + (1 - t) * zn[l])) < 1e-13);
      }
      for (int n = 0; n < N; ++n) {
        double prec = 0;
        cd corr = 0;
        for (int l = 0; l < L; ++l) {
          prec += std::norm(P(l, n)) / (sig + vn[l]);
          corr += std::conj(P(l, n)) * (Y(l, m) - zn[l]) / (sig + vn[l]);
        }
        const double phi = 1.0 / prec;
        CHECK(s.phi(n, m) == doctest::Approx(phi).epsilon(1e-13));
        CHECK(std::abs(s.r(n, m) - (before.x_hat(n, m) + phi * corr)) < 1e-12);
      }
    }
  }

  TEST_CASE("EM: unanimous activity drives a_n to one") {
    const auto p = ModCodebook::generate(4, 3, 1);
    const AmpDetector amp(p, {});
    Rng rng(7);
    AmpState s = random_state(rng, 4, 3, 3);
    s.active_mass.setOnes();
    s.pi.setOnes();
    amp.em_update({s.Z, 0.0}, s);
    for (int n = 0; n < 3; ++n) CHECK(s.activity(n) >= 1.0 - 1e-12);
  }

  TEST_CASE("EM: zero residual and zero V give a vanishing noise variance") {
    const auto p = ModCodebook::generate(4, 3, 1);
    const AmpDetector amp(p, {});
    Rng rng(8);
    AmpState s = random_state(rng, 4, 3, 2);
    s.V.setZero();
    amp.em_update({s.Z, 0.0}, s);
    CHECK(s.noise_var <= kVarianceFloor);
  }

  TEST_CASE("EM noise variance matches a straight-line transcription") {
    const int L = 4, M = 2;
    const auto p = ModCodebook::generate(L, 5, 1);
    const AmpDetector amp(p, {});
    Rng rng(9);
    AmpState s = random_state(rng, L, 5, M);
    ComplexMatrix Y(L, M);
    for (int l = 0; l < L; ++l)
      for (int m = 0; m < M; ++m) Y(l, m) = crandn(rng, 3.0);
    const double sig = s.noise_var;
    double sum = 0.0;
    for (int l = 0; l < L; ++l)
      for (int m = 0; m < M; ++m) {
        const double v = s.V(l, m);
        sum += std::norm(Y(l, m) - s.Z(l, m)) / std::pow(1.0 + v / sig, 2) + sig * v / (v + sig);
      }
    amp.em_update({Y, 0.0}, s);
    CHECK(s.noise_var == doctest::Approx(sum / (L * M)).epsilon(1e-13));
  }

  TEST_CASE("EM: mu0 and tau0 use antennas 2..M only and hold when no mass") {
    const auto p = ModCodebook::generate(4, 2, 1);
    const AmpDetector amp(p, {});
    Rng rng(10);
    AmpState s = random_state(rng, 4, 2, 2);
    s.pi << 0.9, 0.5, 0.2, 0.5;  // column 0 must be ignored
    s.mu_post << cd(100, 0), cd(1, 1), cd(-100, 0), cd(3, -1);
    s.tau_post << 50, 0.2, 50, 0.4;
    amp.em_update({s.Z, 0.0}, s);
    const cd mu0 = (0.5 * cd(1, 1) + 0.5 * cd(3, -1)) / 1.0;
    CHECK(std::abs(s.mu0 - mu0) < 1e-14);
    const double tau0 = 0.5 * (std::norm(mu0 - cd(1, 1)) + 0.2) + 0.5 * (std::norm(mu0 - cd(3, -1)) + 0.4);
    CHECK(s.tau0 == doctest::Approx(tau0));

    AmpState h = random_state(rng, 4, 2, 2);
    h.mu0 = cd(0.25, 0.5);
    h.tau0 = 3.0;
    amp.em_update({h.Z, 0.0}, h);
    CHECK(h.mu0 == cd(0.25, 0.5));
    CHECK(h.tau0 == 3.0);
  }

  TEST_CASE("orthogonal noiseless single-antenna recovery") {
    const auto p = ModCodebook::orthogonal(4);
    ComplexMatrix x = ComplexMatrix::Zero(4, 1);
    x(0, 0) = 2.0;
    x(2, 0) = 1.0;
    const ReceivedBlock y{p.sequences() * x, 0.0};
    const auto res = detect_block(y, p, {});
    const RealVector truth = (RealVector(4) << 2, 0, 1, 0).finished();
    // least squares: P is square and invertible, so the truth is the unique solution
    const ComplexVector ls = p.sequences().colPivHouseholderQr().solve(y.y.col(0));
    CHECK((ls.real() - truth).norm() < 1e-12);
    CHECK((res.counts - truth).cwiseAbs().maxCoeff() < 1e-3);
  }

  TEST_CASE("noise-only input detects nothing") {
    const auto p = ModCodebook::generate(20, 64, 1);
    Rng rng(11);
    ComplexMatrix y(20, 4);
    for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = crandn(rng, 0.01);
    const auto res = detect_block({y, 0.01}, p, {});
    CHECK(res.counts.lpNorm<1>() < 0.1);
  }

  TEST_CASE("12 unit counts at 20 dB: median NMSE <= -10 dB") {
    std::vector<double> nmse;
    for (int t = 0; t < 100; ++t) {
      const auto p = ModCodebook::generate(20, 64, derive_seed(100, "p", t));
      const auto tx = unit_count_block(64, 4, 12, 20.0, derive_seed(100, "t", t), p);
      const auto res = detect_block(tx.received, p, {});
      nmse.push_back(nmse_db({tx.truth.counts_vector()}, {res.counts}));
    }
    CHECK(median(nmse) <= -10.0);
  }

  TEST_CASE("returned residual never exceeds the residual at iteration 15") {
    for (int t = 0; t < 60; ++t) {
      const auto p = ModCodebook::generate(20, 64, derive_seed(200, "p", t));
      const double snr = t % 3 == 0 ? 0.0 : (t % 3 == 1 ? 5.0 : 20.0);
      const auto tx = unit_count_block(64, 4, 12, snr, derive_seed(200, "t", t), p);
      const auto res = detect_block(tx.received, p, {});
      REQUIRE(res.trace.size() >= 15);
      REQUIRE(res.iterations >= 15);
      CHECK(res.trace[res.iterations - 1].residual <= res.trace[14].residual);
    }
  }

  TEST_CASE("joint and per-block rules both recover clean blocks; workers do not matter") {
    const auto p = ModCodebook::generate(32, 64, 5);
    std::vector<ReceivedBlock> blocks;
    std::vector<RealVector> truth;
    for (int d = 0; d < 4; ++d) {
      const auto tx = unit_count_block(64, 4, 6, 60.0, derive_seed(300, "t", d), p);
      blocks.push_back(tx.received);
      truth.push_back(tx.truth.counts_vector());
    }
    DetectorConfig joint;
    joint.residual_rule = ResidualRule::Joint;
    const auto a = detect_blocks(blocks, p, {}, 1);
    const auto b = detect_blocks(blocks, p, {}, 3);
    const auto c = detect_blocks(blocks, p, joint, 2);
    for (int d = 0; d < 4; ++d) {
      CHECK(a[d].x_hat == b[d].x_hat);
      CHECK(RealVector(a[d].counts.array().round()) == truth[d]);
      CHECK(RealVector(c[d].counts.array().round()) == truth[d]);
      CHECK(c[d].iterations == c[0].iterations);
    }
  }

  TEST_CASE("detector is invariant to a common scaling of the channel gains") {
    int hits[2] = {0, 0};
    const int trials = 100;
    for (int s = 0; s < 2; ++s) {
      const double scale = s == 0 ? 1.0 : 25.0;
      for (int t = 0; t < trials; ++t) {
        const auto p = ModCodebook::generate(20, 64, derive_seed(400, "p", t));
        auto h = sample_channels(40, 4, derive_seed(400, "h", t));
        h.gains *= scale;
        std::vector<std::pair<int, int>> sel;
        Rng rng(derive_seed(400, "sel", t));
        std::uniform_int_distribution<int> pick(0, 63);
        for (int k = 0; k < 40 && sel.size() < 12; ++k)
          if (std::abs(h.gains(k, 0)) >= 0.14 * scale) sel.emplace_back(k, pick(rng));
        TransmitOptions o;
        o.snr_db = 10.0;
        o.noise_seed = derive_seed(400, "n", t);
        const auto tx = transmit_block(p, sel, h, o);
        const auto res = detect_block(tx.received, p, {});
        hits[s] += RealVector(res.counts.array().round()) == tx.truth.counts_vector();
      }
    }
    // two binomial(100, p) samples; 4 sd of the difference is at most ~28
    CHECK(std::abs(hits[0] - hits[1]) <= 28);
  }

  TEST_CASE("NaN input aborts with a diagnostic") {
    const auto p = ModCodebook::generate(8, 16, 1);
    ComplexMatrix y = ComplexMatrix::Ones(8, 2);
    y(3, 1) = cd(std::nan(""), 0.0);
    CHECK_THROWS_AS(detect_block({y, 0.1}, p, {}), std::runtime_error);
  }

  TEST_CASE("estimate_ka majority vote and tie rule") {
    auto block = [](double l1) { return (RealVector(2) << l1, 0.0).finished(); };
    CHECK(estimate_ka({block(2.9), block(3.1), block(3.05), block(2.2)}) == 3);
    CHECK(estimate_ka({block(5.4)}) == 5);
    CHECK(estimate_ka({block(2), block(2), block(3), block(3)}) == 3);
    CHECK(estimate_ka({block(2.5)}) == 3);
    CHECK(estimate_ka_mean({block(2.9), block(3.1), block(3.05), block(2.2)}) == 3);
    CHECK(estimate_ka_mean({block(1.0), block(1.0), block(5.0)}) == 2);
    CHECK_THROWS_AS(estimate_ka({}), std::invalid_argument);
  }

  TEST_CASE("aggregate arithmetic and errors") {
    RealMatrix c(1, 3);
    c << -1, 0, 1;
    const QuantCodebook u(c);
    const RealVector x = (RealVector(3) << 1, 0, 2).finished();
    const RealVector s = aggregate(u, {x}, 3, 1);
    CHECK(s(0) == doctest::Approx(1.0 / 3.0));
    CHECK_THROWS_WITH(aggregate(u, {x}, 0, 1), "no active devices detected");
  }

  TEST_CASE("aggregating true counts gives the mean quantized update") {
    Rng rng(12);
    RealMatrix c(3, 8);
    for (int n = 0; n < 8; ++n) c.col(n) = testing::gaussian_vector(rng, 3);
    const QuantCodebook u(c);
    const int w = 10, ka = 5;
    std::vector<RealVector> q;
    std::vector<RealVector> counts(block_count(w, 3), RealVector::Zero(8));
    RealVector mean = RealVector::Zero(w);
    for (int k = 0; k < ka; ++k) {
      const auto enc = encode_update(testing::gaussian_vector(rng, w), u);
      for (int d = 0; d < enc.indices.blocks(); ++d) counts[d](enc.indices.indices[d]) += 1.0;
      mean += enc.quantized / ka;
    }
    CHECK((aggregate(u, counts, ka, w) - mean).norm() < 1e-12);
  }

  TEST_CASE("aggregation error is bounded by the detection error") {
    const auto p = ModCodebook::generate(20, 64, 8);
    Rng rng(13);
    RealMatrix c(4, 64);
    for (int n = 0; n < 64; ++n) c.col(n) = testing::gaussian_vector(rng, 4);
    const QuantCodebook u(c);
    const double u_norm = c.jacobiSvd().singularValues()(0);
    std::vector<RealVector> truth, est;
    for (int d = 0; d < 10; ++d) {
      const auto tx = unit_count_block(64, 4, 10, 5.0, derive_seed(500, "t", d), p);
      truth.push_back(tx.truth.counts_vector());
      est.push_back(detect_block(tx.received, p, {}).counts);
    }
    double det_err = 0.0;
    for (int d = 0; d < 10; ++d) det_err += (truth[d] - est[d]).squaredNorm();
    const RealVector s_true = aggregate(u, truth, 10, 38);
    const RealVector s_hat = aggregate(u, est, 10, 38);
    CHECK((s_hat - s_true).norm() <= u_norm * std::sqrt(det_err) / 10.0 + 1e-12);
  }

  TEST_CASE("trace CSV header") {
    const auto p = ModCodebook::generate(8, 16, 1);
    const auto tx = unit_count_block(16, 2, 2, 20.0, 3, p);
    const auto res = detect_block(tx.received, p, {});
    const auto path = testing::scratch_dir("trace") / "t.csv";
    write_trace_csv(res.trace, path);
    CHECK(testing::slurp(path).rfind("iteration,residual,noise_var,tau0,mu0_abs,activity_sum\n", 0) == 0);
  }

  TEST_CASE("config validation") {
    DetectorConfig c;
    c.damping = 1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.max_iters = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.ka_prior = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  }
}
