#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mdaircomp/modcodebook.hpp"
#include "mdaircomp/quantizer.hpp"

using namespace mdaircomp;

TEST_SUITE("modcodebook") {
  TEST_CASE("entries are unit-modulus QPSK points") {
    const auto p = ModCodebook::generate(2, 4, 3);
    CHECK(p.seq_len() == 2);
    CHECK(p.size() == 4);
    const double a = std::sqrt(0.5);
    for (Eigen::Index l = 0; l < 2; ++l)
      for (Eigen::Index n = 0; n < 4; ++n) {
        const cd z = p.sequences()(l, n);
        CHECK(std::abs(z) == 1.0);
        CHECK(std::abs(std::abs(z.real()) - a) < 1e-15);
        CHECK(std::abs(std::abs(z.imag()) - a) < 1e-15);
      }
    for (Eigen::Index n = 0; n < 4; ++n)
      CHECK(p.sequences().col(n).norm() == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  }

  TEST_CASE("all four symbols appear with roughly equal frequency") {
    const auto p = ModCodebook::generate(100, 100, 5);
    int quadrant[4] = {0, 0, 0, 0};
    for (Eigen::Index i = 0; i < p.sequences().size(); ++i) {
      const cd z = p.sequences().data()[i];
      ++quadrant[(z.real() > 0 ? 1 : 0) + (z.imag() > 0 ? 2 : 0)];
    }
    // 10^4 draws, p = 1/4: sd = sqrt(1e4 * 3/16) ~ 43
    for (int q : quadrant) CHECK(std::abs(q - 2500) < 5 * 43.3);
  }

  TEST_CASE("generate is deterministic under seed") {
    CHECK(ModCodebook::generate(20, 64, 9) == ModCodebook::generate(20, 64, 9));
    CHECK_FALSE(ModCodebook::generate(20, 64, 9) == ModCodebook::generate(20, 64, 10));
  }

  TEST_CASE("coherence of a 20 x 64 codebook stays below 0.9") {
    const auto p = ModCodebook::generate(20, 64, 1);
    double brute = 0.0;
    const auto& s = p.sequences();
    for (int i = 0; i < 64; ++i)
      for (int j = i + 1; j < 64; ++j)
        brute = std::max(brute, std::abs(s.col(i).dot(s.col(j))) / 20.0);
    CHECK(p.coherence() == doctest::Approx(brute).epsilon(1e-12));
    CHECK(p.coherence() < 0.9);
  }

  TEST_CASE("orthogonal codebook has P^H P = N I") {
    const auto p = ModCodebook::orthogonal(8);
    const ComplexMatrix g = p.sequences().adjoint() * p.sequences();
    CHECK((g - 8.0 * ComplexMatrix::Identity(8, 8)).norm() < 1e-12);
    CHECK(p.sequences().cwiseAbs().isOnes(1e-15));
  }

  TEST_CASE("sequence_for returns columns and rejects bad indices") {
    const auto p = ModCodebook::generate(6, 5, 2);
    CHECK(p.sequence_for(0) == p.sequences().col(0));
    CHECK(p.sequence_for(4) == p.sequences().col(4));
    CHECK_THROWS_AS(p.sequence_for(5), std::out_of_range);
    CHECK_THROWS_AS(p.sequence_for(-1), std::out_of_range);
  }

  TEST_CASE("quantizing a codeword selects its own sequence") {
    Rng rng(4);
    RealMatrix c(3, 16);
    for (int n = 0; n < 16; ++n) c.col(n) = testing::gaussian_vector(rng, 3);
    const QuantCodebook u(c);
    const auto p = ModCodebook::generate(10, 16, 4);
    for (int n = 0; n < 16; ++n)
      CHECK(p.sequence_for(quantize_block(RealVector(u.codeword(n)), u)) == p.sequences().col(n));
  }

  TEST_CASE("nonpositive dimensions are rejected") {
    CHECK_THROWS_AS(ModCodebook::generate(0, 4, 1), std::invalid_argument);
    CHECK_THROWS_AS(ModCodebook::generate(4, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(ModCodebook::orthogonal(0), std::invalid_argument);
  }

  TEST_CASE("CSV round trip is exact") {
    const auto p = ModCodebook::generate(5, 7, 123);
    const auto path = testing::scratch_dir("pcsv") / "p.csv";
    write_modcodebook_csv(p, path);
    CHECK(read_modcodebook_csv(path) == p);
  }
}
