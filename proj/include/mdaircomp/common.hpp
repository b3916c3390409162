#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace mdaircomp {

using cd = std::complex<double>;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to decorrelate derived seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// FNV-1a over a role name, so role tags are stable across builds.
constexpr std::uint64_t role_tag(std::string_view role) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : role) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Child seed for (role, index) under a master seed:
/// mix64(master ^ role_tag(role) ^ mix64(index)).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view role,
                                    std::uint64_t index = 0) {
  return mix64(master ^ role_tag(role) ^ mix64(index));
}

/// Circularly-symmetric complex Gaussian with the given total variance
/// (variance / 2 per real component).
inline cd complex_normal(Rng& rng, double variance) {
  std::normal_distribution<double> g(0.0, std::sqrt(variance / 2.0));
  const double re = g(rng);
  const double im = g(rng);
  return {re, im};
}

}  // namespace mdaircomp
