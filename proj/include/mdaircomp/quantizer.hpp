#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mdaircomp/common.hpp"

namespace mdaircomp {

/// Shared vector-quantization codebook: one Q-dim codeword per column.
/// Q == 1 is scalar quantization.
class QuantCodebook {
 public:
  QuantCodebook() = default;
  explicit QuantCodebook(RealMatrix codewords);

  const RealMatrix& codewords() const { return codewords_; }
  int block_dim() const { return static_cast<int>(codewords_.rows()); }
  int size() const { return static_cast<int>(codewords_.cols()); }
  auto codeword(int n) const { return codewords_.col(n); }

  friend bool operator==(const QuantCodebook& a, const QuantCodebook& b) {
    return a.codewords_ == b.codewords_;
  }

 private:
  RealMatrix codewords_;
};

/// Quantization indices of one update vector, one per Q-sized block.
/// Indices are zero-based, in [0, N).
struct IndexVector {
  std::vector<int> indices;
  int padded_zeros = 0;

  int blocks() const { return static_cast<int>(indices.size()); }
};

/// Per-device accumulated quantization error e_k.
struct ErrorState {
  RealVector residual;

  static ErrorState zeros(int dim) { return {RealVector::Zero(dim)}; }
};

struct EncodedUpdate {
  IndexVector indices;
  RealVector quantized;
};

inline constexpr int kDefaultLloydIters = 50;

/// K-means++ seeding followed by Lloyd iterations until the assignment stops
/// changing or max_iters passes. Samples are the columns of `samples`
/// (Q x S). Throws std::invalid_argument on empty/non-finite data or when
/// there are fewer samples than requested centroids.
QuantCodebook learn_codebook(const RealMatrix& samples, int size,
                             int max_iters, std::uint64_t seed);

/// Splits a W-vector into ceil(W/Q) zero-padded blocks as the columns of a
/// Q x D matrix.
RealMatrix split_blocks(const RealVector& v, int block_dim);

int block_count(int dim, int block_dim);

/// Nearest codeword by Euclidean distance; ties go to the lowest index.
int quantize_block(std::span<const double> block, const QuantCodebook& book);
int quantize_block(const RealVector& block, const QuantCodebook& book);

EncodedUpdate encode_update(const RealVector& s_bar, const QuantCodebook& book);

RealVector reconstruct(const IndexVector& b, const QuantCodebook& book,
                       int dim);

/// e' = delta + e - quantized.
ErrorState accumulate_error(const RealVector& delta, const ErrorState& e,
                            const RealVector& quantized);

/// Sum of squared distances from each sample column to its nearest codeword.
double quantization_sse(const RealMatrix& samples, const QuantCodebook& book);

/// CSV layout: a `q_dim,size` header row, one row with those two values, then
/// Q rows of N values (codeword n is column n).
void write_codebook_csv(const QuantCodebook& book,
                        const std::filesystem::path& path);
QuantCodebook read_codebook_csv(const std::filesystem::path& path);

}  // namespace mdaircomp
