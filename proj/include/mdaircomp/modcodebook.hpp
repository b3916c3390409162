#pragma once

#include <cstdint>
#include <filesystem>

#include "mdaircomp/common.hpp"

namespace mdaircomp {

/// Shared non-orthogonal transmit sequences, one column per quantization
/// codeword. Column n is sent whenever a device selects codeword n.
class ModCodebook {
 public:
  ModCodebook() = default;
  ModCodebook(ComplexMatrix sequences, std::uint64_t seed);

  /// L x N matrix with i.i.d. entries uniform over {(+-1 +- j)/sqrt(2)}.
  static ModCodebook generate(int seq_len, int size, std::uint64_t seed);

  /// N x N unitary-DFT columns scaled to unit-modulus entries. Orthogonal,
  /// so recovery is exact without noise; used for ideal-link comparisons.
  static ModCodebook orthogonal(int size);

  const ComplexMatrix& sequences() const { return sequences_; }
  int seq_len() const { return static_cast<int>(sequences_.rows()); }
  int size() const { return static_cast<int>(sequences_.cols()); }
  std::uint64_t seed() const { return seed_; }

  /// Column n (zero-based). Throws std::out_of_range.
  ComplexVector sequence_for(int n) const;

  /// Largest |<p_i, p_j>| / (|p_i| |p_j|) over distinct columns.
  double coherence() const;

  friend bool operator==(const ModCodebook& a, const ModCodebook& b) {
    return a.seed_ == b.seed_ && a.sequences_ == b.sequences_;
  }

 private:
  ComplexMatrix sequences_;
  std::uint64_t seed_ = 0;
};

/// CSV layout: `seq_len,size,seed` header row, one row of values, then L rows
/// of 2N values with re/im interleaved per column.
void write_modcodebook_csv(const ModCodebook& p, const std::filesystem::path& path);
ModCodebook read_modcodebook_csv(const std::filesystem::path& path);

}  // namespace mdaircomp
