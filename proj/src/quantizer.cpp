#include "mdaircomp/quantizer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

namespace mdaircomp {

namespace {

double squared_distance(const RealMatrix& samples, int s, const RealMatrix& centroids,
                        int c) {
  return (samples.col(s) - centroids.col(c)).squaredNorm();
}

int nearest(const RealMatrix& samples, int s, const RealMatrix& centroids,
            double* best_dist = nullptr) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int c = 0; c < centroids.cols(); ++c) {
    const double d = squared_distance(samples, s, centroids, c);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (best_dist != nullptr) *best_dist = best_d;
  return best;
}

RealMatrix kmeanspp_seed(const RealMatrix& samples, int size, Rng& rng) {
  const int count = static_cast<int>(samples.cols());
  RealMatrix centroids(samples.rows(), size);
  std::uniform_int_distribution<int> pick(0, count - 1);
  centroids.col(0) = samples.col(pick(rng));

  std::vector<double> d2(count);
  for (int s = 0; s < count; ++s) d2[s] = squared_distance(samples, s, centroids, 0);

  for (int c = 1; c < size; ++c) {
    double total = 0.0;
    for (double d : d2) total += d;
    int chosen = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      chosen = count - 1;
      for (int s = 0; s < count; ++s) {
        target -= d2[s];
        if (target < 0.0) {
          chosen = s;
          break;
        }
      }
    } else {
      // every sample already sits on a centroid
      chosen = pick(rng);
    }
    centroids.col(c) = samples.col(chosen);
    for (int s = 0; s < count; ++s)
      d2[s] = std::min(d2[s], squared_distance(samples, s, centroids, c));
  }
  return centroids;
}

}  // namespace

QuantCodebook::QuantCodebook(RealMatrix codewords) : codewords_(std::move(codewords)) {
  if (codewords_.rows() < 1 || codewords_.cols() < 1)
    throw std::invalid_argument("codebook must have at least one codeword of dimension >= 1");
  if (!codewords_.allFinite())
    throw std::invalid_argument("codebook entries must be finite");
}

QuantCodebook learn_codebook(const RealMatrix& samples, int size, int max_iters,
                             std::uint64_t seed) {
  if (samples.cols() == 0 || samples.rows() == 0)
    throw std::invalid_argument("no training data");
  if (size < 1) throw std::invalid_argument("codebook size must be >= 1");
  if (!samples.allFinite()) throw std::invalid_argument("non-finite training sample");
  if (samples.cols() < size)
    throw std::invalid_argument("fewer training samples (" + std::to_string(samples.cols()) +
                                ") than codewords (" + std::to_string(size) + ")");

  Rng rng(seed);
  RealMatrix centroids = kmeanspp_seed(samples, size, rng);
  const int count = static_cast<int>(samples.cols());
  std::vector<int> assign(count, -1);
  std::vector<double> dist(count, 0.0);

  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (int s = 0; s < count; ++s) {
      const int c = nearest(samples, s, centroids, &dist[s]);
      if (c != assign[s]) {
        assign[s] = c;
        changed = true;
      }
    }
    if (!changed) break;

    RealMatrix sums = RealMatrix::Zero(samples.rows(), size);
    std::vector<int> members(size, 0);
    for (int s = 0; s < count; ++s) {
      sums.col(assign[s]) += samples.col(s);
      ++members[assign[s]];
    }
    for (int c = 0; c < size; ++c) {
      if (members[c] > 0) {
        centroids.col(c) = sums.col(c) / members[c];
        continue;
      }
      // Empty cluster: move it onto the worst-served sample.
      int far = 0;
      for (int s = 1; s < count; ++s)
        if (dist[s] > dist[far]) far = s;
      centroids.col(c) = samples.col(far);
      dist[far] = 0.0;
    }
  }
  return QuantCodebook(std::move(centroids));
}

int block_count(int dim, int block_dim) {
  if (dim < 1 || block_dim < 1) throw std::invalid_argument("dimensions must be >= 1");
  return (dim + block_dim - 1) / block_dim;
}

RealMatrix split_blocks(const RealVector& v, int block_dim) {
  const int blocks = block_count(static_cast<int>(v.size()), block_dim);
  RealVector padded = RealVector::Zero(static_cast<Eigen::Index>(blocks) * block_dim);
  padded.head(v.size()) = v;
  return padded.reshaped(block_dim, blocks);
}

int quantize_block(std::span<const double> block, const QuantCodebook& book) {
  if (static_cast<int>(block.size()) != book.block_dim())
    throw std::invalid_argument("block dimension " + std::to_string(block.size()) +
                                " does not match codebook dimension " +
                                std::to_string(book.block_dim()));
  const Eigen::Map<const RealVector> b(block.data(), static_cast<Eigen::Index>(block.size()));
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int n = 0; n < book.size(); ++n) {
    const double d = (book.codeword(n) - b).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = n;
    }
  }
  return best;
}

int quantize_block(const RealVector& block, const QuantCodebook& book) {
  return quantize_block(std::span<const double>(block.data(), static_cast<std::size_t>(block.size())),
                        book);
}

EncodedUpdate encode_update(const RealVector& s_bar, const QuantCodebook& book) {
  const int dim = static_cast<int>(s_bar.size());
  const RealMatrix blocks = split_blocks(s_bar, book.block_dim());
  EncodedUpdate out;
  out.indices.padded_zeros = static_cast<int>(blocks.size()) - dim;
  out.indices.indices.resize(blocks.cols());
  for (Eigen::Index d = 0; d < blocks.cols(); ++d)
    out.indices.indices[d] = quantize_block(RealVector(blocks.col(d)), book);
  out.quantized = reconstruct(out.indices, book, dim);
  return out;
}

RealVector reconstruct(const IndexVector& b, const QuantCodebook& book, int dim) {
  const int q = book.block_dim();
  if (dim < 0 || dim > b.blocks() * q)
    throw std::invalid_argument("requested length exceeds the encoded blocks");
  RealVector full(static_cast<Eigen::Index>(b.blocks()) * q);
  for (int d = 0; d < b.blocks(); ++d) {
    const int n = b.indices[d];
    if (n < 0 || n >= book.size())
      throw std::out_of_range("quantization index " + std::to_string(n) + " out of range");
    full.segment(static_cast<Eigen::Index>(d) * q, q) = book.codeword(n);
  }
  return full.head(dim);
}

ErrorState accumulate_error(const RealVector& delta, const ErrorState& e,
                            const RealVector& quantized) {
  if (delta.size() != e.residual.size() || delta.size() != quantized.size())
    throw std::invalid_argument("error accumulation dimension mismatch");
  return {delta + e.residual - quantized};
}

double quantization_sse(const RealMatrix& samples, const QuantCodebook& book) {
  double sse = 0.0;
  for (Eigen::Index s = 0; s < samples.cols(); ++s) {
    double d = 0.0;
    nearest(samples, static_cast<int>(s), book.codewords(), &d);
    sse += d;
  }
  return sse;
}

void write_codebook_csv(const QuantCodebook& book, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "q_dim,size\n" << book.block_dim() << ',' << book.size() << '\n';
  out << std::setprecision(17);
  for (int q = 0; q < book.block_dim(); ++q) {
    for (int n = 0; n < book.size(); ++n) {
      if (n > 0) out << ',';
      out << book.codewords()(q, n);
    }
    out << '\n';
  }
}

QuantCodebook read_codebook_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "q_dim,size") throw std::runtime_error("bad codebook header: " + line);
  std::getline(in, line);
  int q = 0;
  int n = 0;
  char comma = 0;
  std::istringstream dims(line);
  if (!(dims >> q >> comma >> n) || comma != ',' || q < 1 || n < 1)
    throw std::runtime_error("bad codebook dimensions: " + line);
  RealMatrix u(q, n);
  for (int r = 0; r < q; ++r) {
    if (!std::getline(in, line)) throw std::runtime_error("truncated codebook file");
    std::istringstream row(line);
    std::string cell;
    for (int c = 0; c < n; ++c) {
      if (!std::getline(row, cell, ',')) throw std::runtime_error("short codebook row");
      u(r, c) = std::stod(cell);
    }
  }
  return QuantCodebook(std::move(u));
}

}  // namespace mdaircomp
