#include "mdaircomp/modcodebook.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

namespace mdaircomp {

ModCodebook::ModCodebook(ComplexMatrix sequences, std::uint64_t seed)
    : sequences_(std::move(sequences)), seed_(seed) {
  if (sequences_.rows() < 1 || sequences_.cols() < 1)
    throw std::invalid_argument("modulation codebook dimensions must be >= 1");
  if (!sequences_.allFinite()) throw std::invalid_argument("modulation codebook must be finite");
}

ModCodebook ModCodebook::generate(int seq_len, int size, std::uint64_t seed) {
  if (seq_len < 1 || size < 1)
    throw std::invalid_argument("modulation codebook dimensions must be >= 1");
  const double a = std::numbers::sqrt2 / 2.0;
  Rng rng(seed);
  std::bernoulli_distribution coin(0.5);
  ComplexMatrix p(seq_len, size);
  for (int n = 0; n < size; ++n)
    for (int l = 0; l < seq_len; ++l) {
      const double re = coin(rng) ? a : -a;
      const double im = coin(rng) ? a : -a;
      p(l, n) = cd(re, im);
    }
  return ModCodebook(std::move(p), seed);
}

ModCodebook ModCodebook::orthogonal(int size) {
  if (size < 1) throw std::invalid_argument("modulation codebook dimensions must be >= 1");
  ComplexMatrix p(size, size);
  for (int l = 0; l < size; ++l)
    for (int n = 0; n < size; ++n) {
      // reduce l*n mod size first so the phase stays exact for large N
      const double angle =
          -2.0 * std::numbers::pi * static_cast<double>((l * n) % size) / size;
      p(l, n) = std::polar(1.0, angle);
    }
  return ModCodebook(std::move(p), 0);
}

ComplexVector ModCodebook::sequence_for(int n) const {
  if (n < 0 || n >= size())
    throw std::out_of_range("modulation index " + std::to_string(n) + " out of range");
  return sequences_.col(n);
}

double ModCodebook::coherence() const {
  const Eigen::VectorXd norms = sequences_.colwise().norm().transpose();
  const ComplexMatrix gram = sequences_.adjoint() * sequences_;
  double worst = 0.0;
  for (int i = 0; i < size(); ++i)
    for (int j = i + 1; j < size(); ++j)
      worst = std::max(worst, std::abs(gram(i, j)) / (norms(i) * norms(j)));
  return worst;
}

void write_modcodebook_csv(const ModCodebook& p, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "seq_len,size,seed\n" << p.seq_len() << ',' << p.size() << ',' << p.seed() << '\n';
  out << std::setprecision(17);
  for (int l = 0; l < p.seq_len(); ++l) {
    for (int n = 0; n < p.size(); ++n) {
      if (n > 0) out << ',';
      out << p.sequences()(l, n).real() << ',' << p.sequences()(l, n).imag();
    }
    out << '\n';
  }
}

ModCodebook read_modcodebook_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "seq_len,size,seed") throw std::runtime_error("bad codebook header: " + line);
  std::getline(in, line);
  std::istringstream dims(line);
  std::string cell;
  std::vector<std::string> fields;
  while (std::getline(dims, cell, ',')) fields.push_back(cell);
  if (fields.size() != 3) throw std::runtime_error("bad codebook dimensions: " + line);
  const int l_len = std::stoi(fields[0]);
  const int n_len = std::stoi(fields[1]);
  const std::uint64_t seed = std::stoull(fields[2]);
  if (l_len < 1 || n_len < 1) throw std::runtime_error("bad codebook dimensions: " + line);
  ComplexMatrix p(l_len, n_len);
  for (int l = 0; l < l_len; ++l) {
    if (!std::getline(in, line)) throw std::runtime_error("truncated codebook file");
    std::istringstream row(line);
    for (int n = 0; n < n_len; ++n) {
      std::string re;
      std::string im;
      if (!std::getline(row, re, ',') || !std::getline(row, im, ','))
        throw std::runtime_error("short codebook row");
      p(l, n) = cd(std::stod(re), std::stod(im));
    }
  }
  return ModCodebook(std::move(p), seed);
}

}  // namespace mdaircomp
