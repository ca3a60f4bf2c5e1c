#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "tabunas/network.hpp"

namespace tabunas {

using BinaryCode = ActivationTrace;

// K_H: entry (i, j) = N_A - HammingDistance(c_i, c_j).
struct KernelMatrix {
  std::size_t order = 0;
  std::uint64_t activation_units = 0;
  std::vector<std::int64_t> entries;  // row-major order x order

  std::int64_t at(std::size_t i, std::size_t j) const { return entries[i * order + j]; }
};

inline constexpr double kNegativeInfinityScore = -std::numeric_limits<double>::infinity();
inline constexpr int kDefaultProbeBatch = 32;

struct ScoreReport {
  double score = kNegativeInfinityScore;  // ln|det K_H|, or -inf when degenerate
  std::size_t batch_size = 0;
  std::uint64_t activation_units = 0;
  double condition = 0.0;  // largest / smallest pivot magnitude of the LU factorization
  bool degenerate = false;
};

std::size_t hamming_distance(const BinaryCode& a, const BinaryCode& b);

// Rectifier codes of every probe input.
std::vector<BinaryCode> activation_codes(const NetworkInstance& net, const Tensor& probe_batch);

// Throws ShapeError when codes differ in length.
KernelMatrix kernel_matrix(std::span<const BinaryCode> codes);

struct LogDet {
  double log_abs_det = kNegativeInfinityScore;
  double condition = 0.0;
  bool singular = true;
};

// ln|det| via LU with partial pivoting, summing log|pivot|. Singular when a
// pivot magnitude falls below pivot_floor.
LogDet log_abs_determinant(std::vector<double> matrix, std::size_t order, double pivot_floor);

ScoreReport score_codes(std::span<const BinaryCode> codes);
ScoreReport score(const NetworkInstance& net, const Tensor& probe_batch);

// N standard-normal inputs shaped like the network input.
Tensor make_probe_batch(const Resolution& input, int count, std::uint64_t seed);

}  // namespace tabunas
