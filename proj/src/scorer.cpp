#include "tabunas/scorer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>

#include "tabunas/errors.hpp"
#include "tabunas/rng.hpp"

namespace tabunas {

namespace {
// Probe inputs are pushed through the network in chunks to bound memory.
constexpr int kProbeChunk = 8;
}  // namespace

std::size_t hamming_distance(const BinaryCode& a, const BinaryCode& b) {
  if (a.bits != b.bits) throw ShapeError("codes have different lengths");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.words.size(); ++i) d += std::popcount(a.words[i] ^ b.words[i]);
  return d;
}

std::vector<BinaryCode> activation_codes(const NetworkInstance& net, const Tensor& probe_batch) {
  std::vector<BinaryCode> codes;
  const int n = probe_batch.shape().n;
  if (n < 1) throw ShapeError("probe batch is empty");
  codes.reserve(n);
  for (int first = 0; first < n; first += kProbeChunk) {
    const int count = std::min(kProbeChunk, n - first);
    auto traces = forward(net, probe_batch.slice(first, count), true).traces;
    for (auto& t : traces) codes.push_back(std::move(t));
  }
  return codes;
}

KernelMatrix kernel_matrix(std::span<const BinaryCode> codes) {
  KernelMatrix k;
  k.order = codes.size();
  if (codes.empty()) return k;
  k.activation_units = codes.front().bits;
  for (const auto& c : codes) {
    if (c.bits != k.activation_units) throw ShapeError("codes have different lengths");
  }
  const auto na = static_cast<std::int64_t>(k.activation_units);
  k.entries.assign(k.order * k.order, na);
  for (std::size_t i = 0; i < k.order; ++i) {
    for (std::size_t j = i + 1; j < k.order; ++j) {
      const auto v = na - static_cast<std::int64_t>(hamming_distance(codes[i], codes[j]));
      k.entries[i * k.order + j] = v;
      k.entries[j * k.order + i] = v;
    }
  }
  return k;
}

LogDet log_abs_determinant(std::vector<double> a, std::size_t n, double pivot_floor) {
  LogDet result;
  double sum = 0.0;
  double largest = 0.0;
  double smallest = std::numeric_limits<double>::infinity();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
    }
    const double p = a[pivot * n + col];
    if (!(std::abs(p) >= pivot_floor) || p == 0.0) return result;
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[pivot * n + c], a[col * n + c]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / p;
      if (f == 0.0) continue;
      for (std::size_t c = col + 1; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
    }
    sum += std::log(std::abs(p));
    largest = std::max(largest, std::abs(p));
    smallest = std::min(smallest, std::abs(p));
  }
  result.log_abs_det = sum;
  result.condition = n == 0 ? 1.0 : largest / smallest;
  result.singular = false;
  return result;
}

ScoreReport score_codes(std::span<const BinaryCode> codes) {
  const KernelMatrix k = kernel_matrix(codes);
  ScoreReport report;
  report.batch_size = k.order;
  report.activation_units = k.activation_units;
  for (std::size_t i = 0; i < codes.size() && !report.degenerate; ++i) {
    for (std::size_t j = i + 1; j < codes.size(); ++j) {
      if (codes[i].words == codes[j].words) {
        report.degenerate = true;
        break;
      }
    }
  }
  if (report.degenerate || k.activation_units == 0) {
    report.degenerate = true;
    return report;
  }
  std::vector<double> m(k.entries.begin(), k.entries.end());
  const LogDet det = log_abs_determinant(std::move(m), k.order,
                                         1e-12 * static_cast<double>(k.activation_units));
  report.condition = det.condition;
  if (det.singular) {
    report.degenerate = true;
    return report;
  }
  report.score = det.log_abs_det;
  return report;
}

ScoreReport score(const NetworkInstance& net, const Tensor& probe_batch) {
  const auto codes = activation_codes(net, probe_batch);
  return score_codes(codes);
}

Tensor make_probe_batch(const Resolution& input, int count, std::uint64_t seed) {
  Tensor batch(Shape{count, input.channels, input.height, input.width});
  Rng rng(seed);
  for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = rng.normal();
  return batch;
}

}  // namespace tabunas
