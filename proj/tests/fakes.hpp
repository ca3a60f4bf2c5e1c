#pragma once

#include <atomic>
#include <functional>
#include <mutex>
#include <set>

#include "tabunas/rng.hpp"
#include "tabunas/search.hpp"

namespace fake {

using namespace tabunas;

inline double unit_from(std::uint64_t x) {
  return static_cast<double>(derive_seed(x, 0x5eed) >> 11) * 0x1.0p-53;
}

// Candidate source with scripted scores and accuracies; no training happens.
// By default both are pseudo-random functions of the genome hash.
class ScriptedSource : public CandidateSource {
 public:
  ScriptedSource(double target_params, double alpha) : target_params_(target_params), alpha_(alpha) {}

  std::function<double(const ArchitectureGenome&, const GenomeHash&)> score_of =
      [](const ArchitectureGenome&, const GenomeHash& h) { return 1.0 + 10.0 * unit_from(h.prefix64()); };
  std::function<double(const ArchitectureGenome&, const GenomeHash&)> accuracy_of =
      [](const ArchitectureGenome&, const GenomeHash& h) { return unit_from(h.prefix64() ^ 0xacc); };

  ScoreReport score(const ArchitectureGenome& genome) override {
    ScoreReport r;
    r.score = score_of(genome, canonical_hash(genome));
    r.degenerate = !std::isfinite(r.score);
    r.batch_size = 1;
    r.activation_units = 1;
    return r;
  }

  EvalResult evaluate(const ArchitectureGenome& genome) override {
    EvalResult r;
    r.hash = canonical_hash(genome);
    r.grade = grade(accuracy_of(genome, r.hash), param_count(genome), target_params_, alpha_);
    {
      std::lock_guard lock(mutex_);
      trained_.insert(r.hash);
    }
    ++evaluations;
    return r;
  }

  std::size_t distinct_trained() const {
    std::lock_guard lock(mutex_);
    return trained_.size();
  }

  std::atomic<int> evaluations{0};

 private:
  double target_params_;
  double alpha_;
  mutable std::mutex mutex_;
  std::set<GenomeHash> trained_;
};

}  // namespace fake
