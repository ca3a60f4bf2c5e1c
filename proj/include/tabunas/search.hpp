#pragma once

#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <vector>

#include "tabunas/evaluator.hpp"
#include "tabunas/genome.hpp"
#include "tabunas/mutation.hpp"
#include "tabunas/scorer.hpp"

namespace tabunas {

// Source of training-free scores and trained grades for candidates. Both
// calls must be thread-safe and deterministic per genome.
class CandidateSource {
 public:
  virtual ~CandidateSource() = default;
  virtual ScoreReport score(const ArchitectureGenome& genome) = 0;
  virtual EvalResult evaluate(const ArchitectureGenome& genome) = 0;
};

// Production source: scores on a shared probe batch with per-genome init
// seeds, trains through an Evaluator. Scores are memoized.
class TrainedCandidates : public CandidateSource {
 public:
  TrainedCandidates(Evaluator& evaluator, int probe_batch, std::uint64_t probe_seed);

  ScoreReport score(const ArchitectureGenome& genome) override;
  EvalResult evaluate(const ArchitectureGenome& genome) override;

  const Tensor& probe() const { return probe_; }

 private:
  Evaluator& evaluator_;
  Tensor probe_;
  std::mutex mutex_;
  std::unordered_map<GenomeHash, ScoreReport> scores_;
};

// Scores one genome exactly as TrainedCandidates does, without caching.
ScoreReport score_genome(const ArchitectureGenome& genome, const Tensor& probe,
                         std::uint64_t master_seed);

// ---------------------------------------------------------------------------
// Population and ranking

struct Population {
  std::vector<ArchitectureGenome> genomes;
  bool short_of_target = false;  // the space (or retry cap) ran out first
};

// Draws per retry-cap attempt: 100 * count + 1000.
Population seed_population(const SearchSpaceConfig& config, std::uint64_t seed, int count);

struct RankingEntry {
  GenomeHash hash;
  ArchitectureGenome genome;
  double score = kNegativeInfinityScore;
  std::uint64_t params = 0;
  std::uint64_t activation_units = 0;
  bool degenerate = false;
  std::optional<double> grade;  // set once the genome has been trained
};

// (degenerate ascending, score descending, hash ascending)
bool ranks_before(const RankingEntry& a, const RankingEntry& b);

RankingEntry make_entry(const ArchitectureGenome& genome, const ScoreReport& report);

std::vector<RankingEntry> rank_initial(const std::vector<ArchitectureGenome>& population,
                                       CandidateSource& source, std::size_t workers);

struct ParentSelection {
  std::vector<RankingEntry> parents;
  bool short_of_target = false;
};

inline constexpr int kParentCount = 6;
inline constexpr double kClosenessPercentile = 0.05;

// Three best-ranked entries, then the three best-scoring entries of the
// closeness band (entries whose |params - P| is within the 5th percentile of
// that distance over the non-degenerate population). Overlaps and a thin band
// are filled by the next-closest entries.
ParentSelection select_parents(const std::vector<RankingEntry>& ranking, double target_params);

// ---------------------------------------------------------------------------
// Tabu search

struct TabuRecord {
  GenomeHash hash;
  ArchitectureGenome genome;
  int iteration = 0;
  std::optional<EvalResult> eval;  // trained candidates carry a grade
  std::optional<double> reward;
  double score = kNegativeInfinityScore;
};

class TabuList {
 public:
  explicit TabuList(std::size_t tenure = 20) : tenure_(tenure) {}

  void push(TabuRecord record);
  bool contains(const GenomeHash& hash) const;
  std::size_t size() const { return records_.size(); }
  std::size_t tenure() const { return tenure_; }
  const std::deque<TabuRecord>& records() const { return records_; }

  // Highest recorded grade among trained records; when none is trained, the
  // highest reward. Ties go to the smaller hash.
  std::optional<TabuRecord> best_fallback() const;

 private:
  std::size_t tenure_;
  std::deque<TabuRecord> records_;
};

struct Candidate {
  ArchitectureGenome genome;
  GenomeHash hash;
  EvalResult eval;
  double score = kNegativeInfinityScore;
};

struct SearchState {
  Candidate current;
  Candidate best;
  int iteration = 0;
  int no_improvement = 0;
  TabuList tabu;
  std::uint64_t stream_seed = 0;
};

struct TrajectoryRecord {
  int iteration = 0;
  std::optional<GenomeHash> child_hash;  // empty for a stalled step
  double reward = 0.0;
  bool reward_fallback = false;
  double accuracy = 0.0;
  std::uint64_t params = 0;
  double grade = 0.0;
  bool accepted = false;
  std::size_t tabu_size = 0;
};

struct StepContext {
  const SearchSpaceConfig& space;
  CandidateSource& source;
  double target_params;
  double alpha;
  int children = kDefaultChildren;
  std::vector<MutationRecord>* audit = nullptr;
  std::vector<EvalResult>* evals = nullptr;
};

// Trains and grades `start` to form the initial state of one parent search.
SearchState start_search(const ArchitectureGenome& start, CandidateSource& source,
                         std::size_t tabu_tenure, std::uint64_t stream_seed,
                         std::vector<EvalResult>* evals = nullptr);

// One mutate -> reward -> train -> grade iteration.
TrajectoryRecord ats_step(SearchState& state, const StepContext& ctx);

struct SearchSettings {
  SearchSpaceConfig space = default_space_config();
  double target_params = 2e6;
  double alpha = 0.6;
  int population = 60000;
  int children = kDefaultChildren;
  int max_iterations = 100;
  int patience = 10;
  std::size_t tabu_tenure = 20;
  std::uint64_t master_seed = 0;
};

struct ParentRun {
  RankingEntry parent;
  std::vector<TrajectoryRecord> trajectory;
  std::vector<EvalResult> evals;
  std::vector<MutationRecord> audit;
  Candidate best;
  int final_no_improvement = 0;
};

// Runs ats_step from one parent until max_iterations or patience is reached.
ParentRun search_from_parent(const RankingEntry& parent, const SearchSettings& settings,
                             CandidateSource& source);

struct SearchResult {
  std::vector<RankingEntry> initial_ranking;
  std::vector<RankingEntry> final_ranking;
  std::vector<ParentRun> runs;
  Candidate best;
  bool population_short = false;
  bool parents_short = false;
};

SearchResult run_search(const SearchSettings& settings, CandidateSource& source,
                        std::size_t workers);

}  // namespace tabunas
