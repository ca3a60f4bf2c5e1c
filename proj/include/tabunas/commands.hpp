#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tabunas/run_config.hpp"
#include "tabunas/search.hpp"

namespace tabunas {

using LogFn = std::function<void(const std::string&)>;

// Probe batch shared by every candidate of a run.
Tensor run_probe(const RunConfig& config);

struct SearchOutcome {
  SearchResult result;
  double wall_seconds = 0.0;
  std::filesystem::path run_dir;
};

// Runs the full pipeline and writes the run directory:
//   config.json, ranking.csv, final_ranking.csv, evals.csv,
//   trajectory-<parent hash>.csv (one per parent), mutations.jsonl,
//   best_genome.json, best_params.bin + best_params.manifest, timings.json,
//   summary.json
SearchOutcome cmd_search(const RunConfig& config, std::size_t workers, const LogFn& log = {});

// Same, with a caller-provided candidate source (lets tests share caches).
SearchOutcome cmd_search(const RunConfig& config, std::size_t workers, CandidateSource& source,
                         Evaluator& evaluator, const LogFn& log = {});

// {"hash", "score", "n_a", "params", "degenerate", "condition", "batch_size"}
nlohmann::json cmd_score(const ArchitectureGenome& genome, const RunConfig& config);

// {"hash", "grade", "accuracy", "params", "target_params", "alpha", "r", "epochs"}
nlohmann::json cmd_eval(const ArchitectureGenome& genome, const RunConfig& config);

struct EnumeratedGenome {
  ArchitectureGenome genome;
  GenomeHash hash;
  ScoreReport score;
  EvalResult eval;
};

inline constexpr std::uint64_t kMaxEnumeration = 4096;

// Scores, trains and grades every genome of a small space; writes
// enumeration.csv (hash,score,n_a,params,degenerate,accuracy,grade) into the
// output directory when write is set.
std::vector<EnumeratedGenome> cmd_enumerate(const RunConfig& config, std::size_t workers,
                                            CandidateSource& source, bool write,
                                            const LogFn& log = {});
std::vector<EnumeratedGenome> cmd_enumerate(const RunConfig& config, std::size_t workers,
                                            const LogFn& log = {});

std::string enumeration_csv(const std::vector<EnumeratedGenome>& rows);

nlohmann::json error_record(const std::string& kind, const std::string& message);

}  // namespace tabunas
