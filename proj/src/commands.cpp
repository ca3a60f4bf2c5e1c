#include "tabunas/commands.hpp"

#include <chrono>
#include <ctime>
#include <sstream>

#include "tabunas/artifacts.hpp"
#include "tabunas/errors.hpp"
#include "tabunas/parallel.hpp"
#include "tabunas/rng.hpp"

namespace tabunas {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void say(const LogFn& log, const std::string& msg) {
  if (log) log(msg);
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void require_valid(const ArchitectureGenome& genome) {
  const ValidityReport report = validate(genome);
  if (!report.ok()) throw InvalidGenome(report.describe());
}

std::uint64_t probe_seed(const RunConfig& config) { return derive_seed(config.seed, "probe"); }

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
  return fs::path(dir);
}

}  // namespace

Tensor run_probe(const RunConfig& config) {
  return make_probe_batch(config.space.input, config.probe_batch, probe_seed(config));
}

SearchOutcome cmd_search(const RunConfig& config, std::size_t workers, const LogFn& log) {
  validate_run_config(config);
  Evaluator evaluator(eval_settings(config));
  TrainedCandidates source(evaluator, config.probe_batch, probe_seed(config));
  return cmd_search(config, workers, source, evaluator, log);
}

SearchOutcome cmd_search(const RunConfig& config, std::size_t workers, CandidateSource& source,
                         Evaluator& evaluator, const LogFn& log) {
  validate_run_config(config);
  const auto start = std::chrono::steady_clock::now();
  const fs::path dir = prepare_dir(config.output_dir);
  write_text(dir / "config.json", to_json(config).dump(2) + "\n");

  say(log, "search: population " + std::to_string(config.population) + ", " +
               std::to_string(workers) + " worker(s)");
  SearchOutcome out;
  out.run_dir = dir;
  out.result = run_search(search_settings(config), source, workers);
  const SearchResult& r = out.result;
  if (r.population_short) say(log, "warning: population smaller than requested");
  if (r.parents_short) say(log, "warning: fewer than six usable parents");

  write_text(dir / "ranking.csv", ranking_csv(r.initial_ranking));
  write_text(dir / "final_ranking.csv", final_ranking_csv(r.final_ranking));

  std::vector<EvalResult> evals;
  std::vector<MutationRecord> audit;
  json timings = json::array();
  json runs = json::array();
  for (const ParentRun& run : r.runs) {
    evals.insert(evals.end(), run.evals.begin(), run.evals.end());
    audit.insert(audit.end(), run.audit.begin(), run.audit.end());
    for (const EvalResult& e : run.evals) {
      timings.push_back({{"hash", e.hash.hex()}, {"wall_seconds", e.wall_seconds}});
    }
    write_text(dir / trajectory_file_name(run.parent.hash), trajectory_csv(run.trajectory));
    runs.push_back({{"parent", run.parent.hash.hex()},
                    {"iterations", run.trajectory.size()},
                    {"best", run.best.hash.hex()},
                    {"best_grade", run.best.eval.grade.grade}});
    say(log, "parent " + run.parent.hash.short_hex() + ": " + std::to_string(run.trajectory.size()) +
                 " iteration(s), best grade " + format_double(run.best.eval.grade.grade));
  }
  write_text(dir / "evals.csv", evals_csv(evals));
  write_text(dir / "mutations.jsonl", mutations_jsonl(audit));
  save_genome(r.best.genome, (dir / "best_genome.json").string());

  // Weights are not kept during search; the best genome is retrained with its
  // own seeds, which reproduces the graded weights exactly.
  auto [best_eval, best_params] = evaluator.train_and_grade(r.best.genome);
  save_parameters(best_params, (dir / "best_params.bin").string(),
                  (dir / "best_params.manifest").string());

  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_text(dir / "timings.json", timings.dump(2) + "\n");
  const json summary = {
      {"finished_at", utc_timestamp()},
      {"wall_seconds", out.wall_seconds},
      {"seed", config.seed},
      {"best",
       {{"hash", r.best.hash.hex()},
        {"grade", r.best.eval.grade.grade},
        {"accuracy", r.best.eval.grade.accuracy},
        {"params", r.best.eval.grade.params},
        {"score", r.best.score}}},
      {"population", r.initial_ranking.size()},
      {"population_short", r.population_short},
      {"parents_short", r.parents_short},
      {"runs", runs}};
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  say(log, "best " + r.best.hash.short_hex() + " grade " + format_double(r.best.eval.grade.grade) +
               " accuracy " + format_double(r.best.eval.grade.accuracy) + " params " +
               std::to_string(r.best.eval.grade.params));
  return out;
}

json cmd_score(const ArchitectureGenome& genome, const RunConfig& config) {
  require_valid(genome);
  const Tensor probe = make_probe_batch(genome.input, config.probe_batch, probe_seed(config));
  const ScoreReport s = score_genome(genome, probe, config.seed);
  return {{"hash", canonical_hash(genome).hex()},
          {"score", s.degenerate ? json(nullptr) : json(s.score)},
          {"n_a", s.activation_units},
          {"params", param_count(genome)},
          {"degenerate", s.degenerate},
          {"condition", std::isfinite(s.condition) ? json(s.condition) : json(nullptr)},
          {"batch_size", s.batch_size}};
}

json cmd_eval(const ArchitectureGenome& genome, const RunConfig& config) {
  require_valid(genome);
  if (genome.input != config.space.input) {
    throw InvalidGenome("genome input resolution does not match the configured task");
  }
  const Evaluator evaluator(eval_settings(config));
  const EvalResult e = evaluator.train_and_grade(genome).first;
  return {{"hash", e.hash.hex()},
          {"grade", e.grade.grade},
          {"accuracy", e.grade.accuracy},
          {"params", e.grade.params},
          {"target_params", e.grade.target_params},
          {"alpha", e.grade.alpha},
          {"r", e.grade.r},
          {"epochs", e.epochs}};
}

std::vector<EnumeratedGenome> cmd_enumerate(const RunConfig& config, std::size_t workers,
                                            CandidateSource& source, bool write,
                                            const LogFn& log) {
  validate_run_config(config);
  if (space_size(config.space) > kMaxEnumeration) {
    throw InvalidConfig("space too large to enumerate (limit " + std::to_string(kMaxEnumeration) + ")");
  }
  std::vector<EnumeratedGenome> rows;
  enumerate_genomes(config.space, [&](const ArchitectureGenome& g) {
    rows.push_back({g, canonical_hash(g), {}, {}});
    return true;
  });
  say(log, "enumerate: " + std::to_string(rows.size()) + " genome(s)");
  parallel_for(rows.size(), workers, [&](std::size_t i) {
    rows[i].score = source.score(rows[i].genome);
    rows[i].eval = source.evaluate(rows[i].genome);
  });
  if (write) {
    const fs::path dir = prepare_dir(config.output_dir);
    write_text(dir / "config.json", to_json(config).dump(2) + "\n");
    write_text(dir / "enumeration.csv", enumeration_csv(rows));
  }
  return rows;
}

std::vector<EnumeratedGenome> cmd_enumerate(const RunConfig& config, std::size_t workers,
                                            const LogFn& log) {
  validate_run_config(config);
  Evaluator evaluator(eval_settings(config));
  TrainedCandidates source(evaluator, config.probe_batch, probe_seed(config));
  return cmd_enumerate(config, workers, source, true, log);
}

std::string enumeration_csv(const std::vector<EnumeratedGenome>& rows) {
  std::ostringstream os;
  os << "hash,score,n_a,params,degenerate,accuracy,grade\n";
  for (const auto& r : rows) {
    os << r.hash.hex() << ',' << format_double(r.score.score) << ',' << r.score.activation_units
       << ',' << r.eval.grade.params << ',' << (r.score.degenerate ? 1 : 0) << ','
       << format_double(r.eval.grade.accuracy) << ',' << format_double(r.eval.grade.grade) << '\n';
  }
  return os.str();
}

json error_record(const std::string& kind, const std::string& message) {
  return {{"status", "error"}, {"kind", kind}, {"message", message}};
}

}  // namespace tabunas
