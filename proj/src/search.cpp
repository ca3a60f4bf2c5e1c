#include "tabunas/search.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "tabunas/errors.hpp"
#include "tabunas/parallel.hpp"
#include "tabunas/rng.hpp"

namespace tabunas {

// ---------------------------------------------------------------------------
// Candidate sources

ScoreReport score_genome(const ArchitectureGenome& genome, const Tensor& probe,
                         std::uint64_t master_seed) {
  const NetworkInstance net = build_network(genome, init_seed_for(master_seed, canonical_hash(genome)));
  return score(net, probe);
}

TrainedCandidates::TrainedCandidates(Evaluator& evaluator, int probe_batch, std::uint64_t probe_seed)
    : evaluator_(evaluator),
      probe_(make_probe_batch(evaluator.settings().input, probe_batch, probe_seed)) {
  if (probe_batch < 1) throw InvalidConfig("probe batch must hold at least one input");
}

ScoreReport TrainedCandidates::score(const ArchitectureGenome& genome) {
  const GenomeHash h = canonical_hash(genome);
  {
    std::lock_guard lock(mutex_);
    if (auto it = scores_.find(h); it != scores_.end()) return it->second;
  }
  const ScoreReport r = score_genome(genome, probe_, evaluator_.settings().master_seed);
  std::lock_guard lock(mutex_);
  return scores_.emplace(h, r).first->second;
}

EvalResult TrainedCandidates::evaluate(const ArchitectureGenome& genome) {
  return evaluator_.evaluate(genome);
}

// ---------------------------------------------------------------------------
// Population and ranking

Population seed_population(const SearchSpaceConfig& config, std::uint64_t seed, int count) {
  if (count < 1) throw InvalidConfig("population count must be >= 1");
  validate_config(config);
  Population pop;
  if (space_size(config) <= count) {
    enumerate_genomes(config, [&](const ArchitectureGenome& g) {
      pop.genomes.push_back(g);
      return true;
    });
    pop.short_of_target = static_cast<int>(pop.genomes.size()) < count;
    return pop;
  }
  Rng rng(seed);
  std::unordered_set<GenomeHash> seen;
  const long max_draws = 100L * count + 1000;
  for (long draw = 0; draw < max_draws && static_cast<int>(pop.genomes.size()) < count; ++draw) {
    ArchitectureGenome g = random_genome(config, rng.next());
    if (seen.insert(canonical_hash(g)).second) pop.genomes.push_back(std::move(g));
  }
  pop.short_of_target = static_cast<int>(pop.genomes.size()) < count;
  return pop;
}

bool ranks_before(const RankingEntry& a, const RankingEntry& b) {
  if (a.degenerate != b.degenerate) return !a.degenerate;
  if (a.score != b.score) return a.score > b.score;
  return a.hash < b.hash;
}

RankingEntry make_entry(const ArchitectureGenome& genome, const ScoreReport& report) {
  RankingEntry e;
  e.hash = canonical_hash(genome);
  e.genome = genome;
  e.score = report.score;
  e.params = param_count(genome);
  e.activation_units = report.activation_units;
  e.degenerate = report.degenerate;
  return e;
}

std::vector<RankingEntry> rank_initial(const std::vector<ArchitectureGenome>& population,
                                       CandidateSource& source, std::size_t workers) {
  if (population.empty()) throw InvalidConfig("cannot rank an empty population");
  std::vector<RankingEntry> ranking(population.size());
  parallel_for(population.size(), workers, [&](std::size_t i) {
    ranking[i] = make_entry(population[i], source.score(population[i]));
  });
  std::sort(ranking.begin(), ranking.end(), ranks_before);
  return ranking;
}

ParentSelection select_parents(const std::vector<RankingEntry>& ranking, double target_params) {
  std::vector<RankingEntry> sorted = ranking;
  std::sort(sorted.begin(), sorted.end(), ranks_before);
  std::vector<RankingEntry> healthy;
  for (const auto& e : sorted) {
    if (!e.degenerate) healthy.push_back(e);
  }
  ParentSelection sel;
  if (healthy.size() < static_cast<std::size_t>(kParentCount)) {
    const std::size_t n = std::min<std::size_t>(kParentCount, sorted.size());
    sel.parents.assign(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n));
    sel.short_of_target = true;
    return sel;
  }
  constexpr std::size_t kTop = kParentCount / 2;
  sel.parents.assign(healthy.begin(), healthy.begin() + kTop);

  auto distance = [&](const RankingEntry& e) {
    return std::abs(static_cast<double>(e.params) - target_params);
  };
  std::vector<double> d;
  d.reserve(healthy.size());
  for (const auto& e : healthy) d.push_back(distance(e));
  std::sort(d.begin(), d.end());
  const std::size_t rank = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(kClosenessPercentile * static_cast<double>(d.size()))));
  const double threshold = d[rank - 1];

  std::vector<RankingEntry> close = healthy;
  std::sort(close.begin(), close.end(), [&](const RankingEntry& a, const RankingEntry& b) {
    const double da = distance(a), db = distance(b);
    const bool ia = da <= threshold, ib = db <= threshold;
    if (ia != ib) return ia;
    if (!ia && da != db) return da < db;
    if (a.score != b.score) return a.score > b.score;
    return a.hash < b.hash;
  });
  for (const auto& e : close) {
    if (sel.parents.size() == static_cast<std::size_t>(kParentCount)) break;
    const bool taken = std::any_of(sel.parents.begin(), sel.parents.end(),
                                   [&](const RankingEntry& p) { return p.hash == e.hash; });
    if (!taken) sel.parents.push_back(e);
  }
  return sel;
}

// ---------------------------------------------------------------------------
// Tabu list

void TabuList::push(TabuRecord record) {
  if (tenure_ == 0) return;
  std::erase_if(records_, [&](const TabuRecord& r) { return r.hash == record.hash; });
  records_.push_back(std::move(record));
  while (records_.size() > tenure_) records_.pop_front();
}

bool TabuList::contains(const GenomeHash& hash) const {
  return std::any_of(records_.begin(), records_.end(),
                     [&](const TabuRecord& r) { return r.hash == hash; });
}

std::optional<TabuRecord> TabuList::best_fallback() const {
  const TabuRecord* best = nullptr;
  for (const auto& r : records_) {
    if (!r.eval) continue;
    if (!best || r.eval->grade.grade > best->eval->grade.grade ||
        (r.eval->grade.grade == best->eval->grade.grade && r.hash < best->hash)) {
      best = &r;
    }
  }
  if (!best) {
    for (const auto& r : records_) {
      if (!r.reward) continue;
      if (!best || *r.reward > *best->reward || (*r.reward == *best->reward && r.hash < best->hash)) {
        best = &r;
      }
    }
  }
  if (!best) return std::nullopt;
  return *best;
}

// ---------------------------------------------------------------------------
// Assisted tabu search

SearchState start_search(const ArchitectureGenome& start, CandidateSource& source,
                         std::size_t tabu_tenure, std::uint64_t stream_seed,
                         std::vector<EvalResult>* evals) {
  SearchState state;
  state.current.genome = start;
  state.current.hash = canonical_hash(start);
  state.current.eval = source.evaluate(start);
  state.current.score = source.score(start).score;
  state.best = state.current;
  state.tabu = TabuList(tabu_tenure);
  state.stream_seed = stream_seed;
  if (evals) evals->push_back(state.current.eval);
  return state;
}

TrajectoryRecord ats_step(SearchState& state, const StepContext& ctx) {
  TrajectoryRecord rec;
  rec.iteration = ++state.iteration;

  const Proposal proposal = propose_children(
      state.current.genome, ctx.space,
      derive_seed(state.stream_seed, static_cast<std::uint64_t>(state.iteration)), ctx.children);
  std::vector<const Child*> open;
  for (const Child& c : proposal.children) {
    if (ctx.audit) ctx.audit->push_back(c.record);
    if (!state.tabu.contains(c.record.child_hash)) open.push_back(&c);
  }
  if (open.empty()) {
    ++state.no_improvement;
    rec.accuracy = state.current.eval.grade.accuracy;
    rec.params = state.current.eval.grade.params;
    rec.grade = state.current.eval.grade.grade;
    rec.tabu_size = state.tabu.size();
    return rec;
  }

  // Reward every open child; ties go to the smaller hash.
  const Child* chosen = nullptr;
  Reward chosen_reward;
  double chosen_score = kNegativeInfinityScore;
  for (const Child* c : open) {
    const double s = ctx.source.score(c->genome).score;
    const Reward r = reward(state.current.score, s, param_count(c->genome), ctx.target_params,
                            ctx.alpha);
    const bool better = !chosen || r.value > chosen_reward.value ||
                        (r.value == chosen_reward.value && c->record.child_hash < chosen->record.child_hash);
    if (better) {
      chosen = c;
      chosen_reward = r;
      chosen_score = s;
    }
  }

  Candidate child{chosen->genome, chosen->record.child_hash, ctx.source.evaluate(chosen->genome),
                  chosen_score};
  if (ctx.evals) ctx.evals->push_back(child.eval);
  rec.child_hash = child.hash;
  rec.reward = chosen_reward.value;
  rec.reward_fallback = chosen_reward.fallback;
  rec.accuracy = child.eval.grade.accuracy;
  rec.params = child.eval.grade.params;
  rec.grade = child.eval.grade.grade;

  if (child.eval.grade.grade > state.current.eval.grade.grade) {
    state.tabu.push({state.current.hash, state.current.genome, state.iteration, state.current.eval,
                     std::nullopt, state.current.score});
    state.current = child;
    state.no_improvement = 0;
    rec.accepted = true;
  } else {
    state.tabu.push({child.hash, child.genome, state.iteration, child.eval, chosen_reward.value,
                     child.score});
    if (auto fallback = state.tabu.best_fallback(); fallback && fallback->eval) {
      state.current = {fallback->genome, fallback->hash, *fallback->eval, fallback->score};
    }
    ++state.no_improvement;
  }
  if (child.eval.grade.grade > state.best.eval.grade.grade ||
      (child.eval.grade.grade == state.best.eval.grade.grade && child.hash < state.best.hash)) {
    state.best = child;
  }
  rec.tabu_size = state.tabu.size();
  return rec;
}

ParentRun search_from_parent(const RankingEntry& parent, const SearchSettings& settings,
                             CandidateSource& source) {
  ParentRun run;
  run.parent = parent;
  const std::uint64_t stream = derive_seed(derive_seed(settings.master_seed, "ats"), parent.hash.prefix64());
  SearchState state = start_search(parent.genome, source, settings.tabu_tenure, stream, &run.evals);
  const StepContext ctx{settings.space, source,    settings.target_params, settings.alpha,
                        settings.children, &run.audit, &run.evals};
  while (state.iteration < settings.max_iterations && state.no_improvement < settings.patience) {
    run.trajectory.push_back(ats_step(state, ctx));
  }
  run.best = state.best;
  run.final_no_improvement = state.no_improvement;
  return run;
}

SearchResult run_search(const SearchSettings& settings, CandidateSource& source,
                        std::size_t workers) {
  validate_config(settings.space);
  if (!(settings.alpha >= 0.0 && settings.alpha <= 1.0)) throw InvalidConfig("alpha must lie in [0, 1]");
  if (!(settings.target_params > 0.0)) throw InvalidConfig("target_params must be positive");
  if (settings.max_iterations < 0 || settings.patience < 1 || settings.children < 1) {
    throw InvalidConfig("max_iterations >= 0, patience >= 1 and children >= 1 are required");
  }
  SearchResult result;
  const Population pop = seed_population(
      settings.space, derive_seed(settings.master_seed, "population"), settings.population);
  result.population_short = pop.short_of_target;
  result.initial_ranking = rank_initial(pop.genomes, source, workers);
  const ParentSelection sel = select_parents(result.initial_ranking, settings.target_params);
  result.parents_short = sel.short_of_target;

  result.runs.resize(sel.parents.size());
  parallel_for(sel.parents.size(), workers, [&](std::size_t i) {
    result.runs[i] = search_from_parent(sel.parents[i], settings, source);
  });

  result.final_ranking = result.initial_ranking;
  auto upsert = [&](const Candidate& c) {
    auto it = std::find_if(result.final_ranking.begin(), result.final_ranking.end(),
                           [&](const RankingEntry& e) { return e.hash == c.hash; });
    if (it == result.final_ranking.end()) {
      result.final_ranking.push_back(make_entry(c.genome, source.score(c.genome)));
      it = std::prev(result.final_ranking.end());
    }
    it->grade = c.eval.grade.grade;
  };
  bool have_best = false;
  for (const ParentRun& run : result.runs) {
    upsert(Candidate{run.parent.genome, run.parent.hash, run.evals.front(), run.parent.score});
    upsert(run.best);
    const double g = run.best.eval.grade.grade;
    if (!have_best || g > result.best.eval.grade.grade ||
        (g == result.best.eval.grade.grade && run.best.hash < result.best.hash)) {
      result.best = run.best;
      have_best = true;
    }
  }
  std::sort(result.final_ranking.begin(), result.final_ranking.end(), ranks_before);
  return result;
}

}  // namespace tabunas
