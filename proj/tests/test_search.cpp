#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "fakes.hpp"
#include "oracles.hpp"
#include "tabunas/errors.hpp"
#include "tabunas/rng.hpp"
#include "tabunas/run_config.hpp"
#include "tabunas/search.hpp"

using namespace tabunas;

namespace {

SearchSpaceConfig toy_space() { return toy_config().space; }

std::vector<ArchitectureGenome> toy_genomes() {
  std::vector<ArchitectureGenome> all;
  enumerate_genomes(toy_space(), [&](const ArchitectureGenome& g) {
    all.push_back(g);
    return true;
  });
  return all;
}

void expect_same(const TrajectoryRecord& a, const TrajectoryRecord& b) {
  EXPECT_EQ(a.iteration, b.iteration);
  EXPECT_EQ(a.child_hash, b.child_hash);
  EXPECT_EQ(a.reward, b.reward);
  EXPECT_EQ(a.reward_fallback, b.reward_fallback);
  EXPECT_EQ(a.accuracy, b.accuracy);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.grade, b.grade);
  EXPECT_EQ(a.accepted, b.accepted);
  EXPECT_EQ(a.tabu_size, b.tabu_size);
}

RankingEntry entry(const ArchitectureGenome& g, double score, std::uint64_t params,
                   bool degenerate = false) {
  RankingEntry e;
  e.genome = g;
  e.hash = canonical_hash(g);
  e.score = degenerate ? kNegativeInfinityScore : score;
  e.params = params;
  e.degenerate = degenerate;
  return e;
}

std::vector<GenomeHash> hashes_of(const std::vector<RankingEntry>& v) {
  std::vector<GenomeHash> out;
  for (const auto& e : v) out.push_back(e.hash);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Population

TEST(Population, SingleGenome) {
  const auto p = seed_population(default_space_config(), 3, 1);
  ASSERT_EQ(p.genomes.size(), 1u);
  EXPECT_TRUE(validate(p.genomes[0], default_space_config()).ok());
  EXPECT_FALSE(p.short_of_target);
}

TEST(Population, SmallSpaceReturnsEverything) {
  const auto p = seed_population(toy_space(), 3, 1000);
  EXPECT_EQ(p.genomes.size(), 243u);
  EXPECT_TRUE(p.short_of_target);
  std::set<GenomeHash> seen;
  for (const auto& g : p.genomes) seen.insert(canonical_hash(g));
  EXPECT_EQ(seen.size(), 243u);
}

TEST(Population, DistinctAndDeterministic) {
  const auto a = seed_population(default_space_config(), 8, 40);
  const auto b = seed_population(default_space_config(), 8, 40);
  EXPECT_EQ(a.genomes, b.genomes);
  std::set<GenomeHash> seen;
  for (const auto& g : a.genomes) seen.insert(canonical_hash(g));
  EXPECT_EQ(seen.size(), 40u);
  EXPECT_NE(a.genomes, seed_population(default_space_config(), 9, 40).genomes);
}

TEST(Population, SamplingCoversNearlyAllOfSmallSpace) {
  // Below the space size the population is drawn at random, not enumerated.
  const auto p = seed_population(toy_space(), 1, 242);
  EXPECT_EQ(p.genomes.size(), 242u);
  EXPECT_FALSE(p.short_of_target);
}

// ---------------------------------------------------------------------------
// Ranking

TEST(Ranking, MatchesIndependentRescoring) {
  EvalSettings es = eval_settings(toy_config());
  Evaluator ev(es);
  TrainedCandidates source(ev, 8, 99);
  const auto pop = seed_population(toy_space(), 4, 10).genomes;
  const auto ranking = rank_initial(pop, source, 2);
  ASSERT_EQ(ranking.size(), 10u);

  std::vector<std::pair<double, GenomeHash>> expected;
  for (const auto& g : pop) {
    const auto r = score_genome(g, source.probe(), es.master_seed);
    expected.emplace_back(r.degenerate ? kNegativeInfinityScore : r.score, canonical_hash(g));
  }
  std::sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(ranking[i].hash, expected[i].second) << i;
    EXPECT_EQ(ranking[i].params, param_count(ranking[i].genome));
  }
}

TEST(Ranking, SinglePopulation) {
  fake::ScriptedSource source(1500, 0.6);
  const auto r = rank_initial({first_genome(toy_space())}, source, 1);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_THROW(rank_initial({}, source, 1), InvalidConfig);
}

namespace {

// Scores normally, except that one genome gets duplicated probe codes.
class DuplicatingSource : public CandidateSource {
 public:
  DuplicatingSource(TrainedCandidates& inner, GenomeHash victim, std::uint64_t seed)
      : inner_(inner), victim_(victim), seed_(seed) {}
  ScoreReport score(const ArchitectureGenome& g) override {
    if (canonical_hash(g) != victim_) return inner_.score(g);
    const auto net = build_network(g, init_seed_for(seed_, victim_));
    auto codes = activation_codes(net, inner_.probe());
    codes[1] = codes[0];
    return score_codes(codes);
  }
  EvalResult evaluate(const ArchitectureGenome& g) override { return inner_.evaluate(g); }

 private:
  TrainedCandidates& inner_;
  GenomeHash victim_;
  std::uint64_t seed_;
};

}  // namespace

TEST(Ranking, DegenerateRanksLast) {
  EvalSettings es = eval_settings(toy_config());
  Evaluator ev(es);
  TrainedCandidates inner(ev, 8, 99);
  const auto pop = seed_population(toy_space(), 4, 10).genomes;
  const GenomeHash victim = canonical_hash(pop[0]);
  ASSERT_FALSE(inner.score(pop[0]).degenerate);
  DuplicatingSource source(inner, victim, es.master_seed);
  const auto ranking = rank_initial(pop, source, 1);
  EXPECT_EQ(ranking.back().hash, victim);
  EXPECT_TRUE(ranking.back().degenerate);
  for (std::size_t i = 0; i + 1 < ranking.size(); ++i) EXPECT_FALSE(ranking[i].degenerate);
}

// ---------------------------------------------------------------------------
// Parent selection

class SelectParents : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto all = toy_genomes();
    genomes.assign(all.begin(), all.begin() + 22);
  }
  std::vector<ArchitectureGenome> genomes;
};

TEST_F(SelectParents, OverlapIsSubstituted) {
  // Scores 20..1; entries 1, 7, 12, 15 sit exactly on P and form the band
  // (ceil(0.05 * 20) = 1, so the band is distance 0). Entry 1 is already a
  // top-three pick, which leaves 7, 12, 15.
  std::vector<RankingEntry> ranking;
  for (int i = 0; i < 20; ++i) {
    const bool on_target = i == 1 || i == 7 || i == 12 || i == 15;
    ranking.push_back(entry(genomes[static_cast<std::size_t>(i)], 20.0 - i, on_target ? 1000 : 5000));
  }
  ranking.push_back(entry(genomes[20], 0, 1000, true));
  ranking.push_back(entry(genomes[21], 0, 1000, true));
  std::reverse(ranking.begin(), ranking.end());
  const auto sel = select_parents(ranking, 1000);
  EXPECT_FALSE(sel.short_of_target);
  const std::vector<std::size_t> want{0, 1, 2, 7, 12, 15};
  ASSERT_EQ(sel.parents.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(sel.parents[i].hash, canonical_hash(genomes[want[i]])) << i;
}

TEST_F(SelectParents, ThinBandFilledByNextClosest) {
  // Only entry 9 is on target. Entries 4 and 16 tie at distance 100, entry 5
  // is at 300; the tie goes to the higher score (entry 4).
  std::map<int, std::uint64_t> params{{9, 1000}, {4, 1100}, {16, 900}, {5, 1300}};
  std::vector<RankingEntry> ranking;
  for (int i = 0; i < 20; ++i) {
    const auto it = params.find(i);
    ranking.push_back(entry(genomes[static_cast<std::size_t>(i)], 20.0 - i,
                            it == params.end() ? 5000 : it->second));
  }
  const auto sel = select_parents(ranking, 1000);
  const std::vector<std::size_t> want{0, 1, 2, 9, 4, 16};
  ASSERT_EQ(sel.parents.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(sel.parents[i].hash, canonical_hash(genomes[want[i]])) << i;
}

TEST_F(SelectParents, WideBandUsesScore) {
  // 60 entries: ceil(0.05 * 60) = 3, so the three smallest distances set the
  // band edge. Distances 0, 10, 10, 10, 20: the band holds four entries.
  const auto all = toy_genomes();
  std::map<int, std::uint64_t> params{{30, 1000}, {40, 990}, {41, 1010}, {50, 1010}, {3, 1020}};
  std::vector<RankingEntry> ranking;
  for (int i = 0; i < 60; ++i) {
    const auto it = params.find(i);
    ranking.push_back(entry(all[static_cast<std::size_t>(i)], 100.0 - i,
                            it == params.end() ? 9000 : it->second));
  }
  const auto sel = select_parents(ranking, 1000);
  const std::vector<std::size_t> want{0, 1, 2, 30, 40, 41};
  ASSERT_EQ(sel.parents.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(sel.parents[i].hash, canonical_hash(all[want[i]])) << i;
}

TEST_F(SelectParents, ExactlySix) {
  std::vector<RankingEntry> ranking;
  for (int i = 0; i < 6; ++i) ranking.push_back(entry(genomes[static_cast<std::size_t>(i)], i, 1000 + 50 * i));
  const auto sel = select_parents(ranking, 1000);
  EXPECT_FALSE(sel.short_of_target);
  auto got = hashes_of(sel.parents);
  auto want = hashes_of(ranking);
  std::sort(got.begin(), got.end());
  std::sort(want.begin(), want.end());
  EXPECT_EQ(got, want);
}

TEST_F(SelectParents, FewerThanSixHealthy) {
  std::vector<RankingEntry> ranking;
  for (int i = 0; i < 4; ++i) ranking.push_back(entry(genomes[static_cast<std::size_t>(i)], i, 1000));
  for (int i = 4; i < 9; ++i) ranking.push_back(entry(genomes[static_cast<std::size_t>(i)], 0, 1000, true));
  const auto sel = select_parents(ranking, 1000);
  EXPECT_TRUE(sel.short_of_target);
  ASSERT_EQ(sel.parents.size(), 6u);
  for (int i = 0; i < 4; ++i) EXPECT_FALSE(sel.parents[static_cast<std::size_t>(i)].degenerate);
  const auto three = select_parents(std::vector<RankingEntry>(ranking.begin(), ranking.begin() + 3), 1000);
  EXPECT_EQ(three.parents.size(), 3u);
  EXPECT_TRUE(three.short_of_target);
}

TEST_F(SelectParents, NeverDuplicates) {
  std::mt19937_64 gen(4);
  const auto all = toy_genomes();
  for (int t = 0; t < 100; ++t) {
    std::uniform_int_distribution<int> n(6, 80);
    std::uniform_int_distribution<std::uint64_t> p(500, 1500);
    std::uniform_real_distribution<double> s(0.0, 5.0);
    std::vector<RankingEntry> ranking;
    const int count = n(gen);
    for (int i = 0; i < count; ++i) ranking.push_back(entry(all[static_cast<std::size_t>(i)], s(gen), p(gen)));
    const auto sel = select_parents(ranking, 1000);
    const auto got = hashes_of(sel.parents);
    const std::set<GenomeHash> seen(got.begin(), got.end());
    EXPECT_EQ(seen.size(), 6u);
  }
}

// ---------------------------------------------------------------------------
// Tabu list

namespace {

TabuRecord record(const ArchitectureGenome& g, std::optional<double> grade_value,
                  std::optional<double> reward_value = std::nullopt) {
  TabuRecord r;
  r.genome = g;
  r.hash = canonical_hash(g);
  if (grade_value) {
    EvalResult e;
    e.hash = r.hash;
    e.grade.grade = *grade_value;
    r.eval = e;
  }
  r.reward = reward_value;
  return r;
}

}  // namespace

TEST(Tabu, BoundedFifo) {
  const auto all = toy_genomes();
  TabuList t(3);
  for (int i = 0; i < 5; ++i) t.push(record(all[static_cast<std::size_t>(i)], 0.1 * i));
  EXPECT_EQ(t.size(), 3u);
  EXPECT_FALSE(t.contains(canonical_hash(all[0])));
  EXPECT_FALSE(t.contains(canonical_hash(all[1])));
  for (int i = 2; i < 5; ++i) EXPECT_TRUE(t.contains(canonical_hash(all[static_cast<std::size_t>(i)])));
  // Re-pushing refreshes the position without duplicating.
  t.push(record(all[2], 0.2));
  EXPECT_EQ(t.size(), 3u);
  t.push(record(all[5], 0.5));
  EXPECT_TRUE(t.contains(canonical_hash(all[2])));
  EXPECT_FALSE(t.contains(canonical_hash(all[3])));
}

TEST(Tabu, ZeroTenureHoldsNothing) {
  TabuList t(0);
  t.push(record(first_genome(toy_space()), 0.3));
  EXPECT_EQ(t.size(), 0u);
  EXPECT_FALSE(t.best_fallback().has_value());
}

TEST(Tabu, FallbackPrefersGradeThenReward) {
  const auto all = toy_genomes();
  TabuList t(10);
  EXPECT_FALSE(t.best_fallback().has_value());
  t.push(record(all[0], std::nullopt, 3.0));
  t.push(record(all[1], std::nullopt, 5.0));
  EXPECT_EQ(t.best_fallback()->hash, canonical_hash(all[1]));
  t.push(record(all[2], 0.4));
  t.push(record(all[3], 0.7));
  t.push(record(all[4], 0.7));
  const auto expect = std::min(canonical_hash(all[3]), canonical_hash(all[4]));
  EXPECT_EQ(t.best_fallback()->hash, expect);
}

// ---------------------------------------------------------------------------
// ATS step

class AtsStep : public ::testing::Test {
 protected:
  AtsStep() : source(1500, 0.6) {}
  void SetUp() override { parent = first_genome(space); }
  StepContext context() { return StepContext{space, source, 1500, 0.6, 4, &audit, &evals}; }

  SearchSpaceConfig space = toy_space();
  fake::ScriptedSource source;
  ArchitectureGenome parent;
  std::vector<MutationRecord> audit;
  std::vector<EvalResult> evals;
};

TEST_F(AtsStep, BetterChildIsAccepted) {
  const GenomeHash ph = canonical_hash(parent);
  source.accuracy_of = [ph](const ArchitectureGenome&, const GenomeHash& h) { return h == ph ? 0.1 : 0.9; };
  SearchState state = start_search(parent, source, 20, 77, &evals);
  state.no_improvement = 3;
  const auto rec = ats_step(state, context());

  // The trained child is the reward argmax over the proposal, recomputed here.
  const auto proposal = propose_children(parent, space, derive_seed(77, 1), 4);
  ASSERT_EQ(audit.size(), proposal.children.size());
  double best_r = -1e300;
  GenomeHash best_h;
  for (const auto& c : proposal.children) {
    const double r = 0.6 * source.score(c.genome).score / source.score(parent).score +
                     0.4 * std::min(1.0, 1500.0 / static_cast<double>(param_count(c.genome)));
    if (r > best_r || (r == best_r && c.record.child_hash < best_h)) best_r = r, best_h = c.record.child_hash;
  }
  ASSERT_TRUE(rec.child_hash.has_value());
  EXPECT_EQ(*rec.child_hash, best_h);
  EXPECT_NEAR(rec.reward, best_r, 1e-12);
  EXPECT_TRUE(rec.accepted);
  EXPECT_EQ(rec.iteration, 1);
  EXPECT_EQ(state.no_improvement, 0);
  EXPECT_EQ(state.current.hash, best_h);
  EXPECT_EQ(state.best.hash, best_h);
  EXPECT_TRUE(state.tabu.contains(ph));
  EXPECT_EQ(rec.tabu_size, 1u);
  EXPECT_EQ(evals.size(), 2u);
}

TEST_F(AtsStep, RejectionFallsBackToBestTabuRecord) {
  const auto all = toy_genomes();
  const ArchitectureGenome prior = all[100];
  const GenomeHash prior_h = canonical_hash(prior), ph = canonical_hash(parent);
  source.accuracy_of = [&](const ArchitectureGenome&, const GenomeHash& h) {
    if (h == ph) return 0.9;
    if (h == prior_h) return 0.8;
    return 0.1;
  };
  SearchState state = start_search(parent, source, 20, 5);
  TabuRecord r;
  r.genome = prior;
  r.hash = prior_h;
  r.eval = source.evaluate(prior);
  state.tabu.push(r);
  const auto rec = ats_step(state, context());
  EXPECT_FALSE(rec.accepted);
  ASSERT_TRUE(rec.child_hash.has_value());
  EXPECT_NE(*rec.child_hash, prior_h);
  EXPECT_TRUE(state.tabu.contains(*rec.child_hash));
  EXPECT_EQ(state.current.hash, prior_h);
  EXPECT_EQ(state.current.genome, prior);
  EXPECT_EQ(state.best.hash, ph);
  EXPECT_EQ(state.no_improvement, 1);
  EXPECT_EQ(rec.tabu_size, 2u);
}

TEST_F(AtsStep, AllChildrenTabuStalls) {
  SearchState state = start_search(parent, source, 50, 5);
  for (const auto& c : propose_children(parent, space, derive_seed(5, 1), 4).children) {
    TabuRecord r;
    r.genome = c.genome;
    r.hash = c.record.child_hash;
    state.tabu.push(r);
  }
  const int trained = source.evaluations;
  const auto rec = ats_step(state, context());
  EXPECT_FALSE(rec.child_hash.has_value());
  EXPECT_FALSE(rec.accepted);
  EXPECT_EQ(state.no_improvement, 1);
  EXPECT_EQ(state.current.hash, canonical_hash(parent));
  EXPECT_EQ(rec.grade, state.current.eval.grade.grade);
  EXPECT_EQ(source.evaluations, trained);
}

TEST_F(AtsStep, ReplayIsDeterministic) {
  SearchState a = start_search(parent, source, 20, 11);
  for (int i = 0; i < 3; ++i) ats_step(a, context());
  SearchState b = a;
  for (int i = 0; i < 5; ++i) {
    const auto ra = ats_step(a, context());
    const auto rb = ats_step(b, context());
    expect_same(ra, rb);
  }
  EXPECT_EQ(a.current.hash, b.current.hash);
  EXPECT_EQ(a.best.hash, b.best.hash);
  EXPECT_EQ(a.no_improvement, b.no_improvement);
  ASSERT_EQ(a.tabu.size(), b.tabu.size());
  for (std::size_t i = 0; i < a.tabu.size(); ++i) EXPECT_EQ(a.tabu.records()[i].hash, b.tabu.records()[i].hash);
}

TEST_F(AtsStep, InvariantsOverLongRuns) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SearchState state = start_search(random_genome(space, seed), source, 5, seed);
    double best = state.best.eval.grade.grade;
    for (int i = 0; i < 30; ++i) {
      const GenomeHash before = state.current.hash;
      std::set<GenomeHash> tabu_before;
      for (const auto& r : state.tabu.records()) tabu_before.insert(r.hash);
      const auto rec = ats_step(state, context());
      if (rec.accepted) EXPECT_EQ(tabu_before.count(state.current.hash), 0u);
      if (rec.child_hash) EXPECT_EQ(tabu_before.count(*rec.child_hash), 0u);
      EXPECT_GE(state.best.eval.grade.grade, best);
      best = state.best.eval.grade.grade;
      EXPECT_LE(state.tabu.size(), 5u);
      EXPECT_GE(state.no_improvement, 0);
      (void)before;
    }
  }
}

// ---------------------------------------------------------------------------
// Whole search

namespace {

SearchSettings toy_settings() {
  SearchSettings s = search_settings(toy_config());
  s.master_seed = 3;
  return s;
}

}  // namespace

TEST(Search, TerminatesWithinBounds) {
  fake::ScriptedSource source(1500, 0.6);
  auto s = toy_settings();
  s.max_iterations = 100;
  s.patience = 10;
  const auto result = run_search(s, source, 1);
  ASSERT_EQ(result.runs.size(), 6u);
  for (const auto& run : result.runs) {
    EXPECT_LE(run.trajectory.size(), 100u);
    EXPECT_TRUE(run.trajectory.size() == 100u || run.final_no_improvement == 10);
  }
}

TEST(Search, PatienceOneAtLocalOptimum) {
  fake::ScriptedSource source(1500, 0.6);
  const auto parent = first_genome(toy_space());
  const GenomeHash ph = canonical_hash(parent);
  source.accuracy_of = [ph](const ArchitectureGenome&, const GenomeHash& h) { return h == ph ? 1.0 : 0.2; };
  auto s = toy_settings();
  s.patience = 1;
  const auto run = search_from_parent(make_entry(parent, source.score(parent)), s, source);
  ASSERT_EQ(run.trajectory.size(), 1u);
  EXPECT_FALSE(run.trajectory[0].accepted);
  EXPECT_EQ(run.best.hash, ph);
}

TEST(Search, ZeroIterationsReturnsBestParent) {
  fake::ScriptedSource source(1500, 0.6);
  auto s = toy_settings();
  s.max_iterations = 0;
  const auto result = run_search(s, source, 1);
  double best = -1.0;
  for (const auto& run : result.runs) {
    EXPECT_TRUE(run.trajectory.empty());
    EXPECT_TRUE(run.audit.empty());
    EXPECT_EQ(run.best.hash, run.parent.hash);
    best = std::max(best, run.evals.front().grade.grade);
  }
  EXPECT_EQ(result.best.eval.grade.grade, best);
  EXPECT_EQ(source.distinct_trained(), 6u);
}

TEST(Search, WorkerCountDoesNotChangeResult) {
  fake::ScriptedSource a(1500, 0.6), b(1500, 0.6);
  const auto ra = run_search(toy_settings(), a, 1);
  const auto rb = run_search(toy_settings(), b, 3);
  EXPECT_EQ(ra.best.hash, rb.best.hash);
  ASSERT_EQ(ra.runs.size(), rb.runs.size());
  for (std::size_t i = 0; i < ra.runs.size(); ++i) {
    EXPECT_EQ(ra.runs[i].parent.hash, rb.runs[i].parent.hash);
    ASSERT_EQ(ra.runs[i].trajectory.size(), rb.runs[i].trajectory.size());
    for (std::size_t k = 0; k < ra.runs[i].trajectory.size(); ++k) {
      expect_same(ra.runs[i].trajectory[k], rb.runs[i].trajectory[k]);
    }
    EXPECT_EQ(ra.runs[i].audit, rb.runs[i].audit);
  }
  EXPECT_EQ(hashes_of(ra.final_ranking), hashes_of(rb.final_ranking));
}

TEST(Search, FinalRankingCarriesGrades) {
  fake::ScriptedSource source(1500, 0.6);
  const auto result = run_search(toy_settings(), source, 1);
  EXPECT_EQ(result.initial_ranking.size(), 243u);
  EXPECT_FALSE(result.population_short);
  EXPECT_TRUE(std::is_sorted(result.final_ranking.begin(), result.final_ranking.end(), ranks_before));
  for (const auto& run : result.runs) {
    const auto it = std::find_if(result.final_ranking.begin(), result.final_ranking.end(),
                                 [&](const RankingEntry& e) { return e.hash == run.best.hash; });
    ASSERT_NE(it, result.final_ranking.end());
    ASSERT_TRUE(it->grade.has_value());
    EXPECT_GE(result.best.eval.grade.grade, *it->grade);
  }
}

TEST(Search, RejectsBadSettings) {
  fake::ScriptedSource source(1500, 0.6);
  auto s = toy_settings();
  s.alpha = 1.5;
  EXPECT_THROW(run_search(s, source, 1), InvalidConfig);
  s = toy_settings();
  s.patience = 0;
  EXPECT_THROW(run_search(s, source, 1), InvalidConfig);
}
