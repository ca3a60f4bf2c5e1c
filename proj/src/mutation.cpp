#include "tabunas/mutation.hpp"

#include <algorithm>
#include <unordered_set>

#include "tabunas/errors.hpp"
#include "tabunas/rng.hpp"

namespace tabunas {

nlohmann::json to_json(const MutationRecord& r) {
  nlohmann::json j{{"parent", r.parent_hash.hex()},
                   {"child", r.child_hash.hex()},
                   {"rebalanced", r.rebalanced}};
  if (const auto* swap = std::get_if<SwapLayers>(&r.op)) {
    j["op"] = "swap";
    j["slot_a"] = swap->slot_a;
    j["slot_b"] = swap->slot_b;
  } else {
    const auto& rep = std::get<ReplaceLayer>(r.op);
    j["op"] = "replace";
    j["slot"] = rep.slot;
    j["repeats"] = rep.repeats;
    j["layer"] = {{"conv_op", to_string(rep.layer.conv_op)},
                  {"kernel_size", rep.layer.kernel_size},
                  {"se_ratio", se_ratio_value(rep.layer.se_ratio)},
                  {"skip", to_string(rep.layer.skip)},
                  {"out_channels", rep.layer.out_channels}};
  }
  return j;
}

ArchitectureGenome rebalance(const ArchitectureGenome& genome, std::uint64_t budget,
                             std::span<const int> channel_options) {
  if (budget == 0) throw MutationRejected("block budget 0 is unsatisfiable");
  std::vector<int> options(channel_options.begin(), channel_options.end());
  std::sort(options.begin(), options.end(), std::greater<>());
  ArchitectureGenome g = genome;
  for (;;) {
    const auto in = block_input_channels(g);
    std::size_t worst = g.blocks.size();
    std::uint64_t worst_over = 0;
    for (std::size_t pos = 0; pos < g.blocks.size(); ++pos) {
      const auto n = block_param_count(g.blocks[pos], in[pos], g.expansion);
      if (n > budget && n - budget > worst_over) {
        worst_over = n - budget;
        worst = pos;
      }
    }
    if (worst == g.blocks.size()) return g;
    BlockSpec& b = g.blocks[worst];
    const int current = b.layer.out_channels;
    bool fixed = false;
    for (int c : options) {
      if (c >= current) continue;
      BlockSpec trial = b;
      trial.layer.out_channels = c;
      if (block_param_count(trial, in[worst], g.expansion) <= budget) {
        b.layer.out_channels = c;
        fixed = true;
        break;
      }
    }
    if (!fixed) {
      throw MutationRejected("slot " + std::to_string(worst) + " exceeds block budget " +
                             std::to_string(budget) + " even at the narrowest channel option");
    }
  }
}

namespace {

template <typename T>
bool in_list(const std::vector<T>& v, const T& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

void check_slot(const ArchitectureGenome& g, std::size_t slot) {
  if (slot >= g.blocks.size()) {
    throw InvalidOperation("slot " + std::to_string(slot) + " out of range (genome has " +
                           std::to_string(g.blocks.size()) + " blocks)");
  }
}

}  // namespace

MutationResult apply_mutation(const ArchitectureGenome& genome, const MutationOp& op,
                              const SearchSpaceConfig& config) {
  ArchitectureGenome child = genome;
  if (const auto* swap = std::get_if<SwapLayers>(&op)) {
    check_slot(genome, swap->slot_a);
    check_slot(genome, swap->slot_b);
    std::swap(child.blocks[swap->slot_a].layer, child.blocks[swap->slot_b].layer);
  } else {
    const auto& rep = std::get<ReplaceLayer>(op);
    check_slot(genome, rep.slot);
    const LayerSpec& l = rep.layer;
    if (!in_list(config.conv_ops, l.conv_op) || !in_list(config.kernel_sizes, l.kernel_size) ||
        !in_list(config.se_ratios, l.se_ratio) || !in_list(config.skips, l.skip) ||
        !in_list(config.channels, l.out_channels) || !in_list(config.repeats, rep.repeats)) {
      throw InvalidOperation("replacement layer for slot " + std::to_string(rep.slot) +
                             " is outside the configured option lists");
    }
    child.blocks[rep.slot].layer = l;
    child.blocks[rep.slot].repeats = rep.repeats;
  }
  MutationResult result{std::move(child), false};
  if (config.block_budget) {
    ArchitectureGenome balanced = rebalance(result.genome, *config.block_budget, config.channels);
    result.rebalanced = balanced != result.genome;
    result.genome = std::move(balanced);
  }
  const auto report = validate(result.genome, config);
  if (!report.ok()) throw MutationRejected("incompatible mutation: " + report.describe());
  return result;
}

ArchitectureGenome apply_swap(const ArchitectureGenome& genome, std::size_t slot_a,
                              std::size_t slot_b, const SearchSpaceConfig& config) {
  return apply_mutation(genome, SwapLayers{slot_a, slot_b}, config).genome;
}

ArchitectureGenome apply_replace(const ArchitectureGenome& genome, std::size_t slot,
                                 const LayerSpec& layer, int repeats,
                                 const SearchSpaceConfig& config) {
  return apply_mutation(genome, ReplaceLayer{slot, layer, repeats}, config).genome;
}

ArchitectureGenome apply_replace(const ArchitectureGenome& genome, std::size_t slot,
                                 const LayerSpec& layer, const SearchSpaceConfig& config) {
  check_slot(genome, slot);
  return apply_replace(genome, slot, layer, genome.blocks[slot].repeats, config);
}

Proposal propose_children(const ArchitectureGenome& parent, const SearchSpaceConfig& config,
                          std::uint64_t seed, int n) {
  if (n < 1) throw InvalidOperation("propose_children needs n >= 1");
  const auto choices = block_choices(config);
  const GenomeHash parent_hash = canonical_hash(parent);
  const std::size_t slots = parent.blocks.size();
  Rng rng(seed);
  Proposal proposal;
  std::unordered_set<GenomeHash> seen{parent_hash};
  const int max_attempts = 64 * n + 256;
  for (int attempt = 0; attempt < max_attempts && static_cast<int>(proposal.children.size()) < n;
       ++attempt) {
    MutationOp op;
    if (slots >= 2 && rng.index(2) == 0) {
      const std::size_t a = rng.index(slots);
      std::size_t b = rng.index(slots - 1);
      if (b >= a) ++b;
      if (parent.blocks[a].layer == parent.blocks[b].layer) continue;
      op = SwapLayers{std::min(a, b), std::max(a, b)};
    } else {
      const std::size_t slot = rng.index(slots);
      const auto& choice = choices[rng.index(choices.size())];
      if (choice.first == parent.blocks[slot].layer && choice.second == parent.blocks[slot].repeats) {
        continue;
      }
      op = ReplaceLayer{slot, choice.first, choice.second};
    }
    MutationResult result;
    try {
      result = apply_mutation(parent, op, config);
    } catch (const MutationRejected&) {
      continue;
    }
    const GenomeHash h = canonical_hash(result.genome);
    if (!seen.insert(h).second) continue;
    proposal.children.push_back(
        {std::move(result.genome), MutationRecord{parent_hash, h, op, result.rebalanced}});
  }
  proposal.short_of_target = static_cast<int>(proposal.children.size()) < n;
  return proposal;
}

}  // namespace tabunas
