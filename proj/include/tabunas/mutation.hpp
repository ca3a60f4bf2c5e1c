#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "tabunas/genome.hpp"

namespace tabunas {

// Exchange the LayerSpecs of two block slots (repeat counts stay in place).
struct SwapLayers {
  std::size_t slot_a = 0;
  std::size_t slot_b = 0;
  bool operator==(const SwapLayers&) const = default;
};

// Replace one slot's LayerSpec together with a fresh repeat count.
struct ReplaceLayer {
  std::size_t slot = 0;
  LayerSpec layer;
  int repeats = 1;
  bool operator==(const ReplaceLayer&) const = default;
};

using MutationOp = std::variant<SwapLayers, ReplaceLayer>;

struct MutationRecord {
  GenomeHash parent_hash;
  GenomeHash child_hash;
  MutationOp op;
  bool rebalanced = false;

  bool operator==(const MutationRecord&) const = default;
};

// One line of the audit log.
nlohmann::json to_json(const MutationRecord& record);

struct MutationResult {
  ArchitectureGenome genome;
  bool rebalanced = false;
};

// Applies op, re-chains channels, rebalances against config.block_budget and
// checks the child against validate(child, config). Throws MutationRejected
// when the child cannot be made valid, InvalidOperation for out-of-range
// slots or a replacement outside the option lists.
MutationResult apply_mutation(const ArchitectureGenome& genome, const MutationOp& op,
                              const SearchSpaceConfig& config);

ArchitectureGenome apply_swap(const ArchitectureGenome& genome, std::size_t slot_a,
                              std::size_t slot_b, const SearchSpaceConfig& config);

ArchitectureGenome apply_replace(const ArchitectureGenome& genome, std::size_t slot,
                                 const LayerSpec& layer, int repeats,
                                 const SearchSpaceConfig& config);

// Same as above with the slot's current repeat count.
ArchitectureGenome apply_replace(const ArchitectureGenome& genome, std::size_t slot,
                                 const LayerSpec& layer, const SearchSpaceConfig& config);

// Shrinks out_channels until every block fits `budget`, fixing the block with
// the largest overshoot first and giving it the widest option that fits.
// Channels never grow. Throws MutationRejected when even the narrowest option
// is over budget.
ArchitectureGenome rebalance(const ArchitectureGenome& genome, std::uint64_t budget,
                             std::span<const int> channel_options);

struct Child {
  ArchitectureGenome genome;
  MutationRecord record;
};

struct Proposal {
  std::vector<Child> children;
  bool short_of_target = false;  // fewer than n distinct children were found
};

inline constexpr int kDefaultChildren = 8;

// Up to n distinct valid single-mutation children of parent, none equal to
// the parent. Deterministic in (parent, config, seed, n).
Proposal propose_children(const ArchitectureGenome& parent, const SearchSpaceConfig& config,
                          std::uint64_t seed, int n);

}  // namespace tabunas
