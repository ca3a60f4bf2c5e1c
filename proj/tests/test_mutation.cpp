#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"
#include "tabunas/errors.hpp"
#include "tabunas/mutation.hpp"

using namespace tabunas;

namespace {

std::uint64_t block_count_oracle(const BlockSpec& b, int cin, int expansion) {
  std::uint64_t n = 0;
  for (int r = 0; r < b.repeats; ++r) {
    n += oracle::formula_layer(b.layer, static_cast<std::uint64_t>(cin),
                               static_cast<std::uint64_t>(expansion));
    cin = b.layer.out_channels;
  }
  return n;
}

// Largest channel option keeping the block within budget, by brute force.
int largest_feasible(BlockSpec b, int cin, int expansion, std::uint64_t budget,
                     const std::vector<int>& options) {
  int best = -1;
  for (int c : options) {
    b.layer.out_channels = c;
    if (block_count_oracle(b, cin, expansion) <= budget) best = std::max(best, c);
  }
  return best;
}

}  // namespace

TEST(Swap, IdenticalLayersLeaveGenomeUnchanged) {
  auto g = oracle::fixture_genome();
  g.blocks[8].layer = g.blocks[7].layer;
  const auto child = apply_swap(g, 7, 8, oracle::fixture_space());
  EXPECT_EQ(child, g);
  EXPECT_EQ(canonical_hash(child), canonical_hash(g));
  EXPECT_EQ(apply_swap(g, 3, 3, oracle::fixture_space()), g);
}

TEST(Swap, EncoderWithRefineMatchesHandRewiredFixture) {
  const auto g = oracle::fixture_genome();
  ASSERT_EQ(g.blocks[0].layer.conv_op, ConvOp::Vanilla2D);
  ASSERT_EQ(g.blocks[4].layer.conv_op, ConvOp::Depthwise);
  const auto child = apply_swap(g, 0, 4, oracle::fixture_space());

  auto expected = g;
  expected.blocks[0].layer = {ConvOp::Depthwise, 5, SeRatio::None, Skip::None, 32};
  expected.blocks[4].layer = {ConvOp::Vanilla2D, 3, SeRatio::None, Skip::None, 16};
  EXPECT_EQ(child, expected);
  const auto in = oracle::input_channels(child);
  EXPECT_EQ(in[1], 32);   // enc2 now reads 32 channels
  EXPECT_EQ(in[10], 16);  // downsample still reads enc2
  EXPECT_EQ(block_input_channels(child), in);
  EXPECT_EQ(param_count(child), oracle::formula_params(child));
}

TEST(Swap, IncompatibleResidualIsRejected) {
  auto g = oracle::fixture_genome();
  // The residual 24-channel layer moves to s2.dec1, whose input shrinks to 16.
  EXPECT_THROW(apply_swap(g, 6, 7, oracle::fixture_space()), MutationRejected);
}

TEST(Swap, OutOfRangeSlot) {
  EXPECT_THROW(apply_swap(oracle::fixture_genome(), 0, 12, oracle::fixture_space()),
               InvalidOperation);
}

TEST(Replace, IdenticalLayerIsNoOp) {
  const auto g = oracle::fixture_genome();
  EXPECT_EQ(apply_replace(g, 5, g.blocks[5].layer, oracle::fixture_space()), g);
}

TEST(Replace, LargerKernelAtBudgetTriggersRebalance) {
  const auto g = oracle::fixture_genome();
  const auto config = oracle::fixture_space();
  LayerSpec wider = g.blocks[3].layer;
  wider.kernel_size = 5;
  const MutationResult r = apply_mutation(g, ReplaceLayer{3, wider, 1}, config);
  EXPECT_TRUE(r.rebalanced);
  BlockSpec probe = g.blocks[3];
  probe.layer = wider;
  const int cin = oracle::input_channels(g)[3];
  const int expected = largest_feasible(probe, cin, 3, *config.block_budget, config.channels);
  ASSERT_GT(expected, 0);
  EXPECT_LT(expected, 16);
  EXPECT_EQ(r.genome.blocks[3].layer.out_channels, expected);
  EXPECT_EQ(r.genome.blocks[3].layer.kernel_size, 5);
  EXPECT_TRUE(validate(r.genome, config).ok());
}

TEST(Replace, AddingSqueezeExcitationAddsItsParameters) {
  const auto g = oracle::fixture_genome();
  LayerSpec with_se = g.blocks[0].layer;
  with_se.se_ratio = SeRatio::Quarter;
  const auto child = apply_replace(g, 0, with_se, oracle::fixture_space());
  const std::uint64_t cin = 3;
  const std::uint64_t h = (cin + 3) / 4;
  EXPECT_EQ(param_count(child) - param_count(g), cin * h + h + h * cin + cin);
}

TEST(Replace, OutsideOptionListsIsInvalidOperation) {
  const auto g = oracle::fixture_genome();
  LayerSpec odd = g.blocks[0].layer;
  odd.out_channels = 12;
  EXPECT_THROW(apply_replace(g, 0, odd, oracle::fixture_space()), InvalidOperation);
  EXPECT_THROW(apply_replace(g, 0, g.blocks[0].layer, 7, oracle::fixture_space()),
               InvalidOperation);
}

TEST(Rebalance, WithinBudgetUnchanged) {
  const auto g = oracle::fixture_genome();
  const auto c = oracle::fixture_space();
  EXPECT_EQ(rebalance(g, *c.block_budget, c.channels), g);
}

TEST(Rebalance, SingleOverBudgetBlock) {
  auto g = oracle::fixture_genome();
  g.blocks[3].layer.kernel_size = 5;  // 24 -> 16 vanilla 5x5 with SE: 9934 parameters
  const auto c = oracle::fixture_space();
  const auto in = oracle::input_channels(g);
  ASSERT_GT(block_count_oracle(g.blocks[3], in[3], 3), *c.block_budget);
  const auto out = rebalance(g, *c.block_budget, c.channels);
  const int expected = largest_feasible(g.blocks[3], in[3], 3, *c.block_budget, c.channels);
  EXPECT_EQ(out.blocks[3].layer.out_channels, expected);
  for (std::size_t i = 0; i < g.blocks.size(); ++i) {
    if (i != 3) EXPECT_EQ(out.blocks[i], g.blocks[i]) << i;
  }
}

TEST(Rebalance, ZeroBudgetRejected) {
  const auto c = oracle::fixture_space();
  EXPECT_THROW(rebalance(oracle::fixture_genome(), 0, c.channels), MutationRejected);
}

TEST(Rebalance, IdempotentAndMonotone) {
  SearchSpaceConfig loose = oracle::fixture_space();
  loose.block_budget.reset();
  loose.skips = {Skip::None};
  const std::uint64_t budget = 4000;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto g = random_genome(loose, seed);
    ArchitectureGenome once;
    try {
      once = rebalance(g, budget, loose.channels);
    } catch (const MutationRejected&) {
      continue;
    }
    EXPECT_EQ(rebalance(once, budget, loose.channels), once);
    const auto in = block_input_channels(once);
    for (std::size_t i = 0; i < g.blocks.size(); ++i) {
      EXPECT_LE(once.blocks[i].layer.out_channels, g.blocks[i].layer.out_channels);
      EXPECT_LE(block_param_count(once.blocks[i], in[i], once.expansion), budget);
    }
  }
}

TEST(Propose, DistinctValidChildren) {
  const auto g = oracle::fixture_genome();
  const auto c = oracle::fixture_space();
  const Proposal p = propose_children(g, c, 7, 8);
  ASSERT_EQ(p.children.size(), 8u);
  EXPECT_FALSE(p.short_of_target);
  std::set<GenomeHash> hashes;
  for (const Child& child : p.children) {
    EXPECT_TRUE(validate(child.genome, c).ok());
    EXPECT_EQ(child.record.child_hash, canonical_hash(child.genome));
    EXPECT_EQ(child.record.parent_hash, canonical_hash(g));
    EXPECT_NE(child.record.child_hash, canonical_hash(g));
    hashes.insert(child.record.child_hash);
    // Replaying the recorded op reproduces the child.
    EXPECT_EQ(apply_mutation(g, child.record.op, c).genome, child.genome);
  }
  EXPECT_EQ(hashes.size(), 8u);
}

TEST(Propose, ChildrenAreOneMutationAway) {
  const auto c = oracle::fixture_space();
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto parent = random_genome(c, seed);
    for (const Child& child : propose_children(parent, c, seed, 8).children) {
      std::size_t changed_layers = 0;
      std::size_t changed_repeats = 0;
      for (std::size_t i = 0; i < parent.blocks.size(); ++i) {
        LayerSpec a = parent.blocks[i].layer;
        LayerSpec b = child.genome.blocks[i].layer;
        if (child.record.rebalanced) a.out_channels = b.out_channels = 0;
        changed_layers += a != b;
        changed_repeats += parent.blocks[i].repeats != child.genome.blocks[i].repeats;
      }
      if (std::holds_alternative<SwapLayers>(child.record.op)) {
        EXPECT_LE(changed_layers, 2u);
        EXPECT_EQ(changed_repeats, 0u);
      } else {
        EXPECT_LE(changed_layers, 1u);
        EXPECT_LE(changed_repeats, 1u);
      }
    }
  }
}

TEST(Propose, Deterministic) {
  const auto g = oracle::fixture_genome();
  const auto c = oracle::fixture_space();
  const auto a = propose_children(g, c, 7, 8);
  const auto b = propose_children(g, c, 7, 8);
  ASSERT_EQ(a.children.size(), b.children.size());
  for (std::size_t i = 0; i < a.children.size(); ++i) {
    EXPECT_EQ(a.children[i].record, b.children[i].record);
  }
}

TEST(Propose, SingleGenomeSpaceYieldsNothing) {
  SearchSpaceConfig c;
  c.num_scales = 1;
  c.conv_ops = {ConvOp::Vanilla2D};
  c.kernel_sizes = {3};
  c.se_ratios = {SeRatio::None};
  c.skips = {Skip::None};
  c.channels = {8};
  c.repeats = {1};
  const Proposal p = propose_children(first_genome(c), c, 1, 3);
  EXPECT_TRUE(p.children.empty());
  EXPECT_TRUE(p.short_of_target);
}

TEST(Audit, RecordSerializes) {
  const auto g = oracle::fixture_genome();
  const auto p = propose_children(g, oracle::fixture_space(), 3, 4);
  for (const Child& c : p.children) {
    const auto j = to_json(c.record);
    EXPECT_EQ(j.at("parent"), canonical_hash(g).hex());
    EXPECT_EQ(j.at("child"), c.record.child_hash.hex());
    EXPECT_TRUE(j.at("op") == "swap" || j.at("op") == "replace");
  }
}
