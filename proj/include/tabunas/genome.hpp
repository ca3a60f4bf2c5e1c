#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include "json.hpp"

namespace tabunas {

enum class ConvOp { Vanilla2D, Depthwise, InvertedBottleneck };
enum class SeRatio { None, Quarter };
enum class Skip { None, Residual };
enum class BlockKind { Encoder, Decoder, Refine, Downsample, Upsample };

std::string to_string(ConvOp op);
std::string to_string(SeRatio se);
std::string to_string(Skip skip);
std::string to_string(BlockKind kind);
ConvOp conv_op_from_string(const std::string& s);
SeRatio se_ratio_from_string(const std::string& s);
Skip skip_from_string(const std::string& s);
BlockKind block_kind_from_string(const std::string& s);

inline double se_ratio_value(SeRatio se) { return se == SeRatio::Quarter ? 0.25 : 0.0; }
SeRatio se_ratio_from_value(double r);

// Width of the squeeze bottleneck, ceil(r * channels).
int se_hidden_channels(SeRatio se, int channels);

// One searchable layer. Every layer of a block shares the same spec.
struct LayerSpec {
  ConvOp conv_op = ConvOp::Vanilla2D;
  int kernel_size = 3;
  SeRatio se_ratio = SeRatio::None;
  Skip skip = Skip::None;
  int out_channels = 8;

  auto operator<=>(const LayerSpec&) const = default;
};

struct BlockSlot {
  BlockKind kind;
  int scale;  // i, 1-based
  int index;  // j, 1..7 following the template order

  auto operator<=>(const BlockSlot&) const = default;
};

struct BlockSpec {
  BlockKind kind = BlockKind::Encoder;
  int scale = 1;
  int index = 1;
  int repeats = 1;
  LayerSpec layer;

  BlockSlot slot() const { return {kind, scale, index}; }
  auto operator<=>(const BlockSpec&) const = default;
};

struct Resolution {
  int height = 16;
  int width = 16;
  int channels = 3;

  auto operator<=>(const Resolution&) const = default;
};

inline constexpr int kGenomeSchemaVersion = 1;

// Complete encoding of one candidate network over the fixed pyramid backbone.
struct ArchitectureGenome {
  int num_scales = 1;
  Resolution input;
  int expansion = 3;  // inverted-bottleneck expansion factor (not searched)
  std::vector<BlockSpec> blocks;

  auto operator<=>(const ArchitectureGenome&) const = default;
};

struct SearchSpaceConfig {
  int num_scales = 3;
  std::vector<ConvOp> conv_ops{ConvOp::Vanilla2D, ConvOp::Depthwise,
                               ConvOp::InvertedBottleneck};
  std::vector<int> kernel_sizes{3, 5};
  std::vector<SeRatio> se_ratios{SeRatio::None, SeRatio::Quarter};
  std::vector<Skip> skips{Skip::None, Skip::Residual};
  std::vector<int> channels{8, 16, 24, 32};
  std::vector<int> repeats{1, 2, 3};
  Resolution input{16, 16, 3};
  int expansion = 3;
  // Per-block parameter budget; nullopt disables the constraint.
  std::optional<std::uint64_t> block_budget;

  // M: number of distinct (LayerSpec, repeats) choices per block.
  std::uint64_t block_space_size() const;

  bool operator==(const SearchSpaceConfig&) const = default;
};

// Default per-block budget: 1.5x the median block parameter count over the
// default option lists (every layer choice, repeat count and input width).
inline constexpr std::uint64_t kDefaultBlockBudget = 6873;

SearchSpaceConfig default_space_config();

// Throws InvalidConfig when option lists are empty, out of domain, or the
// budget cannot be met even with the narrowest layer.
void validate_config(const SearchSpaceConfig& config);

// ---------------------------------------------------------------------------
// Backbone template and wiring

std::vector<BlockSlot> backbone_template(int num_scales);

// Position of (scale, index) in the template's slot order.
std::size_t slot_position(int scale, int index);

// Slots in the order data flows through the network: encoders from fine to
// coarse (with each scale's downsample first), then decoder/refine/upsample
// from coarse to fine.
std::vector<std::size_t> dataflow_order(int num_scales);

// Template position of the block whose output feeds `pos`, or nullopt for the
// first encoder block, which reads the network input.
std::optional<std::size_t> predecessor(int num_scales, std::size_t pos);

// Input channel count of every block, derived from the predecessor's
// out_channels (network input channels for the first block).
std::vector<int> block_input_channels(const ArchitectureGenome& genome);

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::optional<std::size_t> slot;  // template position, if block-specific
  std::string message;
};

struct ValidityReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string describe() const;
};

// Structural rules: template layout, field domains, residual compatibility.
ValidityReport validate(const ArchitectureGenome& genome);

// Structural rules plus membership in the config's option lists and the
// per-block budget.
ValidityReport validate(const ArchitectureGenome& genome, const SearchSpaceConfig& config);

// ---------------------------------------------------------------------------
// Parameter accounting

std::uint64_t layer_param_count(const LayerSpec& layer, int in_channels, int expansion);
std::uint64_t se_param_count(SeRatio se, int channels);
std::uint64_t block_param_count(const BlockSpec& block, int in_channels, int expansion);
std::uint64_t head_param_count(int in_channels);

// Exact number of learnable scalars of the compiled network (head included).
// Throws InvalidGenome when the genome is structurally invalid.
std::uint64_t param_count(const ArchitectureGenome& genome);

// Per-block counts in template order.
std::vector<std::uint64_t> block_param_counts(const ArchitectureGenome& genome);

// ---------------------------------------------------------------------------
// Sampling and enumeration

using BigInt = boost::multiprecision::cpp_int;

// M^(5 + (S-1)*7), exact.
BigInt space_size(const SearchSpaceConfig& config);

ArchitectureGenome random_genome(const SearchSpaceConfig& config, std::uint64_t seed);

// The genome whose every block holds the first option of every list.
ArchitectureGenome first_genome(const SearchSpaceConfig& config);

// All (LayerSpec, repeats) combinations of the option lists, in a fixed order.
std::vector<std::pair<LayerSpec, int>> block_choices(const SearchSpaceConfig& config);

// Visits every genome of the space that passes validate(genome, config), in
// mixed-radix order over block_choices. Stops early when visit returns false.
void enumerate_genomes(const SearchSpaceConfig& config,
                       const std::function<bool(const ArchitectureGenome&)>& visit);

// ---------------------------------------------------------------------------
// Serialization and identity

nlohmann::json to_json(const ArchitectureGenome& genome);
ArchitectureGenome genome_from_json(const nlohmann::json& j);

// Compact JSON with sorted keys; the input of canonical_hash.
std::string canonical_text(const ArchitectureGenome& genome);

ArchitectureGenome load_genome(const std::string& path);
void save_genome(const ArchitectureGenome& genome, const std::string& path);

struct GenomeHash {
  std::array<std::uint8_t, 32> bytes{};

  std::string hex() const;
  std::string short_hex() const { return hex().substr(0, 16); }
  std::uint64_t prefix64() const;
  static GenomeHash from_hex(const std::string& hex);

  auto operator<=>(const GenomeHash&) const = default;
};

// SHA-256 of canonical_text.
GenomeHash canonical_hash(const ArchitectureGenome& genome);

}  // namespace tabunas

template <>
struct std::hash<tabunas::GenomeHash> {
  std::size_t operator()(const tabunas::GenomeHash& h) const noexcept {
    return static_cast<std::size_t>(h.prefix64());
  }
};
