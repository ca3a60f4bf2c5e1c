#include "tabunas/genome.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "tabunas/errors.hpp"
#include "tabunas/rng.hpp"

namespace tabunas {

// ---------------------------------------------------------------------------
// Enum names

std::string to_string(ConvOp op) {
  switch (op) {
    case ConvOp::Vanilla2D: return "vanilla2d";
    case ConvOp::Depthwise: return "depthwise";
    case ConvOp::InvertedBottleneck: return "inverted_bottleneck";
  }
  return "?";
}

std::string to_string(SeRatio se) { return se == SeRatio::Quarter ? "0.25" : "0"; }

std::string to_string(Skip skip) { return skip == Skip::Residual ? "residual" : "none"; }

std::string to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::Encoder: return "encoder";
    case BlockKind::Decoder: return "decoder";
    case BlockKind::Refine: return "refine";
    case BlockKind::Downsample: return "downsample";
    case BlockKind::Upsample: return "upsample";
  }
  return "?";
}

ConvOp conv_op_from_string(const std::string& s) {
  if (s == "vanilla2d") return ConvOp::Vanilla2D;
  if (s == "depthwise") return ConvOp::Depthwise;
  if (s == "inverted_bottleneck") return ConvOp::InvertedBottleneck;
  throw ParseError("unknown conv_op '" + s + "'");
}

SeRatio se_ratio_from_string(const std::string& s) {
  if (s == "0" || s == "0.0") return SeRatio::None;
  if (s == "0.25") return SeRatio::Quarter;
  throw ParseError("unknown se_ratio '" + s + "'");
}

SeRatio se_ratio_from_value(double r) {
  if (r == 0.0) return SeRatio::None;
  if (r == 0.25) return SeRatio::Quarter;
  throw ParseError("se_ratio must be 0 or 0.25, got " + std::to_string(r));
}

Skip skip_from_string(const std::string& s) {
  if (s == "none") return Skip::None;
  if (s == "residual") return Skip::Residual;
  throw ParseError("unknown skip '" + s + "'");
}

BlockKind block_kind_from_string(const std::string& s) {
  if (s == "encoder") return BlockKind::Encoder;
  if (s == "decoder") return BlockKind::Decoder;
  if (s == "refine") return BlockKind::Refine;
  if (s == "downsample") return BlockKind::Downsample;
  if (s == "upsample") return BlockKind::Upsample;
  throw ParseError("unknown block kind '" + s + "'");
}

int se_hidden_channels(SeRatio se, int channels) {
  if (se == SeRatio::None) return 0;
  return (channels + 3) / 4;  // ceil(0.25 * channels)
}

// ---------------------------------------------------------------------------
// Config

std::uint64_t SearchSpaceConfig::block_space_size() const {
  return static_cast<std::uint64_t>(conv_ops.size()) * kernel_sizes.size() *
         se_ratios.size() * skips.size() * channels.size() * repeats.size();
}

SearchSpaceConfig default_space_config() {
  SearchSpaceConfig config;
  config.block_budget = kDefaultBlockBudget;
  return config;
}

namespace {

template <typename T>
bool has_duplicates(std::vector<T> v) {
  std::sort(v.begin(), v.end());
  return std::adjacent_find(v.begin(), v.end()) != v.end();
}

template <typename T>
bool contains(const std::vector<T>& v, const T& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

}  // namespace

void validate_config(const SearchSpaceConfig& c) {
  auto fail = [](const std::string& msg) { throw InvalidConfig(msg); };
  if (c.num_scales < 1) fail("num_scales must be >= 1");
  if (c.conv_ops.empty() || c.kernel_sizes.empty() || c.se_ratios.empty() || c.skips.empty() ||
      c.channels.empty() || c.repeats.empty()) {
    fail("every option list must be non-empty");
  }
  if (has_duplicates(c.conv_ops) || has_duplicates(c.kernel_sizes) ||
      has_duplicates(c.se_ratios) || has_duplicates(c.skips) || has_duplicates(c.channels) ||
      has_duplicates(c.repeats)) {
    fail("option lists must not contain duplicates");
  }
  for (int k : c.kernel_sizes) {
    if (k != 3 && k != 5) fail("kernel sizes must be 3 or 5, got " + std::to_string(k));
  }
  for (int ch : c.channels) {
    if (ch < 1) fail("channel options must be positive");
  }
  for (int r : c.repeats) {
    if (r < 1) fail("repeat options must be >= 1");
  }
  if (c.expansion < 1) fail("expansion must be >= 1");
  if (c.input.height < 1 || c.input.width < 1 || c.input.channels < 1) {
    fail("input resolution must be positive");
  }
  const int div = 1 << (c.num_scales - 1);
  if (c.input.height % div != 0 || c.input.width % div != 0) {
    fail("input height/width must be divisible by 2^(num_scales-1) = " + std::to_string(div));
  }
  if (c.block_budget) {
    if (*c.block_budget == 0) fail("block_budget must be positive");
    // Every reachable input width must admit at least one in-budget choice
    // that is valid without a residual connection.
    std::vector<int> widths = c.channels;
    widths.push_back(c.input.channels);
    const int narrow = *std::min_element(c.channels.begin(), c.channels.end());
    const int fewest = *std::min_element(c.repeats.begin(), c.repeats.end());
    for (int in : widths) {
      std::uint64_t best = UINT64_MAX;
      for (ConvOp op : c.conv_ops) {
        for (int k : c.kernel_sizes) {
          for (SeRatio se : c.se_ratios) {
            BlockSpec b;
            b.repeats = fewest;
            b.layer = {op, k, se, Skip::None, narrow};
            best = std::min(best, block_param_count(b, in, c.expansion));
          }
        }
      }
      if (best > *c.block_budget) {
        fail("block_budget " + std::to_string(*c.block_budget) +
             " is unsatisfiable for input width " + std::to_string(in));
      }
    }
    if (!contains(c.skips, Skip::None)) {
      fail("a block budget requires the 'none' skip option");
    }
  }
}

// ---------------------------------------------------------------------------
// Template and wiring

namespace {

constexpr std::array<BlockKind, 7> kScaleKinds{BlockKind::Encoder, BlockKind::Encoder,
                                               BlockKind::Decoder, BlockKind::Decoder,
                                               BlockKind::Refine,  BlockKind::Downsample,
                                               BlockKind::Upsample};

std::size_t slot_count(int num_scales) {
  return 5 + static_cast<std::size_t>(num_scales - 1) * 7;
}

}  // namespace

std::vector<BlockSlot> backbone_template(int num_scales) {
  if (num_scales < 1) throw InvalidConfig("num_scales must be >= 1");
  std::vector<BlockSlot> slots;
  slots.reserve(slot_count(num_scales));
  for (int s = 1; s <= num_scales; ++s) {
    const int per_scale = s == 1 ? 5 : 7;
    for (int j = 1; j <= per_scale; ++j) slots.push_back({kScaleKinds[j - 1], s, j});
  }
  return slots;
}

std::size_t slot_position(int scale, int index) {
  if (scale == 1) return static_cast<std::size_t>(index - 1);
  return 5 + static_cast<std::size_t>(scale - 2) * 7 + static_cast<std::size_t>(index - 1);
}

std::vector<std::size_t> dataflow_order(int num_scales) {
  std::vector<std::size_t> order;
  order.reserve(slot_count(num_scales));
  for (int s = 1; s <= num_scales; ++s) {
    if (s >= 2) order.push_back(slot_position(s, 6));
    order.push_back(slot_position(s, 1));
    order.push_back(slot_position(s, 2));
  }
  for (int s = num_scales; s >= 1; --s) {
    order.push_back(slot_position(s, 3));
    order.push_back(slot_position(s, 4));
    order.push_back(slot_position(s, 5));
    if (s >= 2) order.push_back(slot_position(s, 7));
  }
  return order;
}

std::optional<std::size_t> predecessor(int num_scales, std::size_t pos) {
  const auto slots = backbone_template(num_scales);
  const BlockSlot& slot = slots.at(pos);
  const int s = slot.scale;
  switch (slot.index) {
    case 1:
      if (s == 1) return std::nullopt;
      return slot_position(s, 6);
    case 2: return slot_position(s, 1);
    case 3:
      // The upsampled coarser output is added onto the encoder features, so the
      // first decoder keeps the encoder's width.
      return slot_position(s, 2);
    case 4: return slot_position(s, 3);
    case 5: return slot_position(s, 4);
    case 6: return slot_position(s - 1, 2);
    case 7: return slot_position(s, 5);
    default: break;
  }
  return std::nullopt;
}

std::vector<int> block_input_channels(const ArchitectureGenome& genome) {
  const std::size_t n = slot_count(genome.num_scales);
  if (genome.blocks.size() != n) {
    throw InvalidGenome("genome has " + std::to_string(genome.blocks.size()) +
                        " blocks, template needs " + std::to_string(n));
  }
  std::vector<int> in(n);
  for (std::size_t pos = 0; pos < n; ++pos) {
    const auto pred = predecessor(genome.num_scales, pos);
    in[pos] = pred ? genome.blocks[*pred].layer.out_channels : genome.input.channels;
  }
  return in;
}

// ---------------------------------------------------------------------------
// Validation

std::string ValidityReport::describe() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i) out << "; ";
    if (violations[i].slot) out << "slot " << *violations[i].slot << ": ";
    out << violations[i].message;
  }
  return out.str();
}

namespace {

std::string slot_name(const BlockSpec& b) {
  return to_string(b.kind) + "(" + std::to_string(b.scale) + "," + std::to_string(b.index) + ")";
}

bool residual_compatible(const BlockSpec& b, int in_channels) {
  return b.kind != BlockKind::Downsample && in_channels == b.layer.out_channels;
}

}  // namespace

ValidityReport validate(const ArchitectureGenome& g) {
  ValidityReport report;
  auto add = [&](std::optional<std::size_t> slot, std::string msg) {
    report.violations.push_back({slot, std::move(msg)});
  };
  if (g.num_scales < 1) {
    add(std::nullopt, "num_scales must be >= 1");
    return report;
  }
  if (g.input.height < 1 || g.input.width < 1 || g.input.channels < 1) {
    add(std::nullopt, "input resolution must be positive");
  }
  if (g.expansion < 1) add(std::nullopt, "expansion must be >= 1");
  const auto slots = backbone_template(g.num_scales);
  if (g.blocks.size() != slots.size()) {
    add(std::nullopt, "expected " + std::to_string(slots.size()) + " blocks, found " +
                          std::to_string(g.blocks.size()));
    return report;
  }
  bool domains_ok = true;
  for (std::size_t pos = 0; pos < slots.size(); ++pos) {
    const BlockSpec& b = g.blocks[pos];
    if (b.slot() != slots[pos]) {
      add(pos, slot_name(b) + " does not match template slot " + to_string(slots[pos].kind) +
                   "(" + std::to_string(slots[pos].scale) + "," +
                   std::to_string(slots[pos].index) + ")");
      if ((b.kind == BlockKind::Downsample || b.kind == BlockKind::Upsample) && b.scale < 2) {
        add(pos, to_string(b.kind) + " block is not allowed at scale 1");
      }
    }
    if (b.repeats < 1) add(pos, slot_name(b) + ": repeats must be >= 1");
    if (b.layer.kernel_size != 3 && b.layer.kernel_size != 5) {
      add(pos, slot_name(b) + ": kernel size must be 3 or 5");
    }
    if (b.layer.out_channels < 1) {
      add(pos, slot_name(b) + ": out_channels must be positive");
      domains_ok = false;
    }
  }
  if (!domains_ok) return report;
  const auto in = block_input_channels(g);
  for (std::size_t pos = 0; pos < slots.size(); ++pos) {
    const BlockSpec& b = g.blocks[pos];
    if (b.layer.skip == Skip::Residual && !residual_compatible(b, in[pos])) {
      add(pos, slot_name(b) + ": residual skip connects mismatched shapes (in " +
                   std::to_string(in[pos]) + " channels, out " +
                   std::to_string(b.layer.out_channels) +
                   (b.kind == BlockKind::Downsample ? ", stride 2)" : ")"));
    }
  }
  return report;
}

ValidityReport validate(const ArchitectureGenome& g, const SearchSpaceConfig& c) {
  ValidityReport report = validate(g);
  auto add = [&](std::optional<std::size_t> slot, std::string msg) {
    report.violations.push_back({slot, std::move(msg)});
  };
  if (g.num_scales != c.num_scales) add(std::nullopt, "num_scales differs from config");
  if (g.input != c.input) add(std::nullopt, "input resolution differs from config");
  if (g.expansion != c.expansion) add(std::nullopt, "expansion differs from config");
  if (!report.ok()) return report;
  const auto in = block_input_channels(g);
  for (std::size_t pos = 0; pos < g.blocks.size(); ++pos) {
    const BlockSpec& b = g.blocks[pos];
    const LayerSpec& l = b.layer;
    const std::string name = slot_name(b);
    if (!contains(c.conv_ops, l.conv_op)) add(pos, name + ": conv_op not in option list");
    if (!contains(c.kernel_sizes, l.kernel_size)) add(pos, name + ": kernel size not in option list");
    if (!contains(c.se_ratios, l.se_ratio)) add(pos, name + ": se_ratio not in option list");
    if (!contains(c.skips, l.skip)) add(pos, name + ": skip not in option list");
    if (!contains(c.channels, l.out_channels)) add(pos, name + ": out_channels not in option list");
    if (!contains(c.repeats, b.repeats)) add(pos, name + ": repeats not in option list");
    if (c.block_budget) {
      const auto count = block_param_count(b, in[pos], g.expansion);
      if (count > *c.block_budget) {
        add(pos, name + ": " + std::to_string(count) + " parameters exceed block budget " +
                     std::to_string(*c.block_budget));
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Parameter accounting

std::uint64_t se_param_count(SeRatio se, int channels) {
  const std::uint64_t c = static_cast<std::uint64_t>(channels);
  const std::uint64_t h = static_cast<std::uint64_t>(se_hidden_channels(se, channels));
  if (h == 0) return 0;
  return c * h + h + h * c + c;
}

std::uint64_t layer_param_count(const LayerSpec& layer, int in_channels, int expansion) {
  const std::uint64_t cin = static_cast<std::uint64_t>(in_channels);
  const std::uint64_t cout = static_cast<std::uint64_t>(layer.out_channels);
  const std::uint64_t k2 = static_cast<std::uint64_t>(layer.kernel_size * layer.kernel_size);
  std::uint64_t n = se_param_count(layer.se_ratio, in_channels);
  switch (layer.conv_op) {
    case ConvOp::Vanilla2D:
      n += k2 * cin * cout + cout;
      break;
    case ConvOp::Depthwise:
      n += k2 * cin + cin + cin * cout + cout;
      break;
    case ConvOp::InvertedBottleneck: {
      const std::uint64_t e = cin * static_cast<std::uint64_t>(expansion);
      n += (cin * e + e) + (k2 * e + e) + (e * cout + cout);
      break;
    }
  }
  return n;
}

std::uint64_t block_param_count(const BlockSpec& block, int in_channels, int expansion) {
  std::uint64_t n = layer_param_count(block.layer, in_channels, expansion);
  if (block.repeats > 1) {
    n += static_cast<std::uint64_t>(block.repeats - 1) *
         layer_param_count(block.layer, block.layer.out_channels, expansion);
  }
  return n;
}

std::uint64_t head_param_count(int in_channels) {
  return static_cast<std::uint64_t>(in_channels) + 1;
}

std::vector<std::uint64_t> block_param_counts(const ArchitectureGenome& genome) {
  const auto report = validate(genome);
  if (!report.ok()) throw InvalidGenome(report.describe());
  const auto in = block_input_channels(genome);
  std::vector<std::uint64_t> counts(genome.blocks.size());
  for (std::size_t pos = 0; pos < genome.blocks.size(); ++pos) {
    counts[pos] = block_param_count(genome.blocks[pos], in[pos], genome.expansion);
  }
  return counts;
}

std::uint64_t param_count(const ArchitectureGenome& genome) {
  std::uint64_t total = 0;
  for (auto n : block_param_counts(genome)) total += n;
  return total + head_param_count(genome.blocks[slot_position(1, 5)].layer.out_channels);
}

// ---------------------------------------------------------------------------
// Sampling and enumeration

BigInt space_size(const SearchSpaceConfig& config) {
  const BigInt m = config.block_space_size();
  return boost::multiprecision::pow(m, static_cast<unsigned>(slot_count(config.num_scales)));
}

std::vector<std::pair<LayerSpec, int>> block_choices(const SearchSpaceConfig& c) {
  std::vector<std::pair<LayerSpec, int>> choices;
  choices.reserve(c.block_space_size());
  for (ConvOp op : c.conv_ops)
    for (int k : c.kernel_sizes)
      for (SeRatio se : c.se_ratios)
        for (Skip skip : c.skips)
          for (int ch : c.channels)
            for (int r : c.repeats) choices.push_back({LayerSpec{op, k, se, skip, ch}, r});
  return choices;
}

namespace {

ArchitectureGenome skeleton(const SearchSpaceConfig& c) {
  ArchitectureGenome g;
  g.num_scales = c.num_scales;
  g.input = c.input;
  g.expansion = c.expansion;
  for (const BlockSlot& s : backbone_template(c.num_scales)) {
    BlockSpec b;
    b.kind = s.kind;
    b.scale = s.scale;
    b.index = s.index;
    g.blocks.push_back(b);
  }
  return g;
}

bool block_ok(const BlockSpec& b, int in, const SearchSpaceConfig& c) {
  if (b.layer.skip == Skip::Residual && !residual_compatible(b, in)) return false;
  if (c.block_budget && block_param_count(b, in, c.expansion) > *c.block_budget) return false;
  return true;
}

}  // namespace

ArchitectureGenome first_genome(const SearchSpaceConfig& config) {
  validate_config(config);
  ArchitectureGenome g = skeleton(config);
  const auto choices = block_choices(config);
  for (auto& b : g.blocks) {
    b.layer = choices.front().first;
    b.repeats = choices.front().second;
  }
  return g;
}

ArchitectureGenome random_genome(const SearchSpaceConfig& config, std::uint64_t seed) {
  validate_config(config);
  const auto choices = block_choices(config);
  ArchitectureGenome g = skeleton(config);
  Rng rng(seed);
  constexpr int kMaxDraws = 100000;
  // Blocks are drawn in dataflow order so each block's input width is known
  // when its own choice is checked.
  for (std::size_t pos : dataflow_order(config.num_scales)) {
    const auto pred = predecessor(config.num_scales, pos);
    const int in = pred ? g.blocks[*pred].layer.out_channels : config.input.channels;
    BlockSpec& b = g.blocks[pos];
    int draws = 0;
    do {
      if (++draws > kMaxDraws) {
        throw InvalidConfig("no valid block choice found for slot " + std::to_string(pos));
      }
      const auto& choice = choices[rng.index(choices.size())];
      b.layer = choice.first;
      b.repeats = choice.second;
    } while (!block_ok(b, in, config));
  }
  return g;
}

void enumerate_genomes(const SearchSpaceConfig& config,
                       const std::function<bool(const ArchitectureGenome&)>& visit) {
  validate_config(config);
  const auto choices = block_choices(config);
  ArchitectureGenome g = skeleton(config);
  const std::size_t n = g.blocks.size();
  std::vector<std::size_t> digit(n, 0);
  for (;;) {
    for (std::size_t pos = 0; pos < n; ++pos) {
      g.blocks[pos].layer = choices[digit[pos]].first;
      g.blocks[pos].repeats = choices[digit[pos]].second;
    }
    const auto in = block_input_channels(g);
    bool ok = true;
    for (std::size_t pos = 0; pos < n && ok; ++pos) ok = block_ok(g.blocks[pos], in[pos], config);
    if (ok && !visit(g)) return;
    std::size_t pos = n;
    while (pos > 0) {
      --pos;
      if (++digit[pos] < choices.size()) break;
      digit[pos] = 0;
      if (pos == 0) return;
    }
  }
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json to_json(const ArchitectureGenome& g) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const BlockSpec& b : g.blocks) {
    blocks.push_back({
        {"kind", to_string(b.kind)},
        {"scale", b.scale},
        {"index", b.index},
        {"repeats", b.repeats},
        {"conv_op", to_string(b.layer.conv_op)},
        {"kernel_size", b.layer.kernel_size},
        {"se_ratio", se_ratio_value(b.layer.se_ratio)},
        {"skip", to_string(b.layer.skip)},
        {"out_channels", b.layer.out_channels},
    });
  }
  return {
      {"schema_version", kGenomeSchemaVersion},
      {"num_scales", g.num_scales},
      {"input_resolution",
       {{"height", g.input.height}, {"width", g.input.width}, {"channels", g.input.channels}}},
      {"expansion", g.expansion},
      {"blocks", std::move(blocks)},
  };
}

ArchitectureGenome genome_from_json(const nlohmann::json& j) {
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kGenomeSchemaVersion) {
      throw ParseError("unsupported genome schema_version " + std::to_string(version));
    }
    ArchitectureGenome g;
    g.num_scales = j.at("num_scales").get<int>();
    const auto& res = j.at("input_resolution");
    g.input = {res.at("height").get<int>(), res.at("width").get<int>(),
               res.at("channels").get<int>()};
    g.expansion = j.value("expansion", 3);
    for (const auto& jb : j.at("blocks")) {
      BlockSpec b;
      b.kind = block_kind_from_string(jb.at("kind").get<std::string>());
      b.scale = jb.at("scale").get<int>();
      b.index = jb.at("index").get<int>();
      b.repeats = jb.at("repeats").get<int>();
      b.layer.conv_op = conv_op_from_string(jb.at("conv_op").get<std::string>());
      b.layer.kernel_size = jb.at("kernel_size").get<int>();
      b.layer.se_ratio = se_ratio_from_value(jb.at("se_ratio").get<double>());
      b.layer.skip = skip_from_string(jb.at("skip").get<std::string>());
      b.layer.out_channels = jb.at("out_channels").get<int>();
      g.blocks.push_back(b);
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed genome: ") + e.what());
  }
}

std::string canonical_text(const ArchitectureGenome& genome) { return to_json(genome).dump(); }

ArchitectureGenome load_genome(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open genome file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return genome_from_json(j);
}

void save_genome(const ArchitectureGenome& genome, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write genome file " + path);
  out << to_json(genome).dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Hashing

std::string GenomeHash::hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(64, '0');
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    s[2 * i] = kDigits[bytes[i] >> 4];
    s[2 * i + 1] = kDigits[bytes[i] & 0xf];
  }
  return s;
}

std::uint64_t GenomeHash::prefix64() const {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | bytes[i];
  return v;
}

GenomeHash GenomeHash::from_hex(const std::string& hex) {
  if (hex.size() != 64) throw ParseError("hash must have 64 hex digits");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    throw ParseError(std::string("bad hex digit '") + c + "'");
  };
  GenomeHash h;
  for (std::size_t i = 0; i < 32; ++i) {
    h.bytes[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  }
  return h;
}

GenomeHash canonical_hash(const ArchitectureGenome& genome) {
  const std::string text = canonical_text(genome);
  GenomeHash h;
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), h.bytes.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != h.bytes.size()) {
    throw Error("hash_error", "SHA-256 digest failed");
  }
  return h;
}

}  // namespace tabunas
