#include "tabunas/run_config.hpp"

#include <set>

#include "tabunas/errors.hpp"

namespace tabunas {

using nlohmann::json;

RunConfig toy_config() {
  RunConfig c;
  c.preset = "toy";
  c.space.num_scales = 1;
  c.space.conv_ops = {ConvOp::Vanilla2D, ConvOp::Depthwise, ConvOp::InvertedBottleneck};
  c.space.kernel_sizes = {3};
  c.space.se_ratios = {SeRatio::None};
  c.space.skips = {Skip::None};
  c.space.channels = {8};
  c.space.repeats = {1};
  c.space.input = {8, 8, 3};
  c.space.block_budget.reset();
  c.target_params = 1500;
  c.alpha = 0.6;
  c.population = 243;
  c.task_samples = 60;
  c.train.batch_size = 8;
  c.train.learning_rate = 3e-3;
  return c;
}

RunConfig preset_config(const std::string& name) {
  RunConfig c;
  if (name == "lidnas-n") {
    c.target_params = 2e6;
    c.alpha = 0.6;
  } else if (name == "lidnas-k") {
    c.target_params = 1.5e6;
    c.alpha = 0.55;
  } else if (name == "lidnas-s") {
    c.target_params = 4.5e6;
    c.alpha = 0.57;
  } else if (name == "toy") {
    return toy_config();
  } else {
    throw ParseError("preset: unknown preset '" + name + "'");
  }
  c.preset = name;
  return c;
}

namespace {

std::string type_name(const json& j) { return j.type_name(); }

// Walks one JSON object, remembering which keys were read so the rest can be
// reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ParseError(where() + ": expected an object, got " + type_name(j_));
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <typename T>
  void read(const std::string& key, T& out) {
    const json* v = find(key);
    if (v) out = convert<T>(*v, key_path(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ParseError(key_path(it.key()) + ": unknown key");
    }
  }

  template <typename T>
  static T convert(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw mismatch(path, "a boolean", v);
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw mismatch(path, "a string", v);
      return v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw mismatch(path, "a number", v);
      return v.get<T>();
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        throw mismatch(path, "a non-negative integer", v);
      }
      if (v.get<std::uint64_t>() > std::numeric_limits<T>::max()) {
        throw ParseError(path + ": integer out of range");
      }
      return static_cast<T>(v.get<std::uint64_t>());
    } else {
      static_assert(std::is_integral_v<T>);
      if (!v.is_number_integer()) throw mismatch(path, "an integer", v);
      const auto x = v.get<std::int64_t>();
      if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max()) {
        throw ParseError(path + ": integer out of range");
      }
      return static_cast<T>(x);
    }
  }

 private:
  static ParseError mismatch(const std::string& path, const std::string& want, const json& v) {
    return ParseError(path + ": expected " + want + ", got " + type_name(v));
  }

  std::string where() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename T, typename F>
void read_list(Section& s, const std::string& key, std::vector<T>& out, F&& parse_item) {
  const json* v = s.find(key);
  if (!v) return;
  const std::string path = s.key_path(key);
  if (!v->is_array()) throw ParseError(path + ": expected an array, got " + v->type_name());
  std::vector<T> items;
  for (std::size_t i = 0; i < v->size(); ++i) {
    const std::string item_path = path + "[" + std::to_string(i) + "]";
    try {
      items.push_back(parse_item((*v)[i], item_path));
    } catch (const ParseError& e) {
      const std::string msg = e.what();
      throw ParseError(msg.rfind(item_path, 0) == 0 ? msg : item_path + ": " + msg);
    }
  }
  out = std::move(items);
}

void parse_space(const json& j, RunConfig& c) {
  Section s(j, "space");
  s.read("num_scales", c.space.num_scales);
  read_list(s, "conv_ops", c.space.conv_ops, [](const json& v, const std::string& p) {
    return conv_op_from_string(Section::convert<std::string>(v, p));
  });
  read_list(s, "kernel_sizes", c.space.kernel_sizes,
            [](const json& v, const std::string& p) { return Section::convert<int>(v, p); });
  read_list(s, "se_ratios", c.space.se_ratios, [](const json& v, const std::string& p) {
    return se_ratio_from_value(Section::convert<double>(v, p));
  });
  read_list(s, "skips", c.space.skips, [](const json& v, const std::string& p) {
    return skip_from_string(Section::convert<std::string>(v, p));
  });
  read_list(s, "channels", c.space.channels,
            [](const json& v, const std::string& p) { return Section::convert<int>(v, p); });
  read_list(s, "repeats", c.space.repeats,
            [](const json& v, const std::string& p) { return Section::convert<int>(v, p); });
  s.read("expansion", c.space.expansion);
  if (const json* b = s.find("block_budget")) {
    if (b->is_null()) {
      c.space.block_budget.reset();
    } else {
      c.space.block_budget = Section::convert<std::uint64_t>(*b, s.key_path("block_budget"));
    }
  }
  s.finish();
}

void parse_objective(const json& j, RunConfig& c) {
  Section s(j, "objective");
  s.read("target_params", c.target_params);
  s.read("alpha", c.alpha);
  s.finish();
  if (!(c.alpha >= 0.0 && c.alpha <= 1.0)) {
    throw ParseError("objective.alpha: must lie in [0, 1], got " + std::to_string(c.alpha));
  }
  if (!(c.target_params > 0.0)) {
    throw ParseError("objective.target_params: must be positive");
  }
}

void parse_search(const json& j, RunConfig& c) {
  Section s(j, "search");
  s.read("population", c.population);
  s.read("children", c.children);
  s.read("max_iterations", c.max_iterations);
  s.read("patience", c.patience);
  s.read("tabu_tenure", c.tabu_tenure);
  s.read("probe_batch", c.probe_batch);
  s.finish();
}

void parse_task(const json& j, RunConfig& c) {
  Section s(j, "task");
  s.read("height", c.space.input.height);
  s.read("width", c.space.input.width);
  s.read("samples", c.task_samples);
  s.read("validation_fraction", c.validation_fraction);
  s.finish();
}

void parse_train(const json& j, RunConfig& c) {
  Section s(j, "train");
  s.read("epochs", c.train.epochs);
  s.read("batch_size", c.train.batch_size);
  s.read("learning_rate", c.train.learning_rate);
  s.read("beta1", c.train.beta1);
  s.read("beta2", c.train.beta2);
  s.read("epsilon", c.train.epsilon);
  s.read("decay_start", c.train.decay_start);
  s.read("decay_every", c.train.decay_every);
  s.read("decay_fraction", c.train.decay_fraction);
  s.finish();
}

}  // namespace

RunConfig parse_config(const json& j) {
  Section root(j, "");
  RunConfig c;
  if (const json* p = root.find("preset")) {
    c = preset_config(Section::convert<std::string>(*p, "preset"));
  }
  const json* seed = root.find("seed");
  if (!seed) throw ParseError("seed: missing required key");
  c.seed = Section::convert<std::uint64_t>(*seed, "seed");
  const json* out = root.find("output_dir");
  if (!out) throw ParseError("output_dir: missing required key");
  c.output_dir = Section::convert<std::string>(*out, "output_dir");
  if (const json* v = root.find("space")) parse_space(*v, c);
  if (const json* v = root.find("objective")) parse_objective(*v, c);
  if (const json* v = root.find("search")) parse_search(*v, c);
  if (const json* v = root.find("task")) parse_task(*v, c);
  if (const json* v = root.find("train")) parse_train(*v, c);
  root.finish();
  validate_run_config(c);
  return c;
}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

json to_json(const RunConfig& c) {
  json space;
  space["num_scales"] = c.space.num_scales;
  space["conv_ops"] = json::array();
  for (ConvOp op : c.space.conv_ops) space["conv_ops"].push_back(to_string(op));
  space["kernel_sizes"] = c.space.kernel_sizes;
  space["se_ratios"] = json::array();
  for (SeRatio se : c.space.se_ratios) space["se_ratios"].push_back(se_ratio_value(se));
  space["skips"] = json::array();
  for (Skip sk : c.space.skips) space["skips"].push_back(to_string(sk));
  space["channels"] = c.space.channels;
  space["repeats"] = c.space.repeats;
  space["expansion"] = c.space.expansion;
  space["block_budget"] = c.space.block_budget ? json(*c.space.block_budget) : json(nullptr);

  json j;
  if (!c.preset.empty()) j["preset"] = c.preset;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["space"] = space;
  j["objective"] = {{"target_params", c.target_params}, {"alpha", c.alpha}};
  j["search"] = {{"population", c.population},         {"children", c.children},
                 {"max_iterations", c.max_iterations}, {"patience", c.patience},
                 {"tabu_tenure", c.tabu_tenure},       {"probe_batch", c.probe_batch}};
  j["task"] = {{"height", c.space.input.height},
               {"width", c.space.input.width},
               {"samples", c.task_samples},
               {"validation_fraction", c.validation_fraction}};
  j["train"] = {{"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"learning_rate", c.train.learning_rate},
                {"beta1", c.train.beta1},
                {"beta2", c.train.beta2},
                {"epsilon", c.train.epsilon},
                {"decay_start", c.train.decay_start},
                {"decay_every", c.train.decay_every},
                {"decay_fraction", c.train.decay_fraction}};
  return j;
}

void validate_run_config(const RunConfig& c) {
  validate_config(c.space);
  validate_train_config(c.train);
  if (!(c.alpha >= 0.0 && c.alpha <= 1.0)) throw InvalidConfig("alpha must lie in [0, 1]");
  if (!(c.target_params > 0.0)) throw InvalidConfig("target_params must be positive");
  if (c.population < 1) throw InvalidConfig("search.population must be >= 1");
  if (c.children < 1) throw InvalidConfig("search.children must be >= 1");
  if (c.max_iterations < 0) throw InvalidConfig("search.max_iterations must be >= 0");
  if (c.patience < 1) throw InvalidConfig("search.patience must be >= 1");
  if (c.probe_batch < 1) throw InvalidConfig("search.probe_batch must be >= 1");
  if (c.task_samples < 2) throw InvalidConfig("task.samples must be >= 2");
  if (!(c.validation_fraction > 0.0 && c.validation_fraction < 1.0)) {
    throw InvalidConfig("task.validation_fraction must lie in (0, 1)");
  }
  if (c.output_dir.empty()) throw InvalidConfig("output_dir must not be empty");
}

SearchSettings search_settings(const RunConfig& c) {
  SearchSettings s;
  s.space = c.space;
  s.target_params = c.target_params;
  s.alpha = c.alpha;
  s.population = c.population;
  s.children = c.children;
  s.max_iterations = c.max_iterations;
  s.patience = c.patience;
  s.tabu_tenure = c.tabu_tenure;
  s.master_seed = c.seed;
  return s;
}

EvalSettings eval_settings(const RunConfig& c) {
  EvalSettings e;
  e.input = c.space.input;
  e.task_samples = c.task_samples;
  e.validation_fraction = c.validation_fraction;
  e.train = c.train;
  e.target_params = c.target_params;
  e.alpha = c.alpha;
  e.master_seed = c.seed;
  return e;
}

}  // namespace tabunas
