#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "tabunas/evaluator.hpp"
#include "tabunas/genome.hpp"
#include "tabunas/search.hpp"

namespace tabunas {

// Everything a run needs. Parsed from JSON:
//
//   {
//     "seed": 7, "output_dir": "runs/a",            (both required)
//     "preset": "toy",                                 (applied before the rest)
//     "space":     {num_scales, conv_ops, kernel_sizes, se_ratios, skips,
//                   channels, repeats, expansion, block_budget},
//     "objective": {target_params, alpha},
//     "search":    {population, children, max_iterations, patience,
//                   tabu_tenure, probe_batch},
//     "task":      {height, width, samples, validation_fraction},
//     "train":     {epochs, batch_size, learning_rate, beta1, beta2, epsilon,
//                   decay_start, decay_every, decay_fraction}
//   }
struct RunConfig {
  std::string preset;  // empty when none was requested
  SearchSpaceConfig space = default_space_config();
  double target_params = 2e6;
  double alpha = 0.6;
  int population = 60000;
  int children = kDefaultChildren;
  int max_iterations = 100;
  int patience = 10;
  std::size_t tabu_tenure = 20;
  int probe_batch = 32;
  int task_samples = 80;
  double validation_fraction = 0.2;
  TrainConfig train;
  std::uint64_t seed = 0;
  std::string output_dir;

  bool operator==(const RunConfig&) const = default;
};

// Names accepted by "preset": lidnas-n, lidnas-k, lidnas-s, toy.
RunConfig preset_config(const std::string& name);

// Small enumerable space (3^5 = 243 genomes) with a short training schedule.
RunConfig toy_config();

RunConfig parse_config(const nlohmann::json& j);
RunConfig parse_config(const std::string& text);

// Full snapshot; parse_config(to_json(c)) == c.
nlohmann::json to_json(const RunConfig& config);

// Throws InvalidConfig on out-of-range values.
void validate_run_config(const RunConfig& config);

SearchSettings search_settings(const RunConfig& config);
EvalSettings eval_settings(const RunConfig& config);

}  // namespace tabunas
