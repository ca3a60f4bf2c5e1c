#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <vector>

#include "tabunas/genome.hpp"
#include "tabunas/network.hpp"

namespace tabunas {

// ---------------------------------------------------------------------------
// Procedural dense-regression task

// Plane n . X = d seen by a pinhole camera at the origin looking down +z.
struct ScenePlane {
  double nx = 0.0, ny = 0.0, nz = 1.0;
  double d = 3.0;
  double albedo = 0.5;
};

struct SceneSphere {
  double cx = 0.0, cy = 0.0, cz = 3.0;
  double radius = 0.5;
  double albedo = 0.5;
};

struct Scene {
  ScenePlane plane;
  std::vector<SceneSphere> spheres;
};

inline constexpr double kTanHalfFov = 0.6;
inline constexpr double kMinDepth = 0.1;
inline constexpr double kMaxDepth = 10.0;

// Camera ray through the centre of pixel (row, col); its z component is 1, so
// the ray parameter of a hit equals its depth.
struct Ray {
  double x, y, z;
};
Ray pixel_ray(int row, int col, int height, int width);

// Renders a 3-channel input (shading, fog, albedo) and the depth target.
// input must hold 3*H*W values, depth H*W.
void render_scene(const Scene& scene, int height, int width, double* input, double* depth);

Scene random_scene(std::uint64_t seed);

struct SyntheticTask {
  std::uint64_t seed = 0;
  int count = 0;
  int height = 0;
  int width = 0;
  Tensor inputs;   // (count, 3, H, W)
  Tensor targets;  // (count, 1, H, W), strictly positive
};

SyntheticTask gen_task(std::uint64_t seed, int count, int height, int width);

// Samples [first, first + count) as a task of their own.
SyntheticTask subset(const SyntheticTask& task, int first, int count);

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  int epochs = 30;
  int batch_size = 16;
  double learning_rate = 7e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int decay_start = 10;    // first epoch (0-based) at the reduced rate
  int decay_every = 5;     // epochs per reduction step
  double decay_fraction = 0.05;

  bool operator==(const TrainConfig&) const = default;
};

void validate_train_config(const TrainConfig& config);

double learning_rate_at(const TrainConfig& config, int epoch);

struct TrainResult {
  ParameterStore params;
  double initial_loss = 0.0;          // mean squared error before any update
  std::vector<double> loss_history;   // mean training loss of every epoch
};

// Adam on mean squared error. Deterministic in (net params, task, config, seed).
// Throws TrainingError carrying the epoch on a non-finite loss.
TrainResult train(const NetworkInstance& net, const SyntheticTask& task, const TrainConfig& config,
                  std::uint64_t seed);

double mean_squared_error(const Tensor& pred, const Tensor& target);

// ---------------------------------------------------------------------------
// Objective

inline constexpr double kPredictionFloor = 1e-3;
inline constexpr double kDeltaThreshold = 1.25;

// Fraction of pixels with max(pred/target, target/pred) < 1.25, after
// clamping predictions to kPredictionFloor.
double accuracy(const Tensor& pred, const Tensor& target);

struct ValidationGrade {
  double grade = 0.0;
  double accuracy = 0.0;
  std::uint64_t params = 0;
  double target_params = 0.0;
  double alpha = 0.0;
  int r = 0;
};

ValidationGrade grade(double accuracy, std::uint64_t params, double target_params, double alpha);

struct Reward {
  double value = 0.0;
  bool fallback = false;  // parent score unusable; value is the raw child score
};

inline constexpr double kParentScoreTolerance = 1e-9;

Reward reward(double score_parent, double score_child, std::uint64_t params_child,
              double target_params, double alpha);

// ---------------------------------------------------------------------------
// Candidate evaluation

struct EvalSettings {
  Resolution input{16, 16, 3};
  int task_samples = 80;
  double validation_fraction = 0.2;
  TrainConfig train;
  double target_params = 2e6;
  double alpha = 0.6;
  std::uint64_t master_seed = 0;
};

struct EvalResult {
  GenomeHash hash;
  ValidationGrade grade;
  int epochs = 0;
  double wall_seconds = 0.0;
};

// Seeds of a candidate are pure functions of (master seed, genome hash).
std::uint64_t init_seed_for(std::uint64_t master_seed, const GenomeHash& hash);
std::uint64_t train_seed_for(std::uint64_t master_seed, const GenomeHash& hash);
std::uint64_t task_seed_for(std::uint64_t master_seed);

// Trains and grades genomes on a shared synthetic task. Results are memoized
// by hash; evaluate() is safe to call from several threads.
class Evaluator {
 public:
  explicit Evaluator(EvalSettings settings);

  const EvalSettings& settings() const { return settings_; }
  const SyntheticTask& train_split() const { return train_; }
  const SyntheticTask& validation_split() const { return validation_; }

  EvalResult evaluate(const ArchitectureGenome& genome);

  // Trains without touching the cache and returns the trained parameters too.
  std::pair<EvalResult, ParameterStore> train_and_grade(const ArchitectureGenome& genome) const;

  std::optional<EvalResult> cached(const GenomeHash& hash) const;

 private:
  EvalSettings settings_;
  SyntheticTask train_;
  SyntheticTask validation_;
  mutable std::mutex mutex_;
  std::unordered_map<GenomeHash, EvalResult> cache_;
};

}  // namespace tabunas
