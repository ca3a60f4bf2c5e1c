#include "tabunas/evaluator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "tabunas/errors.hpp"
#include "tabunas/rng.hpp"

namespace tabunas {

// ---------------------------------------------------------------------------
// Scenes

Ray pixel_ray(int row, int col, int height, int width) {
  const double x = ((col + 0.5) / width * 2.0 - 1.0) * kTanHalfFov;
  const double y = ((row + 0.5) / height * 2.0 - 1.0) * kTanHalfFov;
  return {x, y, 1.0};
}

namespace {

constexpr double kLight[3] = {-0.408248290463863, -0.408248290463863, -0.816496580927726};

double shade(double nx, double ny, double nz, double albedo) {
  const double lambert = -(nx * kLight[0] + ny * kLight[1] + nz * kLight[2]);
  return 0.1 + albedo * std::max(0.0, lambert);
}

}  // namespace

void render_scene(const Scene& scene, int height, int width, double* input, double* depth) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  const ScenePlane& p = scene.plane;
  const double pn = std::sqrt(p.nx * p.nx + p.ny * p.ny + p.nz * p.nz);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const Ray ray = pixel_ray(r, c, height, width);
      double best = kMaxDepth;
      // Plane normals face the camera for shading.
      double nx = -p.nx / pn, ny = -p.ny / pn, nz = -p.nz / pn;
      double albedo = p.albedo;
      const double denom = p.nx * ray.x + p.ny * ray.y + p.nz * ray.z;
      if (denom > 0.0) best = p.d / denom;
      for (const SceneSphere& s : scene.spheres) {
        const double a = ray.x * ray.x + ray.y * ray.y + ray.z * ray.z;
        const double b = ray.x * s.cx + ray.y * s.cy + ray.z * s.cz;
        const double cc = s.cx * s.cx + s.cy * s.cy + s.cz * s.cz - s.radius * s.radius;
        const double disc = b * b - a * cc;
        if (disc < 0.0) continue;
        const double t = (b - std::sqrt(disc)) / a;
        if (t > 0.0 && t < best) {
          best = t;
          nx = (t * ray.x - s.cx) / s.radius;
          ny = (t * ray.y - s.cy) / s.radius;
          nz = (t * ray.z - s.cz) / s.radius;
          albedo = s.albedo;
        }
      }
      const double z = std::clamp(best, kMinDepth, kMaxDepth);
      const std::size_t i = static_cast<std::size_t>(r) * width + c;
      depth[i] = z;
      input[i] = shade(nx, ny, nz, albedo);
      input[plane + i] = std::exp(-z / 3.0);
      input[2 * plane + i] = albedo;
    }
  }
}

Scene random_scene(std::uint64_t seed) {
  Rng rng(seed);
  Scene scene;
  scene.plane.nx = rng.uniform(-0.5, 0.5);
  scene.plane.ny = rng.uniform(-0.5, 0.5);
  scene.plane.nz = 1.0;
  scene.plane.d = rng.uniform(2.5, 6.0);
  scene.plane.albedo = rng.uniform(0.3, 0.9);
  const std::size_t spheres = rng.index(4);
  for (std::size_t i = 0; i < spheres; ++i) {
    SceneSphere s;
    s.cz = rng.uniform(1.5, 4.0);
    s.cx = rng.uniform(-0.5, 0.5) * s.cz * kTanHalfFov;
    s.cy = rng.uniform(-0.5, 0.5) * s.cz * kTanHalfFov;
    s.radius = rng.uniform(0.25, 0.7);
    s.albedo = rng.uniform(0.3, 0.9);
    scene.spheres.push_back(s);
  }
  return scene;
}

SyntheticTask gen_task(std::uint64_t seed, int count, int height, int width) {
  if (count < 1) throw InvalidConfig("task needs at least one sample");
  if (height < 1 || width < 1) throw InvalidConfig("task resolution must be positive");
  SyntheticTask task;
  task.seed = seed;
  task.count = count;
  task.height = height;
  task.width = width;
  task.inputs = Tensor(Shape{count, 3, height, width});
  task.targets = Tensor(Shape{count, 1, height, width});
  for (int i = 0; i < count; ++i) {
    const Scene scene = random_scene(derive_seed(seed, static_cast<std::uint64_t>(i)));
    render_scene(scene, height, width, task.inputs.plane(i, 0), task.targets.plane(i, 0));
  }
  return task;
}

SyntheticTask subset(const SyntheticTask& task, int first, int count) {
  SyntheticTask s;
  s.seed = task.seed;
  s.count = count;
  s.height = task.height;
  s.width = task.width;
  s.inputs = task.inputs.slice(first, count);
  s.targets = task.targets.slice(first, count);
  return s;
}

// ---------------------------------------------------------------------------
// Training

void validate_train_config(const TrainConfig& c) {
  if (c.epochs < 0) throw InvalidConfig("train.epochs must be >= 0");
  if (c.batch_size < 1) throw InvalidConfig("train.batch_size must be >= 1");
  if (c.learning_rate < 0.0) throw InvalidConfig("train.learning_rate must be >= 0");
  if (!(c.beta1 > 0.0 && c.beta1 < 1.0) || !(c.beta2 > 0.0 && c.beta2 < 1.0)) {
    throw InvalidConfig("train.beta1/beta2 must lie in (0, 1)");
  }
  if (!(c.epsilon > 0.0)) throw InvalidConfig("train.epsilon must be positive");
  if (c.decay_start < 0 || c.decay_every < 1) {
    throw InvalidConfig("train.decay_start must be >= 0 and decay_every >= 1");
  }
  if (!(c.decay_fraction > 0.0 && c.decay_fraction < 1.0)) {
    throw InvalidConfig("train.decay_fraction must lie in (0, 1)");
  }
}

double learning_rate_at(const TrainConfig& c, int epoch) {
  if (epoch < c.decay_start) return c.learning_rate;
  const int steps = (epoch - c.decay_start) / c.decay_every + 1;
  return c.learning_rate * std::pow(1.0 - c.decay_fraction, steps);
}

double mean_squared_error(const Tensor& pred, const Tensor& target) {
  if (!(pred.shape() == target.shape())) throw ShapeError("mse: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

namespace {

Tensor gather(const Tensor& src, const std::vector<int>& idx, std::size_t first, std::size_t count) {
  Shape s = src.shape();
  s.n = static_cast<int>(count);
  Tensor out(s);
  const std::size_t per = static_cast<std::size_t>(s.c) * s.plane();
  for (std::size_t i = 0; i < count; ++i) {
    std::copy_n(src.data() + static_cast<std::size_t>(idx[first + i]) * per, per, out.data() + i * per);
  }
  return out;
}

double dataset_loss(const NetworkInstance& net, const ParameterStore& params,
                    const SyntheticTask& task, int chunk) {
  double total = 0.0;
  for (int first = 0; first < task.count; first += chunk) {
    const int n = std::min(chunk, task.count - first);
    const auto out = forward(net, params, task.inputs.slice(first, n), false).output;
    total += mean_squared_error(out, task.targets.slice(first, n)) * n;
  }
  return total / task.count;
}

}  // namespace

TrainResult train(const NetworkInstance& net, const SyntheticTask& task, const TrainConfig& config,
                  std::uint64_t seed) {
  validate_train_config(config);
  if (task.count < 1) throw InvalidConfig("cannot train on an empty task");
  if (net.params.tensors.size() != net.param_specs.size()) {
    throw InvalidConfig("network parameters are not initialized");
  }
  TrainResult result;
  result.params = net.params;
  ParameterStore m = net.params.zeros_like();
  ParameterStore v = net.params.zeros_like();
  result.initial_loss = dataset_loss(net, result.params, task, config.batch_size);
  if (!std::isfinite(result.initial_loss)) throw TrainingError(0, "non-finite initial loss");

  std::vector<int> order(task.count);
  std::iota(order.begin(), order.end(), 0);
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    const double lr = learning_rate_at(config, epoch);
    double epoch_loss = 0.0;
    for (int first = 0; first < task.count; first += config.batch_size) {
      const int n = std::min(config.batch_size, task.count - first);
      const Tensor x = gather(task.inputs, order, first, n);
      const Tensor y = gather(task.targets, order, first, n);
      Tape tape;
      try {
        tape = run_forward(net, result.params, x, false);
      } catch (const NumericError& e) {
        throw TrainingError(epoch, std::string("diverged in epoch ") + std::to_string(epoch) + ": " + e.what());
      }
      const Tensor& out = tape.output(net);
      const double loss = mean_squared_error(out, y);
      if (!std::isfinite(loss)) {
        throw TrainingError(epoch, "non-finite loss in epoch " + std::to_string(epoch));
      }
      epoch_loss += loss * n;
      Tensor dloss(out.shape());
      const double scale = 2.0 / static_cast<double>(out.size());
      for (std::size_t i = 0; i < out.size(); ++i) dloss[i] = scale * (out[i] - y[i]);
      ParameterStore grads;
      try {
        grads = backward(net, result.params, tape, dloss);
      } catch (const NumericError& e) {
        throw TrainingError(epoch, std::string("diverged in epoch ") + std::to_string(epoch) + ": " + e.what());
      }
      ++step;
      const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      for (std::size_t t = 0; t < grads.tensors.size(); ++t) {
        Tensor& p = result.params.tensors[t];
        Tensor& mt = m.tensors[t];
        Tensor& vt = v.tensors[t];
        const Tensor& g = grads.tensors[t];
        for (std::size_t i = 0; i < p.size(); ++i) {
          mt[i] = config.beta1 * mt[i] + (1.0 - config.beta1) * g[i];
          vt[i] = config.beta2 * vt[i] + (1.0 - config.beta2) * g[i] * g[i];
          p[i] -= lr * (mt[i] / bc1) / (std::sqrt(vt[i] / bc2) + config.epsilon);
        }
      }
    }
    result.loss_history.push_back(epoch_loss / task.count);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Objective

double accuracy(const Tensor& pred, const Tensor& target) {
  if (!(pred.shape() == target.shape())) throw ShapeError("accuracy: shape mismatch");
  if (pred.size() == 0) throw ShapeError("accuracy: empty tensors");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::max(pred[i], kPredictionFloor);
    const double t = std::max(target[i], kPredictionFloor);
    if (std::max(p / t, t / p) < kDeltaThreshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

ValidationGrade grade(double acc, std::uint64_t params, double target_params, double alpha) {
  ValidationGrade g;
  g.accuracy = acc;
  g.params = params;
  g.target_params = target_params;
  g.alpha = alpha;
  g.r = static_cast<double>(params) <= target_params ? 0 : 1;
  const double compact = g.r == 0 ? 1.0 : target_params / static_cast<double>(params);
  g.grade = alpha * acc + (1.0 - alpha) * compact;
  return g;
}

Reward reward(double score_parent, double score_child, std::uint64_t params_child,
              double target_params, double alpha) {
  if (!std::isfinite(score_parent) || score_parent <= kParentScoreTolerance) {
    return {score_child, true};
  }
  const int r = static_cast<double>(params_child) <= target_params ? 0 : 1;
  const double compact = r == 0 ? 1.0 : target_params / static_cast<double>(params_child);
  return {alpha * (score_child / score_parent) + (1.0 - alpha) * compact, false};
}

// ---------------------------------------------------------------------------
// Evaluator

std::uint64_t init_seed_for(std::uint64_t master_seed, const GenomeHash& hash) {
  return derive_seed(derive_seed(master_seed, "init"), hash.prefix64());
}

std::uint64_t train_seed_for(std::uint64_t master_seed, const GenomeHash& hash) {
  return derive_seed(derive_seed(master_seed, "train"), hash.prefix64());
}

std::uint64_t task_seed_for(std::uint64_t master_seed) { return derive_seed(master_seed, "task"); }

Evaluator::Evaluator(EvalSettings settings) : settings_(std::move(settings)) {
  validate_train_config(settings_.train);
  if (settings_.task_samples < 2) throw InvalidConfig("task_samples must be >= 2");
  if (!(settings_.validation_fraction > 0.0 && settings_.validation_fraction < 1.0)) {
    throw InvalidConfig("validation_fraction must lie in (0, 1)");
  }
  const SyntheticTask all = gen_task(task_seed_for(settings_.master_seed), settings_.task_samples,
                                     settings_.input.height, settings_.input.width);
  const int val = std::clamp(
      static_cast<int>(std::lround(settings_.task_samples * settings_.validation_fraction)), 1,
      settings_.task_samples - 1);
  train_ = subset(all, 0, settings_.task_samples - val);
  validation_ = subset(all, settings_.task_samples - val, val);
}

std::pair<EvalResult, ParameterStore> Evaluator::train_and_grade(
    const ArchitectureGenome& genome) const {
  const auto start = std::chrono::steady_clock::now();
  EvalResult r;
  r.hash = canonical_hash(genome);
  NetworkInstance net = build_network(genome, init_seed_for(settings_.master_seed, r.hash));
  TrainResult trained = train(net, train_, settings_.train, train_seed_for(settings_.master_seed, r.hash));
  Tensor pred(validation_.targets.shape());
  constexpr int kChunk = 16;
  for (int first = 0; first < validation_.count; first += kChunk) {
    const int n = std::min(kChunk, validation_.count - first);
    const auto out = forward(net, trained.params, validation_.inputs.slice(first, n), false).output;
    std::copy(out.values().begin(), out.values().end(),
              pred.data() + static_cast<std::size_t>(first) * out.shape().plane());
  }
  const double acc = accuracy(pred, validation_.targets);
  r.grade = grade(acc, param_count(genome), settings_.target_params, settings_.alpha);
  r.epochs = settings_.train.epochs;
  r.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {r, std::move(trained.params)};
}

EvalResult Evaluator::evaluate(const ArchitectureGenome& genome) {
  const GenomeHash h = canonical_hash(genome);
  if (auto hit = cached(h)) return *hit;
  EvalResult r = train_and_grade(genome).first;
  std::lock_guard lock(mutex_);
  return cache_.emplace(h, r).first->second;
}

std::optional<EvalResult> Evaluator::cached(const GenomeHash& hash) const {
  std::lock_guard lock(mutex_);
  auto it = cache_.find(hash);
  if (it == cache_.end()) return std::nullopt;
  return it->second;
}

}  // namespace tabunas
