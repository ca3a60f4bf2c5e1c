#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tabunas/genome.hpp"
#include "tabunas/tensor.hpp"

namespace tabunas {

enum class OpKind { Conv2d, Relu, Sigmoid, GlobalAvgPool, ChannelScale, Add, AlignAdd, Upsample2x };

std::string to_string(OpKind kind);

// One primitive in the compiled graph. Values are numbered; value 0 is the
// network input. Parameter indices refer to NetworkInstance::param_specs.
struct Op {
  OpKind kind = OpKind::Relu;
  int input0 = -1;
  int input1 = -1;
  int output = -1;
  int weight = -1;
  int bias = -1;
  int stride = 1;
  int groups = 1;
  std::string label;
};

struct ParamSpec {
  std::string name;
  Shape shape;
  int fan_in = 1;
  bool is_bias = false;
};

// Named learnable tensors, in the order of NetworkInstance::param_specs.
struct ParameterStore {
  std::vector<std::string> names;
  std::vector<Tensor> tensors;

  std::uint64_t element_count() const;
  // Same names and shapes, every value zero.
  ParameterStore zeros_like() const;
  bool operator==(const ParameterStore&) const = default;
};

// Packed rectifier indicator bits for one input: bit i is 1 iff the i-th
// rectifier's pre-activation is strictly positive.
struct ActivationTrace {
  std::vector<std::uint64_t> words;
  std::size_t bits = 0;

  bool bit(std::size_t i) const { return (words[i / 64] >> (i % 64)) & 1U; }
  bool operator==(const ActivationTrace&) const = default;
};

struct NetworkInstance {
  std::vector<Op> ops;  // topological order
  std::vector<Shape> value_shapes;  // per-sample shapes (n == 1)
  std::vector<ParamSpec> param_specs;
  ParameterStore params;  // empty until initialized
  std::uint64_t activation_units = 0;  // N_A
  Shape input_shape;  // n == 1
  int output_value = -1;
};

// Builds the primitive graph of a genome. input_shape.n is ignored. Throws
// InvalidGenome for invalid genomes and ShapeError when the spatial size is
// not divisible by 2^(S-1) or the channel count disagrees with the genome.
NetworkInstance compile(const ArchitectureGenome& genome, Shape input_shape);
NetworkInstance compile(const ArchitectureGenome& genome);

// Weights ~ Normal(0, 2 / fan_in), biases zero.
ParameterStore init_params(const NetworkInstance& net, std::uint64_t seed);

// compile + init_params, storing the parameters in the instance.
NetworkInstance build_network(const ArchitectureGenome& genome, std::uint64_t seed);

// Every intermediate value of one forward pass; the input to backward.
struct Tape {
  std::vector<Tensor> values;
  std::vector<ActivationTrace> traces;

  const Tensor& output(const NetworkInstance& net) const { return values[net.output_value]; }
};

Tape run_forward(const NetworkInstance& net, const ParameterStore& params, const Tensor& batch,
                 bool trace);

struct ForwardResult {
  Tensor output;
  std::vector<ActivationTrace> traces;  // one per batch element when requested
};

ForwardResult forward(const NetworkInstance& net, const Tensor& batch, bool trace);
ForwardResult forward(const NetworkInstance& net, const ParameterStore& params,
                      const Tensor& batch, bool trace);

// Gradient of the loss with respect to every parameter, given dLoss/dOutput.
ParameterStore backward(const NetworkInstance& net, const ParameterStore& params,
                        const Tape& tape, const Tensor& loss_grad);

// Flat little-endian float64 container plus a text manifest with one line per
// tensor: "<name> <n> <c> <h> <w> <byte offset>".
void save_parameters(const ParameterStore& store, const std::string& bin_path,
                     const std::string& manifest_path);
ParameterStore load_parameters(const std::string& bin_path, const std::string& manifest_path);

}  // namespace tabunas
