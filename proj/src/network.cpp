#include "tabunas/network.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include "tabunas/errors.hpp"
#include "tabunas/rng.hpp"

namespace tabunas {

std::string to_string(OpKind kind) {
  switch (kind) {
    case OpKind::Conv2d: return "conv2d";
    case OpKind::Relu: return "relu";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::GlobalAvgPool: return "global_avg_pool";
    case OpKind::ChannelScale: return "channel_scale";
    case OpKind::Add: return "add";
    case OpKind::AlignAdd: return "align_add";
    case OpKind::Upsample2x: return "upsample2x";
  }
  return "?";
}

std::uint64_t ParameterStore::element_count() const {
  std::uint64_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

ParameterStore ParameterStore::zeros_like() const {
  ParameterStore z;
  z.names = names;
  z.tensors.reserve(tensors.size());
  for (const auto& t : tensors) z.tensors.emplace_back(t.shape());
  return z;
}

// ---------------------------------------------------------------------------
// Compilation

namespace {

class GraphBuilder {
 public:
  explicit GraphBuilder(NetworkInstance& net) : net_(net) {}

  int input(Shape s) {
    s.n = 1;
    net_.input_shape = s;
    net_.value_shapes.push_back(s);
    return 0;
  }

  int conv(int x, int out_channels, int k, int stride, bool depthwise, const std::string& name) {
    const Shape in = shape(x);
    const int groups = depthwise ? in.c : 1;
    const int cout = depthwise ? in.c : out_channels;
    const int w = param(name + ".weight", Shape{cout, in.c / groups, k, k}, (in.c / groups) * k * k,
                        false);
    const int b = param(name + ".bias", Shape{cout, 1, 1, 1}, 1, true);
    const int pad = k / 2;
    Shape out{1, cout, (in.h + 2 * pad - k) / stride + 1, (in.w + 2 * pad - k) / stride + 1};
    Op op;
    op.kind = OpKind::Conv2d;
    op.input0 = x;
    op.weight = w;
    op.bias = b;
    op.stride = stride;
    op.groups = groups;
    op.label = name;
    return emit(op, out);
  }

  int unary(OpKind kind, int x, const std::string& label) {
    Shape out = shape(x);
    if (kind == OpKind::GlobalAvgPool) out.h = out.w = 1;
    if (kind == OpKind::Upsample2x) {
      out.h *= 2;
      out.w *= 2;
    }
    if (kind == OpKind::Relu) net_.activation_units += out.size();
    Op op;
    op.kind = kind;
    op.input0 = x;
    op.label = label;
    return emit(op, out);
  }

  int binary(OpKind kind, int a, int b, const std::string& label) {
    Op op;
    op.kind = kind;
    op.input0 = a;
    op.input1 = b;
    op.label = label;
    return emit(op, shape(a));
  }

  int conv_relu(int x, int out_channels, int k, int stride, bool depthwise, const std::string& name) {
    return unary(OpKind::Relu, conv(x, out_channels, k, stride, depthwise, name), name + ".relu");
  }

  const Shape& shape(int v) const { return net_.value_shapes[v]; }

 private:
  int param(std::string name, Shape s, int fan_in, bool is_bias) {
    net_.param_specs.push_back({std::move(name), s, fan_in, is_bias});
    return static_cast<int>(net_.param_specs.size()) - 1;
  }

  int emit(Op op, Shape out) {
    net_.value_shapes.push_back(out);
    op.output = static_cast<int>(net_.value_shapes.size()) - 1;
    net_.ops.push_back(std::move(op));
    return net_.ops.back().output;
  }

  NetworkInstance& net_;
};

int build_layer(GraphBuilder& gb, int x, const LayerSpec& layer, int stride, int expansion,
                const std::string& name) {
  const int cin = gb.shape(x).c;
  int h = x;
  if (layer.se_ratio != SeRatio::None) {
    const int hidden = se_hidden_channels(layer.se_ratio, cin);
    int s = gb.unary(OpKind::GlobalAvgPool, x, name + ".se.pool");
    s = gb.conv_relu(s, hidden, 1, 1, false, name + ".se.reduce");
    s = gb.conv(s, cin, 1, 1, false, name + ".se.expand");
    s = gb.unary(OpKind::Sigmoid, s, name + ".se.gate");
    h = gb.binary(OpKind::ChannelScale, x, s, name + ".se.scale");
  }
  const int k = layer.kernel_size;
  const int cout = layer.out_channels;
  int y = -1;
  switch (layer.conv_op) {
    case ConvOp::Vanilla2D:
      y = gb.conv_relu(h, cout, k, stride, false, name + ".conv");
      break;
    case ConvOp::Depthwise:
      y = gb.conv_relu(h, cin, k, stride, true, name + ".dw");
      y = gb.conv_relu(y, cout, 1, 1, false, name + ".pw");
      break;
    case ConvOp::InvertedBottleneck:
      y = gb.conv_relu(h, cin * expansion, 1, 1, false, name + ".expand");
      y = gb.conv_relu(y, 0, k, stride, true, name + ".dw");
      y = gb.conv_relu(y, cout, 1, 1, false, name + ".project");
      break;
  }
  if (layer.skip == Skip::Residual) {
    if (!(gb.shape(y) == gb.shape(x))) throw ShapeError(name + ": residual shape mismatch");
    y = gb.binary(OpKind::Add, y, x, name + ".residual");
  }
  return y;
}

int build_block(GraphBuilder& gb, int x, const BlockSpec& block, int expansion) {
  const std::string name = "s" + std::to_string(block.scale) + ".b" + std::to_string(block.index);
  if (block.kind == BlockKind::Upsample) x = gb.unary(OpKind::Upsample2x, x, name + ".upsample");
  const int first_stride = block.kind == BlockKind::Downsample ? 2 : 1;
  for (int r = 0; r < block.repeats; ++r) {
    x = build_layer(gb, x, block.layer, r == 0 ? first_stride : 1, expansion,
                    name + ".l" + std::to_string(r + 1));
  }
  return x;
}

}  // namespace

NetworkInstance compile(const ArchitectureGenome& genome, Shape input_shape) {
  const auto report = validate(genome);
  if (!report.ok()) throw InvalidGenome(report.describe());
  const int S = genome.num_scales;
  const int div = 1 << (S - 1);
  if (input_shape.h < 1 || input_shape.w < 1 || input_shape.h % div != 0 ||
      input_shape.w % div != 0) {
    throw ShapeError("input spatial size " + std::to_string(input_shape.h) + "x" +
                     std::to_string(input_shape.w) + " is not divisible by " +
                     std::to_string(div));
  }
  if (input_shape.c != genome.input.channels) {
    throw ShapeError("input has " + std::to_string(input_shape.c) + " channels, genome expects " +
                     std::to_string(genome.input.channels));
  }
  NetworkInstance net;
  GraphBuilder gb(net);
  auto block = [&](int scale, int index) -> const BlockSpec& {
    return genome.blocks[slot_position(scale, index)];
  };
  const int e = genome.expansion;

  std::vector<int> encoded(S + 1, -1);
  int v = gb.input(input_shape);
  for (int s = 1; s <= S; ++s) {
    if (s >= 2) v = build_block(gb, encoded[s - 1], block(s, 6), e);
    v = build_block(gb, v, block(s, 1), e);
    v = build_block(gb, v, block(s, 2), e);
    encoded[s] = v;
  }
  int coarse = -1;
  for (int s = S; s >= 1; --s) {
    v = encoded[s];
    if (coarse >= 0) v = gb.binary(OpKind::AlignAdd, v, coarse, "s" + std::to_string(s) + ".fuse");
    v = build_block(gb, v, block(s, 3), e);
    v = build_block(gb, v, block(s, 4), e);
    v = build_block(gb, v, block(s, 5), e);
    if (s >= 2) coarse = build_block(gb, v, block(s, 7), e);
  }
  net.output_value = gb.conv(v, 1, 1, 1, false, "head");
  return net;
}

NetworkInstance compile(const ArchitectureGenome& genome) {
  return compile(genome, Shape{1, genome.input.channels, genome.input.height, genome.input.width});
}

ParameterStore init_params(const NetworkInstance& net, std::uint64_t seed) {
  Rng rng(seed);
  ParameterStore store;
  for (const auto& spec : net.param_specs) {
    Tensor t(spec.shape);
    if (!spec.is_bias) {
      const double stddev = std::sqrt(2.0 / static_cast<double>(spec.fan_in));
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = stddev * rng.normal();
    }
    store.names.push_back(spec.name);
    store.tensors.push_back(std::move(t));
  }
  return store;
}

NetworkInstance build_network(const ArchitectureGenome& genome, std::uint64_t seed) {
  NetworkInstance net = compile(genome);
  net.params = init_params(net, seed);
  return net;
}

// ---------------------------------------------------------------------------
// Execution

namespace {

void check_batch(const NetworkInstance& net, const ParameterStore& params, const Tensor& batch) {
  const Shape& s = batch.shape();
  if (s.n < 1 || s.c != net.input_shape.c || s.h != net.input_shape.h || s.w != net.input_shape.w) {
    throw ShapeError("batch shape (" + std::to_string(s.n) + "," + std::to_string(s.c) + "," +
                     std::to_string(s.h) + "," + std::to_string(s.w) +
                     ") does not match network input (N," + std::to_string(net.input_shape.c) +
                     "," + std::to_string(net.input_shape.h) + "," +
                     std::to_string(net.input_shape.w) + ")");
  }
  if (params.tensors.size() != net.param_specs.size()) {
    throw ShapeError("parameter store does not match the network (uninitialized?)");
  }
}

void append_bits(const Tensor& pre, std::vector<ActivationTrace>& traces) {
  const int batch = pre.shape().n;
  const std::size_t per = pre.size() / static_cast<std::size_t>(batch);
  for (int n = 0; n < batch; ++n) {
    ActivationTrace& t = traces[n];
    const double* p = pre.data() + static_cast<std::size_t>(n) * per;
    for (std::size_t i = 0; i < per; ++i, ++t.bits) {
      if (t.bits % 64 == 0) t.words.push_back(0);
      if (p[i] > 0.0) t.words.back() |= std::uint64_t{1} << (t.bits % 64);
    }
  }
}

}  // namespace

Tape run_forward(const NetworkInstance& net, const ParameterStore& params, const Tensor& batch,
                 bool trace) {
  check_batch(net, params, batch);
  Tape tape;
  tape.values.resize(net.value_shapes.size());
  tape.values[0] = batch;
  if (trace) tape.traces.resize(batch.shape().n);
  static const Tensor kNoBias;
  for (const Op& op : net.ops) {
    const Tensor& a = tape.values[op.input0];
    Tensor out;
    switch (op.kind) {
      case OpKind::Conv2d:
        out = ops::conv2d(a, params.tensors[op.weight],
                          op.bias >= 0 ? params.tensors[op.bias] : kNoBias, op.stride, op.groups);
        break;
      case OpKind::Relu:
        if (trace) append_bits(a, tape.traces);
        out = ops::relu(a);
        break;
      case OpKind::Sigmoid: out = ops::sigmoid(a); break;
      case OpKind::GlobalAvgPool: out = ops::global_avg_pool(a); break;
      case OpKind::ChannelScale: out = ops::channel_scale(a, tape.values[op.input1]); break;
      case OpKind::Add: out = ops::add(a, tape.values[op.input1]); break;
      case OpKind::AlignAdd: out = ops::align_add(a, tape.values[op.input1]); break;
      case OpKind::Upsample2x: out = ops::upsample2x(a); break;
    }
    if (!out.all_finite()) throw NumericError("non-finite value after " + to_string(op.kind) + " " + op.label);
    tape.values[op.output] = std::move(out);
  }
  return tape;
}

ForwardResult forward(const NetworkInstance& net, const ParameterStore& params,
                      const Tensor& batch, bool trace) {
  Tape tape = run_forward(net, params, batch, trace);
  return {std::move(tape.values[net.output_value]), std::move(tape.traces)};
}

ForwardResult forward(const NetworkInstance& net, const Tensor& batch, bool trace) {
  return forward(net, net.params, batch, trace);
}

ParameterStore backward(const NetworkInstance& net, const ParameterStore& params,
                        const Tape& tape, const Tensor& loss_grad) {
  if (!(loss_grad.shape() == tape.output(net).shape())) {
    throw ShapeError("loss gradient shape does not match network output");
  }
  ParameterStore grads = params.zeros_like();
  std::vector<Tensor> dv(tape.values.size());
  dv[net.output_value] = loss_grad;
  auto grad_of = [&](int v) -> Tensor& {
    if (dv[v].size() == 0) dv[v] = Tensor(tape.values[v].shape());
    return dv[v];
  };
  Tensor no_bias_grad;
  for (auto it = net.ops.rbegin(); it != net.ops.rend(); ++it) {
    const Op& op = *it;
    if (dv[op.output].size() == 0) continue;  // output does not reach the loss
    const Tensor dy = std::move(dv[op.output]);
    dv[op.output] = Tensor();
    const Tensor& a = tape.values[op.input0];
    switch (op.kind) {
      case OpKind::Conv2d:
        ops::conv2d_backward(a, params.tensors[op.weight], op.stride, op.groups, dy,
                             grad_of(op.input0), grads.tensors[op.weight],
                             op.bias >= 0 ? grads.tensors[op.bias] : no_bias_grad);
        break;
      case OpKind::Relu: ops::relu_backward(a, dy, grad_of(op.input0)); break;
      case OpKind::Sigmoid: ops::sigmoid_backward(tape.values[op.output], dy, grad_of(op.input0)); break;
      case OpKind::GlobalAvgPool: ops::global_avg_pool_backward(dy, grad_of(op.input0)); break;
      case OpKind::ChannelScale:
        ops::channel_scale_backward(a, tape.values[op.input1], dy, grad_of(op.input0),
                                    grad_of(op.input1));
        break;
      case OpKind::Add: ops::add_backward(dy, grad_of(op.input0), grad_of(op.input1)); break;
      case OpKind::AlignAdd: ops::align_add_backward(dy, grad_of(op.input0), grad_of(op.input1)); break;
      case OpKind::Upsample2x: ops::upsample2x_backward(dy, grad_of(op.input0)); break;
    }
  }
  for (std::size_t i = 0; i < grads.tensors.size(); ++i) {
    if (!grads.tensors[i].all_finite()) throw NumericError("non-finite gradient for " + grads.names[i]);
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Serialization

void save_parameters(const ParameterStore& store, const std::string& bin_path,
                     const std::string& manifest_path) {
  std::ofstream bin(bin_path, std::ios::binary);
  std::ofstream manifest(manifest_path);
  if (!bin || !manifest) throw IoError("cannot write parameter store to " + bin_path);
  manifest << "# tabunas parameter store: little-endian float64\n";
  std::uint64_t offset = 0;
  for (std::size_t i = 0; i < store.tensors.size(); ++i) {
    const Tensor& t = store.tensors[i];
    const Shape& s = t.shape();
    manifest << store.names[i] << ' ' << s.n << ' ' << s.c << ' ' << s.h << ' ' << s.w << ' '
             << offset << '\n';
    for (double v : t.values()) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      char bytes[8];
      for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xff);
      bin.write(bytes, 8);
    }
    offset += 8 * t.size();
  }
  if (!bin || !manifest) throw IoError("failed writing parameter store " + bin_path);
}

ParameterStore load_parameters(const std::string& bin_path, const std::string& manifest_path) {
  std::ifstream bin(bin_path, std::ios::binary);
  std::ifstream manifest(manifest_path);
  if (!bin || !manifest) throw IoError("cannot open parameter store " + bin_path);
  ParameterStore store;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream in(line);
    std::string name;
    Shape s;
    std::uint64_t offset = 0;
    if (!(in >> name >> s.n >> s.c >> s.h >> s.w >> offset)) {
      throw ParseError("bad manifest line: " + line);
    }
    bin.seekg(static_cast<std::streamoff>(offset));
    Tensor t(s);
    for (std::size_t i = 0; i < t.size(); ++i) {
      unsigned char bytes[8];
      if (!bin.read(reinterpret_cast<char*>(bytes), 8)) throw IoError("truncated parameter store");
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
      t[i] = std::bit_cast<double>(bits);
    }
    store.names.push_back(name);
    store.tensors.push_back(std::move(t));
  }
  return store;
}

}  // namespace tabunas
