#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tabunas {

// NCHW extent. Parameter tensors reuse it: conv weights are
// (out, in/groups, k, k) and biases (out, 1, 1, 1).
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t size() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  bool operator==(const Shape&) const = default;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0) : shape_(shape), data_(shape.size(), fill) {}
  Tensor(Shape shape, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& at(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
  double at(int n, int c, int h, int w) const { return data_[index(n, c, h, w)]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Pointer to the (n, c) plane.
  double* plane(int n, int c) { return data_.data() + plane_offset(n, c); }
  const double* plane(int n, int c) const { return data_.data() + plane_offset(n, c); }

  // Copies batch elements [first, first + count).
  Tensor slice(int first, int count) const;

  bool all_finite() const;
  bool operator==(const Tensor&) const = default;

 private:
  std::size_t plane_offset(int n, int c) const {
    return (static_cast<std::size_t>(n) * shape_.c + c) * shape_.plane();
  }
  std::size_t index(int n, int c, int h, int w) const {
    return plane_offset(n, c) + static_cast<std::size_t>(h) * shape_.w + w;
  }

  Shape shape_;
  std::vector<double> data_;
};

// Primitive operations with their reverse-mode derivatives. Every backward
// takes the upstream gradient `dy` and accumulates into the gradient outputs
// (callers zero them first).
namespace ops {

// Grouped 2-D convolution with zero "same" padding k/2. groups == 1 is a dense
// convolution, groups == in_channels a depthwise one.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int groups);
void conv2d_backward(const Tensor& x, const Tensor& weight, int stride, int groups,
                     const Tensor& dy, Tensor& dx, Tensor& dweight, Tensor& dbias);

Tensor relu(const Tensor& x);
void relu_backward(const Tensor& x, const Tensor& dy, Tensor& dx);

Tensor sigmoid(const Tensor& x);
void sigmoid_backward(const Tensor& y, const Tensor& dy, Tensor& dx);

Tensor global_avg_pool(const Tensor& x);
void global_avg_pool_backward(const Tensor& dy, Tensor& dx);

// y[n,c,:,:] = x[n,c,:,:] * gate[n,c,0,0]
Tensor channel_scale(const Tensor& x, const Tensor& gate);
void channel_scale_backward(const Tensor& x, const Tensor& gate, const Tensor& dy, Tensor& dx,
                            Tensor& dgate);

Tensor add(const Tensor& a, const Tensor& b);
void add_backward(const Tensor& dy, Tensor& da, Tensor& db);

// a + b with b's channels aligned to a's: missing channels count as zero and
// surplus channels of b are dropped.
Tensor align_add(const Tensor& a, const Tensor& b);
void align_add_backward(const Tensor& dy, Tensor& da, Tensor& db);

// Nearest-neighbour 2x spatial upsampling.
Tensor upsample2x(const Tensor& x);
void upsample2x_backward(const Tensor& dy, Tensor& dx);

}  // namespace ops
}  // namespace tabunas
