#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "tmra/sampling.hpp"

namespace tmra::nn {

/// Eagerly evaluated tensor node in a reverse-mode autodiff graph.
///
/// Every primitive's backward is expressed through the same primitives, so
/// gradients are themselves differentiable graphs; grad() on a gradient gives
/// exact second derivatives (used by the WGAN gradient penalty).
class Tensor {
 public:
  struct Node;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static Tensor from(std::vector<int> dims, std::vector<double> vals, bool requires_grad = false);
  static Tensor zeros(std::vector<int> dims, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& dims() const;
  size_t numel() const;
  const std::vector<double>& values() const;
  std::vector<double>& mutable_values();  // leaves only (parameters)
  bool requires_grad() const;
  double item() const;  // single-element tensors

  Node* raw() const { return node_.get(); }

 private:
  std::shared_ptr<Node> node_;
};

struct Tensor::Node {
  std::vector<int> dims;
  std::vector<double> vals;
  bool requires_grad = false;
  bool leaf = true;
  std::vector<Tensor> parents;
  // fills `out[i]` (aligned with parents) for every i with need[i] true
  std::function<void(const Tensor& g, const std::vector<bool>& need, std::vector<Tensor>& out)>
      vjp;
};

size_t numel_of(const std::vector<int>& dims);

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor abs_val(const Tensor& a);
/// pow(max(x, floor), p); the floor keeps d/dx sqrt finite at 0.
Tensor pow_floor(const Tensor& a, double p, double floor = 1e-40);

// ---- reductions / broadcasts ----
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor broadcast_scalar(const Tensor& s, std::vector<int> dims);
/// [C,H,W] -> [1,H,W], summing over channels.
Tensor sum_channels(const Tensor& a);
/// [1,H,W] -> [C,H,W].
Tensor broadcast_channels(const Tensor& a, int channels);
/// [C,H,W] -> [C], summing over the spatial plane.
Tensor channel_sum(const Tensor& a);
/// [C] -> [C,H,W].
Tensor channel_broadcast(const Tensor& v, int h, int w);

// ---- structure ----
Tensor concat_ch(const Tensor& a, const Tensor& b);
Tensor slice_ch(const Tensor& a, int c0, int c1);
Tensor pad_ch(const Tensor& a, int before, int after);

// ---- convolution / resampling ----
/// x: [Cin,H,W], w: [Cout,Cin,kh,kw], stride 1, zero padding `pad`.
Tensor conv2d(const Tensor& x, const Tensor& w, int pad);
/// Weight gradient pairing: x: [Cin,H,W], gy: [Cout,H,W] -> [Cout,Cin,kh,kw].
Tensor conv2d_wgrad(const Tensor& x, const Tensor& gy, int kh, int kw, int pad);
/// [Cout,Cin,kh,kw] -> [Cin,Cout,kh,kw] with both kernel axes flipped.
Tensor kernel_flip_transpose(const Tensor& w);
Tensor avg_pool2(const Tensor& a);
Tensor upsample_nearest2(const Tensor& a);

// ---- Fourier (real/imag channel pairs: [re_0..re_{C-1}, im_0..im_{C-1}]) ----
/// P_Lambda F x per coil; input and output are [2C,H,W] real stacks.
Tensor kspace_project(const Tensor& x, const SamplingMask& mask);
/// F^{-1} P_Lambda k per coil; the adjoint of kspace_project.
Tensor image_from_kspace(const Tensor& k, const SamplingMask& mask);

// ---- composites ----
Tensor bias_add(const Tensor& x, const Tensor& b);
Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
/// SSoS magnitude image [1,H,W] from a [2C,H,W] real/imag stack.
Tensor ssos_t(const Tensor& x);
/// F^{-1} P F x (the aliasing operator) on a [2C,H,W] stack.
Tensor aliased_t(const Tensor& x, const SamplingMask& mask);
Tensor neg(const Tensor& a);

/// Gradients of a scalar with respect to `wrt`; the results are themselves
/// graph nodes, so they can be differentiated again.
std::vector<Tensor> grad(const Tensor& out, const std::vector<Tensor>& wrt);

}  // namespace tmra::nn
