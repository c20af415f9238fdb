#include "tmra/nn/tensor.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <unordered_map>

#include "tmra/errors.hpp"
#include "tmra/fft.hpp"

namespace tmra::nn {

namespace {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

std::shared_ptr<Tensor::Node> make_node(std::vector<int> dims, std::vector<double> vals) {
  auto n = std::make_shared<Tensor::Node>();
  n->dims = std::move(dims);
  n->vals = std::move(vals);
  return n;
}

bool any_grad(std::initializer_list<const Tensor*> ts) {
  for (const Tensor* t : ts)
    if (t->requires_grad()) return true;
  return false;
}

// Attach parents and a vjp only when the node participates in a gradient.
template <typename F>
Tensor finish(std::shared_ptr<Tensor::Node> n, std::vector<Tensor> parents, F&& vjp_fn) {
  bool rg = false;
  for (const auto& p : parents) rg = rg || p.requires_grad();
  n->requires_grad = rg;
  n->leaf = false;
  if (rg) {
    n->parents = std::move(parents);
    n->vjp = std::forward<F>(vjp_fn);
  }
  return Tensor(n);
}

void check_same_dims(const Tensor& a, const Tensor& b, const char* op) {
  if (a.dims() != b.dims()) throw contract_error(std::string(op) + ": dims mismatch");
}

std::vector<int> chw(const Tensor& t, const char* op) {
  if (t.dims().size() != 3) throw contract_error(std::string(op) + ": expected [C,H,W] tensor");
  return t.dims();
}

}  // namespace

size_t numel_of(const std::vector<int>& dims) {
  size_t n = 1;
  for (int d : dims) n *= static_cast<size_t>(d);
  return n;
}

Tensor Tensor::from(std::vector<int> dims, std::vector<double> vals, bool requires_grad) {
  if (numel_of(dims) != vals.size()) throw contract_error("Tensor::from: size mismatch");
  auto n = make_node(std::move(dims), std::move(vals));
  n->requires_grad = requires_grad;
  return Tensor(n);
}

Tensor Tensor::zeros(std::vector<int> dims, bool requires_grad) {
  const size_t n = numel_of(dims);
  return from(std::move(dims), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from({1}, {v}, requires_grad); }

const std::vector<int>& Tensor::dims() const { return node_->dims; }
size_t Tensor::numel() const { return node_->vals.size(); }
const std::vector<double>& Tensor::values() const { return node_->vals; }
std::vector<double>& Tensor::mutable_values() {
  if (!node_->leaf) throw contract_error("mutable_values: not a leaf tensor");
  return node_->vals;
}
bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
double Tensor::item() const {
  if (numel() != 1) throw contract_error("item: tensor is not a scalar");
  return node_->vals[0];
}

// ---------------------------------------------------------------- elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_dims(a, b, "add");
  std::vector<double> v(a.numel());
  for (size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] + b.values()[i];
  auto n = make_node(a.dims(), std::move(v));
  return finish(n, {a, b},
                [](const Tensor& g, const std::vector<bool>& need, std::vector<Tensor>& out) {
                  if (need[0]) out[0] = g;
                  if (need[1]) out[1] = g;
                });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_dims(a, b, "sub");
  std::vector<double> v(a.numel());
  for (size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] - b.values()[i];
  auto n = make_node(a.dims(), std::move(v));
  return finish(n, {a, b},
                [](const Tensor& g, const std::vector<bool>& need, std::vector<Tensor>& out) {
                  if (need[0]) out[0] = g;
                  if (need[1]) out[1] = scale(g, -1.0);
                });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_dims(a, b, "mul");
  std::vector<double> v(a.numel());
  for (size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] * b.values()[i];
  auto n = make_node(a.dims(), std::move(v));
  return finish(n, {a, b},
                [a, b](const Tensor& g, const std::vector<bool>& need, std::vector<Tensor>& out) {
                  if (need[0]) out[0] = mul(g, b);
                  if (need[1]) out[1] = mul(g, a);
                });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> v(a.numel());
  for (size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] * s;
  auto n = make_node(a.dims(), std::move(v));
  return finish(n, {a},
                [s](const Tensor& g, const std::vector<bool>& need, std::vector<Tensor>& out) {
                  if (need[0]) out[0] = scale(g, s);
                });
}

Tensor add_scalar(const Tensor& a, double s) {
  std::vector<double> v(a.numel());
  for (size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] + s;
  auto n = make_node(a.dims(), std::move(v));
  return finish(n, {a},
                [](const Tensor& g, const std::vector<bool>& need, std::vector<Tensor>& out) {
                  if (need[0]) out[0] = g;
                });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

namespace {
// relu / leaky_relu / abs share the "multiply by a constant mask" backward;
// the mask is a plain constant, its own derivative is zero a.e.
Tensor masked_linear(const Tensor& a, std::vector<double> vals, std::vector<double> mask_vals) {
  auto n = make_node(a.dims(), std::move(vals));
  Tensor mask = Tensor::from(a.dims(), std::move(mask_vals));
  return finish(n, {a},
                [mask](const Tensor& g, const std::vector<bool>& need, std::vector<Tensor>& out) {
                  if (need[0]) out[0] = mul(g, mask);
                });
}
}  // namespace

Tensor relu(const Tensor& a) {
  std::vector<double> v(a.numel()), m(a.numel());
  for (size_t i = 0; i < v.size(); ++i) {
    const bool pos = a.values()[i] > 0.0;
    v[i] = pos ? a.values()[i] : 0.0;
    m[i] = pos ? 1.0 : 0.0;
  }
  return masked_linear(a, std::move(v), std::move(m));
}

Tensor leaky_relu(const Tensor& a, double slope) {
  std::vector<double> v(a.numel()), m(a.numel());
  for (size_t i = 0; i < v.size(); ++i) {
    const bool pos = a.values()[i] > 0.0;
    v[i] = pos ? a.values()[i] : slope * a.values()[i];
    m[i] = pos ? 1.0 : slope;
  }
  return masked_linear(a, std::move(v), std::move(m));
}

Tensor abs_val(const Tensor& a) {
  std::vector<double> v(a.numel()), m(a.numel());
  for (size_t i = 0; i < v.size(); ++i) {
    const double x = a.values()[i];
    v[i] = std::abs(x);
    m[i] = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
  }
  return masked_linear(a, std::move(v), std::move(m));
}

Tensor pow_floor(const Tensor& a, double p, double floor) {
  std::vector<double> v(a.numel()), gate(a.numel());
  for (size_t i = 0; i < v.size(); ++i) {
    const double x = std::max(a.values()[i], floor);
    v[i] = std::pow(x, p);
    gate[i] = a.values()[i] > floor ? 1.0 : 0.0;
  }
  auto n = make_node(a.dims(), std::move(v));
  Tensor gate_t = Tensor::from(a.dims(), std::move(gate));
  return finish(
      n, {a},
      [a, p, floor, gate_t](const Tensor& g, const std::vector<bool>& need,
                            std::vector<Tensor>& out) {
        if (need[0]) out[0] = mul(g, mul(scale(pow_floor(a, p - 1.0, floor), p), gate_t));
      });
}

// ------------------------------------------------------- reductions/broadcast

Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  auto n = make_node({1}, {s});
  auto dims = a.dims();
  return finish(n, {a},
                [dims](const Tensor& g, const std::vector<bool>& need, std::vector<Tensor>& out) {
                  if (need[0]) out[0] = broadcast_scalar(g, dims);
                });
}

Tensor mean_all(const Tensor& a) { return scale(sum_all(a), 1.0 / static_cast<double>(a.numel())); }

Tensor broadcast_scalar(const Tensor& s, std::vector<int> dims) {
  if (s.numel() != 1) throw contract_error("broadcast_scalar: source is not a scalar");
  std::vector<double> v(numel_of(dims), s.values()[0]);
  auto n = make_node(dims, std::move(v));
  return finish(n, {s},
                [](const Tensor& g, const std::vector<bool>& need, std::vector<Tensor>& out) {
                  if (need[0]) out[0] = sum_all(g);
                });
}

Tensor sum_channels(const Tensor& a) {
  const auto d = chw(a, "sum_channels");
  const size_t plane = static_cast<size_t>(d[1]) * d[2];
  std::vector<double> v(plane, 0.0);
  for (int c = 0; c < d[0]; ++c)
    for (size_t i = 0; i < plane; ++i) v[i] += a.values()[c * plane + i];
  auto n = make_node({1, d[1], d[2]}, std::move(v));
  const int C = d[0];
  return finish(n, {a},
                [C](const Tensor& g, const std::vector<bool>& need, std::vector<Tensor>& out) {
                  if (need[0]) out[0] = broadcast_channels(g, C);
                });
}

Tensor broadcast_channels(const Tensor& a, int channels) {
  const auto d = chw(a, "broadcast_channels");
  if (d[0] != 1) throw contract_error("broadcast_channels: source must have one channel");
  const size_t plane = static_cast<size_t>(d[1]) * d[2];
  std::vector<double> v(plane * channels);
  for (int c = 0; c < channels; ++c)
    std::copy(a.values().begin(), a.values().end(), v.begin() + c * plane);
  auto n = make_node({channels, d[1], d[2]}, std::move(v));
  return finish(n, {a},
                [](const Tensor& g, const std::vector<bool>& need, std::vector<Tensor>& out) {
                  if (need[0]) out[0] = sum_channels(g);
                });
}

Tensor channel_sum(const Tensor& a) {
  const auto d = chw(a, "channel_sum");
  const size_t plane = static_cast<size_t>(d[1]) * d[2];
  std::vector<double> v(d[0], 0.0);
  for (int c = 0; c < d[0]; ++c)
    for (size_t i = 0; i < plane; ++i) v[c] += a.values()[c * plane + i];
  auto n = make_node({d[0]}, std::move(v));
  const int H = d[1], W = d[2];
  return finish(n, {a},
                [H, W](const Tensor& g, const std::vector<bool>& need, std::vector<Tensor>& out) {
                  if (need[0]) out[0] = channel_broadcast(g, H, W);
                });
}

Tensor channel_broadcast(const Tensor& v, int h, int w) {
  if (v.dims().size() != 1) throw contract_error("channel_broadcast: expected [C] tensor");
  const int C = v.dims()[0];
  const size_t plane = static_cast<size_t>(h) * w;
  std::vector<double> vals(C * plane);
  for (int c = 0; c < C; ++c)
    std::fill(vals.begin() + c * plane, vals.begin() + (c + 1) * plane, v.values()[c]);
  auto n = make_node({C, h, w}, std::move(vals));
  return finish(n, {v},
                [](const Tensor& g, const std::vector<bool>& need, std::vector<Tensor>& out) {
                  if (need[0]) out[0] = channel_sum(g);
                });
}

// ------------------------------------------------------------------ structure

Tensor concat_ch(const Tensor& a, const Tensor& b) {
  const auto da = chw(a, "concat_ch"), db = chw(b, "concat_ch");
  if (da[1] != db[1] || da[2] != db[2]) throw contract_error("concat_ch: spatial dims mismatch");
  std::vector<double> v;
  v.reserve(a.numel() + b.numel());
  v.insert(v.end(), a.values().begin(), a.values().end());
  v.insert(v.end(), b.values().begin(), b.values().end());
  auto n = make_node({da[0] + db[0], da[1], da[2]}, std::move(v));
  const int ca = da[0], cb = db[0];
  return finish(n, {a, b},
                [ca, cb](const Tensor& g, const std::vector<bool>& need, std::vector<Tensor>& out) {
                  if (need[0]) out[0] = slice_ch(g, 0, ca);
                  if (need[1]) out[1] = slice_ch(g, ca, ca + cb);
                });
}

namespace {
// slice/pad act on the leading dimension of a tensor of any rank
size_t trailing_plane(const std::vector<int>& dims) {
  size_t p = 1;
  for (size_t i = 1; i < dims.size(); ++i) p *= static_cast<size_t>(dims[i]);
  return p;
}
}  // namespace

Tensor slice_ch(const Tensor& a, int c0, int c1) {
  const auto& d = a.dims();
  if (d.empty()) throw contract_error("slice_ch: scalar input");
  if (c0 < 0 || c1 > d[0] || c0 >= c1) throw contract_error("slice_ch: bad channel range");
  const size_t plane = trailing_plane(d);
  std::vector<double> v(a.values().begin() + c0 * plane, a.values().begin() + c1 * plane);
  std::vector<int> odims = d;
  odims[0] = c1 - c0;
  auto n = make_node(std::move(odims), std::move(v));
  const int before = c0, after = d[0] - c1;
  return finish(
      n, {a},
      [before, after](const Tensor& g, const std::vector<bool>& need, std::vector<Tensor>& out) {
        if (need[0]) out[0] = pad_ch(g, before, after);
      });
}

Tensor pad_ch(const Tensor& a, int before, int after) {
  const auto& d = a.dims();
  if (d.empty()) throw contract_error("pad_ch: scalar input");
  if (before < 0 || after < 0) throw contract_error("pad_ch: negative padding");
  const size_t plane = trailing_plane(d);
  std::vector<double> v((d[0] + before + after) * plane, 0.0);
  std::copy(a.values().begin(), a.values().end(), v.begin() + before * plane);
  std::vector<int> odims = d;
  odims[0] = d[0] + before + after;
  auto n = make_node(std::move(odims), std::move(v));
  const int c0 = before, c1 = before + d[0];
  return finish(n, {a},
                [c0, c1](const Tensor& g, const std::vector<bool>& need, std::vector<Tensor>& out) {
                  if (need[0]) out[0] = slice_ch(g, c0, c1);
                });
}

// -------------------------------------------------------------- conv / resize

namespace {

// im2col: [Cin*kh*kw] x [H*W] patch matrix for stride-1 zero-padded conv.
Eigen::MatrixXd im2col(const std::vector<double>& x, int cin, int h, int w, int kh, int kw,
                       int pad) {
  Eigen::MatrixXd col(static_cast<Eigen::Index>(cin) * kh * kw, static_cast<Eigen::Index>(h) * w);
  col.setZero();
  const size_t plane = static_cast<size_t>(h) * w;
  for (int c = 0; c < cin; ++c) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const Eigen::Index row = (static_cast<Eigen::Index>(c) * kh + ky) * kw + kx;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= h) continue;
          for (int xx = 0; xx < w; ++xx) {
            const int sx = xx + kx - pad;
            if (sx < 0 || sx >= w) continue;
            col(row, static_cast<Eigen::Index>(y) * w + xx) = x[c * plane + sy * w + sx];
          }
        }
      }
    }
  }
  return col;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, int pad) {
  const auto dx = chw(x, "conv2d");
  if (w.dims().size() != 4) throw contract_error("conv2d: weight must be [Cout,Cin,kh,kw]");
  const int cout = w.dims()[0], cin = w.dims()[1], kh = w.dims()[2], kw = w.dims()[3];
  if (kh != kw) throw contract_error("conv2d: only square kernels are supported");
  if (cin != dx[0]) throw contract_error("conv2d: channel mismatch");
  const int h = dx[1], ww = dx[2];
  const size_t plane = static_cast<size_t>(h) * ww;

  std::vector<double> out_vals(static_cast<size_t>(cout) * plane);
  ConstMatMap wm(w.values().data(), cout, static_cast<Eigen::Index>(cin) * kh * kw);
  MatMap om(out_vals.data(), cout, static_cast<Eigen::Index>(plane));
  if (kh == 1 && kw == 1 && pad == 0) {
    ConstMatMap xm(x.values().data(), cin, static_cast<Eigen::Index>(plane));
    om.noalias() = wm * xm;
  } else {
    om.noalias() = wm * im2col(x.values(), cin, h, ww, kh, kw, pad);
  }

  auto n = make_node({cout, h, ww}, std::move(out_vals));
  return finish(
      n, {x, w},
      [x, w, kh, kw, pad](const Tensor& g, const std::vector<bool>& need,
                          std::vector<Tensor>& out) {
        if (need[0]) out[0] = conv2d(g, kernel_flip_transpose(w), kh - 1 - pad);
        if (need[1]) out[1] = conv2d_wgrad(x, g, kh, kw, pad);
      });
}

Tensor conv2d_wgrad(const Tensor& x, const Tensor& gy, int kh, int kw, int pad) {
  const auto dx = chw(x, "conv2d_wgrad");
  const auto dg = chw(gy, "conv2d_wgrad");
  if (dx[1] != dg[1] || dx[2] != dg[2]) throw contract_error("conv2d_wgrad: spatial mismatch");
  const int cin = dx[0], cout = dg[0], h = dx[1], w = dx[2];
  const size_t plane = static_cast<size_t>(h) * w;

  const Eigen::MatrixXd col = im2col(x.values(), cin, h, w, kh, kw, pad);
  ConstMatMap gm(gy.values().data(), cout, static_cast<Eigen::Index>(plane));
  std::vector<double> out_vals(static_cast<size_t>(cout) * cin * kh * kw);
  MatMap om(out_vals.data(), cout, static_cast<Eigen::Index>(cin) * kh * kw);
  om.noalias() = gm * col.transpose();

  auto n = make_node({cout, cin, kh, kw}, std::move(out_vals));
  return finish(
      n, {x, gy},
      [x, gy, kh, kw, pad](const Tensor& g, const std::vector<bool>& need,
                           std::vector<Tensor>& out) {
        // g has weight shape; both vjps are the other two conv pairings
        if (need[0]) out[0] = conv2d(gy, kernel_flip_transpose(g), kh - 1 - pad);
        if (need[1]) out[1] = conv2d(x, g, pad);
      });
}

Tensor kernel_flip_transpose(const Tensor& w) {
  if (w.dims().size() != 4) throw contract_error("kernel_flip_transpose: expected 4-D weight");
  const int co = w.dims()[0], ci = w.dims()[1], kh = w.dims()[2], kw = w.dims()[3];
  std::vector<double> v(w.numel());
  for (int o = 0; o < co; ++o)
    for (int i = 0; i < ci; ++i)
      for (int a = 0; a < kh; ++a)
        for (int b = 0; b < kw; ++b)
          v[((static_cast<size_t>(i) * co + o) * kh + (kh - 1 - a)) * kw + (kw - 1 - b)] =
              w.values()[((static_cast<size_t>(o) * ci + i) * kh + a) * kw + b];
  auto n = make_node({ci, co, kh, kw}, std::move(v));
  return finish(n, {w},
                [](const Tensor& g, const std::vector<bool>& need, std::vector<Tensor>& out) {
                  if (need[0]) out[0] = kernel_flip_transpose(g);
                });
}

Tensor avg_pool2(const Tensor& a) {
  const auto d = chw(a, "avg_pool2");
  if (d[1] % 2 != 0 || d[2] % 2 != 0) throw contract_error("avg_pool2: odd spatial dims");
  const int C = d[0], H = d[1], W = d[2], oh = H / 2, ow = W / 2;
  const size_t plane = static_cast<size_t>(H) * W, oplane = static_cast<size_t>(oh) * ow;
  std::vector<double> v(C * oplane);
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        const size_t base = c * plane + static_cast<size_t>(2 * y) * W + 2 * x;
        v[c * oplane + static_cast<size_t>(y) * ow + x] =
            0.25 * (a.values()[base] + a.values()[base + 1] + a.values()[base + W] +
                    a.values()[base + W + 1]);
      }
  auto n = make_node({C, oh, ow}, std::move(v));
  return finish(n, {a},
                [](const Tensor& g, const std::vector<bool>& need, std::vector<Tensor>& out) {
                  if (need[0]) out[0] = scale(upsample_nearest2(g), 0.25);
                });
}

Tensor upsample_nearest2(const Tensor& a) {
  const auto d = chw(a, "upsample_nearest2");
  const int C = d[0], H = d[1], W = d[2], oh = 2 * H, ow = 2 * W;
  const size_t plane = static_cast<size_t>(H) * W, oplane = static_cast<size_t>(oh) * ow;
  std::vector<double> v(C * oplane);
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const double s = a.values()[c * plane + static_cast<size_t>(y) * W + x];
        const size_t base = c * oplane + static_cast<size_t>(2 * y) * ow + 2 * x;
        v[base] = v[base + 1] = v[base + ow] = v[base + ow + 1] = s;
      }
  auto n = make_node({C, oh, ow}, std::move(v));
  return finish(n, {a},
                [](const Tensor& g, const std::vector<bool>& need, std::vector<Tensor>& out) {
                  if (need[0]) out[0] = scale(avg_pool2(g), 4.0);
                });
}

// -------------------------------------------------------------------- Fourier

namespace {

// Apply P_Lambda F (project = true after forward) or F^{-1} P_Lambda
// (project applied before the inverse transform) to a [2C,H,W] re/im stack.
std::vector<double> masked_fft_stack(const std::vector<double>& vals, int channels, int h, int w,
                                     const SamplingMask& mask, bool inverse) {
  const int coils = channels / 2;
  const size_t plane = static_cast<size_t>(h) * w;
  std::vector<double> out(vals.size());
  std::vector<cplx> buf(plane), buf2(plane);
  for (int c = 0; c < coils; ++c) {
    const double* re = vals.data() + static_cast<size_t>(c) * plane;
    const double* im = vals.data() + static_cast<size_t>(coils + c) * plane;
    for (size_t i = 0; i < plane; ++i) buf[i] = cplx(re[i], im[i]);
    if (inverse) {
      for (size_t i = 0; i < plane; ++i)
        if (!mask.mask[i]) buf[i] = 0.0;
      fft2_centered(buf.data(), buf2.data(), h, w, true);
    } else {
      fft2_centered(buf.data(), buf2.data(), h, w, false);
      for (size_t i = 0; i < plane; ++i)
        if (!mask.mask[i]) buf2[i] = 0.0;
    }
    double* ore = out.data() + static_cast<size_t>(c) * plane;
    double* oim = out.data() + static_cast<size_t>(coils + c) * plane;
    for (size_t i = 0; i < plane; ++i) {
      ore[i] = buf2[i].real();
      oim[i] = buf2[i].imag();
    }
  }
  return out;
}

}  // namespace

Tensor kspace_project(const Tensor& x, const SamplingMask& mask) {
  const auto d = chw(x, "kspace_project");
  if (d[0] % 2 != 0) throw contract_error("kspace_project: channel count must be 2C");
  if (d[1] != mask.height || d[2] != mask.width)
    throw contract_error("kspace_project: mask shape mismatch");
  auto n = make_node(d, masked_fft_stack(x.values(), d[0], d[1], d[2], mask, false));
  SamplingMask m = mask;
  return finish(n, {x},
                [m](const Tensor& g, const std::vector<bool>& need, std::vector<Tensor>& out) {
                  if (need[0]) out[0] = image_from_kspace(g, m);
                });
}

Tensor image_from_kspace(const Tensor& k, const SamplingMask& mask) {
  const auto d = chw(k, "image_from_kspace");
  if (d[0] % 2 != 0) throw contract_error("image_from_kspace: channel count must be 2C");
  if (d[1] != mask.height || d[2] != mask.width)
    throw contract_error("image_from_kspace: mask shape mismatch");
  auto n = make_node(d, masked_fft_stack(k.values(), d[0], d[1], d[2], mask, true));
  SamplingMask m = mask;
  return finish(n, {k},
                [m](const Tensor& g, const std::vector<bool>& need, std::vector<Tensor>& out) {
                  if (need[0]) out[0] = kspace_project(g, m);
                });
}

// ----------------------------------------------------------------- composites

Tensor bias_add(const Tensor& x, const Tensor& b) {
  const auto d = chw(x, "bias_add");
  return add(x, channel_broadcast(b, d[1], d[2]));
}

Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const auto d = chw(x, "instance_norm");
  const double inv_n = 1.0 / (static_cast<double>(d[1]) * d[2]);
  Tensor mean = scale(channel_sum(x), inv_n);
  Tensor centered = sub(x, channel_broadcast(mean, d[1], d[2]));
  Tensor var = scale(channel_sum(mul(centered, centered)), inv_n);
  Tensor inv_std = pow_floor(add_scalar(var, eps), -0.5, 1e-300);
  Tensor scaled = mul(centered, channel_broadcast(mul(gamma, inv_std), d[1], d[2]));
  return add(scaled, channel_broadcast(beta, d[1], d[2]));
}

Tensor ssos_t(const Tensor& x) {
  return pow_floor(sum_channels(mul(x, x)), 0.5);
}

Tensor aliased_t(const Tensor& x, const SamplingMask& mask) {
  return image_from_kspace(kspace_project(x, mask), mask);
}

// ------------------------------------------------------------------- backward

std::vector<Tensor> grad(const Tensor& out, const std::vector<Tensor>& wrt) {
  if (!out.defined() || out.numel() != 1)
    throw contract_error("grad: output must be a defined scalar");

  // iterative post-order topological sort over the requires_grad subgraph
  std::vector<Tensor::Node*> topo;
  {
    std::unordered_map<Tensor::Node*, int> state;  // 0 new, 1 open, 2 done
    std::vector<Tensor::Node*> stack{out.raw()};
    while (!stack.empty()) {
      Tensor::Node* n = stack.back();
      int& st = state[n];
      if (st == 0) {
        st = 1;
        for (const Tensor& p : n->parents)
          if (p.requires_grad() && state[p.raw()] == 0) stack.push_back(p.raw());
      } else {
        if (st == 1) {
          st = 2;
          topo.push_back(n);
        }
        stack.pop_back();
      }
    }
  }

  std::unordered_map<Tensor::Node*, Tensor> grads;
  grads[out.raw()] = Tensor::scalar(1.0);

  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Tensor::Node* n = *it;
    auto git = grads.find(n);
    if (git == grads.end() || !n->vjp) continue;
    const Tensor& g = git->second;
    if (g.dims() != n->dims) throw contract_error("grad: accumulated gradient shape mismatch");

    std::vector<bool> need(n->parents.size(), false);
    for (size_t i = 0; i < n->parents.size(); ++i) need[i] = n->parents[i].requires_grad();
    std::vector<Tensor> parts(n->parents.size());
    n->vjp(g, need, parts);
    for (size_t i = 0; i < n->parents.size(); ++i) {
      if (!need[i] || !parts[i].defined()) continue;
      Tensor::Node* p = n->parents[i].raw();
      auto pit = grads.find(p);
      if (pit == grads.end())
        grads.emplace(p, parts[i]);
      else
        pit->second = add(pit->second, parts[i]);
    }
  }

  std::vector<Tensor> result;
  result.reserve(wrt.size());
  for (const Tensor& t : wrt) {
    auto it = grads.find(t.raw());
    result.push_back(it != grads.end() ? it->second : Tensor::zeros(t.dims()));
  }
  return result;
}

}  // namespace tmra::nn
