#include "ash/ops.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace ash {

namespace {

using detail::make_node;
using detail::track;

void require_chw(const char* op, const Tensor& t) {
  if (t.shape().size() != 3) {
    throw ShapeError(std::string(op) + ": expected a [C,H,W] tensor, got " + shape_str(t.shape()));
  }
}

Tensor unary_map(const char* op, const Tensor& a, double (*fwd)(double),
                 double (*dfdx)(double /*x*/, double /*y*/)) {
  const auto& x = a.values();
  std::vector<double> y(x.size());
  for (size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  Tensor out = make_node(op, a.shape(), std::move(y));
  if (track(a)) {
    auto* on = out.node().get();
    auto* an = a.node().get();
    on->needs_grad = true;
    on->parents = {a.node()};
    on->backward_fn = [on, an, dfdx]() {
      for (size_t i = 0; i < on->data.size(); ++i)
        an->grad[i] += on->grad[i] * dfdx(an->data[i], on->data[i]);
    };
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  const auto& xa = a.values();
  const auto& xb = b.values();
  std::vector<double> y(xa.size());
  for (size_t i = 0; i < y.size(); ++i) y[i] = xa[i] + xb[i];
  Tensor out = make_node("add", a.shape(), std::move(y));
  if (track(a, b)) {
    auto* on = out.node().get();
    auto* an = a.node().get();
    auto* bn = b.node().get();
    on->needs_grad = true;
    on->parents = {a.node(), b.node()};
    on->backward_fn = [on, an, bn]() {
      if (an->needs_grad)
        for (size_t i = 0; i < on->data.size(); ++i) an->grad[i] += on->grad[i];
      if (bn->needs_grad)
        for (size_t i = 0; i < on->data.size(); ++i) bn->grad[i] += on->grad[i];
    };
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  const auto& xa = a.values();
  const auto& xb = b.values();
  std::vector<double> y(xa.size());
  for (size_t i = 0; i < y.size(); ++i) y[i] = xa[i] - xb[i];
  Tensor out = make_node("sub", a.shape(), std::move(y));
  if (track(a, b)) {
    auto* on = out.node().get();
    auto* an = a.node().get();
    auto* bn = b.node().get();
    on->needs_grad = true;
    on->parents = {a.node(), b.node()};
    on->backward_fn = [on, an, bn]() {
      if (an->needs_grad)
        for (size_t i = 0; i < on->data.size(); ++i) an->grad[i] += on->grad[i];
      if (bn->needs_grad)
        for (size_t i = 0; i < on->data.size(); ++i) bn->grad[i] -= on->grad[i];
    };
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  const auto& xa = a.values();
  const auto& xb = b.values();
  std::vector<double> y(xa.size());
  for (size_t i = 0; i < y.size(); ++i) y[i] = xa[i] * xb[i];
  Tensor out = make_node("mul", a.shape(), std::move(y));
  if (track(a, b)) {
    auto* on = out.node().get();
    auto* an = a.node().get();
    auto* bn = b.node().get();
    on->needs_grad = true;
    on->parents = {a.node(), b.node()};
    on->backward_fn = [on, an, bn]() {
      if (an->needs_grad)
        for (size_t i = 0; i < on->data.size(); ++i) an->grad[i] += on->grad[i] * bn->data[i];
      if (bn->needs_grad)
        for (size_t i = 0; i < on->data.size(); ++i) bn->grad[i] += on->grad[i] * an->data[i];
    };
  }
  return out;
}

Tensor div(const Tensor& a, const Tensor& b) {
  check_same_shape("div", a, b);
  const auto& xa = a.values();
  const auto& xb = b.values();
  std::vector<double> y(xa.size());
  for (size_t i = 0; i < y.size(); ++i) y[i] = xa[i] / xb[i];
  Tensor out = make_node("div", a.shape(), std::move(y));
  if (track(a, b)) {
    auto* on = out.node().get();
    auto* an = a.node().get();
    auto* bn = b.node().get();
    on->needs_grad = true;
    on->parents = {a.node(), b.node()};
    on->backward_fn = [on, an, bn]() {
      for (size_t i = 0; i < on->data.size(); ++i) {
        const double inv = 1.0 / bn->data[i];
        if (an->needs_grad) an->grad[i] += on->grad[i] * inv;
        if (bn->needs_grad) bn->grad[i] -= on->grad[i] * on->data[i] * inv;
      }
    };
  }
  return out;
}

Tensor add_scalar(const Tensor& a, double s) {
  const auto& x = a.values();
  std::vector<double> y(x.size());
  for (size_t i = 0; i < y.size(); ++i) y[i] = x[i] + s;
  Tensor out = make_node("add_scalar", a.shape(), std::move(y));
  if (track(a)) {
    auto* on = out.node().get();
    auto* an = a.node().get();
    on->needs_grad = true;
    on->parents = {a.node()};
    on->backward_fn = [on, an]() {
      for (size_t i = 0; i < on->data.size(); ++i) an->grad[i] += on->grad[i];
    };
  }
  return out;
}

Tensor mul_scalar(const Tensor& a, double s) {
  const auto& x = a.values();
  std::vector<double> y(x.size());
  for (size_t i = 0; i < y.size(); ++i) y[i] = x[i] * s;
  Tensor out = make_node("mul_scalar", a.shape(), std::move(y));
  if (track(a)) {
    auto* on = out.node().get();
    auto* an = a.node().get();
    on->needs_grad = true;
    on->parents = {a.node()};
    on->backward_fn = [on, an, s]() {
      for (size_t i = 0; i < on->data.size(); ++i) an->grad[i] += on->grad[i] * s;
    };
  }
  return out;
}

Tensor relu(const Tensor& a) {
  return unary_map(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  const auto& x = a.values();
  std::vector<double> y(x.size());
  for (size_t i = 0; i < y.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : slope * x[i];
  Tensor out = make_node("leaky_relu", a.shape(), std::move(y));
  if (track(a)) {
    auto* on = out.node().get();
    auto* an = a.node().get();
    on->needs_grad = true;
    on->parents = {a.node()};
    on->backward_fn = [on, an, slope]() {
      for (size_t i = 0; i < on->data.size(); ++i)
        an->grad[i] += on->grad[i] * (an->data[i] > 0.0 ? 1.0 : slope);
    };
  }
  return out;
}

Tensor sigmoid(const Tensor& a) {
  return unary_map(
      "sigmoid", a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& a) {
  return unary_map(
      "exp", a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary_map(
      "log", a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
  return unary_map(
      "sqrt", a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return 0.5 / y; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  const auto& x = a.values();
  std::vector<double> y(x.size());
  for (size_t i = 0; i < y.size(); ++i) y[i] = std::min(hi, std::max(lo, x[i]));
  Tensor out = make_node("clamp", a.shape(), std::move(y));
  if (track(a)) {
    auto* on = out.node().get();
    auto* an = a.node().get();
    on->needs_grad = true;
    on->parents = {a.node()};
    on->backward_fn = [on, an, lo, hi]() {
      for (size_t i = 0; i < on->data.size(); ++i)
        if (an->data[i] > lo && an->data[i] < hi) an->grad[i] += on->grad[i];
    };
  }
  return out;
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  Tensor out = make_node("sum", {1}, {s});
  if (track(a)) {
    auto* on = out.node().get();
    auto* an = a.node().get();
    on->needs_grad = true;
    on->parents = {a.node()};
    on->backward_fn = [on, an]() {
      const double g = on->grad[0];
      for (size_t i = 0; i < an->data.size(); ++i) an->grad[i] += g;
    };
  }
  return out;
}

Tensor mean(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  const double inv = 1.0 / static_cast<double>(a.size());
  Tensor out = make_node("mean", {1}, {s * inv});
  if (track(a)) {
    auto* on = out.node().get();
    auto* an = a.node().get();
    on->needs_grad = true;
    on->parents = {a.node()};
    on->backward_fn = [on, an, inv]() {
      const double g = on->grad[0] * inv;
      for (size_t i = 0; i < an->data.size(); ++i) an->grad[i] += g;
    };
  }
  return out;
}

Tensor channel_mean(const Tensor& a) {
  require_chw("channel_mean", a);
  const int c = a.dim(0), h = a.dim(1), w = a.dim(2);
  const int hw = h * w;
  const double inv = 1.0 / hw;
  const auto& x = a.values();
  std::vector<double> y(c, 0.0);
  for (int ci = 0; ci < c; ++ci) {
    double s = 0.0;
    const double* p = x.data() + static_cast<size_t>(ci) * hw;
    for (int i = 0; i < hw; ++i) s += p[i];
    y[ci] = s * inv;
  }
  Tensor out = make_node("channel_mean", {c}, std::move(y));
  if (track(a)) {
    auto* on = out.node().get();
    auto* an = a.node().get();
    on->needs_grad = true;
    on->parents = {a.node()};
    on->backward_fn = [on, an, c, hw, inv]() {
      for (int ci = 0; ci < c; ++ci) {
        const double g = on->grad[ci] * inv;
        double* p = an->grad.data() + static_cast<size_t>(ci) * hw;
        for (int i = 0; i < hw; ++i) p[i] += g;
      }
    };
  }
  return out;
}

Tensor expand_channels(const Tensor& v, int h, int w) {
  if (v.shape().size() != 1) {
    throw ShapeError("expand_channels: expected a [C] vector, got " + shape_str(v.shape()));
  }
  const int c = v.dim(0);
  const int hw = h * w;
  std::vector<double> y(static_cast<size_t>(c) * hw);
  for (int ci = 0; ci < c; ++ci)
    std::fill_n(y.begin() + static_cast<size_t>(ci) * hw, hw, v.values()[ci]);
  Tensor out = make_node("expand_channels", {c, h, w}, std::move(y));
  if (track(v)) {
    auto* on = out.node().get();
    auto* vn = v.node().get();
    on->needs_grad = true;
    on->parents = {v.node()};
    on->backward_fn = [on, vn, c, hw]() {
      for (int ci = 0; ci < c; ++ci) {
        double s = 0.0;
        const double* p = on->grad.data() + static_cast<size_t>(ci) * hw;
        for (int i = 0; i < hw; ++i) s += p[i];
        vn->grad[ci] += s;
      }
    };
  }
  return out;
}

namespace {

// Accumulates out[oy0..oy1) rows += wv * shifted input rows. Shared by the
// conv2d forward and the dInput pass (which is a correlation as well).
inline void conv_accumulate(double* out, int out_w, const double* in, int in_w,
                            double wv, int dy, int dx, int stride,
                            int oy0, int oy1, int ox0, int ox1) {
  for (int oy = oy0; oy < oy1; ++oy) {
    double* orow = out + static_cast<size_t>(oy) * out_w;
    const double* irow = in + static_cast<size_t>(oy * stride + dy) * in_w + dx;
    if (stride == 1) {
      for (int ox = ox0; ox < ox1; ++ox) orow[ox] += wv * irow[ox];
    } else {
      for (int ox = ox0; ox < ox1; ++ox) orow[ox] += wv * irow[ox * stride];
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int pad) {
  require_chw("conv2d input", input);
  if (weight.shape().size() != 4) {
    throw ShapeError("conv2d: weight must be [C_out,C_in,k,k], got " + shape_str(weight.shape()));
  }
  if (bias.shape().size() != 1) {
    throw ShapeError("conv2d: bias must be [C_out], got " + shape_str(bias.shape()));
  }
  const int c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int c_out = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != c_in) {
    throw ShapeError("conv2d: input channel axis 0 is " + std::to_string(c_in) +
                     " but weight axis 1 is " + std::to_string(weight.dim(1)));
  }
  if (weight.dim(3) != k) {
    throw ShapeError("conv2d: weight kernel must be square, axis 2 is " + std::to_string(k) +
                     " but axis 3 is " + std::to_string(weight.dim(3)));
  }
  if (bias.dim(0) != c_out) {
    throw ShapeError("conv2d: bias axis 0 is " + std::to_string(bias.dim(0)) +
                     " but weight axis 0 is " + std::to_string(c_out));
  }
  if (k < 1 || stride < 1 || pad < 0) {
    throw ShapeError("conv2d: need k >= 1, stride >= 1, pad >= 0");
  }
  auto out_extent = [&](int extent, int axis_name) {
    const int span = extent + 2 * pad - k;
    if (span < 0 || span % stride != 0) {
      throw ShapeError("conv2d: (extent + 2*pad - k)/stride + 1 is not a positive integer on input axis " +
                       std::to_string(axis_name) + " (extent " + std::to_string(extent) + ")");
    }
    return span / stride + 1;
  };
  const int oh = out_extent(h, 1);
  const int ow = out_extent(w, 2);

  const double* in = input.values().data();
  const double* wt = weight.values().data();
  std::vector<double> y(static_cast<size_t>(c_out) * oh * ow);
  const int hw = h * w;
  const int ohw = oh * ow;

  // Valid output ranges per kernel tap, so the inner loops are branch-free.
  // Capture-free: it is copied into the backward closure.
  auto range = [](int dk, int pad_, int stride_, int in_extent, int out_extent_v,
                  int& lo, int& hi) {
    const int d = dk - pad_;
    lo = 0;
    while (lo < out_extent_v && lo * stride_ + d < 0) ++lo;
    hi = out_extent_v;
    while (hi > lo && (hi - 1) * stride_ + d >= in_extent) --hi;
  };

  for (int co = 0; co < c_out; ++co) {
    double* oc = y.data() + static_cast<size_t>(co) * ohw;
    std::fill_n(oc, ohw, bias.values()[co]);
    for (int ci = 0; ci < c_in; ++ci) {
      const double* icp = in + static_cast<size_t>(ci) * hw;
      const double* wp = wt + (static_cast<size_t>(co) * c_in + ci) * k * k;
      for (int ky = 0; ky < k; ++ky) {
        int oy0, oy1;
        range(ky, pad, stride, h, oh, oy0, oy1);
        for (int kx = 0; kx < k; ++kx) {
          int ox0, ox1;
          range(kx, pad, stride, w, ow, ox0, ox1);
          conv_accumulate(oc, ow, icp, w, wp[ky * k + kx], ky - pad, kx - pad,
                          stride, oy0, oy1, ox0, ox1);
        }
      }
    }
  }

  Tensor out = make_node("conv2d", {c_out, oh, ow}, std::move(y));
  if (track(input, weight, bias)) {
    auto* on = out.node().get();
    auto* in_n = input.node().get();
    auto* w_n = weight.node().get();
    auto* b_n = bias.node().get();
    on->needs_grad = true;
    on->parents = {input.node(), weight.node(), bias.node()};
    on->backward_fn = [on, in_n, w_n, b_n, c_in, c_out, h, w, oh, ow, k, stride, pad, range]() {
      const int hw = h * w;
      const int ohw = oh * ow;
      const double* gout = on->grad.data();
      if (b_n->needs_grad) {
        for (int co = 0; co < c_out; ++co) {
          double s = 0.0;
          const double* g = gout + static_cast<size_t>(co) * ohw;
          for (int i = 0; i < ohw; ++i) s += g[i];
          b_n->grad[co] += s;
        }
      }
      if (w_n->needs_grad) {
        for (int co = 0; co < c_out; ++co) {
          const double* g = gout + static_cast<size_t>(co) * ohw;
          for (int ci = 0; ci < c_in; ++ci) {
            const double* icp = in_n->data.data() + static_cast<size_t>(ci) * hw;
            double* wg = w_n->grad.data() + (static_cast<size_t>(co) * c_in + ci) * k * k;
            for (int ky = 0; ky < k; ++ky) {
              int oy0, oy1;
              range(ky, pad, stride, h, oh, oy0, oy1);
              for (int kx = 0; kx < k; ++kx) {
                int ox0, ox1;
                range(kx, pad, stride, w, ow, ox0, ox1);
                const int dy = ky - pad, dx = kx - pad;
                double s = 0.0;
                for (int oy = oy0; oy < oy1; ++oy) {
                  const double* grow = g + static_cast<size_t>(oy) * ow;
                  const double* irow = icp + static_cast<size_t>(oy * stride + dy) * w + dx;
                  if (stride == 1) {
                    for (int ox = ox0; ox < ox1; ++ox) s += grow[ox] * irow[ox];
                  } else {
                    for (int ox = ox0; ox < ox1; ++ox) s += grow[ox] * irow[ox * stride];
                  }
                }
                wg[ky * k + kx] += s;
              }
            }
          }
        }
      }
      if (in_n->needs_grad) {
        // dIn[ci, oy*stride+dy, ox*stride+dx] += g[co,oy,ox] * w[co,ci,ky,kx]
        for (int co = 0; co < c_out; ++co) {
          const double* g = gout + static_cast<size_t>(co) * ohw;
          for (int ci = 0; ci < c_in; ++ci) {
            double* igp = in_n->grad.data() + static_cast<size_t>(ci) * hw;
            const double* wp = w_n->data.data() + (static_cast<size_t>(co) * c_in + ci) * k * k;
            for (int ky = 0; ky < k; ++ky) {
              int oy0, oy1;
              range(ky, pad, stride, h, oh, oy0, oy1);
              for (int kx = 0; kx < k; ++kx) {
                int ox0, ox1;
                range(kx, pad, stride, w, ow, ox0, ox1);
                const int dy = ky - pad, dx = kx - pad;
                const double wv = wp[ky * k + kx];
                for (int oy = oy0; oy < oy1; ++oy) {
                  const double* grow = g + static_cast<size_t>(oy) * ow;
                  double* irow = igp + static_cast<size_t>(oy * stride + dy) * w + dx;
                  if (stride == 1) {
                    for (int ox = ox0; ox < ox1; ++ox) irow[ox] += wv * grow[ox];
                  } else {
                    for (int ox = ox0; ox < ox1; ++ox) irow[ox * stride] += wv * grow[ox];
                  }
                }
              }
            }
          }
        }
      }
    };
  }
  return out;
}

Tensor avg_pool(const Tensor& a, int factor) {
  require_chw("avg_pool", a);
  if (factor < 1) throw ShapeError("avg_pool: factor must be >= 1");
  const int c = a.dim(0), h = a.dim(1), w = a.dim(2);
  if (h % factor != 0) {
    throw ShapeError("avg_pool: factor " + std::to_string(factor) + " does not divide axis 1 extent " + std::to_string(h));
  }
  if (w % factor != 0) {
    throw ShapeError("avg_pool: factor " + std::to_string(factor) + " does not divide axis 2 extent " + std::to_string(w));
  }
  const int oh = h / factor, ow = w / factor;
  const double inv = 1.0 / (factor * factor);
  const auto& x = a.values();
  std::vector<double> y(static_cast<size_t>(c) * oh * ow, 0.0);
  for (int ci = 0; ci < c; ++ci) {
    const double* ip = x.data() + static_cast<size_t>(ci) * h * w;
    double* op = y.data() + static_cast<size_t>(ci) * oh * ow;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double s = 0.0;
        for (int fy = 0; fy < factor; ++fy) {
          const double* row = ip + static_cast<size_t>(oy * factor + fy) * w + ox * factor;
          for (int fx = 0; fx < factor; ++fx) s += row[fx];
        }
        op[oy * ow + ox] = s * inv;
      }
    }
  }
  Tensor out = make_node("avg_pool", {c, oh, ow}, std::move(y));
  if (track(a)) {
    auto* on = out.node().get();
    auto* an = a.node().get();
    on->needs_grad = true;
    on->parents = {a.node()};
    on->backward_fn = [on, an, c, h, w, oh, ow, factor, inv]() {
      for (int ci = 0; ci < c; ++ci) {
        const double* gp = on->grad.data() + static_cast<size_t>(ci) * oh * ow;
        double* ig = an->grad.data() + static_cast<size_t>(ci) * h * w;
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            const double g = gp[oy * ow + ox] * inv;
            for (int fy = 0; fy < factor; ++fy) {
              double* row = ig + static_cast<size_t>(oy * factor + fy) * w + ox * factor;
              for (int fx = 0; fx < factor; ++fx) row[fx] += g;
            }
          }
        }
      }
    };
  }
  return out;
}

Tensor nearest_upsample(const Tensor& a, int factor) {
  require_chw("nearest_upsample", a);
  if (factor < 1) throw ShapeError("nearest_upsample: factor must be >= 1");
  if (factor == 1) {
    // Identity at factor 1, but still a graph node so callers can rely on a
    // fresh output tensor.
    return add_scalar(a, 0.0);
  }
  const int c = a.dim(0), h = a.dim(1), w = a.dim(2);
  const int oh = h * factor, ow = w * factor;
  const auto& x = a.values();
  std::vector<double> y(static_cast<size_t>(c) * oh * ow);
  for (int ci = 0; ci < c; ++ci) {
    const double* ip = x.data() + static_cast<size_t>(ci) * h * w;
    double* op = y.data() + static_cast<size_t>(ci) * oh * ow;
    for (int oy = 0; oy < oh; ++oy) {
      const double* irow = ip + static_cast<size_t>(oy / factor) * w;
      double* orow = op + static_cast<size_t>(oy) * ow;
      for (int ox = 0; ox < ow; ++ox) orow[ox] = irow[ox / factor];
    }
  }
  Tensor out = make_node("nearest_upsample", {c, oh, ow}, std::move(y));
  if (track(a)) {
    auto* on = out.node().get();
    auto* an = a.node().get();
    on->needs_grad = true;
    on->parents = {a.node()};
    on->backward_fn = [on, an, c, h, w, oh, ow, factor]() {
      for (int ci = 0; ci < c; ++ci) {
        const double* gp = on->grad.data() + static_cast<size_t>(ci) * oh * ow;
        double* ig = an->grad.data() + static_cast<size_t>(ci) * h * w;
        for (int oy = 0; oy < oh; ++oy) {
          const double* grow = gp + static_cast<size_t>(oy) * ow;
          double* irow = ig + static_cast<size_t>(oy / factor) * w;
          for (int ox = 0; ox < ow; ++ox) irow[ox / factor] += grow[ox];
        }
      }
    };
  }
  return out;
}

Tensor matmul_channels(const Tensor& q, const Tensor& f) {
  require_chw("matmul_channels", f);
  if (q.shape().size() != 2 || q.dim(0) != q.dim(1)) {
    throw ShapeError("matmul_channels: Q must be square [C,C], got " + shape_str(q.shape()));
  }
  const int c = f.dim(0), h = f.dim(1), w = f.dim(2);
  if (q.dim(0) != c) {
    throw ShapeError("matmul_channels: Q axis 0 is " + std::to_string(q.dim(0)) +
                     " but feature channel axis 0 is " + std::to_string(c));
  }
  const int hw = h * w;
  const double* qd = q.values().data();
  const double* fd = f.values().data();
  std::vector<double> y(static_cast<size_t>(c) * hw, 0.0);
  for (int i = 0; i < c; ++i) {
    double* orow = y.data() + static_cast<size_t>(i) * hw;
    for (int j = 0; j < c; ++j) {
      const double qv = qd[i * c + j];
      const double* frow = fd + static_cast<size_t>(j) * hw;
      for (int s = 0; s < hw; ++s) orow[s] += qv * frow[s];
    }
  }
  Tensor out = make_node("matmul_channels", {c, h, w}, std::move(y));
  if (track(q, f)) {
    auto* on = out.node().get();
    auto* qn = q.node().get();
    auto* fn = f.node().get();
    on->needs_grad = true;
    on->parents = {q.node(), f.node()};
    on->backward_fn = [on, qn, fn, c, hw]() {
      if (fn->needs_grad) {
        for (int j = 0; j < c; ++j) {
          double* frow = fn->grad.data() + static_cast<size_t>(j) * hw;
          for (int i = 0; i < c; ++i) {
            const double qv = qn->data[i * c + j];
            const double* grow = on->grad.data() + static_cast<size_t>(i) * hw;
            for (int s = 0; s < hw; ++s) frow[s] += qv * grow[s];
          }
        }
      }
      if (qn->needs_grad) {
        for (int i = 0; i < c; ++i) {
          const double* grow = on->grad.data() + static_cast<size_t>(i) * hw;
          for (int j = 0; j < c; ++j) {
            const double* frow = fn->data.data() + static_cast<size_t>(j) * hw;
            double s = 0.0;
            for (int k = 0; k < hw; ++k) s += grow[k] * frow[k];
            qn->grad[i * c + j] += s;
          }
        }
      }
    };
  }
  return out;
}

Tensor softmax_channels(const Tensor& a) {
  require_chw("softmax_channels", a);
  const int c = a.dim(0), h = a.dim(1), w = a.dim(2);
  const int hw = h * w;
  const auto& x = a.values();
  std::vector<double> y(x.size());
  for (int s = 0; s < hw; ++s) {
    double mx = x[s];
    for (int ci = 1; ci < c; ++ci) mx = std::max(mx, x[static_cast<size_t>(ci) * hw + s]);
    double z = 0.0;
    for (int ci = 0; ci < c; ++ci) {
      const double e = std::exp(x[static_cast<size_t>(ci) * hw + s] - mx);
      y[static_cast<size_t>(ci) * hw + s] = e;
      z += e;
    }
    const double inv = 1.0 / z;
    for (int ci = 0; ci < c; ++ci) y[static_cast<size_t>(ci) * hw + s] *= inv;
  }
  Tensor out = make_node("softmax_channels", a.shape(), std::move(y));
  if (track(a)) {
    auto* on = out.node().get();
    auto* an = a.node().get();
    on->needs_grad = true;
    on->parents = {a.node()};
    on->backward_fn = [on, an, c, hw]() {
      for (int s = 0; s < hw; ++s) {
        double dot = 0.0;
        for (int ci = 0; ci < c; ++ci) {
          const size_t idx = static_cast<size_t>(ci) * hw + s;
          dot += on->grad[idx] * on->data[idx];
        }
        for (int ci = 0; ci < c; ++ci) {
          const size_t idx = static_cast<size_t>(ci) * hw + s;
          an->grad[idx] += on->data[idx] * (on->grad[idx] - dot);
        }
      }
    };
  }
  return out;
}

Tensor nll_pixelwise(const Tensor& prob, std::span<const int> labels, int ignore_value) {
  require_chw("nll_pixelwise", prob);
  const int c = prob.dim(0), h = prob.dim(1), w = prob.dim(2);
  const int hw = h * w;
  if (static_cast<int>(labels.size()) != hw) {
    throw ShapeError("nll_pixelwise: labels length " + std::to_string(labels.size()) +
                     " does not match H*W = " + std::to_string(hw));
  }
  constexpr double kLo = 1e-12;
  const auto& p = prob.values();
  double loss = 0.0;
  int64_t n = 0;
  for (int s = 0; s < hw; ++s) {
    const int lbl = labels[s];
    if (lbl == ignore_value) continue;
    if (lbl < 0 || lbl >= c) {
      throw std::invalid_argument("nll_pixelwise: label " + std::to_string(lbl) +
                                  " outside [0," + std::to_string(c) + ") at pixel " + std::to_string(s));
    }
    loss -= std::log(std::min(1.0, std::max(kLo, p[static_cast<size_t>(lbl) * hw + s])));
    ++n;
  }
  if (n == 0) throw std::invalid_argument("nll_pixelwise: every pixel is ignored");
  loss /= static_cast<double>(n);
  Tensor out = make_node("nll_pixelwise", {1}, {loss});
  if (track(prob)) {
    auto* on = out.node().get();
    auto* pn = prob.node().get();
    std::vector<int> lbls(labels.begin(), labels.end());
    on->needs_grad = true;
    on->parents = {prob.node()};
    on->backward_fn = [on, pn, lbls = std::move(lbls), hw, ignore_value, n]() {
      const double g = on->grad[0] / static_cast<double>(n);
      for (int s = 0; s < hw; ++s) {
        const int lbl = lbls[s];
        if (lbl == ignore_value) continue;
        const double pv = pn->data[static_cast<size_t>(lbl) * hw + s];
        if (pv > kLo && pv < 1.0) pn->grad[static_cast<size_t>(lbl) * hw + s] -= g / pv;
      }
    };
  }
  return out;
}

}  // namespace ash
