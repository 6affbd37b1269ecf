#include "regemb/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace regemb {

namespace {

bool track(const Tape* tape, std::initializer_list<const Tensor*> inputs) {
  if (!tape) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

// outer/inner decomposition for axis-wise loops on row-major data
struct AxisSplit {
  std::size_t outer = 1, axis = 1, inner = 1;
};

AxisSplit split_axis(const std::vector<std::size_t>& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.axis = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], p = b.shape()[1];
  Tensor out({m, p}, 0.0);
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t l = 0; l < k; ++l) {
      const double av = pa[i * k + l];
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < p; ++j) po[i * p + j] += av * pb[l * p + j];
    }
  }
  if (track(tape, {&a, &b})) {
    out.set_requires_grad(true);
    Tensor ac = a, bc = b, oc = out;
    tape->record([ac, bc, oc, m, k, p]() mutable {
      if (!oc.has_grad()) return;
      const auto& go = oc.grad_view();
      if (ac.requires_grad()) {
        auto& ga = ac.grad();
        const double* pb = bc.data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < p; ++j) {
            const double g = go[i * p + j];
            if (g == 0.0) continue;
            for (std::size_t l = 0; l < k; ++l) ga[i * k + l] += g * pb[l * p + j];
          }
      }
      if (bc.requires_grad()) {
        auto& gb = bc.grad();
        const double* pa = ac.data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t l = 0; l < k; ++l) {
            const double av = pa[i * k + l];
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < p; ++j) gb[l * p + j] += av * go[i * p + j];
          }
      }
    });
  }
  return out;
}

Tensor elemwise_mul(const Tensor& a, const Tensor& b, Tape* tape) {
  check_same_shape(a, b, "elemwise_mul");
  Tensor out(a.shape(), 0.0);
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  if (track(tape, {&a, &b})) {
    out.set_requires_grad(true);
    Tensor ac = a, bc = b, oc = out;
    tape->record([ac, bc, oc, n]() mutable {
      if (!oc.has_grad()) return;
      const auto& go = oc.grad_view();
      if (ac.requires_grad()) {
        auto& ga = ac.grad();
        for (std::size_t i = 0; i < n; ++i) ga[i] += go[i] * bc.data()[i];
      }
      if (bc.requires_grad()) {
        auto& gb = bc.grad();
        for (std::size_t i = 0; i < n; ++i) gb[i] += go[i] * ac.data()[i];
      }
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b, Tape* tape) {
  check_same_shape(a, b, "add");
  Tensor out(a.shape(), 0.0);
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  if (track(tape, {&a, &b})) {
    out.set_requires_grad(true);
    Tensor ac = a, bc = b, oc = out;
    tape->record([ac, bc, oc, n]() mutable {
      if (!oc.has_grad()) return;
      const auto& go = oc.grad_view();
      if (ac.requires_grad()) {
        auto& ga = ac.grad();
        for (std::size_t i = 0; i < n; ++i) ga[i] += go[i];
      }
      if (bc.requires_grad()) {
        auto& gb = bc.grad();
        for (std::size_t i = 0; i < n; ++i) gb[i] += go[i];
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& x, double s, Tape* tape) {
  Tensor out(x.shape(), 0.0);
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] * s;
  if (track(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor xc = x, oc = out;
    tape->record([xc, oc, s, n]() mutable {
      if (!oc.has_grad()) return;
      const auto& go = oc.grad_view();
      auto& gx = xc.grad();
      for (std::size_t i = 0; i < n; ++i) gx[i] += go[i] * s;
    });
  }
  return out;
}

Tensor add_channel_bias(const Tensor& x, const Tensor& b, Tape* tape) {
  if (x.rank() != 2 || b.rank() != 1 || b.shape()[0] != x.shape()[0]) {
    throw DimensionError("add_channel_bias: shapes " + shape_str(x.shape()) +
                         " and " + shape_str(b.shape()));
  }
  const std::size_t c = x.shape()[0], l = x.shape()[1];
  Tensor out(x.shape(), 0.0);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < l; ++j)
      out.data()[i * l + j] = x.data()[i * l + j] + b.data()[i];
  if (track(tape, {&x, &b})) {
    out.set_requires_grad(true);
    Tensor xc = x, bc = b, oc = out;
    tape->record([xc, bc, oc, c, l]() mutable {
      if (!oc.has_grad()) return;
      const auto& go = oc.grad_view();
      if (xc.requires_grad()) {
        auto& gx = xc.grad();
        for (std::size_t i = 0; i < c * l; ++i) gx[i] += go[i];
      }
      if (bc.requires_grad()) {
        auto& gb = bc.grad();
        for (std::size_t i = 0; i < c; ++i)
          for (std::size_t j = 0; j < l; ++j) gb[i] += go[i * l + j];
      }
    });
  }
  return out;
}

Tensor reduce(const Tensor& x, std::size_t axis, Reduce mode, Tape* tape) {
  if (axis >= x.rank()) {
    throw DimensionError("reduce: axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(x.shape()));
  }
  const AxisSplit s = split_axis(x.shape(), axis);
  std::vector<std::size_t> out_shape;
  for (std::size_t i = 0; i < x.rank(); ++i)
    if (i != axis) out_shape.push_back(x.shape()[i]);
  Tensor out(out_shape, 0.0);

  std::vector<std::size_t> argmax;
  if (mode == Reduce::Max) argmax.assign(s.outer * s.inner, 0);

  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.axis * s.inner + i;
      double acc;
      if (mode == Reduce::Max) {
        acc = x.data()[base];
        std::size_t arg = 0;
        for (std::size_t a = 1; a < s.axis; ++a) {
          const double v = x.data()[base + a * s.inner];
          if (v > acc) {
            acc = v;
            arg = a;
          }
        }
        argmax[o * s.inner + i] = arg;
      } else {
        acc = 0.0;
        for (std::size_t a = 0; a < s.axis; ++a) acc += x.data()[base + a * s.inner];
        if (mode == Reduce::Mean) acc /= static_cast<double>(s.axis);
      }
      out.data()[o * s.inner + i] = acc;
    }
  }

  if (track(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor xc = x, oc = out;
    tape->record([xc, oc, s, mode, argmax = std::move(argmax)]() mutable {
      if (!oc.has_grad()) return;
      const auto& go = oc.grad_view();
      auto& gx = xc.grad();
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
          const std::size_t base = o * s.axis * s.inner + i;
          const double g = go[o * s.inner + i];
          switch (mode) {
            case Reduce::Max:
              gx[base + argmax[o * s.inner + i] * s.inner] += g;
              break;
            case Reduce::Sum:
              for (std::size_t a = 0; a < s.axis; ++a) gx[base + a * s.inner] += g;
              break;
            case Reduce::Mean: {
              const double gm = g / static_cast<double>(s.axis);
              for (std::size_t a = 0; a < s.axis; ++a) gx[base + a * s.inner] += gm;
              break;
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              std::size_t pad, Tape* tape) {
  if (x.rank() != 2 || weight.rank() != 3 || bias.rank() != 1) {
    throw DimensionError("conv1d: expected x[C_in x L], weight[C_out x C_in x kw], bias[C_out]");
  }
  const std::size_t cin = x.shape()[0], len = x.shape()[1];
  const std::size_t cout = weight.shape()[0], kw = weight.shape()[2];
  if (weight.shape()[1] != cin || bias.shape()[0] != cout) {
    throw DimensionError("conv1d: weight " + shape_str(weight.shape()) +
                         " incompatible with input " + shape_str(x.shape()));
  }
  if (kw < 1 || len + 2 * pad < kw) {
    throw DimensionError("conv1d: kernel width " + std::to_string(kw) +
                         " exceeds padded length " + std::to_string(len + 2 * pad));
  }
  const std::size_t lout = len + 2 * pad - kw + 1;
  Tensor out({cout, lout}, 0.0);
  const double* px = x.data();
  const double* pw = weight.data();
  double* po = out.data();
  for (std::size_t o = 0; o < cout; ++o) {
    const double b = bias.data()[o];
    for (std::size_t i = 0; i < lout; ++i) {
      double acc = b;
      for (std::size_t c = 0; c < cin; ++c) {
        for (std::size_t t = 0; t < kw; ++t) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(i + t) -
                                     static_cast<std::ptrdiff_t>(pad);
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
          acc += pw[(o * cin + c) * kw + t] * px[c * len + src];
        }
      }
      po[o * lout + i] = acc;
    }
  }
  if (track(tape, {&x, &weight, &bias})) {
    out.set_requires_grad(true);
    Tensor xc = x, wc = weight, bc = bias, oc = out;
    tape->record([xc, wc, bc, oc, cin, len, cout, kw, pad, lout]() mutable {
      if (!oc.has_grad()) return;
      const auto& go = oc.grad_view();
      const bool need_x = xc.requires_grad();
      const bool need_w = wc.requires_grad();
      const bool need_b = bc.requires_grad();
      double* gx = need_x ? xc.grad().data() : nullptr;
      double* gw = need_w ? wc.grad().data() : nullptr;
      double* gb = need_b ? bc.grad().data() : nullptr;
      const double* px = xc.data();
      const double* pw = wc.data();
      for (std::size_t o = 0; o < cout; ++o) {
        for (std::size_t i = 0; i < lout; ++i) {
          const double g = go[o * lout + i];
          if (g == 0.0) continue;
          if (need_b) gb[o] += g;
          for (std::size_t c = 0; c < cin; ++c) {
            for (std::size_t t = 0; t < kw; ++t) {
              const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(i + t) -
                                         static_cast<std::ptrdiff_t>(pad);
              if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
              if (need_w) gw[(o * cin + c) * kw + t] += g * px[c * len + src];
              if (need_x) gx[c * len + src] += g * pw[(o * cin + c) * kw + t];
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 BnState& state, bool training, Tape* tape) {
  if (x.rank() != 2) {
    throw DimensionError("batchnorm: expected x[C x L], got " + shape_str(x.shape()));
  }
  const std::size_t c = x.shape()[0], l = x.shape()[1];
  if (gamma.size() != c || beta.size() != c || state.channels() != c) {
    throw DimensionError("batchnorm: gamma/beta/state channel mismatch for input " +
                         shape_str(x.shape()));
  }
  if (l == 0) {
    throw DegenerateBatchError("batchnorm: zero elements per channel");
  }
  Tensor out({c, l}, 0.0);
  std::vector<double> mean(c, 0.0), invstd(c, 0.0);
  const double* px = x.data();
  double* po = out.data();
  const double n = static_cast<double>(l);

  if (training) {
    for (std::size_t i = 0; i < c; ++i) {
      double m = 0.0;
      for (std::size_t j = 0; j < l; ++j) m += px[i * l + j];
      m /= n;
      double var = 0.0;
      for (std::size_t j = 0; j < l; ++j) {
        const double d = px[i * l + j] - m;
        var += d * d;
      }
      var /= n;
      mean[i] = m;
      invstd[i] = 1.0 / std::sqrt(var + state.eps);
      state.running_mean[i] = state.momentum * state.running_mean[i] + (1.0 - state.momentum) * m;
      state.running_var[i] = state.momentum * state.running_var[i] + (1.0 - state.momentum) * var;
    }
  } else {
    for (std::size_t i = 0; i < c; ++i) {
      mean[i] = state.running_mean[i];
      invstd[i] = 1.0 / std::sqrt(state.running_var[i] + state.eps);
    }
  }

  for (std::size_t i = 0; i < c; ++i) {
    const double g = gamma.data()[i], b = beta.data()[i];
    for (std::size_t j = 0; j < l; ++j) {
      po[i * l + j] = g * (px[i * l + j] - mean[i]) * invstd[i] + b;
    }
  }

  if (track(tape, {&x, &gamma, &beta})) {
    out.set_requires_grad(true);
    Tensor xc = x, gc = gamma, bc = beta, oc = out;
    tape->record([xc, gc, bc, oc, c, l, n, training, mean = std::move(mean),
                  invstd = std::move(invstd)]() mutable {
      if (!oc.has_grad()) return;
      const auto& go = oc.grad_view();
      const double* px = xc.data();
      for (std::size_t i = 0; i < c; ++i) {
        const double is = invstd[i];
        const double g = gc.data()[i];
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t j = 0; j < l; ++j) {
          const double dy = go[i * l + j];
          sum_dy += dy;
          sum_dy_xhat += dy * (px[i * l + j] - mean[i]) * is;
        }
        if (gc.requires_grad()) gc.grad()[i] += sum_dy_xhat;
        if (bc.requires_grad()) bc.grad()[i] += sum_dy;
        if (xc.requires_grad()) {
          auto& gx = xc.grad();
          if (training) {
            // dx via batch statistics: dx = (g*is/N) * (N*dy - sum(dy) - xhat*sum(dy*xhat))
            for (std::size_t j = 0; j < l; ++j) {
              const double xhat = (px[i * l + j] - mean[i]) * is;
              const double dy = go[i * l + j];
              gx[i * l + j] += (g * is / n) * (n * dy - sum_dy - xhat * sum_dy_xhat);
            }
          } else {
            for (std::size_t j = 0; j < l; ++j) gx[i * l + j] += go[i * l + j] * g * is;
          }
        }
      }
    });
  }
  return out;
}

std::vector<double> softmax_row(const std::vector<double>& logits) {
  std::vector<double> p(logits.size());
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    s += p[i];
  }
  for (auto& v : p) v /= s;
  return p;
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                             Tape* tape) {
  if (logits.rank() != 2) {
    throw DimensionError("softmax_cross_entropy: expected logits[B x n], got " +
                         shape_str(logits.shape()));
  }
  const std::size_t bsz = logits.shape()[0], n = logits.shape()[1];
  if (labels.size() != bsz) {
    throw DimensionError("softmax_cross_entropy: batch size " + std::to_string(bsz) +
                         " but " + std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= n) {
      throw LabelError("label " + std::to_string(y) + " out of range [0, " +
                       std::to_string(n) + ")");
    }
  }
  std::vector<double> probs(bsz * n);
  double loss = 0.0;
  const double* pl = logits.data();
  for (std::size_t b = 0; b < bsz; ++b) {
    double m = pl[b * n];
    for (std::size_t j = 1; j < n; ++j) m = std::max(m, pl[b * n + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      probs[b * n + j] = std::exp(pl[b * n + j] - m);
      s += probs[b * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) probs[b * n + j] /= s;
    loss -= pl[b * n + labels[b]] - m - std::log(s);
  }
  loss /= static_cast<double>(bsz);
  Tensor out = Tensor::scalar(loss);
  if (track(tape, {&logits})) {
    out.set_requires_grad(true);
    Tensor lc = logits, oc = out;
    tape->record([lc, oc, labels, bsz, n, probs = std::move(probs)]() mutable {
      if (!oc.has_grad()) return;
      const double g = oc.grad_view()[0];
      auto& gl = lc.grad();
      const double inv_b = 1.0 / static_cast<double>(bsz);
      for (std::size_t b = 0; b < bsz; ++b) {
        for (std::size_t j = 0; j < n; ++j) {
          double d = probs[b * n + j];
          if (j == static_cast<std::size_t>(labels[b])) d -= 1.0;
          gl[b * n + j] += g * d * inv_b;
        }
      }
    });
  }
  return out;
}

Tensor gather_last(const Tensor& table, const std::vector<int>& indices, Tape* tape) {
  if (table.rank() < 1) {
    throw DimensionError("gather_last: table must have rank >= 1");
  }
  const std::size_t v = table.shape().back();
  const std::size_t rows = table.size() / v;
  for (int idx : indices) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= v) {
      throw VocabularyError("index " + std::to_string(idx) + " out of range [0, " +
                            std::to_string(v) + ")");
    }
  }
  std::vector<std::size_t> out_shape = table.shape();
  out_shape.back() = indices.size();
  const std::size_t m = indices.size();
  Tensor out(out_shape, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < m; ++i) {
      out.data()[r * m + i] = table.data()[r * v + static_cast<std::size_t>(indices[i])];
    }
  }
  if (track(tape, {&table})) {
    out.set_requires_grad(true);
    Tensor tc = table, oc = out;
    tape->record([tc, oc, indices, rows, v, m]() mutable {
      if (!oc.has_grad()) return;
      const auto& go = oc.grad_view();
      auto& gt = tc.grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < m; ++i) {
          gt[r * v + static_cast<std::size_t>(indices[i])] += go[r * m + i];
        }
      }
    });
  }
  return out;
}

Tensor narrow(const Tensor& x, std::size_t axis, std::size_t start,
              std::size_t len, Tape* tape) {
  if (axis >= x.rank() || start + len > x.shape()[axis]) {
    throw DimensionError("narrow: range [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") invalid on axis " +
                         std::to_string(axis) + " of " + shape_str(x.shape()));
  }
  const AxisSplit s = split_axis(x.shape(), axis);
  std::vector<std::size_t> out_shape = x.shape();
  out_shape[axis] = len;
  Tensor out(out_shape, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    const double* src = x.data() + (o * s.axis + start) * s.inner;
    double* dst = out.data() + o * len * s.inner;
    std::memcpy(dst, src, len * s.inner * sizeof(double));
  }
  if (track(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor xc = x, oc = out;
    tape->record([xc, oc, s, start, len]() mutable {
      if (!oc.has_grad()) return;
      const auto& go = oc.grad_view();
      auto& gx = xc.grad();
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t a = 0; a < len; ++a) {
          const std::size_t src = (o * len + a) * s.inner;
          const std::size_t dst = (o * s.axis + start + a) * s.inner;
          for (std::size_t i = 0; i < s.inner; ++i) gx[dst + i] += go[src + i];
        }
      }
    });
  }
  return out;
}

Tensor concat(const std::vector<Tensor>& xs, std::size_t axis, Tape* tape) {
  if (xs.empty()) {
    throw DimensionError("concat: no inputs");
  }
  const std::size_t rank = xs[0].rank();
  if (axis >= rank) {
    throw DimensionError("concat: axis " + std::to_string(axis) +
                         " out of range for rank " + std::to_string(rank));
  }
  std::size_t total = 0;
  for (const Tensor& t : xs) {
    if (t.rank() != rank) throw DimensionError("concat: rank mismatch");
    for (std::size_t d = 0; d < rank; ++d) {
      if (d != axis && t.shape()[d] != xs[0].shape()[d]) {
        throw DimensionError("concat: shape mismatch " + shape_str(t.shape()) +
                             " vs " + shape_str(xs[0].shape()));
      }
    }
    total += t.shape()[axis];
  }
  std::vector<std::size_t> out_shape = xs[0].shape();
  out_shape[axis] = total;
  Tensor out(out_shape, 0.0);
  const AxisSplit so = split_axis(out_shape, axis);
  std::size_t offset = 0;
  for (const Tensor& t : xs) {
    const std::size_t alen = t.shape()[axis];
    for (std::size_t o = 0; o < so.outer; ++o) {
      const double* src = t.data() + o * alen * so.inner;
      double* dst = out.data() + (o * so.axis + offset) * so.inner;
      std::memcpy(dst, src, alen * so.inner * sizeof(double));
    }
    offset += alen;
  }
  bool any_grad = false;
  if (tape) {
    for (const Tensor& t : xs) any_grad = any_grad || t.requires_grad();
  }
  if (any_grad) {
    out.set_requires_grad(true);
    std::vector<Tensor> inputs = xs;
    Tensor oc = out;
    tape->record([inputs, oc, so]() mutable {
      if (!oc.has_grad()) return;
      const auto& go = oc.grad_view();
      std::size_t offset = 0;
      for (Tensor& t : inputs) {
        const std::size_t len = t.size() / (so.outer * so.inner);
        if (t.requires_grad()) {
          auto& gt = t.grad();
          for (std::size_t o = 0; o < so.outer; ++o) {
            for (std::size_t a = 0; a < len; ++a) {
              const std::size_t dst = (o * len + a) * so.inner;
              const std::size_t src = (o * so.axis + offset + a) * so.inner;
              for (std::size_t i = 0; i < so.inner; ++i) gt[dst + i] += go[src + i];
            }
          }
        }
        offset += len;
      }
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, std::vector<std::size_t> shape, Tape* tape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(shape));
  }
  Tensor out(std::move(shape), x.values());
  if (track(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor xc = x, oc = out;
    tape->record([xc, oc]() mutable {
      if (!oc.has_grad()) return;
      const auto& go = oc.grad_view();
      auto& gx = xc.grad();
      for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
    });
  }
  return out;
}

Tensor transpose(const Tensor& x, Tape* tape) {
  if (x.rank() != 2) {
    throw DimensionError("transpose: expected rank 2, got " + shape_str(x.shape()));
  }
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  Tensor out({c, r}, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.data()[j * r + i] = x.data()[i * c + j];
  if (track(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor xc = x, oc = out;
    tape->record([xc, oc, r, c]() mutable {
      if (!oc.has_grad()) return;
      const auto& go = oc.grad_view();
      auto& gx = xc.grad();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += go[j * r + i];
    });
  }
  return out;
}

Tensor sigmoid(const Tensor& x, Tape* tape) {
  Tensor out(x.shape(), 0.0);
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x.data()[i];
    out.data()[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                             : std::exp(v) / (1.0 + std::exp(v));
  }
  if (track(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor xc = x, oc = out;
    tape->record([xc, oc, n]() mutable {
      if (!oc.has_grad()) return;
      const auto& go = oc.grad_view();
      auto& gx = xc.grad();
      for (std::size_t i = 0; i < n; ++i) {
        const double y = oc.data()[i];
        gx[i] += go[i] * y * (1.0 - y);
      }
    });
  }
  return out;
}

Tensor tanh_act(const Tensor& x, Tape* tape) {
  Tensor out(x.shape(), 0.0);
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = std::tanh(x.data()[i]);
  if (track(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor xc = x, oc = out;
    tape->record([xc, oc, n]() mutable {
      if (!oc.has_grad()) return;
      const auto& go = oc.grad_view();
      auto& gx = xc.grad();
      for (std::size_t i = 0; i < n; ++i) {
        const double y = oc.data()[i];
        gx[i] += go[i] * (1.0 - y * y);
      }
    });
  }
  return out;
}

}  // namespace regemb
