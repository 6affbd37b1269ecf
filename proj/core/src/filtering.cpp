#include "regemb/filtering.hpp"

#include <string>

namespace regemb {

Tensor generalized_filter(const Tensor& x_padded, const Tensor& w, Pool g,
                          Tape* tape) {
  if (x_padded.rank() != 2 || w.rank() != 2 || w.shape()[1] != x_padded.shape()[0]) {
    throw DimensionError("generalized_filter: expected x[h x L], w[r x h], got " +
                         shape_str(x_padded.shape()) + " and " + shape_str(w.shape()));
  }
  const std::size_t h = x_padded.shape()[0];
  const std::size_t lp = x_padded.shape()[1];
  const std::size_t r = w.shape()[0];
  if (lp < r) {
    throw DimensionError("generalized_filter: window " + std::to_string(r) +
                         " exceeds padded length " + std::to_string(lp));
  }
  const std::size_t lout = lp - r + 1;
  Tensor out({lout}, 0.0);
  const double* px = x_padded.data();
  const double* pw = w.data();
  std::vector<std::size_t> argmax;
  if (g == Pool::Max) argmax.assign(lout, 0);

  for (std::size_t i = 0; i < lout; ++i) {
    double acc = 0.0;
    bool first = true;
    std::size_t best = 0;
    for (std::size_t k = 0; k < r; ++k) {
      double dot = 0.0;
      for (std::size_t j = 0; j < h; ++j) dot += pw[k * h + j] * px[j * lp + i + k];
      if (g == Pool::Sum) {
        acc += dot;
      } else if (first || dot > acc) {
        acc = dot;
        best = k;
        first = false;
      }
    }
    out.data()[i] = acc;
    if (g == Pool::Max) argmax[i] = best;
  }

  const bool needs = tape && (x_padded.requires_grad() || w.requires_grad());
  if (needs) {
    out.set_requires_grad(true);
    Tensor xc = x_padded, wc = w, oc = out;
    tape->record([xc, wc, oc, h, lp, r, lout, g, argmax = std::move(argmax)]() mutable {
      if (!oc.has_grad()) return;
      const auto& go = oc.grad_view();
      const double* px = xc.data();
      const double* pw = wc.data();
      const bool need_x = xc.requires_grad();
      const bool need_w = wc.requires_grad();
      double* gx = need_x ? xc.grad().data() : nullptr;
      double* gw = need_w ? wc.grad().data() : nullptr;
      for (std::size_t i = 0; i < lout; ++i) {
        const double gi = go[i];
        if (gi == 0.0) continue;
        const std::size_t k0 = g == Pool::Max ? argmax[i] : 0;
        const std::size_t k1 = g == Pool::Max ? argmax[i] + 1 : r;
        for (std::size_t k = k0; k < k1; ++k) {
          for (std::size_t j = 0; j < h; ++j) {
            if (need_w) gw[k * h + j] += gi * px[j * lp + i + k];
            if (need_x) gx[j * lp + i + k] += gi * pw[k * h + j];
          }
        }
      }
    });
  }
  return out;
}

Tensor project_and_pool(const Tensor& e_padded, const FilterBank& bank, Pool g,
                        Tape* tape) {
  const Tensor& k = bank.k;
  if (e_padded.rank() != 2 || k.rank() != 3) {
    throw DimensionError("project_and_pool: expected e[h x Lp], k[h x r x L]");
  }
  const std::size_t h = e_padded.shape()[0];
  const std::size_t lp = e_padded.shape()[1];
  const std::size_t r = k.shape()[1];
  const std::size_t len = k.shape()[2];
  if (k.shape()[0] != h || lp != len + r - 1) {
    throw DimensionError("project_and_pool: bank " + shape_str(k.shape()) +
                         " inconsistent with padded input " +
                         shape_str(e_padded.shape()));
  }
  Tensor out({h, len}, 0.0);
  const double* pe = e_padded.data();
  const double* pk = k.data();
  std::vector<std::size_t> argmax;
  if (g == Pool::Max) argmax.assign(h * len, 0);

  for (std::size_t j = 0; j < h; ++j) {
    for (std::size_t i = 0; i < len; ++i) {
      double acc = 0.0;
      bool first = true;
      std::size_t best = 0;
      for (std::size_t t = 0; t < r; ++t) {
        const double p = pk[(j * r + t) * len + i] * pe[j * lp + i + t];
        if (g == Pool::Sum) {
          acc += p;
        } else if (first || p > acc) {
          acc = p;
          best = t;
          first = false;
        }
      }
      out.data()[j * len + i] = acc;
      if (g == Pool::Max) argmax[j * len + i] = best;
    }
  }

  const bool needs = tape && (e_padded.requires_grad() || k.requires_grad());
  if (needs) {
    out.set_requires_grad(true);
    Tensor ec = e_padded, kc = k, oc = out;
    tape->record([ec, kc, oc, h, lp, r, len, g, argmax = std::move(argmax)]() mutable {
      if (!oc.has_grad()) return;
      const auto& go = oc.grad_view();
      const double* pe = ec.data();
      const double* pk = kc.data();
      const bool need_e = ec.requires_grad();
      const bool need_k = kc.requires_grad();
      double* ge = need_e ? ec.grad().data() : nullptr;
      double* gk = need_k ? kc.grad().data() : nullptr;
      for (std::size_t j = 0; j < h; ++j) {
        for (std::size_t i = 0; i < len; ++i) {
          const double gi = go[j * len + i];
          if (gi == 0.0) continue;
          const std::size_t t0 = g == Pool::Max ? argmax[j * len + i] : 0;
          const std::size_t t1 = g == Pool::Max ? argmax[j * len + i] + 1 : r;
          for (std::size_t t = t0; t < t1; ++t) {
            if (need_k) gk[(j * r + t) * len + i] += gi * pe[j * lp + i + t];
            if (need_e) ge[j * lp + i + t] += gi * pk[(j * r + t) * len + i];
          }
        }
      }
    });
  }
  return out;
}

Tensor sequence_embedding(const Tensor& r_sequence, Tape* tape) {
  if (r_sequence.rank() != 2) {
    throw DimensionError("sequence_embedding: expected h x L, got " +
                         shape_str(r_sequence.shape()));
  }
  if (r_sequence.shape()[1] == 0) {
    throw EmptyDocumentError("sequence_embedding: zero positions");
  }
  return reduce(r_sequence, 1, Reduce::Sum, tape);
}

FilterBank lcu_filters(const EncodedDocument& doc, const LcuTable& lcu, Tape* tape) {
  if (lcu.table.rank() != 3) {
    throw DimensionError("lcu_filters: table must be h x r x v");
  }
  const std::size_t len = doc.unpadded_length();
  if (len == 0) {
    throw EmptyDocumentError("lcu_filters: document has no unpadded tokens");
  }
  const std::size_t c = static_cast<std::size_t>(doc.pad_radius);
  std::vector<int> centers(doc.token_indices.begin() + c,
                           doc.token_indices.end() - c);
  return FilterBank{gather_last(lcu.table, centers, tape)};
}

Tensor dataset_filter(const Tensor& e_padded, const ConvFilterParams& params,
                      Tape* tape) {
  if (params.weight.rank() != 3 || params.bias.rank() != 1 ||
      params.weight.shape()[0] != params.bias.shape()[0]) {
    throw DimensionError("dataset_filter: weight must be h_out x h x r with matching bias");
  }
  const std::size_t h_out = params.weight.shape()[0];
  const std::size_t h = params.weight.shape()[1];
  const std::size_t r = params.weight.shape()[2];
  std::vector<Tensor> rows;
  rows.reserve(h_out);
  for (std::size_t o = 0; o < h_out; ++o) {
    // weight[o] as a Definition-style r x h filter
    Tensor slice = narrow(params.weight, 0, o, 1, tape);
    Tensor w = transpose(reshape(slice, {h, r}, tape), tape);
    Tensor y = generalized_filter(e_padded, w, Pool::Sum, tape);
    rows.push_back(reshape(y, {1, y.size()}, tape));
  }
  Tensor stacked = concat(rows, 0, tape);
  return add_channel_bias(stacked, params.bias, tape);
}

}  // namespace regemb
