#include "regemb/meta_net.hpp"

#include <string>

namespace regemb {

const char* meta_net_kind_name(MetaNetKind kind) {
  switch (kind) {
    case MetaNetKind::Cnn: return "cnn";
    case MetaNetKind::SmallCnn: return "smallcnn";
    case MetaNetKind::FactoredCnn: return "factoredcnn";
    case MetaNetKind::Lstm: return "lstm";
    case MetaNetKind::Gru: return "gru";
    case MetaNetKind::EnsembleCnnLstm: return "ensemble";
  }
  return "?";
}

MetaNetKind meta_net_kind_from_name(const std::string& name) {
  if (name == "cnn") return MetaNetKind::Cnn;
  if (name == "smallcnn") return MetaNetKind::SmallCnn;
  if (name == "factoredcnn") return MetaNetKind::FactoredCnn;
  if (name == "lstm") return MetaNetKind::Lstm;
  if (name == "gru") return MetaNetKind::Gru;
  if (name == "ensemble") return MetaNetKind::EnsembleCnnLstm;
  throw ConfigError("unknown meta-network kind: " + name);
}

namespace {

ConvStack init_conv_stack(std::size_t channels, std::size_t h, std::size_t r,
                          Rng& rng) {
  ConvStack s;
  s.weight = glorot_uniform({channels, h, r}, h * r, channels * r, rng);
  s.bias = Tensor({channels}, 0.0, true);
  s.gamma = Tensor({channels}, 1.0, true);
  s.beta = Tensor({channels}, 0.0, true);
  s.bn = BnState(channels);
  return s;
}

RecurrentStack init_recurrent_stack(std::size_t gates, std::size_t hidden,
                                    std::size_t input, bool gru, Rng& rng) {
  RecurrentStack s;
  s.gru = gru;
  for (std::size_t g = 0; g < gates; ++g) {
    GateParams gate;
    gate.wx = glorot_uniform({hidden, input}, input, hidden, rng);
    gate.wh = glorot_uniform({hidden, hidden}, hidden, hidden, rng);
    gate.b = Tensor({hidden}, 0.0, true);
    s.gates.push_back(std::move(gate));
  }
  return s;
}

}  // namespace

MetaNetParams init_meta_net(MetaNetKind kind, int h, int c, int u, Rng& rng) {
  if (h < 1 || c < 0) {
    throw ConfigError("meta net requires h >= 1 and c >= 0");
  }
  const std::size_t hs = static_cast<std::size_t>(h);
  const std::size_t r = static_cast<std::size_t>(2 * c + 1);
  const std::size_t hr = hs * r;
  MetaNetParams p;
  p.kind = kind;
  p.h = h;
  p.c = c;
  p.u = u;
  switch (kind) {
    case MetaNetKind::Cnn:
      p.conv = init_conv_stack(hr, hs, r, rng);
      break;
    case MetaNetKind::SmallCnn:
      p.conv = init_conv_stack(hs, hs, r, rng);
      break;
    case MetaNetKind::FactoredCnn: {
      if (u < 1 || static_cast<std::size_t>(u) >= hr) {
        throw ConfigError("factored rank u must satisfy 1 <= u < h*(2c+1)");
      }
      const std::size_t us = static_cast<std::size_t>(u);
      p.conv = init_conv_stack(us, hs, r, rng);
      p.factor = glorot_uniform({us, hr}, us, hr, rng);
      break;
    }
    case MetaNetKind::Lstm:
      p.rec = init_recurrent_stack(4, hr, hs, false, rng);
      break;
    case MetaNetKind::Gru:
      p.rec = init_recurrent_stack(3, hr, hs, true, rng);
      break;
    case MetaNetKind::EnsembleCnnLstm:
      p.conv = init_conv_stack(hr, hs, r, rng);
      p.rec = init_recurrent_stack(4, hr, hs, false, rng);
      break;
  }
  return p;
}

namespace {

// Conv stack over a batch: convolve each document, normalize jointly, return
// the per-document channel maps.
std::vector<Tensor> conv_stack_forward(ConvStack& stack, int pad,
                                       const std::vector<Tensor>& docs,
                                       bool training, Tape* tape) {
  std::vector<Tensor> convs;
  convs.reserve(docs.size());
  std::vector<std::size_t> lengths;
  for (const Tensor& e : docs) {
    convs.push_back(conv1d(e, stack.weight, stack.bias,
                           static_cast<std::size_t>(pad), tape));
    lengths.push_back(convs.back().shape()[1]);
  }
  Tensor joint = convs.size() == 1 ? convs[0] : concat(convs, 1, tape);
  Tensor normed = batchnorm(joint, stack.gamma, stack.beta, stack.bn, training, tape);
  std::vector<Tensor> out;
  out.reserve(docs.size());
  if (docs.size() == 1) {
    out.push_back(normed);
  } else {
    std::size_t offset = 0;
    for (std::size_t len : lengths) {
      out.push_back(narrow(normed, 1, offset, len, tape));
      offset += len;
    }
  }
  return out;
}

Tensor recurrent_filters(const RecurrentStack& rec, const Tensor& e, Tape* tape) {
  const std::size_t len = e.shape()[1];
  const std::size_t hidden = rec.gates[0].b.size();
  Tensor ones_col = Tensor::ones({hidden, 1});

  std::vector<Tensor> bias_cols;
  for (const GateParams& g : rec.gates) {
    bias_cols.push_back(reshape(g.b, {hidden, 1}, tape));
  }
  auto gate_pre = [&](std::size_t g, const Tensor& x, const Tensor& hprev) {
    Tensor pre = add(matmul(rec.gates[g].wx, x, tape),
                     matmul(rec.gates[g].wh, hprev, tape), tape);
    return add(pre, bias_cols[g], tape);
  };

  Tensor hprev = Tensor::zeros({hidden, 1});
  Tensor cprev = Tensor::zeros({hidden, 1});
  std::vector<Tensor> cols;
  cols.reserve(len);
  for (std::size_t i = 0; i < len; ++i) {
    Tensor x = narrow(e, 1, i, 1, tape);
    if (!rec.gru) {
      Tensor ig = sigmoid(gate_pre(0, x, hprev), tape);
      Tensor fg = sigmoid(gate_pre(1, x, hprev), tape);
      Tensor gg = tanh_act(gate_pre(2, x, hprev), tape);
      Tensor og = sigmoid(gate_pre(3, x, hprev), tape);
      Tensor cell = add(elemwise_mul(fg, cprev, tape), elemwise_mul(ig, gg, tape), tape);
      hprev = elemwise_mul(og, tanh_act(cell, tape), tape);
      cprev = cell;
    } else {
      Tensor rg = sigmoid(gate_pre(0, x, hprev), tape);
      Tensor zg = sigmoid(gate_pre(1, x, hprev), tape);
      // candidate uses the reset-scaled previous state
      Tensor pre_n = add(matmul(rec.gates[2].wx, x, tape),
                         matmul(rec.gates[2].wh, elemwise_mul(rg, hprev, tape), tape),
                         tape);
      Tensor ng = tanh_act(add(pre_n, bias_cols[2], tape), tape);
      Tensor keep = add(ones_col, scale(zg, -1.0, tape), tape);  // 1 - z
      hprev = add(elemwise_mul(keep, ng, tape), elemwise_mul(zg, hprev, tape), tape);
    }
    cols.push_back(hprev);
  }
  return cols.size() == 1 ? cols[0] : concat(cols, 1, tape);  // {hidden, len}
}

}  // namespace

std::vector<FilterBank> meta_filter_banks(MetaNetParams& params,
                                          const std::vector<Tensor>& embedded_docs,
                                          bool training, Tape* tape) {
  const std::size_t hs = static_cast<std::size_t>(params.h);
  const std::size_t r = static_cast<std::size_t>(params.region());
  std::vector<FilterBank> banks(embedded_docs.size());

  for (const Tensor& e : embedded_docs) {
    if (e.rank() != 2 || e.shape()[0] != hs) {
      throw DimensionError("meta_filter_banks: expected h x L embeddings");
    }
    if (e.shape()[1] == 0) {
      throw EmptyDocumentError("meta_filter_banks: empty document");
    }
  }

  const bool has_conv_branch = params.kind == MetaNetKind::Cnn ||
                               params.kind == MetaNetKind::SmallCnn ||
                               params.kind == MetaNetKind::FactoredCnn ||
                               params.kind == MetaNetKind::EnsembleCnnLstm;

  std::vector<Tensor> conv_banks;  // per doc {h, r, L}
  if (has_conv_branch) {
    std::vector<Tensor> maps =
        conv_stack_forward(*params.conv, params.c, embedded_docs, training, tape);
    conv_banks.reserve(maps.size());
    for (std::size_t d = 0; d < maps.size(); ++d) {
      const std::size_t len = maps[d].shape()[1];
      switch (params.kind) {
        case MetaNetKind::SmallCnn: {
          // same h-vector filter broadcast across every window position
          Tensor col = reshape(maps[d], {hs, 1, len}, tape);
          std::vector<Tensor> copies(r, col);
          conv_banks.push_back(concat(copies, 1, tape));
          break;
        }
        case MetaNetKind::FactoredCnn: {
          Tensor expanded =
              matmul(transpose(params.factor, tape), maps[d], tape);  // {h*r, L}
          conv_banks.push_back(reshape(expanded, {hs, r, len}, tape));
          break;
        }
        default:
          conv_banks.push_back(reshape(maps[d], {hs, r, len}, tape));
          break;
      }
    }
  }

  std::vector<Tensor> rec_banks;
  if (params.kind == MetaNetKind::Lstm || params.kind == MetaNetKind::Gru ||
      params.kind == MetaNetKind::EnsembleCnnLstm) {
    rec_banks.reserve(embedded_docs.size());
    for (const Tensor& e : embedded_docs) {
      Tensor hidden = recurrent_filters(*params.rec, e, tape);
      rec_banks.push_back(reshape(hidden, {hs, r, e.shape()[1]}, tape));
    }
  }

  for (std::size_t d = 0; d < embedded_docs.size(); ++d) {
    switch (params.kind) {
      case MetaNetKind::Lstm:
      case MetaNetKind::Gru:
        banks[d] = FilterBank{rec_banks[d]};
        break;
      case MetaNetKind::EnsembleCnnLstm:
        banks[d] = FilterBank{elemwise_mul(conv_banks[d], rec_banks[d], tape)};
        break;
      default:
        banks[d] = FilterBank{conv_banks[d]};
        break;
    }
  }
  return banks;
}

std::vector<std::pair<std::string, Tensor*>> meta_named_parameters(MetaNetParams& params) {
  std::vector<std::pair<std::string, Tensor*>> out;
  if (params.conv) {
    out.emplace_back("meta.conv.weight", &params.conv->weight);
    out.emplace_back("meta.conv.bias", &params.conv->bias);
    out.emplace_back("meta.bn.gamma", &params.conv->gamma);
    out.emplace_back("meta.bn.beta", &params.conv->beta);
  }
  if (params.factor.defined()) {
    out.emplace_back("meta.factor", &params.factor);
  }
  if (params.rec) {
    for (std::size_t g = 0; g < params.rec->gates.size(); ++g) {
      const std::string prefix = "meta.rec.gate" + std::to_string(g);
      out.emplace_back(prefix + ".wx", &params.rec->gates[g].wx);
      out.emplace_back(prefix + ".wh", &params.rec->gates[g].wh);
      out.emplace_back(prefix + ".b", &params.rec->gates[g].b);
    }
  }
  return out;
}

std::vector<std::pair<std::string, BnState*>> meta_named_bn_states(MetaNetParams& params) {
  std::vector<std::pair<std::string, BnState*>> out;
  if (params.conv) {
    out.emplace_back("meta.bn", &params.conv->bn);
  }
  return out;
}

}  // namespace regemb
