#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "regemb/filtering.hpp"
#include "regemb/ops.hpp"
#include "regemb/rng.hpp"
#include "regemb/tensor.hpp"

namespace regemb {

enum class MetaNetKind { Cnn, SmallCnn, FactoredCnn, Lstm, Gru, EnsembleCnnLstm };

const char* meta_net_kind_name(MetaNetKind kind);
MetaNetKind meta_net_kind_from_name(const std::string& name);

/// Conv -> batch-norm stack. Channel count depends on the variant:
/// h*(2c+1) for Cnn, h for SmallCnn, u for FactoredCnn.
struct ConvStack {
  Tensor weight;  // {channels, h, 2c+1}
  Tensor bias;    // {channels}
  Tensor gamma;   // {channels}
  Tensor beta;    // {channels}
  BnState bn;
};

struct GateParams {
  Tensor wx;  // {H, h}
  Tensor wh;  // {H, H}
  Tensor b;   // {H}
};

/// Single-layer unidirectional recurrence with hidden size H = h*(2c+1).
/// LSTM gate order: input, forget, cell, output. GRU gate order: reset,
/// update, candidate.
struct RecurrentStack {
  std::vector<GateParams> gates;
  bool gru = false;
};

struct MetaNetParams {
  MetaNetKind kind = MetaNetKind::Cnn;
  int h = 0;
  int c = 0;
  int u = 0;  // FactoredCnn rank

  std::optional<ConvStack> conv;
  Tensor factor;  // FactoredCnn: P {u, h*(2c+1)}
  std::optional<RecurrentStack> rec;

  int region() const { return 2 * c + 1; }
};

MetaNetParams init_meta_net(MetaNetKind kind, int h, int c, int u, Rng& rng);

/// Instance-level provider: one FilterBank per document, generated from the
/// full unpadded embedded sequences. In training mode the batch-norm variants
/// normalize with statistics pooled over every position of every document in
/// the batch (and update the running statistics); recurrent variants have no
/// cross-document coupling.
std::vector<FilterBank> meta_filter_banks(MetaNetParams& params,
                                          const std::vector<Tensor>& embedded_docs,
                                          bool training, Tape* tape);

std::vector<std::pair<std::string, Tensor*>> meta_named_parameters(MetaNetParams& params);
std::vector<std::pair<std::string, BnState*>> meta_named_bn_states(MetaNetParams& params);

}  // namespace regemb
