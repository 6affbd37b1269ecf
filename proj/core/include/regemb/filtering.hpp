#pragma once

#include <vector>

#include "regemb/ops.hpp"
#include "regemb/tensor.hpp"
#include "regemb/text.hpp"

namespace regemb {

enum class Pool { Max, Sum };

/// Filtering levels: shared filters learned per dataset, filters looked up
/// per word, filters generated per instance.
enum class FilterLevel { Dataset, Word, Instance };

/// One h x (2c+1) filter matrix per unpadded sequence position, stored as a
/// single {h, 2c+1, L} tensor.
struct FilterBank {
  Tensor k;

  std::size_t channels() const { return k.shape()[0]; }
  std::size_t window() const { return k.shape()[1]; }
  std::size_t length() const { return k.shape()[2]; }
};

/// Sliding-window filtering with a single shared filter w[r x h]: for each
/// output position i, y_i = g(w_0.x_i, ..., w_{r-1}.x_{i+r-1}). Output has
/// length L_padded - r + 1. With g = Sum this is 1-d convolution with one
/// output channel.
Tensor generalized_filter(const Tensor& x_padded, const Tensor& w, Pool g,
                          Tape* tape);

/// Per-position filtering: p_i = K_i (*) [e_{i-c}, ..., e_{i+c}] followed by
/// pooling over the window dimension per channel. e_padded is h x (L + 2c),
/// the bank covers L positions; output is h x L.
Tensor project_and_pool(const Tensor& e_padded, const FilterBank& bank, Pool g,
                        Tape* tape);

/// Per-position filtering expressed through the same engine interface.
inline Tensor generalized_filter(const Tensor& x_padded, const FilterBank& bank,
                                 Pool g, Tape* tape) {
  return project_and_pool(x_padded, bank, g, tape);
}

/// Sum of region embeddings over all positions: h x L -> {h}.
Tensor sequence_embedding(const Tensor& r_sequence, Tape* tape);

/// Word-level filter table: one h x (2c+1) slice per vocabulary entry.
struct LcuTable {
  Tensor table;  // {h, 2c+1, v}
};

/// Word-level provider: K[:, :, i] is the table slice of the center word at
/// unpadded position i. Gradients flow back into the looked-up slices.
FilterBank lcu_filters(const EncodedDocument& doc, const LcuTable& lcu, Tape* tape);

/// Dataset-level (shared) filters: h stacked Definition-style filters plus a
/// per-filter bias.
struct ConvFilterParams {
  Tensor weight;  // {h_out, h, 2c+1}
  Tensor bias;    // {h_out}
};

/// Dataset-level provider: applies each shared filter with g = Sum through
/// the engine and stacks the h_out filtered sequences. Output h_out x L.
Tensor dataset_filter(const Tensor& e_padded, const ConvFilterParams& params,
                      Tape* tape);

}  // namespace regemb
