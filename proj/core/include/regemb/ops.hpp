#pragma once

#include <cstddef>
#include <vector>

#include "regemb/tensor.hpp"

namespace regemb {

enum class Reduce { Max, Sum, Mean };

/// Batch-norm running statistics. Not trainable; persisted in checkpoints.
struct BnState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.9;
  double eps = 1e-5;

  BnState() = default;
  explicit BnState(std::size_t channels)
      : running_mean(channels, 0.0), running_var(channels, 1.0) {}
  std::size_t channels() const { return running_mean.size(); }
};

// All operations are pure forward functions; when `tape` is non-null and an
// input participates in differentiation, the matching backward closure is
// recorded. Passing tape == nullptr evaluates forward only.

/// a[m x k] * b[k x p] -> [m x p]
Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape);

/// Hadamard product of same-shape tensors.
Tensor elemwise_mul(const Tensor& a, const Tensor& b, Tape* tape);

/// Elementwise sum of same-shape tensors.
Tensor add(const Tensor& a, const Tensor& b, Tape* tape);

/// x * s for scalar s.
Tensor scale(const Tensor& x, double s, Tape* tape);

/// x[C x L] + b[C] broadcast along columns.
Tensor add_channel_bias(const Tensor& x, const Tensor& b, Tape* tape);

/// Removes `axis`. Max backpropagates only to the first maximal element per
/// slice; Sum/Mean distribute uniformly (Mean scaled by 1/axis length).
Tensor reduce(const Tensor& x, std::size_t axis, Reduce mode, Tape* tape);

/// 1-d cross-correlation, stride 1, zero padding `pad` on both sides.
/// x[C_in x L], weight[C_out x C_in x kw], bias[C_out] -> [C_out x L_out]
/// with L_out = L + 2*pad - kw + 1.
Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              std::size_t pad, Tape* tape);

/// Per-channel batch normalization of x[C x L]. Training mode normalizes with
/// batch statistics over the L positions and updates the running statistics;
/// eval mode normalizes with the running statistics.
Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 BnState& state, bool training, Tape* tape);

/// Mean over the batch of -log softmax(logits[b])[labels[b]].
/// logits[B x n]; gradient is (softmax - onehot) / B.
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                             Tape* tape);

/// Gathers slices along the last axis: table[..., v] -> [..., N] where
/// out[..., i] = table[..., indices[i]]. Backward scatter-adds into the
/// gathered slices.
Tensor gather_last(const Tensor& table, const std::vector<int>& indices, Tape* tape);

/// Contiguous slice [start, start+len) along `axis`.
Tensor narrow(const Tensor& x, std::size_t axis, std::size_t start,
              std::size_t len, Tape* tape);

/// Concatenation along `axis`; all other dimensions must agree.
Tensor concat(const std::vector<Tensor>& xs, std::size_t axis, Tape* tape);

/// Same data, new shape (sizes must match).
Tensor reshape(const Tensor& x, std::vector<std::size_t> shape, Tape* tape);

/// 2-d transpose.
Tensor transpose(const Tensor& x, Tape* tape);

Tensor sigmoid(const Tensor& x, Tape* tape);
Tensor tanh_act(const Tensor& x, Tape* tape);

/// Row-wise softmax probabilities (forward only, numerically stabilized).
std::vector<double> softmax_row(const std::vector<double>& logits);

}  // namespace regemb
