#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "regemb/filtering.hpp"
#include "regemb/meta_net.hpp"
#include "regemb/tensor.hpp"
#include "regemb/text.hpp"

namespace regemb {

enum class Method { Are, Lre, Conv };

const char* method_name(Method m);
Method method_from_name(const std::string& name);

FilterLevel method_level(Method m);

/// Full architectural description: method, meta-network variant, embedding
/// size h, region radius c, class count n, vocabulary size v and factored
/// rank u. Drives construction, parameter counting and checkpoints.
struct ModelSpec {
  Method method = Method::Are;
  MetaNetKind meta = MetaNetKind::Cnn;
  int h = 256;
  int c = 4;
  int n = 0;
  int v = 0;
  int u = 32;

  int region() const { return 2 * c + 1; }
  void validate() const;

  bool operator==(const ModelSpec&) const = default;
};

struct ModelParams {
  Tensor embedding;  // {h, v}
  std::optional<MetaNetParams> meta;     // method == Are
  std::optional<LcuTable> lcu;           // method == Lre
  std::optional<ConvFilterParams> conv;  // method == Conv
  Tensor fc_weight;  // {n, h}
  Tensor fc_bias;    // {n}
};

ModelParams init_model(const ModelSpec& spec, Rng& rng);

/// Trainable tensors, in a stable order.
std::vector<std::pair<std::string, Tensor*>> named_parameters(ModelParams& params);
/// Batch-norm running statistics (persisted, not trained).
std::vector<std::pair<std::string, BnState*>> named_bn_states(ModelParams& params);
/// Total number of trainable scalars actually instantiated.
long long live_parameter_count(ModelParams& params);

struct BatchTrace {
  Tensor logits;                 // {B, n}
  std::vector<Tensor> e_padded;  // per-document embedded sequences {h, L+2c}
};

/// End-to-end forward pass over a batch of documents. Softmax is applied only
/// inside the loss or at prediction time.
BatchTrace forward_batch(const std::vector<const EncodedDocument*>& docs,
                         ModelParams& params, const ModelSpec& spec,
                         bool training, Tape* tape);

/// Single-document logits {n}.
Tensor forward(const EncodedDocument& doc, ModelParams& params,
               const ModelSpec& spec, bool training, Tape* tape);

struct Prediction {
  int label = 0;
  std::vector<double> probs;
};

/// Eval-mode argmax prediction with softmax probabilities.
Prediction predict(const EncodedDocument& doc, ModelParams& params,
                   const ModelSpec& spec);

}  // namespace regemb
