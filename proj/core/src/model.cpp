#include "regemb/model.hpp"

#include <algorithm>
#include <string>

namespace regemb {

const char* method_name(Method m) {
  switch (m) {
    case Method::Are: return "are";
    case Method::Lre: return "lre";
    case Method::Conv: return "conv";
  }
  return "?";
}

Method method_from_name(const std::string& name) {
  if (name == "are") return Method::Are;
  if (name == "lre") return Method::Lre;
  if (name == "conv") return Method::Conv;
  throw ConfigError("unknown method: " + name);
}

FilterLevel method_level(Method m) {
  switch (m) {
    case Method::Are: return FilterLevel::Instance;
    case Method::Lre: return FilterLevel::Word;
    case Method::Conv: return FilterLevel::Dataset;
  }
  return FilterLevel::Dataset;
}

void ModelSpec::validate() const {
  if (h < 1) throw ConfigError("embedding size h must be >= 1");
  if (c < 0) throw ConfigError("region radius c must be >= 0");
  if (n < 2) throw ConfigError("class count n must be >= 2");
  if (v < 2) throw ConfigError("vocabulary size v must be >= 2");
  if (method == Method::Are && meta == MetaNetKind::FactoredCnn) {
    if (u < 1 || u >= h * region()) {
      throw ConfigError("factored rank u must satisfy 1 <= u < h*(2c+1)");
    }
  }
}

ModelParams init_model(const ModelSpec& spec, Rng& rng) {
  spec.validate();
  const std::size_t h = static_cast<std::size_t>(spec.h);
  const std::size_t v = static_cast<std::size_t>(spec.v);
  const std::size_t n = static_cast<std::size_t>(spec.n);
  const std::size_t r = static_cast<std::size_t>(spec.region());

  ModelParams p;
  p.embedding = glorot_uniform({h, v}, v, h, rng);
  switch (spec.method) {
    case Method::Are:
      p.meta = init_meta_net(spec.meta, spec.h, spec.c, spec.u, rng);
      break;
    case Method::Lre:
      p.lcu = LcuTable{glorot_uniform({h, r, v}, v, h * r, rng)};
      break;
    case Method::Conv:
      p.conv = ConvFilterParams{glorot_uniform({h, h, r}, h * r, h * r, rng),
                                Tensor({h}, 0.0, true)};
      break;
  }
  p.fc_weight = glorot_uniform({n, h}, h, n, rng);
  p.fc_bias = Tensor({n}, 0.0, true);
  return p;
}

std::vector<std::pair<std::string, Tensor*>> named_parameters(ModelParams& params) {
  std::vector<std::pair<std::string, Tensor*>> out;
  out.emplace_back("embedding", &params.embedding);
  if (params.meta) {
    for (auto& [name, t] : meta_named_parameters(*params.meta)) {
      out.emplace_back(name, t);
    }
  }
  if (params.lcu) {
    out.emplace_back("lcu.table", &params.lcu->table);
  }
  if (params.conv) {
    out.emplace_back("conv.weight", &params.conv->weight);
    out.emplace_back("conv.bias", &params.conv->bias);
  }
  out.emplace_back("fc.weight", &params.fc_weight);
  out.emplace_back("fc.bias", &params.fc_bias);
  return out;
}

std::vector<std::pair<std::string, BnState*>> named_bn_states(ModelParams& params) {
  if (params.meta) return meta_named_bn_states(*params.meta);
  return {};
}

long long live_parameter_count(ModelParams& params) {
  long long total = 0;
  for (auto& [name, t] : named_parameters(params)) {
    total += static_cast<long long>(t->size());
  }
  return total;
}

BatchTrace forward_batch(const std::vector<const EncodedDocument*>& docs,
                         ModelParams& params, const ModelSpec& spec,
                         bool training, Tape* tape) {
  if (docs.empty()) {
    throw EmptyCorpusError("forward_batch: empty batch");
  }
  const std::size_t h = static_cast<std::size_t>(spec.h);
  const std::size_t c = static_cast<std::size_t>(spec.c);

  BatchTrace trace;
  std::vector<Tensor> unpadded;
  for (const EncodedDocument* doc : docs) {
    if (doc->pad_radius != spec.c) {
      throw DimensionError("document padded with radius " +
                           std::to_string(doc->pad_radius) +
                           " but model expects " + std::to_string(spec.c));
    }
    const std::size_t len = doc->unpadded_length();
    if (len == 0) {
      throw EmptyDocumentError("forward_batch: document has no tokens");
    }
    Tensor e_pad = gather_last(params.embedding, doc->token_indices, tape);
    trace.e_padded.push_back(e_pad);
    unpadded.push_back(narrow(e_pad, 1, c, len, tape));
  }

  std::vector<Tensor> r_cols;
  r_cols.reserve(docs.size());
  auto pooled_to_col = [&](const Tensor& r_seq) {
    Tensor r = sequence_embedding(r_seq, tape);  // {h}
    return reshape(r, {h, 1}, tape);
  };

  switch (spec.method) {
    case Method::Are: {
      std::vector<FilterBank> banks =
          meta_filter_banks(*params.meta, unpadded, training, tape);
      for (std::size_t d = 0; d < docs.size(); ++d) {
        r_cols.push_back(pooled_to_col(
            project_and_pool(trace.e_padded[d], banks[d], Pool::Max, tape)));
      }
      break;
    }
    case Method::Lre: {
      for (std::size_t d = 0; d < docs.size(); ++d) {
        FilterBank bank = lcu_filters(*docs[d], *params.lcu, tape);
        r_cols.push_back(pooled_to_col(
            project_and_pool(trace.e_padded[d], bank, Pool::Max, tape)));
      }
      break;
    }
    case Method::Conv: {
      for (std::size_t d = 0; d < docs.size(); ++d) {
        r_cols.push_back(pooled_to_col(
            dataset_filter(trace.e_padded[d], *params.conv, tape)));
      }
      break;
    }
  }

  Tensor rs = r_cols.size() == 1 ? r_cols[0] : concat(r_cols, 1, tape);  // {h, B}
  Tensor logits_t = add_channel_bias(matmul(params.fc_weight, rs, tape),
                                     params.fc_bias, tape);  // {n, B}
  trace.logits = transpose(logits_t, tape);                  // {B, n}
  return trace;
}

Tensor forward(const EncodedDocument& doc, ModelParams& params,
               const ModelSpec& spec, bool training, Tape* tape) {
  BatchTrace trace = forward_batch({&doc}, params, spec, training, tape);
  return reshape(trace.logits, {static_cast<std::size_t>(spec.n)}, tape);
}

Prediction predict(const EncodedDocument& doc, ModelParams& params,
                   const ModelSpec& spec) {
  Tensor logits = forward(doc, params, spec, /*training=*/false, nullptr);
  Prediction pred;
  pred.probs = softmax_row(logits.values());
  pred.label = static_cast<int>(
      std::max_element(pred.probs.begin(), pred.probs.end()) - pred.probs.begin());
  return pred;
}

}  // namespace regemb
