#pragma once

#include <string>
#include <vector>

#include "regemb/model.hpp"

namespace regemb {

/// Closed-form trainable-parameter counts by component. Batch-norm running
/// statistics are persistent state, not parameters, and are never counted.
struct ParamBreakdown {
  long long embedding = 0;
  long long context_unit = 0;  // filter generator (table / conv / recurrent / factor)
  long long batch_norm = 0;    // gamma + beta
  long long fc = 0;

  long long total() const { return embedding + context_unit + batch_norm + fc; }
  /// Generator plus its normalization: the "context unit only" figure.
  long long context_unit_only() const { return context_unit + batch_norm; }
};

/// Counts must agree exactly with the number of scalars instantiated by
/// init_model for the same spec.
ParamBreakdown count_params(const ModelSpec& spec);

struct SaliencyReport {
  std::vector<std::string> tokens;
  std::vector<double> scores;  // L2 norm of d(predicted logit)/d(e_i)
  std::vector<int> signs;      // sign of grad . embedding, in {-1, 0, +1}
  int predicted = 0;
  int label = 0;
};

/// First-derivative saliency: gradient of the predicted-class logit with
/// respect to each word embedding, evaluated in eval mode.
SaliencyReport saliency(const EncodedDocument& doc,
                        const std::vector<std::string>& tokens,
                        ModelParams& params, const ModelSpec& spec);

enum class RenderFormat { Json, Ansi, Html };

RenderFormat render_format_from_name(const std::string& name);

std::string render_saliency(const SaliencyReport& report, RenderFormat format);

/// Parses the JSON rendering back into a report (round-trip support).
SaliencyReport parse_saliency_json(const std::string& text);

}  // namespace regemb
