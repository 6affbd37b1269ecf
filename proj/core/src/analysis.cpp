#include "regemb/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace regemb {

ParamBreakdown count_params(const ModelSpec& spec) {
  spec.validate();
  const long long h = spec.h;
  const long long v = spec.v;
  const long long n = spec.n;
  const long long r = spec.region();
  const long long u = spec.u;
  const long long hidden = h * r;

  ParamBreakdown b;
  b.embedding = v * h;
  b.fc = h * n + n;

  switch (spec.method) {
    case Method::Lre:
      b.context_unit = v * h * r;
      break;
    case Method::Conv:
      b.context_unit = h * h * r + h;
      break;
    case Method::Are:
      switch (spec.meta) {
        case MetaNetKind::Cnn:
          b.context_unit = hidden * h * r + hidden;  // conv weight + bias
          b.batch_norm = 2 * hidden;
          break;
        case MetaNetKind::SmallCnn:
          b.context_unit = h * h * r + h;
          b.batch_norm = 2 * h;
          break;
        case MetaNetKind::FactoredCnn:
          b.context_unit = u * h * r + u + u * hidden;  // conv + factor matrix
          b.batch_norm = 2 * u;
          break;
        case MetaNetKind::Lstm:
          b.context_unit = 4 * (hidden * h + hidden * hidden + hidden);
          break;
        case MetaNetKind::Gru:
          b.context_unit = 3 * (hidden * h + hidden * hidden + hidden);
          break;
        case MetaNetKind::EnsembleCnnLstm:
          b.context_unit = hidden * h * r + hidden +
                           4 * (hidden * h + hidden * hidden + hidden);
          b.batch_norm = 2 * hidden;
          break;
      }
      break;
  }
  return b;
}

SaliencyReport saliency(const EncodedDocument& doc,
                        const std::vector<std::string>& tokens,
                        ModelParams& params, const ModelSpec& spec) {
  const std::size_t len = doc.unpadded_length();
  if (len == 0) {
    throw EmptyDocumentError("saliency: document has no tokens");
  }
  if (tokens.size() != len) {
    throw DimensionError("saliency: " + std::to_string(tokens.size()) +
                         " tokens for " + std::to_string(len) + " positions");
  }

  Tape tape;
  BatchTrace trace =
      forward_batch({&doc}, params, spec, /*training=*/false, &tape);
  const std::vector<double>& logits = trace.logits.values();
  int predicted = 0;
  for (int j = 1; j < spec.n; ++j) {
    if (logits[j] > logits[predicted]) predicted = j;
  }

  std::vector<double> seed(logits.size(), 0.0);
  seed[static_cast<std::size_t>(predicted)] = 1.0;
  tape.backward_from(trace.logits, seed);

  SaliencyReport report;
  report.tokens = tokens;
  report.predicted = predicted;
  report.label = doc.label;
  report.scores.resize(len);
  report.signs.resize(len);

  const Tensor& e_pad = trace.e_padded[0];
  const std::size_t h = e_pad.shape()[0];
  const std::size_t lp = e_pad.shape()[1];
  const std::size_t c = static_cast<std::size_t>(doc.pad_radius);
  const bool has_grad = e_pad.has_grad();
  for (std::size_t i = 0; i < len; ++i) {
    double norm2 = 0.0;
    double dot = 0.0;
    if (has_grad) {
      const auto& g = e_pad.grad_view();
      for (std::size_t j = 0; j < h; ++j) {
        const double gv = g[j * lp + (c + i)];
        norm2 += gv * gv;
        dot += gv * e_pad.data()[j * lp + (c + i)];
      }
    }
    report.scores[i] = std::sqrt(norm2);
    report.signs[i] = dot > 0.0 ? 1 : (dot < 0.0 ? -1 : 0);
  }
  return report;
}

RenderFormat render_format_from_name(const std::string& name) {
  if (name == "json") return RenderFormat::Json;
  if (name == "ansi") return RenderFormat::Ansi;
  if (name == "html") return RenderFormat::Html;
  throw ConfigError("unknown saliency format: " + name);
}

namespace {

std::string render_json(const SaliencyReport& r) {
  nlohmann::json j;
  j["tokens"] = r.tokens;
  j["scores"] = r.scores;
  j["signs"] = r.signs;
  j["predicted"] = r.predicted;
  j["label"] = r.label;
  return j.dump();
}

// quantile rank of each score among the report's scores, in [0, 1]
std::vector<double> score_quantiles(const std::vector<double>& scores) {
  std::vector<double> q(scores.size(), 0.0);
  if (scores.empty()) return q;
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  const double denom = std::max<std::size_t>(scores.size() - 1, 1);
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    q[order[rank]] = static_cast<double>(rank) / denom;
  }
  return q;
}

std::string render_ansi(const SaliencyReport& r) {
  const std::vector<double> q = score_quantiles(r.scores);
  std::ostringstream out;
  for (std::size_t i = 0; i < r.tokens.size(); ++i) {
    if (i) out << ' ';
    // 5 intensity buckets on the green (positive) or red (negative) ramp
    const int bucket = std::min(4, static_cast<int>(q[i] * 5.0));
    const int color = r.signs[i] >= 0 ? 22 + bucket * 6   // greens 22..46
                                      : 52 + bucket * 36; // reds 52..196
    out << "\x1b[48;5;" << color << "m" << r.tokens[i] << "\x1b[0m";
  }
  out << "\n";
  return out.str();
}

std::string html_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(ch);
    }
  }
  return out;
}

std::string render_html(const SaliencyReport& r) {
  const std::vector<double> q = score_quantiles(r.scores);
  std::ostringstream out;
  out << "<!DOCTYPE html><html><body><p>";
  for (std::size_t i = 0; i < r.tokens.size(); ++i) {
    if (i) out << ' ';
    const double alpha = 0.15 + 0.7 * q[i];
    const char* rgb = r.signs[i] >= 0 ? "0,160,0" : "200,0,0";
    out << "<span style=\"background-color: rgba(" << rgb << "," << alpha
        << ")\">" << html_escape(r.tokens[i]) << "</span>";
  }
  out << "</p></body></html>";
  return out.str();
}

}  // namespace

std::string render_saliency(const SaliencyReport& report, RenderFormat format) {
  switch (format) {
    case RenderFormat::Json: return render_json(report);
    case RenderFormat::Ansi: return render_ansi(report);
    case RenderFormat::Html: return render_html(report);
  }
  throw ConfigError("unknown saliency format");
}

SaliencyReport parse_saliency_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  SaliencyReport r;
  r.tokens = j.at("tokens").get<std::vector<std::string>>();
  r.scores = j.at("scores").get<std::vector<double>>();
  r.signs = j.at("signs").get<std::vector<int>>();
  r.predicted = j.at("predicted").get<int>();
  r.label = j.at("label").get<int>();
  return r;
}

}  // namespace regemb
