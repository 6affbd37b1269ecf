#include "regemb/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "regemb/ops.hpp"

namespace regemb {

namespace {

constexpr std::uint64_t kSplitSalt = 0x5e1ec7ed;
constexpr std::uint64_t kEpochSalt = 0xe90c45a1;

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (val_fraction < 0.0 || val_fraction >= 1.0) {
    throw ConfigError("val_fraction must be in [0, 1)");
  }
}

TrainState init_train_state(ModelParams& params) {
  TrainState state;
  for (auto& [name, t] : named_parameters(params)) {
    state.slots.push_back(AdamSlot{name, std::vector<double>(t->size(), 0.0),
                                   std::vector<double>(t->size(), 0.0)});
  }
  return state;
}

void adam_step(std::vector<std::pair<std::string, Tensor*>>& params,
               TrainState& state, const TrainConfig& config) {
  if (state.slots.size() != params.size()) {
    throw Error("adam_step: optimizer state has " +
                std::to_string(state.slots.size()) + " slots for " +
                std::to_string(params.size()) + " parameters");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);

  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor* tensor = params[p].second;
    AdamSlot& slot = state.slots[p];
    if (slot.name != params[p].first || slot.m.size() != tensor->size()) {
      throw Error("adam_step: slot mismatch for parameter " + params[p].first);
    }
    const bool has_grad = tensor->has_grad();
    const std::vector<double>* grad = has_grad ? &tensor->grad_view() : nullptr;
    double* theta = tensor->data();
    for (std::size_t i = 0; i < slot.m.size(); ++i) {
      const double g = has_grad ? (*grad)[i] : 0.0;
      if (!std::isfinite(g)) {
        throw NumericalError("non-finite gradient in tensor " + slot.name +
                             " at index " + std::to_string(i));
      }
      slot.m[i] = config.beta1 * slot.m[i] + (1.0 - config.beta1) * g;
      slot.v[i] = config.beta2 * slot.v[i] + (1.0 - config.beta2) * g * g;
      const double mhat = slot.m[i] / bc1;
      const double vhat = slot.v[i] / bc2;
      theta[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.eps);
    }
    tensor->zero_grad();
  }
}

EvalResult evaluate(const std::vector<EncodedDocument>& docs, ModelParams& params,
                    const ModelSpec& spec) {
  if (docs.empty()) {
    throw EmptyCorpusError("evaluate: empty corpus");
  }
  EvalResult result;
  result.confusion.assign(static_cast<std::size_t>(spec.n),
                          std::vector<std::size_t>(spec.n, 0));
  std::size_t correct = 0;
  double loss_sum = 0.0;
  for (const EncodedDocument& doc : docs) {
    if (doc.label < 0 || doc.label >= spec.n) {
      throw LabelError("evaluate: label " + std::to_string(doc.label) +
                       " out of range [0, " + std::to_string(spec.n) + ")");
    }
    Tensor logits = forward(doc, params, spec, /*training=*/false, nullptr);
    const std::vector<double> probs = softmax_row(logits.values());
    int argmax = 0;
    for (int j = 1; j < spec.n; ++j) {
      if (probs[j] > probs[argmax]) argmax = j;
    }
    if (argmax == doc.label) ++correct;
    result.confusion[doc.label][argmax] += 1;
    loss_sum -= std::log(std::max(probs[doc.label], 1e-300));
  }
  result.accuracy = static_cast<double>(correct) / static_cast<double>(docs.size());
  result.mean_loss = loss_sum / static_cast<double>(docs.size());
  return result;
}

namespace {

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

SplitIndices make_split(std::size_t count, double val_fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  Rng rng(mix_seed(seed, kSplitSalt));
  rng.shuffle(order);
  SplitIndices split;
  const std::size_t val_count =
      static_cast<std::size_t>(val_fraction * static_cast<double>(count));
  split.val.assign(order.begin(), order.begin() + val_count);
  split.train.assign(order.begin() + val_count, order.end());
  return split;
}

std::vector<std::size_t> epoch_permutation(std::size_t count, std::uint64_t seed,
                                           std::uint64_t epoch) {
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  Rng rng(mix_seed(seed, kEpochSalt + epoch));
  rng.shuffle(order);
  return order;
}

}  // namespace

TrainResult train(ModelParams& params, const ModelSpec& spec,
                  const std::vector<EncodedDocument>& docs,
                  const TrainConfig& config, TrainState& state,
                  const Vocabulary* vocab) {
  config.validate();
  if (docs.empty()) {
    throw EmptyCorpusError("train: empty corpus");
  }
  for (const EncodedDocument& doc : docs) {
    if (doc.label < 0 || doc.label >= spec.n) {
      throw LabelError("train: label " + std::to_string(doc.label) +
                       " out of range [0, " + std::to_string(spec.n) + ")");
    }
  }

  auto param_list = named_parameters(params);
  const SplitIndices split = make_split(docs.size(), config.val_fraction, config.seed);
  if (split.train.empty()) {
    throw EmptyCorpusError("train: validation split leaves no training documents");
  }
  std::vector<EncodedDocument> val_docs;
  val_docs.reserve(split.val.size());
  for (std::size_t idx : split.val) val_docs.push_back(docs[idx]);

  const std::size_t bsz = static_cast<std::size_t>(config.batch_size);
  const std::uint64_t steps_per_epoch =
      (split.train.size() + bsz - 1) / bsz;

  TrainResult result;
  result.best_val_acc = state.best_val;
  const std::int64_t t0 = now_ms();
  double loss_accum = 0.0;
  std::uint64_t loss_batches = 0;

  auto emit_record = [&](double val_acc) {
    MetricRecord rec;
    rec.step = state.step;
    rec.epoch = state.step / steps_per_epoch;
    rec.train_loss = loss_batches > 0
                         ? loss_accum / static_cast<double>(loss_batches)
                         : 0.0;
    rec.val_acc = val_acc;
    rec.wall_ms = now_ms() - t0;
    result.log.push_back(rec);
    loss_accum = 0.0;
    loss_batches = 0;
  };

  const std::uint64_t step_limit =
      config.max_steps > 0
          ? config.max_steps
          : steps_per_epoch * static_cast<std::uint64_t>(config.epochs);

  while (state.step < step_limit) {
    const std::uint64_t epoch = state.step / steps_per_epoch;
    const std::uint64_t pos = state.step % steps_per_epoch;
    const std::vector<std::size_t> order =
        epoch_permutation(split.train.size(), config.seed, epoch);

    const std::size_t begin = static_cast<std::size_t>(pos) * bsz;
    const std::size_t end = std::min(begin + bsz, order.size());
    std::vector<const EncodedDocument*> batch;
    batch.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      batch.push_back(&docs[split.train[order[i]]]);
    }

    Tape tape;
    BatchTrace trace = forward_batch(batch, params, spec, /*training=*/true, &tape);
    std::vector<int> labels;
    labels.reserve(batch.size());
    for (const EncodedDocument* doc : batch) labels.push_back(doc->label);
    Tensor loss = softmax_cross_entropy(trace.logits, labels, &tape);
    if (!std::isfinite(loss.item())) {
      throw NumericalError("training loss is non-finite at step " +
                           std::to_string(state.step + 1));
    }
    loss_accum += loss.item();
    ++loss_batches;
    tape.backward(loss);
    adam_step(param_list, state, config);
    ++result.steps_run;

    const bool eval_now = config.eval_every > 0 &&
                          state.step % static_cast<std::uint64_t>(config.eval_every) == 0;
    const bool last_step = state.step >= step_limit;
    if (eval_now || last_step) {
      double val_acc = -1.0;
      if (!val_docs.empty()) {
        val_acc = evaluate(val_docs, params, spec).accuracy;
        if (val_acc > state.best_val) {
          state.best_val = val_acc;
          if (!config.checkpoint_dir.empty()) {
            save_checkpoint(config.checkpoint_dir + "/best.ckpt", spec, params, vocab);
          }
        }
      }
      emit_record(val_acc);
    }
  }

  if (!config.checkpoint_dir.empty()) {
    write_checkpoint_file(config.checkpoint_dir + "/last.ckpt",
                          pack_training(spec, params, state, vocab));
  }
  result.best_val_acc = state.best_val;
  return result;
}

CheckpointData pack_training(const ModelSpec& spec, ModelParams& params,
                             const TrainState& state, const Vocabulary* vocab) {
  CheckpointData data = pack_model(spec, params, vocab);
  for (const AdamSlot& slot : state.slots) {
    data.tensors.emplace_back("adam.m." + slot.name, Tensor({slot.m.size()}, slot.m));
    data.tensors.emplace_back("adam.v." + slot.name, Tensor({slot.v.size()}, slot.v));
  }
  data.counters.emplace_back("train.step", state.step);
  data.scalars.emplace_back("train.best_val", state.best_val);
  return data;
}

TrainState unpack_training(const CheckpointData& data, ModelParams& params) {
  TrainState state = init_train_state(params);
  for (AdamSlot& slot : state.slots) {
    const Tensor* m = data.find_tensor("adam.m." + slot.name);
    const Tensor* v = data.find_tensor("adam.v." + slot.name);
    if (!m || !v || m->size() != slot.m.size() || v->size() != slot.v.size()) {
      throw ShapeMismatchError("checkpoint missing optimizer state for " + slot.name);
    }
    slot.m = m->values();
    slot.v = v->values();
  }
  if (!data.find_counter("train.step", &state.step)) {
    throw FormatError("checkpoint has no training progress counters");
  }
  data.find_scalar("train.best_val", &state.best_val);
  return state;
}

std::string metric_record_json(const MetricRecord& rec) {
  nlohmann::json j;
  j["step"] = rec.step;
  j["epoch"] = rec.epoch;
  j["train_loss"] = rec.train_loss;
  j["val_acc"] = rec.val_acc;
  j["wall_ms"] = rec.wall_ms;
  return j.dump();
}

void write_metric_log(const std::string& path, const std::vector<MetricRecord>& log) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write metric log: " + path);
  for (const MetricRecord& rec : log) out << metric_record_json(rec) << "\n";
}

}  // namespace regemb
