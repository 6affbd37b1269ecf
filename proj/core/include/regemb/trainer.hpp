#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "regemb/checkpoint.hpp"
#include "regemb/model.hpp"
#include "regemb/text.hpp"

namespace regemb {

struct TrainConfig {
  int batch_size = 16;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int epochs = 20;
  std::uint64_t seed = 0;
  int eval_every = 50;          // steps between validation evaluations; 0 = off
  double val_fraction = 0.05;   // held out from the training split
  std::uint64_t max_steps = 0;  // 0 = bounded by epochs only
  std::string checkpoint_dir;   // empty = no checkpoints written

  void validate() const;
};

/// Adam moment buffers, one slot per trainable tensor (stable name order).
struct AdamSlot {
  std::string name;
  std::vector<double> m;
  std::vector<double> v;
};

struct TrainState {
  std::vector<AdamSlot> slots;
  std::uint64_t step = 0;
  double best_val = -1.0;
};

TrainState init_train_state(ModelParams& params);

/// One bias-corrected Adam update over all trainable tensors; reads each
/// tensor's accumulated gradient (absent gradient = zero) and clears it.
/// NaN/Inf gradients abort with the offending tensor named.
void adam_step(std::vector<std::pair<std::string, Tensor*>>& params,
               TrainState& state, const TrainConfig& config);

struct MetricRecord {
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  double train_loss = 0.0;
  double val_acc = -1.0;  // -1 when no validation split
  std::int64_t wall_ms = 0;
};

struct TrainResult {
  std::vector<MetricRecord> log;
  double best_val_acc = -1.0;
  std::uint64_t steps_run = 0;
};

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
};

EvalResult evaluate(const std::vector<EncodedDocument>& docs, ModelParams& params,
                    const ModelSpec& spec);

/// Mini-batch training loop: seeded validation split, seeded per-epoch
/// shuffling, mean cross-entropy per batch, periodic validation, and a
/// best-by-validation checkpoint when checkpoint_dir is set. Everything is
/// derived deterministically from (seed, step), so resuming from a saved
/// TrainState reproduces an uninterrupted run bit-exactly.
TrainResult train(ModelParams& params, const ModelSpec& spec,
                  const std::vector<EncodedDocument>& docs,
                  const TrainConfig& config, TrainState& state,
                  const Vocabulary* vocab = nullptr);

/// Serializes model + optimizer + progress for exact resumption.
CheckpointData pack_training(const ModelSpec& spec, ModelParams& params,
                             const TrainState& state, const Vocabulary* vocab);
TrainState unpack_training(const CheckpointData& data, ModelParams& params);

std::string metric_record_json(const MetricRecord& rec);
void write_metric_log(const std::string& path, const std::vector<MetricRecord>& log);

}  // namespace regemb
