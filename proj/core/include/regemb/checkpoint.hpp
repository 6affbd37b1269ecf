#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "regemb/model.hpp"
#include "regemb/text.hpp"

namespace regemb {

/// On-disk container: magic "AREC", u32 version, spec block, optional
/// vocabulary, named tensor directory (little-endian f64 blobs), named u64
/// counters and f64 scalars. Round-trips are bit-exact.
struct CheckpointData {
  ModelSpec spec;
  std::vector<std::string> vocab_tokens;  // empty = no vocabulary stored
  int vocab_min_count = 2;
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::vector<std::pair<std::string, std::uint64_t>> counters;
  std::vector<std::pair<std::string, double>> scalars;

  const Tensor* find_tensor(const std::string& name) const;
  bool find_counter(const std::string& name, std::uint64_t* out) const;
  bool find_scalar(const std::string& name, double* out) const;
};

void write_checkpoint_file(const std::string& path, const CheckpointData& data);
CheckpointData read_checkpoint_file(const std::string& path);

/// Packs model parameters plus batch-norm running statistics (and the
/// vocabulary, when given) into a checkpoint container.
CheckpointData pack_model(const ModelSpec& spec, ModelParams& params,
                          const Vocabulary* vocab);

/// Restores model parameters from a container, validating every tensor shape
/// against the embedded spec.
ModelParams unpack_model(const CheckpointData& data);

void save_checkpoint(const std::string& path, const ModelSpec& spec,
                     ModelParams& params, const Vocabulary* vocab = nullptr);

struct LoadedCheckpoint {
  ModelSpec spec;
  ModelParams params;
  Vocabulary vocab;
  bool has_vocab = false;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace regemb
