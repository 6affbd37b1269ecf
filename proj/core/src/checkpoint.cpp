#include "regemb/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace regemb {

namespace {

constexpr char kMagic[4] = {'A', 'R', 'E', 'C'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void write_string(std::ofstream& out, const std::string& s) {
  write_pod(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw FormatError("checkpoint truncated");
  return value;
}

std::string read_string(std::ifstream& in) {
  const auto len = read_pod<std::uint32_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw FormatError("checkpoint truncated");
  return s;
}

void write_tensor(std::ofstream& out, const std::string& name, const Tensor& t) {
  write_string(out, name);
  write_pod(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) write_pod(out, static_cast<std::uint64_t>(d));
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
}

std::pair<std::string, Tensor> read_tensor(std::ifstream& in) {
  std::string name = read_string(in);
  const auto rank = read_pod<std::uint32_t>(in);
  std::vector<std::size_t> shape(rank);
  for (auto& d : shape) d = static_cast<std::size_t>(read_pod<std::uint64_t>(in));
  std::vector<double> data(shape_size(shape));
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!in) throw FormatError("checkpoint truncated in tensor " + name);
  return {std::move(name), Tensor(std::move(shape), std::move(data))};
}

}  // namespace

const Tensor* CheckpointData::find_tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

bool CheckpointData::find_counter(const std::string& name, std::uint64_t* out) const {
  for (const auto& [n, v] : counters) {
    if (n == name) {
      *out = v;
      return true;
    }
  }
  return false;
}

bool CheckpointData::find_scalar(const std::string& name, double* out) const {
  for (const auto& [n, v] : scalars) {
    if (n == name) {
      *out = v;
      return true;
    }
  }
  return false;
}

void write_checkpoint_file(const std::string& path, const CheckpointData& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint: " + path);
  out.write(kMagic, 4);
  write_pod(out, kVersion);

  write_pod(out, static_cast<std::uint8_t>(data.spec.method));
  write_pod(out, static_cast<std::uint8_t>(data.spec.meta));
  write_pod(out, static_cast<std::uint32_t>(data.spec.h));
  write_pod(out, static_cast<std::uint32_t>(data.spec.c));
  write_pod(out, static_cast<std::uint32_t>(data.spec.n));
  write_pod(out, static_cast<std::uint32_t>(data.spec.v));
  write_pod(out, static_cast<std::uint32_t>(data.spec.u));

  write_pod(out, static_cast<std::uint32_t>(data.vocab_min_count));
  write_pod(out, static_cast<std::uint64_t>(data.vocab_tokens.size()));
  for (const auto& tok : data.vocab_tokens) write_string(out, tok);

  write_pod(out, static_cast<std::uint64_t>(data.tensors.size()));
  for (const auto& [name, t] : data.tensors) write_tensor(out, name, t);

  write_pod(out, static_cast<std::uint64_t>(data.counters.size()));
  for (const auto& [name, v] : data.counters) {
    write_string(out, name);
    write_pod(out, v);
  }
  write_pod(out, static_cast<std::uint64_t>(data.scalars.size()));
  for (const auto& [name, v] : data.scalars) {
    write_string(out, name);
    write_pod(out, v);
  }
  if (!out) throw Error("short write to checkpoint: " + path);
}

CheckpointData read_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("checkpoint has bad magic bytes");
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kVersion) {
    throw VersionError("checkpoint version " + std::to_string(version) +
                       " unsupported (expected " + std::to_string(kVersion) + ")");
  }
  CheckpointData data;
  data.spec.method = static_cast<Method>(read_pod<std::uint8_t>(in));
  data.spec.meta = static_cast<MetaNetKind>(read_pod<std::uint8_t>(in));
  data.spec.h = static_cast<int>(read_pod<std::uint32_t>(in));
  data.spec.c = static_cast<int>(read_pod<std::uint32_t>(in));
  data.spec.n = static_cast<int>(read_pod<std::uint32_t>(in));
  data.spec.v = static_cast<int>(read_pod<std::uint32_t>(in));
  data.spec.u = static_cast<int>(read_pod<std::uint32_t>(in));

  data.vocab_min_count = static_cast<int>(read_pod<std::uint32_t>(in));
  const auto vocab_count = read_pod<std::uint64_t>(in);
  data.vocab_tokens.reserve(vocab_count);
  for (std::uint64_t i = 0; i < vocab_count; ++i) {
    data.vocab_tokens.push_back(read_string(in));
  }

  const auto tensor_count = read_pod<std::uint64_t>(in);
  data.tensors.reserve(tensor_count);
  for (std::uint64_t i = 0; i < tensor_count; ++i) {
    data.tensors.push_back(read_tensor(in));
  }
  const auto counter_count = read_pod<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < counter_count; ++i) {
    std::string name = read_string(in);
    data.counters.emplace_back(std::move(name), read_pod<std::uint64_t>(in));
  }
  const auto scalar_count = read_pod<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < scalar_count; ++i) {
    std::string name = read_string(in);
    data.scalars.emplace_back(std::move(name), read_pod<double>(in));
  }
  return data;
}

CheckpointData pack_model(const ModelSpec& spec, ModelParams& params,
                          const Vocabulary* vocab) {
  CheckpointData data;
  data.spec = spec;
  if (vocab) {
    data.vocab_tokens = vocab->tokens();
    data.vocab_min_count = vocab->min_count();
  }
  for (auto& [name, t] : named_parameters(params)) {
    data.tensors.emplace_back(name, *t);
  }
  for (auto& [name, s] : named_bn_states(params)) {
    data.tensors.emplace_back(name + ".running_mean",
                              Tensor({s->channels()}, s->running_mean));
    data.tensors.emplace_back(name + ".running_var",
                              Tensor({s->channels()}, s->running_var));
  }
  return data;
}

ModelParams unpack_model(const CheckpointData& data) {
  data.spec.validate();
  Rng rng(0);
  ModelParams params = init_model(data.spec, rng);
  for (auto& [name, t] : named_parameters(params)) {
    const Tensor* stored = data.find_tensor(name);
    if (!stored) {
      throw ShapeMismatchError("checkpoint missing tensor " + name);
    }
    if (stored->shape() != t->shape()) {
      throw ShapeMismatchError("checkpoint tensor " + name + " has shape " +
                               shape_str(stored->shape()) + " but spec requires " +
                               shape_str(t->shape()));
    }
    t->values() = stored->values();
  }
  for (auto& [name, s] : named_bn_states(params)) {
    const Tensor* mean = data.find_tensor(name + ".running_mean");
    const Tensor* var = data.find_tensor(name + ".running_var");
    if (!mean || !var) {
      throw ShapeMismatchError("checkpoint missing batch-norm state " + name);
    }
    if (mean->size() != s->channels() || var->size() != s->channels()) {
      throw ShapeMismatchError("checkpoint batch-norm state " + name +
                               " has wrong channel count");
    }
    s->running_mean = mean->values();
    s->running_var = var->values();
  }
  return params;
}

void save_checkpoint(const std::string& path, const ModelSpec& spec,
                     ModelParams& params, const Vocabulary* vocab) {
  write_checkpoint_file(path, pack_model(spec, params, vocab));
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  CheckpointData data = read_checkpoint_file(path);
  LoadedCheckpoint loaded;
  loaded.spec = data.spec;
  loaded.params = unpack_model(data);
  if (!data.vocab_tokens.empty()) {
    loaded.vocab = Vocabulary::from_tokens(data.vocab_tokens, data.vocab_min_count);
    loaded.has_vocab = true;
  }
  return loaded;
}

}  // namespace regemb
