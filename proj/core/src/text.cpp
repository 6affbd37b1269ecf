#include "regemb/text.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>

namespace regemb {

namespace {

bool is_space(unsigned char ch) { return std::isspace(ch) != 0; }
bool is_punct(unsigned char ch) { return std::ispunct(ch) != 0; }

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&]() {
    if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  };
  for (char raw : text) {
    const unsigned char ch = static_cast<unsigned char>(raw);
    if (is_space(ch)) {
      flush();
    } else if (is_punct(ch)) {
      flush();
      tokens.emplace_back(1, static_cast<char>(ch));
    } else {
      current.push_back(static_cast<char>(std::tolower(ch)));
    }
  }
  flush();
  return tokens;
}

Vocabulary::Vocabulary() : tokens_{kPadToken, kUnkToken} {
  index_[kPadToken] = kPad;
  index_[kUnkToken] = kUnk;
}

int Vocabulary::lookup(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int index) const {
  if (index < 0 || index >= size()) {
    throw VocabularyError("token index " + std::to_string(index) +
                          " out of range [0, " + std::to_string(size()) + ")");
  }
  return tokens_[static_cast<std::size_t>(index)];
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens, int min_count) {
  if (tokens.size() < 2 || tokens[0] != kPadToken || tokens[1] != kUnkToken) {
    throw FormatError("vocabulary token list missing reserved entries");
  }
  Vocabulary vocab;
  vocab.min_count_ = min_count;
  vocab.tokens_ = std::move(tokens);
  vocab.index_.clear();
  for (std::size_t i = 0; i < vocab.tokens_.size(); ++i) {
    vocab.index_[vocab.tokens_[i]] = static_cast<int>(i);
  }
  return vocab;
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus,
                       int min_count) {
  if (min_count < 1) {
    throw ConfigError("min_count must be >= 1, got " + std::to_string(min_count));
  }
  if (corpus.empty()) {
    throw EmptyCorpusError("build_vocab: empty corpus");
  }
  struct Entry {
    std::size_t count = 0;
    std::size_t first_seen = 0;
  };
  std::unordered_map<std::string, Entry> freq;
  std::size_t position = 0;
  for (const auto& doc : corpus) {
    for (const auto& tok : doc) {
      // tokens that collide with a reserved name stay out of the vocabulary
      if (tok == Vocabulary::kPadToken || tok == Vocabulary::kUnkToken) continue;
      auto [it, inserted] = freq.try_emplace(tok);
      if (inserted) it->second.first_seen = position;
      ++it->second.count;
      ++position;
    }
  }
  std::vector<std::pair<std::string, Entry>> kept;
  kept.reserve(freq.size());
  for (auto& [tok, e] : freq) {
    if (e.count >= static_cast<std::size_t>(min_count)) kept.emplace_back(tok, e);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second.count != b.second.count) return a.second.count > b.second.count;
    return a.second.first_seen < b.second.first_seen;
  });
  Vocabulary vocab;
  vocab.min_count_ = min_count;
  for (auto& [tok, e] : kept) {
    vocab.index_[tok] = vocab.size();
    vocab.tokens_.push_back(tok);
  }
  return vocab;
}

std::vector<int> encode(const std::vector<std::string>& tokens,
                        const Vocabulary& vocab, int c) {
  std::vector<int> out;
  out.reserve(tokens.size() + 2 * static_cast<std::size_t>(c));
  out.assign(static_cast<std::size_t>(c), Vocabulary::kPad);
  for (const auto& tok : tokens) out.push_back(vocab.lookup(tok));
  out.insert(out.end(), static_cast<std::size_t>(c), Vocabulary::kPad);
  return out;
}

namespace {

// Replaces the two-character sequence \n with a newline.
std::string unescape_text(const std::string& in) {
  std::string out;
  out.reserve(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i] == '\\' && i + 1 < in.size() && in[i + 1] == 'n') {
      out.push_back('\n');
      ++i;
    } else {
      out.push_back(in[i]);
    }
  }
  return out;
}

std::vector<std::string> parse_csv_record(const std::string& line, std::size_t lineno) {
  std::vector<std::string> fields;
  std::size_t i = 0;
  const std::size_t n = line.size();
  while (i < n) {
    std::string field;
    if (line[i] == '"') {
      ++i;
      bool closed = false;
      while (i < n) {
        if (line[i] == '"') {
          if (i + 1 < n && line[i + 1] == '"') {
            field.push_back('"');
            i += 2;
          } else {
            ++i;
            closed = true;
            break;
          }
        } else {
          field.push_back(line[i]);
          ++i;
        }
      }
      if (!closed) {
        throw ParseError("line " + std::to_string(lineno) + ": unterminated quote");
      }
      if (i < n && line[i] != ',') {
        throw ParseError("line " + std::to_string(lineno) +
                         ": garbage after closing quote");
      }
      if (i < n) ++i;  // skip comma
    } else {
      while (i < n && line[i] != ',') {
        field.push_back(line[i]);
        ++i;
      }
      if (i < n) ++i;  // skip comma
    }
    fields.push_back(std::move(field));
  }
  return fields;
}

}  // namespace

std::vector<RawDocument> load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ParseError("cannot open file: " + path);
  }
  std::vector<RawDocument> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields = parse_csv_record(line, lineno);
    if (fields.size() < 2) {
      throw ParseError("line " + std::to_string(lineno) +
                       ": expected class index and at least one text field");
    }
    int label = 0;
    try {
      std::size_t pos = 0;
      label = std::stoi(fields[0], &pos);
      if (pos != fields[0].size()) throw std::invalid_argument("trailing chars");
    } catch (const std::exception&) {
      throw ParseError("line " + std::to_string(lineno) + ": bad class index '" +
                       fields[0] + "'");
    }
    if (label < 1) {
      throw LabelError("line " + std::to_string(lineno) + ": class index " +
                       std::to_string(label) + " < 1");
    }
    std::string text;
    for (std::size_t f = 1; f < fields.size(); ++f) {
      if (f > 1) text.push_back(' ');
      text += unescape_text(fields[f]);
    }
    docs.push_back(RawDocument{label - 1, std::move(text)});
  }
  return docs;
}

EncodedCorpus encode_corpus(const std::vector<RawDocument>& raw,
                            const Vocabulary& vocab, int c, std::size_t max_len) {
  EncodedCorpus corpus;
  corpus.pad_radius = c;
  corpus.vocab_size = vocab.size();
  corpus.docs.reserve(raw.size());
  for (const auto& doc : raw) {
    std::vector<std::string> tokens = tokenize(doc.text);
    if (max_len > 0 && tokens.size() > max_len) tokens.resize(max_len);
    corpus.docs.push_back(
        EncodedDocument{encode(tokens, vocab, c), doc.label, c});
  }
  return corpus;
}

CorpusStats corpus_stats(const std::vector<RawDocument>& raw,
                         const Vocabulary& vocab, int num_classes) {
  CorpusStats stats;
  stats.documents = raw.size();
  stats.class_histogram.assign(static_cast<std::size_t>(num_classes), 0);
  stats.vocab_size = static_cast<std::size_t>(vocab.size());
  double total_len = 0.0;
  for (const auto& doc : raw) {
    if (doc.label < 0 || doc.label >= num_classes) {
      throw LabelError("document label " + std::to_string(doc.label) +
                       " out of range [0, " + std::to_string(num_classes) + ")");
    }
    ++stats.class_histogram[static_cast<std::size_t>(doc.label)];
    const std::size_t len = tokenize(doc.text).size();
    total_len += static_cast<double>(len);
    stats.max_length = std::max(stats.max_length, len);
  }
  stats.mean_length = raw.empty() ? 0.0 : total_len / static_cast<double>(raw.size());
  return stats;
}

namespace {

constexpr char kCacheMagic[4] = {'A', 'R', 'D', 'C'};
constexpr std::uint32_t kCacheVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw FormatError("corpus cache truncated");
  return value;
}

}  // namespace

void save_corpus_cache(const std::string& path, const EncodedCorpus& corpus) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write corpus cache: " + path);
  out.write(kCacheMagic, 4);
  write_pod(out, kCacheVersion);
  write_pod(out, static_cast<std::uint32_t>(corpus.vocab_size));
  write_pod(out, static_cast<std::uint32_t>(corpus.pad_radius));
  write_pod(out, static_cast<std::uint64_t>(corpus.docs.size()));
  for (const auto& doc : corpus.docs) {
    write_pod(out, static_cast<std::int32_t>(doc.label));
    write_pod(out, static_cast<std::uint64_t>(doc.token_indices.size()));
    for (int idx : doc.token_indices) write_pod(out, static_cast<std::int32_t>(idx));
  }
  if (!out) throw Error("short write to corpus cache: " + path);
}

EncodedCorpus load_corpus_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open corpus cache: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCacheMagic, 4) != 0) {
    throw FormatError("corpus cache has bad magic bytes");
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kCacheVersion) {
    throw VersionError("corpus cache version " + std::to_string(version) +
                       " unsupported");
  }
  EncodedCorpus corpus;
  corpus.vocab_size = static_cast<int>(read_pod<std::uint32_t>(in));
  corpus.pad_radius = static_cast<int>(read_pod<std::uint32_t>(in));
  const auto count = read_pod<std::uint64_t>(in);
  corpus.docs.reserve(count);
  for (std::uint64_t d = 0; d < count; ++d) {
    EncodedDocument doc;
    doc.pad_radius = corpus.pad_radius;
    doc.label = static_cast<int>(read_pod<std::int32_t>(in));
    const auto len = read_pod<std::uint64_t>(in);
    doc.token_indices.reserve(len);
    for (std::uint64_t i = 0; i < len; ++i) {
      const int idx = static_cast<int>(read_pod<std::int32_t>(in));
      if (idx < 0 || idx >= corpus.vocab_size) {
        throw FormatError("corpus cache contains out-of-range token index");
      }
      doc.token_indices.push_back(idx);
    }
    corpus.docs.push_back(std::move(doc));
  }
  return corpus;
}

}  // namespace regemb
