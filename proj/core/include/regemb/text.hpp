#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "regemb/errors.hpp"

namespace regemb {

/// Lowercases, isolates each punctuation character as its own token, then
/// splits on whitespace. Total function: empty input yields an empty sequence.
std::vector<std::string> tokenize(std::string_view text);

/// Token <-> index map with reserved padding/unknown entries and min-count
/// pruning. Immutable after construction.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr const char* kPadToken = "<pad>";
  static constexpr const char* kUnkToken = "<unk>";

  Vocabulary();

  int size() const { return static_cast<int>(tokens_.size()); }
  int min_count() const { return min_count_; }

  /// Index of a token, kUnk when absent.
  int lookup(const std::string& token) const;
  const std::string& token(int index) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Rebuilds the index from an externally supplied token list (checkpoint
  /// load path). tokens[0]/tokens[1] must be the reserved entries.
  static Vocabulary from_tokens(std::vector<std::string> tokens, int min_count);

  friend Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus,
                                int min_count);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  int min_count_ = 2;
};

/// Deterministic vocabulary construction: tokens with corpus frequency below
/// min_count are dropped; surviving tokens are indexed by descending
/// frequency, ties broken by first appearance.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus,
                       int min_count);

/// Padded index sequence plus class label.
struct EncodedDocument {
  std::vector<int> token_indices;  // length L + 2c, c PADs at each end
  int label = 0;
  int pad_radius = 0;  // c

  std::size_t padded_length() const { return token_indices.size(); }
  std::size_t unpadded_length() const {
    return token_indices.size() - 2 * static_cast<std::size_t>(pad_radius);
  }
};

/// Maps tokens to indices (OOV -> UNK) and pads with c PAD entries per side.
std::vector<int> encode(const std::vector<std::string>& tokens,
                        const Vocabulary& vocab, int c);

struct RawDocument {
  int label = 0;  // 0-based
  std::string text;
};

/// Loads a CSV corpus in the benchmark distribution format: a 1-based class
/// index followed by one or more quoted text fields. Escaped quotes ("") and
/// literal "\n" sequences are unescaped; text fields are joined with a space.
std::vector<RawDocument> load_csv(const std::string& path);

struct CorpusStats {
  std::size_t documents = 0;
  std::vector<std::size_t> class_histogram;
  std::size_t vocab_size = 0;
  double mean_length = 0.0;
  std::size_t max_length = 0;
};

struct EncodedCorpus {
  std::vector<EncodedDocument> docs;
  int pad_radius = 0;
  int vocab_size = 0;
};

/// Tokenizes, truncates to max_len tokens (0 = unlimited) and encodes every
/// document.
EncodedCorpus encode_corpus(const std::vector<RawDocument>& raw,
                            const Vocabulary& vocab, int c,
                            std::size_t max_len = 256);

CorpusStats corpus_stats(const std::vector<RawDocument>& raw,
                         const Vocabulary& vocab, int num_classes);

/// Versioned binary cache of an encoded corpus.
void save_corpus_cache(const std::string& path, const EncodedCorpus& corpus);
EncodedCorpus load_corpus_cache(const std::string& path);

}  // namespace regemb
