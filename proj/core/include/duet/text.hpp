#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "duet/autodiff.hpp"

namespace duet {

// ---------------------------------------------------------------------------
// Prompt decomposition

enum class PromptSource { rule, cache };

std::string_view to_string(PromptSource source);
PromptSource parse_prompt_source(std::string_view name);

/// An overall interaction prompt split into one description per person.
struct PromptRecord {
  std::string overall;
  std::string person1;
  std::string person2;
  PromptSource source = PromptSource::rule;

  bool operator==(const PromptRecord&) const = default;
};

/// Replays previously collected decompositions keyed by the exact overall
/// prompt. File format: one `overall TAB person1 TAB person2` record per
/// LF-terminated line, UTF-8.
class PromptCache {
 public:
  static PromptCache load(const std::string& path);
  static PromptCache parse(std::istream& in);

  void insert(std::string overall, std::string person1, std::string person2);
  /// Entries with an empty side are ignored so the caller falls back to rules.
  std::optional<std::pair<std::string, std::string>> find(const std::string& overall) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, std::pair<std::string, std::string>> entries_;
};

/// Splits an overall prompt using the cache when it has a usable entry, else
/// with the three-case rule engine:
///  1. no per-person markers: both persons get the prompt rewritten in the
///     singular ("these two return" -> "he returns");
///  2. "one ... the other" style markers: split at the clause that introduces
///     the second person;
///  3. only the first person described: person 2 receives a reciprocal
///     description derived from person 1's clause.
PromptRecord decompose_prompt(std::string_view overall, const PromptCache* cache = nullptr);

/// Lowercased word tokens; punctuation separates tokens and is dropped.
std::vector<std::string> tokenize(std::string_view text);

// ---------------------------------------------------------------------------
// Token embedding

/// rows x width sinusoidal position table.
Matrix sinusoidal_encoding(int rows, int width);

/// Frozen token features (N x L) for a tokenized text; `is_null` marks the
/// empty text, which the encoder maps to its learned null row.
struct EmbeddedText {
  Matrix rows;
  bool is_null = false;
};

/// Frozen word-feature source. Implementations must be deterministic and
/// return one row per token.
class TokenEmbedder {
 public:
  virtual ~TokenEmbedder() = default;
  virtual int width() const = 0;
  virtual Matrix embed(const std::vector<std::string>& tokens) const = 0;
};

/// Vocabulary-free embedder: each token hashes into a bucket of a fixed
/// pseudo-random table; sinusoidal position offsets are then added.
class HashEmbedder final : public TokenEmbedder {
 public:
  explicit HashEmbedder(int width, int buckets = 4096, std::uint64_t seed = 0x5eedULL);

  int width() const override { return width_; }
  Matrix embed(const std::vector<std::string>& tokens) const override;

  /// Raw table row for one token (no position offset).
  RowVector lookup(std::string_view token) const;
  std::size_t bucket(std::string_view token) const;

 private:
  int width_;
  int buckets_;
  std::uint64_t seed_;
};

EmbeddedText embed_text(const TokenEmbedder& embedder, std::string_view text);

struct TextEncoderConfig {
  int width = 64;
  int layers = 2;
  int ffn_hidden = 128;
};

/// Trainable encoder stack applied on top of frozen token features: pre-norm
/// single-head self-attention and a ReLU feed-forward block per layer.
class TextEncoder {
 public:
  TextEncoder(ad::ParameterSet& params, const std::string& prefix, const TextEncoderConfig& config,
              std::mt19937_64& rng);

  /// N x L word features; the null text yields a single row.
  ad::Var encode(ad::Tape& tape, const EmbeddedText& text) const;
  const TextEncoderConfig& config() const { return config_; }

 private:
  struct Layer {
    ad::Parameter *ln1_gain, *ln1_bias, *query, *key, *value, *out;
    ad::Parameter *ln2_gain, *ln2_bias, *ffn_w1, *ffn_b1, *ffn_w2, *ffn_b2;
  };

  TextEncoderConfig config_;
  ad::Parameter* null_row_;
  std::vector<Layer> layers_;
};

/// Mean-pools word features and applies the affine map L -> D.
ad::Var sentence_feature(const ad::Var& word_features, const ad::Var& weight, const ad::Var& bias);
RowVector sentence_feature(const Matrix& word_features, const Matrix& weight, const RowVector& bias);

}  // namespace duet
