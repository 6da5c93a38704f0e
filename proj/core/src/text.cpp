#include "duet/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "duet/error.hpp"
#include "duet/util.hpp"

namespace duet {

std::string_view to_string(PromptSource source) {
  return source == PromptSource::cache ? "cache" : "rule";
}

PromptSource parse_prompt_source(std::string_view name) {
  if (name == "rule") return PromptSource::rule;
  if (name == "cache") return PromptSource::cache;
  throw std::invalid_argument("unknown prompt source: " + std::string(name));
}

// ---------------------------------------------------------------------------
// PromptCache

PromptCache PromptCache::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open prompt cache: " + path);
  return parse(in);
}

PromptCache PromptCache::parse(std::istream& in) {
  PromptCache cache;
  std::string line;
  std::uint64_t offset = 0;
  while (std::getline(in, line)) {
    const std::uint64_t line_start = offset;
    offset += line.size() + 1;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 3) {
      throw FormatError("prompt cache record needs 3 tab-separated fields, found " +
                            std::to_string(fields.size()),
                        line_start);
    }
    cache.insert(std::move(fields[0]), std::move(fields[1]), std::move(fields[2]));
  }
  return cache;
}

void PromptCache::insert(std::string overall, std::string person1, std::string person2) {
  entries_[std::move(overall)] = {std::move(person1), std::move(person2)};
}

std::optional<std::pair<std::string, std::string>> PromptCache::find(
    const std::string& overall) const {
  auto it = entries_.find(overall);
  if (it == entries_.end()) return std::nullopt;
  if (it->second.first.empty() || it->second.second.empty()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// Rule engine

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Drops trailing sentence punctuation and whitespace.
std::string strip_sentence(std::string_view s) {
  std::string out = trim(s);
  while (!out.empty() && (out.back() == '.' || out.back() == '!' || out.back() == ',' ||
                          out.back() == ';' || std::isspace(static_cast<unsigned char>(out.back())))) {
    out.pop_back();
  }
  return out;
}

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '\'';
}

// Occurrences of `needle` in `text` that start and end on word boundaries.
std::vector<std::size_t> find_words(const std::string& text, std::string_view needle) {
  std::vector<std::size_t> hits;
  std::size_t pos = text.find(needle);
  while (pos != std::string::npos) {
    const bool left_ok = pos == 0 || !is_word_char(text[pos - 1]);
    const std::size_t end = pos + needle.size();
    const bool right_ok = end >= text.size() || !is_word_char(text[end]);
    if (left_ok && right_ok) hits.push_back(pos);
    pos = text.find(needle, pos + 1);
  }
  return hits;
}

void replace_words(std::string& text, std::string_view from, std::string_view to) {
  auto hits = find_words(text, from);
  for (auto it = hits.rbegin(); it != hits.rend(); ++it) text.replace(*it, from.size(), to);
}

struct MarkerPair {
  std::string_view first;
  std::string_view second;
};

// Lowercase markers that introduce person 1 and person 2.
constexpr std::array<MarkerPair, 3> kMarkers{{
    {"one person", "the other"},
    {"the first", "the second"},
    {"person one", "person two"},
}};

constexpr std::array<std::string_view, 6> kClauseJoiners{"and", "while", "then", "whereas", "as",
                                                         "but"};

// True when position `pos` starts a new clause: preceded by , or ; optionally
// followed by a joining conjunction.
bool starts_clause(const std::string& text, std::size_t pos) {
  std::string before = trim(text.substr(0, pos));
  for (std::string_view joiner : kClauseJoiners) {
    if (before.size() > joiner.size() &&
        before.compare(before.size() - joiner.size(), joiner.size(), joiner) == 0 &&
        !is_word_char(before[before.size() - joiner.size() - 1])) {
      std::string rest = trim(before.substr(0, before.size() - joiner.size()));
      if (!rest.empty() && (rest.back() == ',' || rest.back() == ';')) return true;
    }
  }
  return !before.empty() && (before.back() == ',' || before.back() == ';');
}

// Position of the clause introducing person 2, if the text names both persons.
std::optional<std::size_t> find_split(const std::string& text) {
  for (const MarkerPair& m : kMarkers) {
    const auto firsts = find_words(text, m.first);
    if (firsts.empty()) continue;
    for (std::size_t pos : find_words(text, m.second)) {
      if (pos <= firsts.front()) continue;
      if (!starts_clause(text, pos)) continue;
      if (trim(text.substr(pos + m.second.size())).empty()) continue;
      return pos;
    }
  }
  return std::nullopt;
}

// Removes separators left at the end of person 1's clause.
std::string clean_clause_tail(std::string clause) {
  clause = strip_sentence(clause);
  for (bool changed = true; changed;) {
    changed = false;
    for (std::string_view joiner : kClauseJoiners) {
      if (clause.size() > joiner.size() &&
          clause.compare(clause.size() - joiner.size(), joiner.size(), joiner) == 0 &&
          !is_word_char(clause[clause.size() - joiner.size() - 1])) {
        clause = strip_sentence(clause.substr(0, clause.size() - joiner.size()));
        changed = true;
      }
    }
  }
  return clause;
}

std::string third_person(const std::string& verb) {
  static const std::map<std::string, std::string> irregular{
      {"are", "is"}, {"have", "has"}, {"do", "does"}, {"go", "goes"}, {"were", "was"}};
  if (auto it = irregular.find(verb); it != irregular.end()) return it->second;
  if (verb.empty() || !std::isalpha(static_cast<unsigned char>(verb.back()))) return verb;
  auto ends_with = [&](std::string_view suffix) {
    return verb.size() >= suffix.size() &&
           verb.compare(verb.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with("s") || ends_with("sh") || ends_with("ch") || ends_with("x") || ends_with("z") ||
      ends_with("o")) {
    return verb + "es";
  }
  if (ends_with("y") && verb.size() > 1 &&
      std::string_view("aeiou").find(verb[verb.size() - 2]) == std::string_view::npos) {
    return verb.substr(0, verb.size() - 1) + "ies";
  }
  return verb + "s";
}

constexpr std::array<std::string_view, 14> kPluralSubjects{
    "these two people", "these two persons", "these two", "the two people", "the two persons",
    "the two",          "two people",        "two persons", "both people",   "both persons",
    "the people",       "they",              "both of them", "both"};

constexpr std::array<std::string_view, 16> kNotVerbs{
    "the", "a", "an", "his", "her", "their", "then", "both", "each", "one",
    "two", "he", "she", "they", "slowly", "quickly"};

bool is_not_verb(const std::string& word) {
  return std::find(kNotVerbs.begin(), kNotVerbs.end(), word) != kNotVerbs.end();
}

// Conjugates the first verb of each clause following the plural subject.
std::string conjugate_words(const std::string& rest) {
  std::vector<std::string> words;
  std::istringstream in(rest);
  for (std::string w; in >> w;) words.push_back(w);
  bool expect_verb = true;
  for (auto& w : words) {
    if (expect_verb) {
      if (w.size() > 2 && w.compare(w.size() - 2, 2, "ly") == 0) continue;  // adverb
      if (!is_not_verb(w)) w = third_person(w);
      expect_verb = false;
    } else if (w == "and") {
      expect_verb = true;
    }
  }
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::string singularize(const std::string& text) {
  std::string out = text;
  for (std::string_view subject : kPluralSubjects) {
    if (out.compare(0, subject.size(), subject) == 0 &&
        (out.size() == subject.size() || !is_word_char(out[subject.size()]))) {
      out = "he " + conjugate_words(trim(out.substr(subject.size())));
      out = trim(out);
      break;
    }
  }
  replace_words(out, "each other's", "the other person's");
  replace_words(out, "each other", "the other person");
  replace_words(out, "one another", "the other person");
  replace_words(out, "themselves", "himself");
  replace_words(out, "their", "his");
  replace_words(out, "them", "him");
  replace_words(out, "they", "he");
  return out;
}

constexpr std::array<std::string_view, 3> kFirstSubjects{"the first person", "one person",
                                                          "person one"};

std::string reciprocal(const std::string& person1) {
  for (std::string_view subject : kFirstSubjects) {
    if (person1.compare(0, subject.size(), subject) != 0) continue;
    std::string rest = trim(person1.substr(subject.size()));
    if (rest.empty()) break;
    replace_words(rest, "the second person", "the other person");
    replace_words(rest, "the other person", "\x01");
    replace_words(rest, "the second", "\x01");
    replace_words(rest, "the other", "\x01");
    replace_words(rest, "person two", "\x01");
    std::string out = "the second person also " + rest;
    for (std::size_t p = out.find('\x01'); p != std::string::npos; p = out.find('\x01')) {
      out.replace(p, 1, "the other person");
    }
    return out;
  }
  return "the second person responds, facing the other person";
}

bool mentions_first_person(const std::string& text) {
  for (std::string_view subject : kFirstSubjects) {
    if (!find_words(text, subject).empty()) return true;
  }
  return !find_words(text, "the first").empty();
}

}  // namespace

PromptRecord decompose_prompt(std::string_view overall, const PromptCache* cache) {
  PromptRecord record;
  record.overall = std::string(overall);
  if (cache != nullptr) {
    if (auto hit = cache->find(record.overall)) {
      record.person1 = hit->first;
      record.person2 = hit->second;
      record.source = PromptSource::cache;
      return record;
    }
  }
  record.source = PromptSource::rule;
  const std::string text = strip_sentence(lowercase(overall));
  if (text.empty()) {
    record.person1 = record.person2 = "";
    return record;
  }

  if (auto split = find_split(text)) {
    record.person1 = clean_clause_tail(text.substr(0, *split));
    record.person2 = strip_sentence(text.substr(*split));
  } else if (mentions_first_person(text)) {
    record.person1 = text;
    record.person2 = reciprocal(text);
  } else {
    record.person1 = singularize(text);
    record.person2 = record.person1;
  }
  if (record.person1.empty()) record.person1 = text;
  if (record.person2.empty()) record.person2 = text;
  return record;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (is_word_char(c)) {
      current += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

// ---------------------------------------------------------------------------
// Embedding

Matrix sinusoidal_encoding(int rows, int width) {
  Matrix pe(rows, width);
  for (int p = 0; p < rows; ++p) {
    for (int i = 0; i < width; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / width);
      pe(p, i) = (i % 2 == 0) ? std::sin(p * freq) : std::cos(p * freq);
    }
  }
  return pe;
}

HashEmbedder::HashEmbedder(int width, int buckets, std::uint64_t seed)
    : width_(width), buckets_(buckets), seed_(seed) {
  if (width < 1 || buckets < 1) throw std::invalid_argument("embedder width/buckets must be positive");
}

std::size_t HashEmbedder::bucket(std::string_view token) const {
  return static_cast<std::size_t>(fnv1a64(token) % static_cast<std::uint64_t>(buckets_));
}

RowVector HashEmbedder::lookup(std::string_view token) const {
  std::uint64_t state = seed_ ^ (0x9e3779b97f4a7c15ULL * (bucket(token) + 1));
  RowVector row(width_);
  constexpr double two_pi = 6.283185307179586;
  for (int i = 0; i < width_; i += 2) {
    // Box-Muller on 53-bit uniforms.
    const double u1 = (static_cast<double>(splitmix64(state) >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    row(i) = r * std::cos(two_pi * u2);
    if (i + 1 < width_) row(i + 1) = r * std::sin(two_pi * u2);
  }
  return row;
}

Matrix HashEmbedder::embed(const std::vector<std::string>& tokens) const {
  Matrix out = sinusoidal_encoding(static_cast<int>(tokens.size()), width_);
  for (std::size_t i = 0; i < tokens.size(); ++i) out.row(static_cast<Eigen::Index>(i)) += lookup(tokens[i]);
  return out;
}

EmbeddedText embed_text(const TokenEmbedder& embedder, std::string_view text) {
  const auto tokens = tokenize(text);
  EmbeddedText out;
  if (tokens.empty()) {
    out.is_null = true;
    out.rows = Matrix::Zero(1, embedder.width());
    return out;
  }
  out.rows = embedder.embed(tokens);
  if (out.rows.rows() != static_cast<Eigen::Index>(tokens.size()) || out.rows.cols() != embedder.width()) {
    throw ContractError("token embedder returned the wrong shape");
  }
  return out;
}

// ---------------------------------------------------------------------------
// TextEncoder

TextEncoder::TextEncoder(ad::ParameterSet& params, const std::string& prefix,
                         const TextEncoderConfig& config, std::mt19937_64& rng)
    : config_(config) {
  const int l = config.width;
  const int h = config.ffn_hidden;
  null_row_ = &params.add(prefix + ".null", random_normal(1, l, 1.0, rng));
  for (int i = 0; i < config.layers; ++i) {
    const std::string p = prefix + ".layer" + std::to_string(i);
    Layer layer{};
    layer.ln1_gain = &params.add(p + ".ln1.gain", Matrix::Ones(1, l));
    layer.ln1_bias = &params.add(p + ".ln1.bias", Matrix::Zero(1, l));
    layer.query = &params.add(p + ".query", glorot(l, l, rng));
    layer.key = &params.add(p + ".key", glorot(l, l, rng));
    layer.value = &params.add(p + ".value", glorot(l, l, rng));
    layer.out = &params.add(p + ".out", glorot(l, l, rng));
    layer.ln2_gain = &params.add(p + ".ln2.gain", Matrix::Ones(1, l));
    layer.ln2_bias = &params.add(p + ".ln2.bias", Matrix::Zero(1, l));
    layer.ffn_w1 = &params.add(p + ".ffn.w1", glorot(l, h, rng));
    layer.ffn_b1 = &params.add(p + ".ffn.b1", Matrix::Zero(1, h));
    layer.ffn_w2 = &params.add(p + ".ffn.w2", glorot(h, l, rng));
    layer.ffn_b2 = &params.add(p + ".ffn.b2", Matrix::Zero(1, l));
    layers_.push_back(layer);
  }
}

ad::Var TextEncoder::encode(ad::Tape& tape, const EmbeddedText& text) const {
  ad::Var x;
  if (text.is_null) {
    x = tape.param(*null_row_);
  } else {
    if (text.rows.cols() != config_.width || text.rows.rows() < 1) {
      throw std::invalid_argument("token features must be N x " + std::to_string(config_.width));
    }
    x = tape.constant(text.rows);
  }
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(config_.width));
  for (const Layer& layer : layers_) {
    ad::Var h = ad::layer_norm_rows(x, tape.param(*layer.ln1_gain), tape.param(*layer.ln1_bias));
    ad::Var q = ad::matmul(h, tape.param(*layer.query));
    ad::Var k = ad::matmul(h, tape.param(*layer.key));
    ad::Var v = ad::matmul(h, tape.param(*layer.value));
    ad::Var attn = ad::softmax_rows(ad::scale(ad::matmul(q, ad::transpose(k)), inv_sqrt));
    x = ad::add(x, ad::matmul(ad::matmul(attn, v), tape.param(*layer.out)));
    ad::Var h2 = ad::layer_norm_rows(x, tape.param(*layer.ln2_gain), tape.param(*layer.ln2_bias));
    ad::Var f = ad::relu(ad::affine(h2, tape.param(*layer.ffn_w1), tape.param(*layer.ffn_b1)));
    x = ad::add(x, ad::affine(f, tape.param(*layer.ffn_w2), tape.param(*layer.ffn_b2)));
  }
  return x;
}

ad::Var sentence_feature(const ad::Var& word_features, const ad::Var& weight, const ad::Var& bias) {
  return ad::affine(ad::mean_rows(word_features), weight, bias);
}

RowVector sentence_feature(const Matrix& word_features, const Matrix& weight, const RowVector& bias) {
  if (word_features.rows() < 1) throw std::invalid_argument("sentence_feature needs at least one token");
  return word_features.colwise().mean() * weight + bias;
}

}  // namespace duet
