#include "duet/attention.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace duet {

namespace {

std::string dims(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

ad::Var mixed_attention(const ad::Var& query_input, const ad::Var& query_weight,
                        std::span<const AttentionSource> sources) {
  if (sources.empty()) throw std::invalid_argument("mixed_attention: no key/value sources");
  const Matrix& wq = query_weight.value();
  if (query_input.cols() != wq.rows()) {
    throw std::invalid_argument("mixed_attention: query input " + dims(query_input.value()) +
                                " vs weight " + dims(wq));
  }
  const Eigen::Index d_attn = wq.cols();
  const Eigen::Index d_value = sources.front().value_weight.cols();

  std::vector<ad::Var> keys;
  std::vector<ad::Var> values;
  keys.reserve(sources.size());
  values.reserve(sources.size());
  for (const auto& src : sources) {
    const Matrix& wk = src.key_weight.value();
    const Matrix& wv = src.value_weight.value();
    if (src.tokens.cols() != wk.rows() || src.tokens.cols() != wv.rows()) {
      throw std::invalid_argument("mixed_attention: tokens " + dims(src.tokens.value()) +
                                  " vs key " + dims(wk) + " / value " + dims(wv));
    }
    if (wk.cols() != d_attn || wv.cols() != d_value) {
      throw std::invalid_argument("mixed_attention: projection widths disagree");
    }
    keys.push_back(ad::matmul(src.tokens, src.key_weight));
    values.push_back(ad::matmul(src.tokens, src.value_weight));
  }
  const ad::Var key = keys.size() == 1 ? keys.front() : ad::vstack(keys);
  const ad::Var value = values.size() == 1 ? values.front() : ad::vstack(values);
  const ad::Var context = ad::matmul(ad::transpose(ad::softmax_cols(key)), value);
  return ad::matmul(ad::softmax_rows(ad::matmul(query_input, query_weight)), context);
}

Matrix mixed_attention(const Matrix& query_input, const Matrix& query_weight,
                       std::span<const MatrixSource> sources) {
  ad::Tape tape(false);
  std::vector<AttentionSource> vars;
  vars.reserve(sources.size());
  for (const auto& s : sources) {
    vars.push_back({tape.constant(s.tokens), tape.constant(s.key_weight),
                    tape.constant(s.value_weight)});
  }
  return mixed_attention(tape.constant(query_input), tape.constant(query_weight), vars).value();
}

}  // namespace duet
