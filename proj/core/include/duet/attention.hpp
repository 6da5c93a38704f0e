#pragma once

#include <span>

#include "duet/autodiff.hpp"

namespace duet {

/// One block of tokens contributing keys and values to a mixed attention.
struct AttentionSource {
  ad::Var tokens;        // n x width_in
  ad::Var key_weight;    // width_in x d_attn
  ad::Var value_weight;  // width_in x d_value
};

/// Efficient-attention factorization over concatenated token sources:
///
///   Key   = [t_1 Wk_1; t_2 Wk_2; ...]        (n_total x d_attn)
///   Value = [t_1 Wv_1; t_2 Wv_2; ...]        (n_total x d_value)
///   G     = softmax_over_tokens(Key)^T Value (d_attn x d_value)
///   Y     = softmax_over_features(x Wq) G    (S x d_value)
///
/// Throws std::invalid_argument on inconsistent shapes.
ad::Var mixed_attention(const ad::Var& query_input, const ad::Var& query_weight,
                        std::span<const AttentionSource> sources);

/// Plain-matrix variant of the same computation, for inspection and tests.
struct MatrixSource {
  Matrix tokens;
  Matrix key_weight;
  Matrix value_weight;
};

Matrix mixed_attention(const Matrix& query_input, const Matrix& query_weight,
                       std::span<const MatrixSource> sources);

}  // namespace duet
