#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "duet/autodiff.hpp"
#include "duet/motion.hpp"

namespace duet {

/// Mean over frames and joints of the Euclidean error between two persons'
/// global joint positions.
double mpjpe(const JointPositions& predicted, const JointPositions& truth);

/// Mean over frames and joints of the distance between the two persons of
/// one pair. Compared against the reference value of real data.
double mpjie(const JointPositions& person1, const JointPositions& person2);

// Embedding metrics. Every matrix holds one embedding per row.

/// Frechet distance between Gaussian fits of the two row sets.
double fid(const Matrix& a, const Matrix& b);

/// Mean Euclidean distance between paired rows.
double mm_dist(const Matrix& motion, const Matrix& text);

/// Mean distance over `pair_count` seeded random pairs (i != j).
double diversity(const Matrix& embeddings, int pair_count, std::uint64_t seed);
/// Mean distance over the given index pairs.
double diversity(const Matrix& embeddings, std::span<const std::pair<int, int>> pairs);

/// Mean over prompts of the mean distance between that prompt's generations,
/// using `pair_count` seeded pairs per prompt.
double multimodality(const std::vector<Matrix>& per_prompt, int pair_count, std::uint64_t seed);

/// Rows are shuffled with `seed` and split into pools of `pool_size`; a
/// motion counts as a hit when fewer than `top_k` texts of its pool lie
/// strictly closer than its own text. An incomplete final pool is dropped.
double retrieval_precision(const Matrix& motion, const Matrix& text, int top_k, int pool_size,
                           std::uint64_t seed);

}  // namespace duet
