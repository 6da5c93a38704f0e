#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "duet/autodiff.hpp"
#include "duet/dataset.hpp"
#include "duet/text.hpp"

namespace duet {

struct EvaluatorConfig {
  int embed_width = 32;
  int hidden = 64;
  int steps = 500;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double temperature = 0.1;
  int chunks = 6;  // temporal chunks in the motion summary
};

/// Both persons' joint positions averaged over `chunks` contiguous frame
/// chunks, flattened to one row.
RowVector motion_summary(const DualMotion& motion, int chunks);
/// Mean of the frozen token rows (no position offsets).
RowVector text_summary(std::string_view text, const HashEmbedder& embedder);

/// Small contrastive motion/text encoder pair used to compute the embedding
/// metrics at desk scale. Its numbers are not comparable to evaluators
/// trained on real motion capture data.
class ToyEvaluator {
 public:
  ToyEvaluator(int joints, int frames, int text_width, const EvaluatorConfig& config,
               std::uint64_t seed);

  /// Symmetric InfoNCE over (motion, overall prompt) pairs.
  static ToyEvaluator train(const std::vector<Sample>& samples, const EvaluatorConfig& config,
                            std::uint64_t seed, int text_width = 64);

  /// One L2-normalized embedding per row.
  Matrix embed_motions(const std::vector<DualMotion>& motions) const;
  Matrix embed_texts(const std::vector<std::string>& texts) const;

  void save(const std::string& path) const;
  static ToyEvaluator load(const std::string& path);

  int embed_width() const { return config_.embed_width; }
  int joints() const { return joints_; }
  int frames() const { return frames_; }
  const EvaluatorConfig& config() const { return config_; }

 private:
  struct Encoder {
    ad::Parameter *w1, *b1, *w2, *b2;
  };

  ad::Var encode(ad::Tape& tape, const Encoder& enc, const Matrix& inputs) const;
  Matrix motion_inputs(const std::vector<DualMotion>& motions) const;
  Matrix text_inputs(const std::vector<std::string>& texts) const;

  int joints_;
  int frames_;
  int text_width_;
  EvaluatorConfig config_;
  HashEmbedder embedder_;
  ad::ParameterSet params_;
  Encoder motion_;
  Encoder text_;
  RowVector motion_mean_, motion_scale_;
  RowVector text_mean_, text_scale_;
};

}  // namespace duet
