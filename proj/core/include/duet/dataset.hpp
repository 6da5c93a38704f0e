#pragma once

#include <string>
#include <vector>

#include "duet/motion.hpp"
#include "duet/text.hpp"

namespace duet {

struct Sample {
  DualMotion motion;
  PromptRecord prompts;

  bool operator==(const Sample&) const = default;
};

/// Motion payload layout (little-endian):
///   magic "DUETMOT1", u32 version, u32 joint_count, u32 frames, f32 fps,
///   u32 person_count (= 2), u32 sample_count,
///   then per sample: u32 id length, id bytes, person 1 frames, person 2
///   frames, each S x D f32 in frame-major order.
/// Prompts go to `<path>.prompts.tsv`: one line per sample,
///   id TAB overall TAB person1 TAB person2 TAB source
/// with backslash escapes for tab, newline, carriage return and backslash.
void save_dataset(const std::string& path, const std::vector<Sample>& samples);
std::vector<Sample> load_dataset(const std::string& path);

std::string prompt_sidecar_path(const std::string& path);

/// Serialization without touching the filesystem, used by save/load.
std::string encode_motion_payload(const std::vector<Sample>& samples);
std::vector<DualMotion> decode_motion_payload(const std::string& bytes);
std::string encode_prompt_sidecar(const std::vector<Sample>& samples);
/// Returns (id, prompts) in file order.
std::vector<std::pair<std::string, PromptRecord>> decode_prompt_sidecar(const std::string& text);

}  // namespace duet

namespace duet {

/// Per-channel affine standardization of pose features, fitted over all
/// frames of both persons.
struct FeatureNormalizer {
  RowVector mean;
  RowVector scale;

  /// Channels whose spread is below `min_scale` use `min_scale` instead.
  static FeatureNormalizer fit(const std::vector<Sample>& samples, double min_scale = 1e-2);
  static FeatureNormalizer identity(int width);

  Matrix normalize(const FrameMatrix& frames) const;
  FrameMatrix denormalize(const Matrix& features) const;
};

}  // namespace duet
