#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "duet/checkpoint.hpp"
#include "duet/dataset.hpp"
#include "duet/evaluator.hpp"
#include "duet/synth.hpp"
#include "duet/text.hpp"

namespace duet {

/// Per-sample seed for item `index` of a run seeded with `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// `count` synthetic samples cycling through `scenarios`, each with its
/// prompt decomposed (cache first) and a seed derived from `seed`.
std::vector<Sample> synth_dataset(const std::vector<Scenario>& scenarios, int count,
                                  const SynthOptions& options, std::uint64_t seed,
                                  const PromptCache* cache = nullptr);

/// Maps raw model features to a valid pose sequence: contact flags are
/// rounded to {0, 1}, rotation blocks are re-orthonormalized and velocities
/// are recomputed as first differences of the positions.
MotionSequence finalize_motion(const FrameMatrix& raw, int joint_count, float fps);

struct SamplingOverrides {
  std::optional<int> sample_steps;
  std::optional<double> guidance_scale;
};

/// Samples one dual motion for an already decomposed prompt.
DualMotion sample_motion(const ModelCheckpoint& checkpoint, const PromptRecord& prompts,
                         std::uint64_t seed, const SamplingOverrides& overrides = {},
                         float fps = 20.0F);

struct Generation {
  PromptRecord prompts;
  std::vector<Sample> samples;
  std::vector<RowVector> profiles;  // predicted distance profile per sample
};

/// Decomposes `prompt` (cache first), then samples `count` motions with
/// per-sample seeds derived from `seed`.
Generation generate(const ModelCheckpoint& checkpoint, const std::string& prompt, int count,
                    std::uint64_t seed, const PromptCache* cache = nullptr,
                    const SamplingOverrides& overrides = {});

/// Writes the samples in dataset format at `path` and the inspection
/// sidecar `<path>.profiles.tsv` (id, prompts, predicted profile).
void write_generation(const std::string& path, const Generation& generation);
std::string profile_sidecar_path(const std::string& path);

// ---------------------------------------------------------------------------
// Evaluation

/// Ordered metric name/value pairs plus provenance of the run.
struct Report {
  std::string fingerprint;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, double>> metrics;

  void set(const std::string& name, double value);
  std::optional<double> find(const std::string& name) const;
  double at(const std::string& name) const;

  std::string to_tsv() const;
  nlohmann::json to_json() const;
  static Report from_json(const nlohmann::json& j);
  bool operator==(const Report&) const = default;
};

enum class Metric { mpjpe, mpjie, fid, mm_dist, diversity, multimodality, r_precision };

/// Comma-separated names; "all" selects every metric.
std::vector<Metric> parse_metrics(const std::string& list);
bool is_embedding_metric(Metric m);

struct EvaluateOptions {
  std::vector<Metric> metrics{Metric::mpjpe, Metric::mpjie};
  std::uint64_t seed = 0;
  const ToyEvaluator* evaluator = nullptr;
  int diversity_pairs = 300;
  int multimodality_pairs = 100;
  int retrieval_pool = 32;
  /// Checkpoint mode only: prompts and generations per prompt used for
  /// multimodality.
  int multimodality_prompts = 10;
  int multimodality_repeats = 3;
  SamplingOverrides overrides;
};

/// Compares predictions to ground truth, pairing by position. `groups` holds
/// extra generations per prompt for multimodality (may be empty when not
/// requested). Requesting an embedding metric without an evaluator raises
/// std::invalid_argument.
Report evaluate_predictions(const std::vector<Sample>& predicted, const std::vector<Sample>& truth,
                            const EvaluateOptions& options, const std::string& fingerprint,
                            const std::vector<std::vector<DualMotion>>& groups = {});

/// Generates one motion per ground-truth sample from its stored prompts and
/// evaluates the result.
Report evaluate_checkpoint(const ModelCheckpoint& checkpoint, const std::vector<Sample>& truth,
                           const EvaluateOptions& options);

/// Ground-truth predictions: one generation per sample for `truth`.
std::vector<Sample> generate_for_dataset(const ModelCheckpoint& checkpoint,
                                         const std::vector<Sample>& truth, std::uint64_t seed,
                                         const SamplingOverrides& overrides = {});

/// Delimited table: id, K segment mean distances, K ground-truth profile
/// weights and, with a checkpoint, K predicted weights.
std::string distance_table(const std::vector<Sample>& samples, int segments,
                           const ModelCheckpoint* checkpoint = nullptr);

}  // namespace duet
