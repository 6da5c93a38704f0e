#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "duet/config.hpp"
#include "duet/dataset.hpp"
#include "duet/denoiser.hpp"
#include "duet/optim.hpp"

namespace duet {

struct NamedTensor {
  std::string name;
  Matrix value;
};

/// Generic container: a kind tag, JSON metadata and named tensors.
/// Layout (little-endian): magic "DUETTNS1", u32 version, string kind,
/// string metadata JSON, u32 tensor count, then per tensor: string name,
/// u32 rows, u32 cols, rows*cols f32 in row-major order. Strings are a u32
/// byte length followed by the bytes.
struct TensorArchive {
  std::string kind;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const Matrix* find(const std::string& name) const;
  /// Throws FormatError when the tensor is missing.
  const Matrix& get(const std::string& name) const;
};

std::string encode_archive(const TensorArchive& archive);
TensorArchive decode_archive(const std::string& bytes);
void save_archive(const std::string& path, const TensorArchive& archive);
TensorArchive load_archive(const std::string& path);

/// A trained denoiser with everything needed to resume or sample.
struct ModelCheckpoint {
  RunConfig config;
  std::uint64_t step = 0;
  FeatureNormalizer normalizer;
  std::unique_ptr<Denoiser> model;
  /// Present when the file carries optimizer moments.
  std::optional<Adam> optimizer;
};

void save_checkpoint(const std::string& path, const RunConfig& config, std::uint64_t step,
                     const FeatureNormalizer& normalizer, const Denoiser& model,
                     const Adam* optimizer);

/// With `expected` set, a fingerprint different from the expected config's
/// is refused (std::invalid_argument) unless `force` is true.
ModelCheckpoint load_checkpoint(const std::string& path, const RunConfig* expected = nullptr,
                                bool force = false);

}  // namespace duet
