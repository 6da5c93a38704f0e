#include "duet/checkpoint.hpp"

#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "binary_io.hpp"
#include "duet/error.hpp"
#include "duet/util.hpp"

namespace duet {

namespace {

constexpr char kMagic[8] = {'D', 'U', 'E', 'T', 'T', 'N', 'S', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr const char* kModelKind = "duet-model";

}  // namespace

const Matrix* TensorArchive::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t.value;
  }
  return nullptr;
}

const Matrix& TensorArchive::get(const std::string& name) const {
  if (const Matrix* m = find(name)) return *m;
  throw FormatError("archive has no tensor named " + name, 0);
}

std::string encode_archive(const TensorArchive& archive) {
  detail::Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.str(archive.kind);
  w.str(archive.meta.dump());
  w.u32(static_cast<std::uint32_t>(archive.tensors.size()));
  for (const auto& t : archive.tensors) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.value.rows()));
    w.u32(static_cast<std::uint32_t>(t.value.cols()));
    for (Eigen::Index r = 0; r < t.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.value.cols(); ++c) w.f32(static_cast<float>(t.value(r, c)));
    }
  }
  return w.take();
}

TensorArchive decode_archive(const std::string& bytes) {
  detail::Reader r(bytes);
  char magic[8];
  r.bytes(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw FormatError("bad archive magic", 0);
  const std::size_t version_at = r.pos();
  if (r.u32("version") != kVersion) throw FormatError("unsupported archive version", version_at);
  TensorArchive a;
  a.kind = r.str("kind");
  const std::size_t meta_at = r.pos();
  try {
    a.meta = nlohmann::json::parse(r.str("metadata"));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("archive metadata: ") + e.what(), meta_at);
  }
  const std::uint32_t count = r.u32("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.str("tensor name");
    const std::size_t shape_at = r.pos();
    const std::uint64_t rows = r.u32("rows");
    const std::uint64_t cols = r.u32("cols");
    if (rows * cols > r.remaining() / 4) {
      throw FormatError("tensor " + t.name + " larger than the remaining file", shape_at);
    }
    t.value.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index row = 0; row < t.value.rows(); ++row) {
      for (Eigen::Index col = 0; col < t.value.cols(); ++col) t.value(row, col) = r.f32("tensor");
    }
    a.tensors.push_back(std::move(t));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after archive", r.pos());
  return a;
}

void save_archive(const std::string& path, const TensorArchive& archive) {
  const std::string tmp = path + ".tmp";
  detail::write_file(tmp, encode_archive(archive));
  std::filesystem::rename(tmp, path);
}

TensorArchive load_archive(const std::string& path) {
  return decode_archive(detail::read_file(path));
}

void save_checkpoint(const std::string& path, const RunConfig& config, std::uint64_t step,
                     const FeatureNormalizer& normalizer, const Denoiser& model,
                     const Adam* optimizer) {
  TensorArchive a;
  a.kind = kModelKind;
  a.meta = {{"config", config_to_json(config)},
            {"fingerprint", hex64(config_fingerprint(config))},
            {"step", step},
            {"optimizer_steps", optimizer != nullptr ? optimizer->steps() : 0}};
  a.tensors.push_back({"normalizer.mean", normalizer.mean});
  a.tensors.push_back({"normalizer.scale", normalizer.scale});
  const auto& params = model.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    a.tensors.push_back({"param." + params[i].name, params[i].value});
  }
  if (optimizer != nullptr) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      a.tensors.push_back({"adam.m." + params[i].name, optimizer->first_moments()[i]});
      a.tensors.push_back({"adam.v." + params[i].name, optimizer->second_moments()[i]});
    }
  }
  save_archive(path, a);
}

ModelCheckpoint load_checkpoint(const std::string& path, const RunConfig* expected, bool force) {
  const TensorArchive a = load_archive(path);
  if (a.kind != kModelKind) {
    throw FormatError(path + " holds a '" + a.kind + "' archive, not a model checkpoint", 0);
  }
  ModelCheckpoint ck;
  try {
    ck.config = config_from_json(a.meta.at("config"));
    ck.step = a.meta.at("step").get<std::uint64_t>();
    const std::string stored = a.meta.at("fingerprint").get<std::string>();
    if (stored != hex64(config_fingerprint(ck.config))) {
      throw FormatError(path + ": fingerprint does not match the embedded config", 0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": bad checkpoint metadata: " + e.what(), 0);
  }
  if (expected != nullptr && !force &&
      config_fingerprint(*expected) != config_fingerprint(ck.config)) {
    throw std::invalid_argument(path + ": config fingerprint " +
                                hex64(config_fingerprint(ck.config)) + " differs from expected " +
                                hex64(config_fingerprint(*expected)) + " (use --force to override)");
  }

  const int width = ck.config.model.motion_width();
  ck.normalizer.mean = a.get("normalizer.mean");
  ck.normalizer.scale = a.get("normalizer.scale");
  if (ck.normalizer.mean.cols() != width || ck.normalizer.scale.cols() != width) {
    throw FormatError(path + ": normalizer width mismatch", 0);
  }

  ck.model = std::make_unique<Denoiser>(ck.config.model, ck.config.seed);
  auto& params = ck.model->params();
  auto load_into = [&](const std::string& name, Matrix& dst) {
    const Matrix& src = a.get(name);
    if (src.rows() != dst.rows() || src.cols() != dst.cols()) {
      throw FormatError(path + ": tensor " + name + " has the wrong shape", 0);
    }
    if (!src.allFinite()) throw FormatError(path + ": tensor " + name + " is not finite", 0);
    dst = src;
  };
  for (std::size_t i = 0; i < params.size(); ++i) load_into("param." + params[i].name, params[i].value);

  if (a.find("adam.m." + params[0].name) != nullptr) {
    Adam adam(params);
    for (std::size_t i = 0; i < params.size(); ++i) {
      load_into("adam.m." + params[i].name, adam.first_moments()[i]);
      load_into("adam.v." + params[i].name, adam.second_moments()[i]);
    }
    adam.set_steps(a.meta.value("optimizer_steps", 0LL));
    ck.optimizer = std::move(adam);
  }
  return ck;
}

}  // namespace duet
