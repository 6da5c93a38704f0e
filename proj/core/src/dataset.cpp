#include "duet/dataset.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "binary_io.hpp"
#include "duet/error.hpp"

namespace duet {

namespace {

using detail::Reader;
using detail::Writer;
using detail::read_file;
using detail::write_file;

constexpr char kMagic[8] = {'D', 'U', 'E', 'T', 'M', 'O', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

std::string escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape(const std::string& s, std::uint64_t offset) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (i + 1 >= s.size()) throw FormatError("dangling escape in prompt sidecar", offset + i);
    switch (s[++i]) {
      case '\\': out += '\\'; break;
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      default: throw FormatError("unknown escape in prompt sidecar", offset + i);
    }
  }
  return out;
}

}  // namespace

std::string prompt_sidecar_path(const std::string& path) { return path + ".prompts.tsv"; }

std::string encode_motion_payload(const std::vector<Sample>& samples) {
  int joints = samples.empty() ? 1 : samples.front().motion.joint_count();
  int frames = samples.empty() ? 1 : samples.front().motion.frame_count();
  float fps = samples.empty() ? 20.0F : samples.front().motion.person1.fps;
  for (const Sample& s : samples) {
    s.motion.validate();
    if (s.motion.joint_count() != joints || s.motion.frame_count() != frames ||
        s.motion.person1.fps != fps) {
      throw std::invalid_argument("all samples in a dataset must share joint count, frames and fps");
    }
  }
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(joints));
  w.u32(static_cast<std::uint32_t>(frames));
  w.f32(fps);
  w.u32(2);
  w.u32(static_cast<std::uint32_t>(samples.size()));
  for (const Sample& s : samples) {
    w.u32(static_cast<std::uint32_t>(s.motion.id.size()));
    w.bytes(s.motion.id.data(), s.motion.id.size());
    for (const MotionSequence* person : {&s.motion.person1, &s.motion.person2}) {
      for (int f = 0; f < person->frame_count(); ++f) {
        for (Eigen::Index c = 0; c < person->frames.cols(); ++c) w.f32(person->frames(f, c));
      }
    }
  }
  return w.take();
}

std::vector<DualMotion> decode_motion_payload(const std::string& bytes) {
  Reader r(bytes);
  char magic[8];
  r.bytes(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw FormatError("bad magic bytes", 0);
  const std::size_t version_at = r.pos();
  if (r.u32("version") != kVersion) throw FormatError("unsupported version", version_at);
  const std::size_t joints_at = r.pos();
  const std::uint32_t joints = r.u32("joint count");
  if (joints == 0 || joints > 1024) throw FormatError("invalid joint count", joints_at);
  const std::size_t frames_at = r.pos();
  const std::uint32_t frames = r.u32("frame count");
  if (frames == 0) throw FormatError("invalid frame count", frames_at);
  const std::size_t fps_at = r.pos();
  const float fps = r.f32("fps");
  if (!(fps > 0.0F)) throw FormatError("invalid fps", fps_at);
  const std::size_t persons_at = r.pos();
  if (r.u32("person count") != 2) throw FormatError("person count must be 2", persons_at);
  const std::uint32_t count = r.u32("sample count");

  const int width = feature_dim(static_cast<int>(joints));
  const std::uint64_t per_person = static_cast<std::uint64_t>(frames) * width * sizeof(float);
  std::vector<DualMotion> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    DualMotion m;
    const std::size_t id_at = r.pos();
    const std::uint32_t id_len = r.u32("id length");
    if (id_len > r.remaining()) throw FormatError("id length exceeds file size", id_at);
    m.id.resize(id_len);
    r.bytes(m.id.data(), id_len, "sample id");
    if (2 * per_person > r.remaining()) {
      throw FormatError("motion payload shorter than header dimensions imply", r.pos());
    }
    for (MotionSequence* person : {&m.person1, &m.person2}) {
      person->joint_count = static_cast<int>(joints);
      person->fps = fps;
      person->frames.resize(frames, width);
      for (std::uint32_t f = 0; f < frames; ++f) {
        for (int c = 0; c < width; ++c) person->frames(f, c) = r.f32("frame data");
      }
    }
    out.push_back(std::move(m));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after last sample", r.pos());
  return out;
}

std::string encode_prompt_sidecar(const std::vector<Sample>& samples) {
  std::string out;
  for (const Sample& s : samples) {
    out += escape(s.motion.id) + '\t' + escape(s.prompts.overall) + '\t' +
           escape(s.prompts.person1) + '\t' + escape(s.prompts.person2) + '\t' +
           std::string(to_string(s.prompts.source)) + '\n';
  }
  return out;
}

std::vector<std::pair<std::string, PromptRecord>> decode_prompt_sidecar(const std::string& text) {
  std::vector<std::pair<std::string, PromptRecord>> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) throw FormatError("prompt sidecar line not LF-terminated", pos);
    const std::string line = text.substr(pos, eol - pos);
    std::vector<std::string> fields;
    std::vector<std::size_t> starts;
    std::size_t start = 0;
    for (;;) {
      const std::size_t tab = line.find('\t', start);
      starts.push_back(start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 5) throw FormatError("prompt sidecar record needs 5 fields", pos);
    PromptRecord rec;
    rec.overall = unescape(fields[1], pos + starts[1]);
    rec.person1 = unescape(fields[2], pos + starts[2]);
    rec.person2 = unescape(fields[3], pos + starts[3]);
    try {
      rec.source = parse_prompt_source(fields[4]);
    } catch (const std::invalid_argument&) {
      throw FormatError("unknown prompt source", pos + starts[4]);
    }
    out.emplace_back(unescape(fields[0], pos), std::move(rec));
    pos = eol + 1;
  }
  return out;
}

void save_dataset(const std::string& path, const std::vector<Sample>& samples) {
  write_file(path, encode_motion_payload(samples));
  write_file(prompt_sidecar_path(path), encode_prompt_sidecar(samples));
}

std::vector<Sample> load_dataset(const std::string& path) {
  auto motions = decode_motion_payload(read_file(path));
  const std::string sidecar = read_file(prompt_sidecar_path(path));
  auto prompts = decode_prompt_sidecar(sidecar);
  if (prompts.size() != motions.size()) {
    throw FormatError("prompt sidecar has " + std::to_string(prompts.size()) + " records for " +
                          std::to_string(motions.size()) + " motions",
                      sidecar.size());
  }
  std::vector<Sample> out;
  out.reserve(motions.size());
  for (std::size_t i = 0; i < motions.size(); ++i) {
    if (prompts[i].first != motions[i].id) {
      throw FormatError("prompt sidecar id '" + prompts[i].first + "' does not match motion id '" +
                            motions[i].id + "'",
                        0);
    }
    out.push_back(Sample{std::move(motions[i]), std::move(prompts[i].second)});
  }
  return out;
}

}  // namespace duet

namespace duet {

FeatureNormalizer FeatureNormalizer::fit(const std::vector<Sample>& samples, double min_scale) {
  if (samples.empty()) throw std::invalid_argument("cannot fit a normalizer on no samples");
  const Eigen::Index width = samples.front().motion.person1.frames.cols();
  RowVector sum = RowVector::Zero(width);
  RowVector sq = RowVector::Zero(width);
  double count = 0.0;
  for (const auto& s : samples) {
    for (const MotionSequence* m : {&s.motion.person1, &s.motion.person2}) {
      if (m->frames.cols() != width) throw std::invalid_argument("normalizer: mixed feature widths");
      const Matrix f = m->frames.cast<double>();
      sum += f.colwise().sum();
      sq += f.array().square().matrix().colwise().sum();
      count += static_cast<double>(f.rows());
    }
  }
  FeatureNormalizer n;
  n.mean = sum / count;
  const RowVector var = (sq / count - n.mean.cwiseProduct(n.mean)).cwiseMax(0.0);
  n.scale = var.cwiseSqrt().cwiseMax(min_scale);
  return n;
}

FeatureNormalizer FeatureNormalizer::identity(int width) {
  return {RowVector::Zero(width), RowVector::Ones(width)};
}

Matrix FeatureNormalizer::normalize(const FrameMatrix& frames) const {
  if (frames.cols() != mean.cols()) throw std::invalid_argument("normalizer width mismatch");
  return (frames.cast<double>().rowwise() - mean).array().rowwise() / scale.array();
}

FrameMatrix FeatureNormalizer::denormalize(const Matrix& features) const {
  if (features.cols() != mean.cols()) throw std::invalid_argument("normalizer width mismatch");
  const Matrix raw = (features.array().rowwise() * scale.array()).matrix().rowwise() + mean;
  return raw.cast<float>();
}

}  // namespace duet
