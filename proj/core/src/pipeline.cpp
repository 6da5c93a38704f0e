#include "duet/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "duet/adaptive.hpp"
#include "duet/diffusion.hpp"
#include "duet/metrics.hpp"
#include "duet/util.hpp"

namespace duet {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t state = seed ^ (0x9e3779b97f4a7c15ULL * (index + 1));
  return splitmix64(state);
}

std::vector<Sample> synth_dataset(const std::vector<Scenario>& scenarios, int count,
                                  const SynthOptions& options, std::uint64_t seed,
                                  const PromptCache* cache) {
  if (scenarios.empty()) throw std::invalid_argument("synth_dataset needs at least one scenario");
  if (count < 0) throw std::invalid_argument("sample count must be >= 0");
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const Scenario sc = scenarios[static_cast<std::size_t>(i) % scenarios.size()];
    SynthSample s = synth_generate(sc, options, derive_seed(seed, static_cast<std::uint64_t>(i)));
    out.push_back({std::move(s.motion), decompose_prompt(s.prompt, cache)});
  }
  return out;
}

MotionSequence finalize_motion(const FrameMatrix& raw, int joint_count, float fps) {
  const FeatureLayout layout(joint_count);
  if (raw.cols() != layout.width || raw.rows() < 1) {
    throw std::invalid_argument("finalize_motion: feature width mismatch");
  }
  MotionSequence m;
  m.joint_count = joint_count;
  m.fps = fps;
  m.frames = raw;
  const int j3 = 3 * joint_count;
  for (Eigen::Index f = 0; f < raw.rows(); ++f) {
    if (f == 0) {
      m.frames.row(0).segment(layout.velocities, j3).setZero();
    } else {
      m.frames.row(f).segment(layout.velocities, j3) =
          m.frames.row(f).segment(layout.positions, j3) -
          m.frames.row(f - 1).segment(layout.positions, j3);
    }
    for (int j = 0; j < joint_count; ++j) {
      const Eigen::Matrix<double, 6, 1> v =
          raw.row(f).segment<6>(layout.rotations + 6 * j).cast<double>().transpose();
      const Eigen::Vector3d a = v.head<3>();
      const Eigen::Vector3d b = v.tail<3>();
      Eigen::Matrix<double, 6, 1> fixed;
      if (a.norm() < 1e-6 || a.normalized().cross(b).norm() < 1e-6) {
        fixed << 1, 0, 0, 0, 1, 0;
      } else {
        fixed = rotation_to_6d(rotation_from_6d(v));
      }
      m.frames.row(f).segment<6>(layout.rotations + 6 * j) = fixed.cast<float>().transpose();
    }
    for (int c = 0; c < 4; ++c) {
      float& flag = m.frames(f, layout.contacts + c);
      flag = flag >= 0.5F ? 1.0F : 0.0F;
    }
  }
  return m;
}

DualMotion sample_motion(const ModelCheckpoint& checkpoint, const PromptRecord& prompts,
                         std::uint64_t seed, const SamplingOverrides& overrides, float fps) {
  const RunConfig& cfg = checkpoint.config;
  const Denoiser& model = *checkpoint.model;
  const HashEmbedder embedder(cfg.model.text_width);
  const TextBundle bundle = make_text_bundle(prompts, embedder);
  const TextBundle null = TextBundle::null();
  const DiffusionSchedule schedule =
      make_schedule(cfg.diffusion.steps, cfg.diffusion.beta_start, cfg.diffusion.beta_end);

  SamplerOptions so;
  so.frames = cfg.model.frames;
  so.width = cfg.model.motion_width();
  so.sample_steps = overrides.sample_steps.value_or(cfg.diffusion.sample_steps);
  so.guidance.scale = overrides.guidance_scale.value_or(cfg.diffusion.guidance_scale);
  const MotionPair x = sample(
      [&](const MotionPair& xt, int t, bool conditional) {
        return model.predict(xt, t, conditional ? bundle : null);
      },
      schedule, so, seed);

  DualMotion out;
  out.person1 = finalize_motion(checkpoint.normalizer.denormalize(x.person1), cfg.model.joints, fps);
  out.person2 = finalize_motion(checkpoint.normalizer.denormalize(x.person2), cfg.model.joints, fps);
  return out;
}

Generation generate(const ModelCheckpoint& checkpoint, const std::string& prompt, int count,
                    std::uint64_t seed, const PromptCache* cache,
                    const SamplingOverrides& overrides) {
  if (prompt.empty()) throw std::invalid_argument("generate needs a non-empty prompt");
  if (count < 1) throw std::invalid_argument("generate needs count >= 1");
  Generation g;
  g.prompts = decompose_prompt(prompt, cache);
  const HashEmbedder embedder(checkpoint.config.model.text_width);
  const RowVector profile =
      checkpoint.model->predict_profile(make_text_bundle(g.prompts, embedder));
  for (int i = 0; i < count; ++i) {
    Sample s;
    s.motion = sample_motion(checkpoint, g.prompts, derive_seed(seed, static_cast<std::uint64_t>(i)),
                             overrides);
    s.motion.id = "gen-" + hex64(seed) + "-" + std::to_string(i);
    s.prompts = g.prompts;
    g.samples.push_back(std::move(s));
    g.profiles.push_back(profile);
  }
  return g;
}

std::string profile_sidecar_path(const std::string& path) { return path + ".profiles.tsv"; }

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out << text;
}

}  // namespace

void write_generation(const std::string& path, const Generation& generation) {
  save_dataset(path, generation.samples);
  std::ostringstream os;
  os << "id\tsource\tperson1\tperson2";
  const Eigen::Index k = generation.profiles.empty() ? 0 : generation.profiles.front().cols();
  for (Eigen::Index i = 0; i < k; ++i) os << "\tpredicted_" << i + 1;
  os << "\n";
  for (std::size_t i = 0; i < generation.samples.size(); ++i) {
    const auto& s = generation.samples[i];
    os << s.motion.id << "\t" << to_string(s.prompts.source) << "\t" << s.prompts.person1 << "\t"
       << s.prompts.person2;
    for (Eigen::Index j = 0; j < k; ++j) os << "\t" << format_double(generation.profiles[i](j));
    os << "\n";
  }
  write_text(profile_sidecar_path(path), os.str());
}

// ---------------------------------------------------------------------------
// Report

void Report::set(const std::string& name, double value) {
  for (auto& [k, v] : metrics) {
    if (k == name) {
      v = value;
      return;
    }
  }
  metrics.emplace_back(name, value);
}

std::optional<double> Report::find(const std::string& name) const {
  for (const auto& [k, v] : metrics) {
    if (k == name) return v;
  }
  return std::nullopt;
}

double Report::at(const std::string& name) const {
  if (auto v = find(name)) return *v;
  throw std::invalid_argument("report has no metric " + name);
}

std::string Report::to_tsv() const {
  std::ostringstream os;
  os << "key\tvalue\n";
  os << "fingerprint\t" << fingerprint << "\n";
  os << "seed\t" << seed << "\n";
  for (const auto& [k, v] : metrics) os << k << "\t" << format_double(v) << "\n";
  return os.str();
}

nlohmann::json Report::to_json() const {
  nlohmann::json m = nlohmann::json::array();
  for (const auto& [k, v] : metrics) m.push_back({{"name", k}, {"value", v}});
  return {{"fingerprint", fingerprint}, {"seed", seed}, {"metrics", m}};
}

Report Report::from_json(const nlohmann::json& j) {
  Report r;
  try {
    r.fingerprint = j.at("fingerprint").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& m : j.at("metrics")) {
      r.metrics.emplace_back(m.at("name").get<std::string>(), m.at("value").get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed report: ") + e.what());
  }
  return r;
}

std::vector<Metric> parse_metrics(const std::string& list) {
  std::vector<Metric> out;
  auto add = [&](Metric m) {
    for (Metric x : out) {
      if (x == m) return;
    }
    out.push_back(m);
  };
  std::stringstream ss(list);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name.empty()) continue;
    if (name == "all") {
      for (Metric m : {Metric::mpjpe, Metric::mpjie, Metric::fid, Metric::mm_dist,
                       Metric::diversity, Metric::multimodality, Metric::r_precision}) {
        add(m);
      }
    } else if (name == "mpjpe") {
      add(Metric::mpjpe);
    } else if (name == "mpjie") {
      add(Metric::mpjie);
    } else if (name == "fid") {
      add(Metric::fid);
    } else if (name == "mm_dist" || name == "mm-dist") {
      add(Metric::mm_dist);
    } else if (name == "diversity") {
      add(Metric::diversity);
    } else if (name == "multimodality" || name == "mmodality") {
      add(Metric::multimodality);
    } else if (name == "r_precision" || name == "r-precision") {
      add(Metric::r_precision);
    } else {
      throw std::invalid_argument("unknown metric: " + name);
    }
  }
  if (out.empty()) throw std::invalid_argument("no metrics selected");
  return out;
}

bool is_embedding_metric(Metric m) { return m != Metric::mpjpe && m != Metric::mpjie; }

namespace {

bool wants(const EvaluateOptions& o, Metric m) {
  for (Metric x : o.metrics) {
    if (x == m) return true;
  }
  return false;
}

void require_evaluator(const EvaluateOptions& options) {
  for (Metric m : options.metrics) {
    if (is_embedding_metric(m) && options.evaluator == nullptr) {
      throw std::invalid_argument(
          "embedding metrics were requested but no evaluator was given (train one with "
          "train-evaluator and pass --evaluator)");
    }
  }
}

}  // namespace

Report evaluate_predictions(const std::vector<Sample>& predicted, const std::vector<Sample>& truth,
                            const EvaluateOptions& options, const std::string& fingerprint,
                            const std::vector<std::vector<DualMotion>>& groups) {
  require_evaluator(options);
  if (predicted.size() != truth.size() || truth.empty()) {
    throw std::invalid_argument("evaluation needs equally many predicted and ground-truth samples");
  }
  Report r;
  r.fingerprint = fingerprint;
  r.seed = options.seed;
  r.set("count", static_cast<double>(truth.size()));

  const double n = static_cast<double>(truth.size());
  if (wants(options, Metric::mpjpe)) {
    double p1 = 0.0;
    double p2 = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      p1 += mpjpe(joint_positions(predicted[i].motion.person1), joint_positions(truth[i].motion.person1));
      p2 += mpjpe(joint_positions(predicted[i].motion.person2), joint_positions(truth[i].motion.person2));
    }
    r.set("mpjpe_person1", p1 / n);
    r.set("mpjpe_person2", p2 / n);
    r.set("mpjpe", 0.5 * (p1 + p2) / n);
  }
  if (wants(options, Metric::mpjie)) {
    double gen = 0.0;
    double ref = 0.0;
    double err = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const double g = mpjie(joint_positions(predicted[i].motion.person1),
                             joint_positions(predicted[i].motion.person2));
      const double t = mpjie(joint_positions(truth[i].motion.person1),
                             joint_positions(truth[i].motion.person2));
      gen += g;
      ref += t;
      err += std::abs(g - t);
    }
    r.set("mpjie", gen / n);
    r.set("mpjie_reference", ref / n);
    r.set("mpjie_error", err / n);
  }

  if (options.evaluator != nullptr) {
    const ToyEvaluator& ev = *options.evaluator;
    std::vector<DualMotion> pm;
    std::vector<DualMotion> tm;
    std::vector<std::string> texts;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      pm.push_back(predicted[i].motion);
      tm.push_back(truth[i].motion);
      texts.push_back(truth[i].prompts.overall);
    }
    const Matrix pe = ev.embed_motions(pm);
    const Matrix te = ev.embed_texts(texts);
    if (wants(options, Metric::fid)) {
      r.set("fid", fid(pe, ev.embed_motions(tm)));
    }
    if (wants(options, Metric::mm_dist)) r.set("mm_dist", mm_dist(pe, te));
    if (wants(options, Metric::diversity)) {
      r.set("diversity", diversity(pe, options.diversity_pairs, options.seed));
    }
    if (wants(options, Metric::r_precision)) {
      const int pool = std::min<int>(options.retrieval_pool, static_cast<int>(truth.size()));
      for (int k = 1; k <= 3; ++k) {
        r.set("r_precision_top" + std::to_string(k),
              retrieval_precision(pe, te, k, pool, options.seed));
      }
    }
    if (wants(options, Metric::multimodality)) {
      std::vector<Matrix> per_prompt;
      for (const auto& g : groups) {
        if (g.size() >= 2) per_prompt.push_back(ev.embed_motions(g));
      }
      if (per_prompt.empty()) {
        throw std::invalid_argument(
            "multimodality needs at least two generations for some prompt");
      }
      r.set("multimodality", multimodality(per_prompt, options.multimodality_pairs, options.seed));
    }
  }
  return r;
}

std::vector<Sample> generate_for_dataset(const ModelCheckpoint& checkpoint,
                                         const std::vector<Sample>& truth, std::uint64_t seed,
                                         const SamplingOverrides& overrides) {
  std::vector<Sample> out;
  out.reserve(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    Sample s;
    s.prompts = truth[i].prompts;
    s.motion = sample_motion(checkpoint, s.prompts, derive_seed(seed, i), overrides,
                             truth[i].motion.person1.fps);
    s.motion.id = truth[i].motion.id;
    out.push_back(std::move(s));
  }
  return out;
}

Report evaluate_checkpoint(const ModelCheckpoint& checkpoint, const std::vector<Sample>& truth,
                           const EvaluateOptions& options) {
  require_evaluator(options);
  const std::vector<Sample> predicted =
      generate_for_dataset(checkpoint, truth, options.seed, options.overrides);
  std::vector<std::vector<DualMotion>> groups;
  if (wants(options, Metric::multimodality)) {
    const std::size_t prompts =
        std::min<std::size_t>(truth.size(), static_cast<std::size_t>(std::max(0, options.multimodality_prompts)));
    for (std::size_t i = 0; i < prompts; ++i) {
      std::vector<DualMotion> g;
      for (int rep = 0; rep < options.multimodality_repeats; ++rep) {
        const std::uint64_t s = derive_seed(options.seed ^ 0x6d6dULL, i * 1000 + static_cast<std::size_t>(rep));
        g.push_back(sample_motion(checkpoint, truth[i].prompts, s, options.overrides,
                                  truth[i].motion.person1.fps));
      }
      groups.push_back(std::move(g));
    }
  }
  return evaluate_predictions(predicted, truth, options, hex64(config_fingerprint(checkpoint.config)),
                              groups);
}

std::string distance_table(const std::vector<Sample>& samples, int segments,
                           const ModelCheckpoint* checkpoint) {
  std::ostringstream os;
  os << "id";
  for (int k = 1; k <= segments; ++k) os << "\tdistance_" << k;
  for (int k = 1; k <= segments; ++k) os << "\tgt_" << k;
  if (checkpoint != nullptr) {
    if (checkpoint->config.model.segments != segments) {
      throw std::invalid_argument("checkpoint uses " +
                                  std::to_string(checkpoint->config.model.segments) +
                                  " segments, table asked for " + std::to_string(segments));
    }
    for (int k = 1; k <= segments; ++k) os << "\tpredicted_" << k;
  }
  os << "\n";
  std::optional<HashEmbedder> embedder;
  if (checkpoint != nullptr) embedder.emplace(checkpoint->config.model.text_width);
  for (const auto& s : samples) {
    const SegmentLayout layout = segment_bounds(s.motion.frame_count(), segments);
    const JointPositions p1 = joint_positions(s.motion.person1);
    const JointPositions p2 = joint_positions(s.motion.person2);
    const RowVector d = segment_mean_distances(p1, p2, layout);
    const RowVector gt = gt_distance_profile(p1, p2, layout);
    os << s.motion.id;
    for (int k = 0; k < segments; ++k) os << "\t" << format_double(d(k));
    for (int k = 0; k < segments; ++k) os << "\t" << format_double(gt(k));
    if (checkpoint != nullptr) {
      const RowVector pre = checkpoint->model->predict_profile(make_text_bundle(s.prompts, *embedder));
      for (int k = 0; k < segments; ++k) os << "\t" << format_double(pre(k));
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace duet
