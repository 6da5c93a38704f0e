#include "duet/evaluator.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

#include "duet/checkpoint.hpp"
#include "duet/error.hpp"
#include "duet/optim.hpp"
#include "duet/util.hpp"

namespace duet {

namespace {

constexpr const char* kKind = "duet-evaluator";

void fit_standardizer(const Matrix& x, RowVector& mean, RowVector& scale) {
  mean = x.colwise().mean();
  const Matrix centered = x.rowwise() - mean;
  scale = (centered.array().square().colwise().sum() / std::max<double>(1.0, x.rows()))
              .sqrt()
              .matrix()
              .cwiseMax(1e-3);
}

Matrix standardize(const Matrix& x, const RowVector& mean, const RowVector& scale) {
  return (x.rowwise() - mean).array().rowwise() / scale.array();
}

}  // namespace

RowVector motion_summary(const DualMotion& motion, int chunks) {
  motion.validate();
  const int frames = motion.frame_count();
  const SegmentLayout layout = segment_bounds(frames, std::min(chunks, frames));
  const int j3 = 3 * motion.joint_count();
  RowVector out(2 * layout.segments() * j3);
  int col = 0;
  for (const MotionSequence* person : {&motion.person1, &motion.person2}) {
    const JointPositions p = joint_positions(*person);
    for (const auto& [begin, end] : layout.bounds) {
      out.segment(col, j3) = p.xyz.middleRows(begin, end - begin).colwise().mean();
      col += j3;
    }
  }
  return out;
}

RowVector text_summary(std::string_view text, const HashEmbedder& embedder) {
  const auto tokens = tokenize(text);
  RowVector sum = RowVector::Zero(embedder.width());
  for (const auto& tok : tokens) sum += embedder.lookup(tok);
  return tokens.empty() ? sum : RowVector(sum / static_cast<double>(tokens.size()));
}

ToyEvaluator::ToyEvaluator(int joints, int frames, int text_width, const EvaluatorConfig& config,
                           std::uint64_t seed)
    : joints_(joints),
      frames_(frames),
      text_width_(text_width),
      config_(config),
      embedder_(text_width) {
  if (joints < 1 || frames < 1 || config.embed_width < 1 || config.hidden < 1 || config.chunks < 1) {
    throw std::invalid_argument("invalid evaluator dimensions");
  }
  std::mt19937_64 rng(seed);
  const int motion_in = 2 * std::min(config.chunks, frames) * 3 * joints;
  const int h = config.hidden;
  const int e = config.embed_width;
  motion_ = {&params_.add("motion.w1", glorot(motion_in, h, rng)),
             &params_.add("motion.b1", Matrix::Zero(1, h)),
             &params_.add("motion.w2", glorot(h, e, rng)),
             &params_.add("motion.b2", Matrix::Zero(1, e))};
  text_ = {&params_.add("text.w1", glorot(text_width, h, rng)),
           &params_.add("text.b1", Matrix::Zero(1, h)),
           &params_.add("text.w2", glorot(h, e, rng)),
           &params_.add("text.b2", Matrix::Zero(1, e))};
  motion_mean_ = RowVector::Zero(motion_in);
  motion_scale_ = RowVector::Ones(motion_in);
  text_mean_ = RowVector::Zero(text_width);
  text_scale_ = RowVector::Ones(text_width);
}

ad::Var ToyEvaluator::encode(ad::Tape& tape, const Encoder& enc, const Matrix& inputs) const {
  const ad::Var h = ad::relu(
      ad::affine(tape.constant(inputs), tape.param(*enc.w1), tape.param(*enc.b1)));
  return ad::l2_normalize_rows(ad::affine(h, tape.param(*enc.w2), tape.param(*enc.b2)));
}

Matrix ToyEvaluator::motion_inputs(const std::vector<DualMotion>& motions) const {
  Matrix x(static_cast<Eigen::Index>(motions.size()), motion_mean_.cols());
  for (std::size_t i = 0; i < motions.size(); ++i) {
    if (motions[i].joint_count() != joints_ || motions[i].frame_count() != frames_) {
      throw std::invalid_argument("evaluator expects " + std::to_string(frames_) + " frames x " +
                                  std::to_string(joints_) + " joints");
    }
    x.row(static_cast<Eigen::Index>(i)) = motion_summary(motions[i], config_.chunks);
  }
  return standardize(x, motion_mean_, motion_scale_);
}

Matrix ToyEvaluator::text_inputs(const std::vector<std::string>& texts) const {
  Matrix x(static_cast<Eigen::Index>(texts.size()), text_width_);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = text_summary(texts[i], embedder_);
  }
  return standardize(x, text_mean_, text_scale_);
}

Matrix ToyEvaluator::embed_motions(const std::vector<DualMotion>& motions) const {
  if (motions.empty()) return Matrix(0, config_.embed_width);
  ad::Tape tape(false);
  return encode(tape, motion_, motion_inputs(motions)).value();
}

Matrix ToyEvaluator::embed_texts(const std::vector<std::string>& texts) const {
  if (texts.empty()) return Matrix(0, config_.embed_width);
  ad::Tape tape(false);
  return encode(tape, text_, text_inputs(texts)).value();
}

ToyEvaluator ToyEvaluator::train(const std::vector<Sample>& samples, const EvaluatorConfig& config,
                                 std::uint64_t seed, int text_width) {
  if (samples.empty()) throw std::invalid_argument("evaluator training needs a non-empty dataset");
  const auto& first = samples.front().motion;
  ToyEvaluator ev(first.joint_count(), first.frame_count(), text_width, config, seed);

  std::vector<DualMotion> motions;
  std::vector<std::string> texts;
  for (const auto& s : samples) {
    motions.push_back(s.motion);
    texts.push_back(s.prompts.overall);
  }
  Matrix raw_m(static_cast<Eigen::Index>(motions.size()), ev.motion_mean_.cols());
  Matrix raw_t(static_cast<Eigen::Index>(texts.size()), text_width);
  for (std::size_t i = 0; i < motions.size(); ++i) {
    raw_m.row(static_cast<Eigen::Index>(i)) = motion_summary(motions[i], config.chunks);
    raw_t.row(static_cast<Eigen::Index>(i)) = text_summary(texts[i], ev.embedder_);
  }
  fit_standardizer(raw_m, ev.motion_mean_, ev.motion_scale_);
  fit_standardizer(raw_t, ev.text_mean_, ev.text_scale_);
  const Matrix xm = standardize(raw_m, ev.motion_mean_, ev.motion_scale_);
  const Matrix xt = standardize(raw_t, ev.text_mean_, ev.text_scale_);

  std::mt19937_64 rng(seed ^ 0xe7a1ULL);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(xm.rows()));
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), order.size());
  std::size_t cursor = order.size();
  Adam adam(ev.params_);
  const double inv_temp = 1.0 / config.temperature;

  for (int step = 0; step < config.steps; ++step) {
    std::vector<Eigen::Index> rows;
    while (rows.size() < batch) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      rows.push_back(order[cursor++]);
    }
    Matrix bm(static_cast<Eigen::Index>(batch), xm.cols());
    Matrix bt(static_cast<Eigen::Index>(batch), xt.cols());
    for (std::size_t i = 0; i < batch; ++i) {
      bm.row(static_cast<Eigen::Index>(i)) = xm.row(rows[i]);
      bt.row(static_cast<Eigen::Index>(i)) = xt.row(rows[i]);
    }
    ad::Tape tape;
    const ad::Var em = ev.encode(tape, ev.motion_, bm);
    const ad::Var et = ev.encode(tape, ev.text_, bt);
    const ad::Var logits = ad::scale(ad::matmul(em, ad::transpose(et)), inv_temp);
    const Matrix eye = Matrix::Identity(static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(batch));
    const ad::Var forward = ad::sum_all(ad::hadamard(ad::log_softmax_rows(logits), tape.constant(eye)));
    const ad::Var backward =
        ad::sum_all(ad::hadamard(ad::log_softmax_rows(ad::transpose(logits)), tape.constant(eye)));
    const ad::Var loss = ad::scale(ad::add(forward, backward), -0.5 / static_cast<double>(batch));
    if (!std::isfinite(loss.scalar())) throw NumericError("evaluator loss became non-finite");
    ev.params_.zero_grad();
    tape.backward(loss);
    adam.step(ev.params_, config.learning_rate);
  }
  return ev;
}

void ToyEvaluator::save(const std::string& path) const {
  TensorArchive a;
  a.kind = kKind;
  a.meta = {{"joints", joints_},
            {"frames", frames_},
            {"text_width", text_width_},
            {"embed_width", config_.embed_width},
            {"hidden", config_.hidden},
            {"steps", config_.steps},
            {"batch_size", config_.batch_size},
            {"learning_rate", config_.learning_rate},
            {"temperature", config_.temperature},
            {"chunks", config_.chunks}};
  for (std::size_t i = 0; i < params_.size(); ++i) a.tensors.push_back({params_[i].name, params_[i].value});
  a.tensors.push_back({"motion.mean", motion_mean_});
  a.tensors.push_back({"motion.scale", motion_scale_});
  a.tensors.push_back({"text.mean", text_mean_});
  a.tensors.push_back({"text.scale", text_scale_});
  save_archive(path, a);
}

ToyEvaluator ToyEvaluator::load(const std::string& path) {
  const TensorArchive a = load_archive(path);
  if (a.kind != kKind) throw FormatError(path + " is not an evaluator archive", 0);
  EvaluatorConfig c;
  int joints = 0;
  int frames = 0;
  int text_width = 0;
  try {
    joints = a.meta.at("joints").get<int>();
    frames = a.meta.at("frames").get<int>();
    text_width = a.meta.at("text_width").get<int>();
    c.embed_width = a.meta.at("embed_width").get<int>();
    c.hidden = a.meta.at("hidden").get<int>();
    c.steps = a.meta.at("steps").get<int>();
    c.batch_size = a.meta.at("batch_size").get<int>();
    c.learning_rate = a.meta.at("learning_rate").get<double>();
    c.temperature = a.meta.at("temperature").get<double>();
    c.chunks = a.meta.at("chunks").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": bad evaluator metadata: " + e.what(), 0);
  }
  ToyEvaluator ev(joints, frames, text_width, c, 0);
  auto take = [&](const std::string& name, Matrix& dst) {
    const Matrix& src = a.get(name);
    if (src.rows() != dst.rows() || src.cols() != dst.cols()) {
      throw FormatError(path + ": tensor " + name + " has the wrong shape", 0);
    }
    dst = src;
  };
  for (std::size_t i = 0; i < ev.params_.size(); ++i) take(ev.params_[i].name, ev.params_[i].value);
  auto take_row = [&](const std::string& name, RowVector& dst) {
    Matrix m = dst;
    take(name, m);
    dst = m;
  };
  take_row("motion.mean", ev.motion_mean_);
  take_row("motion.scale", ev.motion_scale_);
  take_row("text.mean", ev.text_mean_);
  take_row("text.scale", ev.text_scale_);
  return ev;
}

}  // namespace duet
