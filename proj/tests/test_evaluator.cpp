#include <gtest/gtest.h>

#include <vector>

#include "duet/error.hpp"
#include "duet/evaluator.hpp"
#include "duet/metrics.hpp"
#include "duet/pipeline.hpp"
#include "support/temp_dir.hpp"

using namespace duet;

namespace {

const std::vector<Scenario> kAll{Scenario::approach, Scenario::mirror, Scenario::orbit,
                                 Scenario::push_retreat};

std::vector<Sample> corpus(int count, std::uint64_t seed) {
  return synth_dataset(kAll, count, SynthOptions{}, seed);
}

std::vector<DualMotion> motions_of(const std::vector<Sample>& s) {
  std::vector<DualMotion> out;
  for (const auto& x : s) out.push_back(x.motion);
  return out;
}

std::vector<std::string> texts_of(const std::vector<Sample>& s) {
  std::vector<std::string> out;
  for (const auto& x : s) out.push_back(x.prompts.overall);
  return out;
}

}  // namespace

TEST(Summaries, MotionAndText) {
  const auto data = corpus(2, 3);
  const RowVector m = motion_summary(data[0].motion, 6);
  EXPECT_EQ(m.cols(), 2 * 6 * 3 * 5);
  const JointPositions p1 = joint_positions(data[0].motion.person1);
  EXPECT_LT((m.head(15) - p1.xyz.topRows(10).colwise().mean()).cwiseAbs().maxCoeff(), 1e-12);

  const HashEmbedder emb(16);
  const RowVector t = text_summary("Wave, wave!", emb);
  EXPECT_LT((t - emb.lookup("wave")).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(text_summary("", emb), RowVector::Zero(16));
}

TEST(ToyEvaluatorTest, LearnsHeldOutPairing) {
  const auto data = corpus(250, 11);
  const std::vector<Sample> train(data.begin(), data.begin() + 200);
  const std::vector<Sample> held(data.begin() + 200, data.end());
  const ToyEvaluator ev = ToyEvaluator::train(train, EvaluatorConfig{}, 5);
  const Matrix m = ev.embed_motions(motions_of(held));
  const Matrix t = ev.embed_texts(texts_of(held));
  ASSERT_EQ(m.rows(), 50);
  EXPECT_EQ(m.cols(), 32);
  EXPECT_LT((m.rowwise().norm().array() - 1.0).abs().maxCoeff(), 1e-12);

  Matrix shifted(t.rows(), t.cols());
  for (Eigen::Index i = 0; i < t.rows(); ++i) shifted.row(i) = t.row((i + 1) % t.rows());
  EXPECT_LT(mm_dist(m, t), mm_dist(m, shifted));
}

TEST(ToyEvaluatorTest, DeterministicAndPersistent) {
  const auto data = corpus(40, 12);
  EvaluatorConfig cfg;
  cfg.steps = 60;
  cfg.embed_width = 12;
  const ToyEvaluator a = ToyEvaluator::train(data, cfg, 7);
  const ToyEvaluator b = ToyEvaluator::train(data, cfg, 7);
  const ToyEvaluator c = ToyEvaluator::train(data, cfg, 8);
  const auto motions = motions_of(data);
  EXPECT_EQ(a.embed_motions(motions), b.embed_motions(motions));
  EXPECT_NE(a.embed_motions(motions), c.embed_motions(motions));
  EXPECT_EQ(a.embed_width(), 12);

  duet::testing::TempDir dir;
  a.save(dir.file("ev.bin"));
  const ToyEvaluator r = ToyEvaluator::load(dir.file("ev.bin"));
  EXPECT_EQ(r.config().steps, 60);
  EXPECT_LT((r.embed_motions(motions) - a.embed_motions(motions)).cwiseAbs().maxCoeff(), 1e-4);
  EXPECT_LT((r.embed_texts(texts_of(data)) - a.embed_texts(texts_of(data))).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(ToyEvaluatorTest, Errors) {
  EXPECT_THROW(ToyEvaluator::train({}, EvaluatorConfig{}, 1), std::invalid_argument);
  const auto data = corpus(4, 13);
  EvaluatorConfig cfg;
  cfg.steps = 2;
  const ToyEvaluator ev = ToyEvaluator::train(data, cfg, 1);
  SynthOptions shorter;
  shorter.frames = 30;
  const auto other = synth_dataset(kAll, 1, shorter, 2);
  EXPECT_THROW(ev.embed_motions(motions_of(other)), std::invalid_argument);
  duet::testing::TempDir dir;
  EXPECT_THROW(ToyEvaluator::load(dir.file("missing.bin")), std::exception);
}
