#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "duet/dataset.hpp"
#include "duet/error.hpp"
#include "duet/motion.hpp"
#include "duet/pipeline.hpp"
#include "duet/synth.hpp"

using namespace duet;

TEST(FeatureDim, KnownValues) {
  EXPECT_EQ(feature_dim(22), 268);
  EXPECT_EQ(feature_dim(1), 16);
  EXPECT_EQ(feature_dim(5), 64);
}

TEST(FeatureDim, RejectsNonPositive) {
  EXPECT_THROW(feature_dim(0), std::invalid_argument);
  EXPECT_THROW(feature_dim(-3), std::invalid_argument);
}

TEST(FeatureDim, StrictlyIncreasing) {
  for (int j = 1; j < 200; ++j) EXPECT_LT(feature_dim(j), feature_dim(j + 1));
}

TEST(FeatureLayout, BlocksAreContiguous) {
  const FeatureLayout l(5);
  EXPECT_EQ(l.positions, 0);
  EXPECT_EQ(l.velocities, 15);
  EXPECT_EQ(l.rotations, 30);
  EXPECT_EQ(l.contacts, 60);
  EXPECT_EQ(l.width, 64);
}

TEST(SegmentBounds, Examples) {
  using B = std::vector<std::pair<int, int>>;
  EXPECT_EQ(segment_bounds(6, 3).bounds, (B{{0, 2}, {2, 4}, {4, 6}}));
  EXPECT_EQ(segment_bounds(7, 3).bounds, (B{{0, 2}, {2, 4}, {4, 7}}));
  EXPECT_EQ(segment_bounds(5, 1).bounds, (B{{0, 5}}));
}

TEST(SegmentBounds, Errors) {
  EXPECT_THROW(segment_bounds(3, 4), std::invalid_argument);
  EXPECT_THROW(segment_bounds(3, 0), std::invalid_argument);
}

TEST(SegmentBounds, SevenThreeMatchesPerFrameRule) {
  // Frame f belongs to the largest i with floor(i*S/K) <= f.
  const int s = 7;
  const int k = 3;
  const auto layout = segment_bounds(s, k);
  for (int f = 0; f < s; ++f) {
    int expected = 0;
    for (int i = 0; i < k; ++i) {
      if ((i * s) / k <= f) expected = i;
    }
    EXPECT_EQ(layout.segment_of(f), expected) << "frame " << f;
  }
}

TEST(SegmentBounds, ExhaustivePartitionProperty) {
  for (int s = 1; s <= 512; ++s) {
    for (int k = 1; k <= s; ++k) {
      const auto layout = segment_bounds(s, k);
      ASSERT_EQ(layout.segments(), k);
      int cursor = 0;
      for (const auto& [b, e] : layout.bounds) {
        ASSERT_EQ(b, cursor) << s << "/" << k;
        ASSERT_LT(b, e) << s << "/" << k;
        cursor = e;
      }
      ASSERT_EQ(cursor, s);
    }
  }
}

TEST(SegmentLayout, AssignmentIsOneHot) {
  const auto layout = segment_bounds(10, 3);
  const Matrix p = layout.assignment();
  ASSERT_EQ(p.rows(), 10);
  ASSERT_EQ(p.cols(), 3);
  for (int f = 0; f < 10; ++f) {
    EXPECT_DOUBLE_EQ(p.row(f).sum(), 1.0);
    EXPECT_DOUBLE_EQ(p(f, layout.segment_of(f)), 1.0);
  }
}

TEST(Rotation6d, RoundTripsRotations) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (int i = 0; i < 50; ++i) {
    const Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    const Eigen::Matrix3d r = q.normalized().toRotationMatrix();
    const Eigen::Matrix3d back = rotation_from_6d(rotation_to_6d(r));
    EXPECT_LT((back - r).norm(), 1e-12);
  }
}

TEST(PoseInvariants, DetectsViolations) {
  auto s = synth_generate(Scenario::mirror, {}, 1).motion.person1;
  EXPECT_FALSE(check_pose_invariants(s).has_value());
  auto bad = s;
  bad.frames(3, FeatureLayout(5).contacts) = 0.5F;
  EXPECT_TRUE(check_pose_invariants(bad).has_value());
  bad = s;
  bad.frames(2, 0) = std::nanf("");
  EXPECT_TRUE(check_pose_invariants(bad).has_value());
  bad = s;
  bad.frames.row(4).segment<6>(FeatureLayout(5).rotations).setZero();
  EXPECT_TRUE(check_pose_invariants(bad).has_value());
}

TEST(MotionSequence, ValidateShapes) {
  MotionSequence m;
  m.joint_count = 2;
  m.frames = FrameMatrix::Zero(0, feature_dim(2));
  EXPECT_THROW(m.validate(), std::invalid_argument);
  m.frames = FrameMatrix::Zero(3, feature_dim(2) + 1);
  EXPECT_THROW(m.validate(), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Synthetic generator

TEST(Synth, ApproachDistanceDecreases) {
  const auto s = synth_generate(Scenario::approach, {60, 5, 20.0F, 0.05}, 7);
  const Vector d = root_distances(s.motion);
  EXPECT_GT(d(0), d(59));
  for (int f = 1; f < 60; ++f) EXPECT_LE(d(f), d(f - 1) + 1e-6);
}

TEST(Synth, MirrorDistanceConstant) {
  const auto s = synth_generate(Scenario::mirror, {60, 5, 20.0F, 0.05}, 7);
  const Vector d = root_distances(s.motion);
  EXPECT_LT(d.maxCoeff() - d.minCoeff(), 1e-6);
}

TEST(Synth, OrbitRadiusConstant) {
  const auto s = synth_generate(Scenario::orbit, {}, 11);
  const Vector d = root_distances(s.motion);
  EXPECT_LT(d.maxCoeff() - d.minCoeff(), 1e-5);
}

TEST(Synth, PushRetreatDecreasesThenIncreases) {
  const auto s = synth_generate(Scenario::push_retreat, {}, 5);
  const Vector d = root_distances(s.motion);
  Eigen::Index argmin = 0;
  d.minCoeff(&argmin);
  EXPECT_GT(argmin, 5);
  EXPECT_LT(argmin, 54);
  EXPECT_GT(d(0), d(argmin));
  EXPECT_GT(d(59), d(argmin));
}

TEST(Synth, Deterministic) {
  for (auto sc : {Scenario::approach, Scenario::mirror, Scenario::orbit, Scenario::push_retreat}) {
    const auto a = synth_generate(sc, {}, 42);
    const auto b = synth_generate(sc, {}, 42);
    EXPECT_EQ(a.motion, b.motion);
    EXPECT_EQ(a.prompt, b.prompt);
  }
}

TEST(Synth, UnknownScenario) { EXPECT_THROW(parse_scenario("tango"), std::invalid_argument); }

TEST(Synth, PassesPoseInvariantsAndVelocityRule) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    for (auto sc : {Scenario::approach, Scenario::mirror, Scenario::orbit, Scenario::push_retreat}) {
      const auto s = synth_generate(sc, {}, seed);
      for (const MotionSequence* m : {&s.motion.person1, &s.motion.person2}) {
        ASSERT_FALSE(check_pose_invariants(*m).has_value()) << *check_pose_invariants(*m);
        const FeatureLayout l(m->joint_count);
        for (int f = 0; f < m->frame_count(); ++f) {
          for (int c = 0; c < 3 * m->joint_count; ++c) {
            const double expected =
                f == 0 ? 0.0
                       : static_cast<double>(m->frames(f, l.positions + c)) -
                             static_cast<double>(m->frames(f - 1, l.positions + c));
            ASSERT_NEAR(m->frames(f, l.velocities + c), expected, 1e-6);
          }
        }
      }
    }
  }
}

TEST(Synth, SupportsFullSkeletonJointCount) {
  const auto s = synth_generate(Scenario::approach, {60, 22, 20.0F, 0.05}, 1);
  EXPECT_EQ(s.motion.person1.frames.cols(), 268);
  EXPECT_FALSE(check_pose_invariants(s.motion.person2).has_value());
}

// ---------------------------------------------------------------------------
// Dataset files

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("duet_test_" + name)).string();
}

std::vector<Sample> three_samples() {
  return synth_dataset({Scenario::approach, Scenario::orbit, Scenario::push_retreat}, 3, {}, 9);
}

}  // namespace

TEST(Dataset, RoundTrip) {
  const auto samples = three_samples();
  const std::string path = temp_path("roundtrip.bin");
  save_dataset(path, samples);
  const auto back = load_dataset(path);
  EXPECT_EQ(back, samples);
  std::ifstream side(prompt_sidecar_path(path));
  std::stringstream ss;
  ss << side.rdbuf();
  EXPECT_EQ(ss.str(), encode_prompt_sidecar(samples));
}

TEST(Dataset, SidecarEscapesSpecialCharacters) {
  auto samples = three_samples();
  samples[0].prompts.overall = "tab\there\nnew\\line\r";
  const auto decoded = decode_prompt_sidecar(encode_prompt_sidecar(samples));
  EXPECT_EQ(decoded[0].second.overall, samples[0].prompts.overall);
}

TEST(Dataset, TruncatedFileIsFormatError) {
  const std::string bytes = encode_motion_payload(three_samples());
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{20}, bytes.size() - 1}) {
    EXPECT_THROW(decode_motion_payload(bytes.substr(0, cut)), FormatError) << cut;
  }
}

TEST(Dataset, ZeroJointCountIsFormatError) {
  std::string bytes = encode_motion_payload(three_samples());
  const std::uint32_t zero = 0;
  std::memcpy(bytes.data() + 12, &zero, sizeof zero);  // after magic and version
  try {
    decode_motion_payload(bytes);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 12U);
  }
}

TEST(Dataset, BadMagicAndTrailingBytes) {
  std::string bytes = encode_motion_payload(three_samples());
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_motion_payload(bad), FormatError);
  EXPECT_THROW(decode_motion_payload(bytes + "!"), FormatError);
}

TEST(Dataset, MismatchedSidecarIds) {
  const auto samples = three_samples();
  const std::string path = temp_path("mismatch.bin");
  save_dataset(path, samples);
  auto other = samples;
  other[1].motion.id = "someone-else";
  std::ofstream(prompt_sidecar_path(path), std::ios::trunc) << encode_prompt_sidecar(other);
  EXPECT_THROW(load_dataset(path), FormatError);
}

TEST(Normalizer, RoundTripsFeatures) {
  const auto samples = three_samples();
  const auto n = FeatureNormalizer::fit(samples);
  const Matrix z = n.normalize(samples[0].motion.person1.frames);
  const FrameMatrix back = n.denormalize(z);
  EXPECT_LT((back - samples[0].motion.person1.frames).cwiseAbs().maxCoeff(), 1e-5);
  EXPECT_TRUE((n.scale.array() >= 1e-2).all());
}
