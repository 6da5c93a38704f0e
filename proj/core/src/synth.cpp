#include "duet/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "duet/util.hpp"

namespace duet {

Scenario parse_scenario(std::string_view name) {
  if (name == "approach") return Scenario::approach;
  if (name == "mirror") return Scenario::mirror;
  if (name == "orbit") return Scenario::orbit;
  if (name == "push-retreat") return Scenario::push_retreat;
  throw std::invalid_argument("unknown scenario: " + std::string(name));
}

std::string_view to_string(Scenario scenario) {
  switch (scenario) {
    case Scenario::approach: return "approach";
    case Scenario::mirror: return "mirror";
    case Scenario::orbit: return "orbit";
    case Scenario::push_retreat: return "push-retreat";
  }
  return "unknown";
}

namespace {

constexpr double kPi = 3.14159265358979323846;

enum class Arm { wave, raise, reach, rest };

struct ArmPhrase {
  Arm arm;
  const char* singular;
  const char* plural;
};

constexpr std::array<ArmPhrase, 4> kArms{{
    {Arm::wave, "waves the right hand", "wave their right hands"},
    {Arm::raise, "raises the right hand high", "raise their right hands high"},
    {Arm::reach, "reaches forward with the right arm", "reach forward with their right arms"},
    {Arm::rest, "keeps the arms down", "keep their arms down"},
}};

class Jitter {
 public:
  explicit Jitter(std::uint64_t seed) : state_(seed ^ 0xd1b54a32d192ed03ULL) {}
  double uniform(double lo, double hi) {
    const double u = static_cast<double>(splitmix64(state_) >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }
  int index(int n) { return static_cast<int>(splitmix64(state_) % static_cast<std::uint64_t>(n)); }

 private:
  std::uint64_t state_;
};

// Per-frame state of one person.
struct PersonTrack {
  std::vector<Eigen::Vector2d> ground;  // root (x, z)
  std::vector<double> heading;          // yaw, radians
  Arm arm = Arm::rest;
  double wave_phase = 0.0;
};

double smoothstep(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

Eigen::Matrix3d yaw(double theta) {
  return Eigen::AngleAxisd(theta, Eigen::Vector3d::UnitY()).toRotationMatrix();
}

// Yaw that turns local +x towards the ground direction (dx, dz).
double face(const Eigen::Vector2d& from, const Eigen::Vector2d& to) {
  const Eigen::Vector2d d = to - from;
  return std::atan2(-d.y(), d.x());
}

void face_each_other(PersonTrack& a, PersonTrack& b) {
  a.heading.resize(a.ground.size());
  b.heading.resize(b.ground.size());
  for (std::size_t f = 0; f < a.ground.size(); ++f) {
    a.heading[f] = face(a.ground[f], b.ground[f]);
    b.heading[f] = face(b.ground[f], a.ground[f]);
  }
}

struct ArmPose {
  Eigen::Vector3d hand;
  double elevation;
};

ArmPose arm_pose(Arm arm, double time_s, double wave_phase, double gait_phase, double moving) {
  switch (arm) {
    case Arm::wave: {
      const double s = std::sin(2.0 * kPi * 1.2 * time_s + wave_phase);
      return {{0.15, 1.75, -0.30 + 0.12 * s}, 0.75 * kPi + 0.2 * s};
    }
    case Arm::raise: return {{0.05, 1.90, -0.22}, 0.9 * kPi};
    case Arm::reach: return {{0.55, 1.35, -0.18}, 0.5 * kPi};
    case Arm::rest:
    default: return {{0.02 - 0.10 * std::sin(gait_phase) * moving, 0.90, -0.25}, 0.0};
  }
}

// Local (root-frame) offsets of every joint plus each joint's local rotation.
void body_pose(int joints, Arm arm, double time_s, double wave_phase, double gait_phase,
               double moving, std::vector<Eigen::Vector3d>& offsets,
               std::vector<Eigen::Matrix3d>& rotations) {
  offsets.assign(joints, Eigen::Vector3d::Zero());
  rotations.assign(joints, Eigen::Matrix3d::Identity());
  const double lift_l = 0.10 * std::max(0.0, std::sin(gait_phase)) * moving;
  const double lift_r = 0.10 * std::max(0.0, -std::sin(gait_phase)) * moving;
  const double stride = 0.12 * std::cos(gait_phase) * moving;
  offsets[0] = {0.0, 0.95, 0.0};
  offsets[1] = {stride, 0.02 + lift_l, 0.12};
  offsets[2] = {-stride, 0.02 + lift_r, -0.12};
  if (joints > 3) offsets[3] = {0.0, 1.65, 0.0};
  if (joints > 4) {
    const ArmPose pose = arm_pose(arm, time_s, wave_phase, gait_phase, moving);
    offsets[4] = pose.hand;
    rotations[4] = Eigen::AngleAxisd(pose.elevation, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  }
  if (joints > 5) offsets[5] = {0.02 + 0.10 * std::sin(gait_phase) * moving, 0.90, 0.25};
  for (int j = 6; j < joints; ++j) {
    const double frac = static_cast<double>(j - 5) / static_cast<double>(joints - 4);
    offsets[j] = {0.0, 0.95 + 0.7 * frac, (j % 2 == 0 ? 0.03 : -0.03)};
  }
}

MotionSequence render(const PersonTrack& track, const SynthOptions& options) {
  const int frames = options.frames;
  const int joints = options.joints;
  const FeatureLayout layout(joints);
  MotionSequence seq;
  seq.joint_count = joints;
  seq.fps = options.fps;
  seq.frames = FrameMatrix::Zero(frames, layout.width);

  std::vector<Eigen::Vector3d> offsets;
  std::vector<Eigen::Matrix3d> rotations;
  double gait_phase = 0.0;
  for (int f = 0; f < frames; ++f) {
    double step = 0.0;
    if (f > 0) step = (track.ground[f] - track.ground[f - 1]).norm();
    gait_phase += 2.0 * kPi * step / 0.7;
    const double moving = std::min(1.0, step / 0.02);
    const double time_s = f / static_cast<double>(options.fps);
    body_pose(joints, track.arm, time_s, track.wave_phase, gait_phase, moving, offsets, rotations);

    const Eigen::Matrix3d root_rot = yaw(track.heading[f]);
    const Eigen::Vector3d base(track.ground[f].x(), 0.0, track.ground[f].y());
    for (int j = 0; j < joints; ++j) {
      const Eigen::Vector3d p = base + root_rot * offsets[j];
      for (int a = 0; a < 3; ++a) seq.frames(f, layout.positions + 3 * j + a) = static_cast<float>(p(a));
      const Eigen::Matrix3d local = (j == 0) ? root_rot : rotations[j];
      const auto r6 = rotation_to_6d(local);
      for (int a = 0; a < 6; ++a) seq.frames(f, layout.rotations + 6 * j + a) = static_cast<float>(r6(a));
    }
    // Contact flags: two per designated foot joint (1 = left, 2 = right).
    for (int foot = 0; foot < 2; ++foot) {
      const float height = seq.frames(f, layout.positions + 3 * (1 + foot) + 1);
      const float flag = height < options.contact_threshold ? 1.0F : 0.0F;
      seq.frames(f, layout.contacts + 2 * foot) = flag;
      seq.frames(f, layout.contacts + 2 * foot + 1) = flag;
    }
  }
  // Velocities are first differences of the stored (rounded) positions.
  for (int f = 1; f < frames; ++f) {
    for (int c = 0; c < 3 * joints; ++c) {
      const double d = static_cast<double>(seq.frames(f, layout.positions + c)) -
                       static_cast<double>(seq.frames(f - 1, layout.positions + c));
      seq.frames(f, layout.velocities + c) = static_cast<float>(d);
    }
  }
  return seq;
}

std::string sentence(std::string s) { return s + "."; }

}  // namespace

SynthSample synth_generate(Scenario scenario, const SynthOptions& options, std::uint64_t seed) {
  if (options.joints < 3) throw std::invalid_argument("synthetic bodies need at least 3 joints");
  if (options.frames < 2) throw std::invalid_argument("synthetic motions need at least 2 frames");
  if (!(options.fps > 0.0F)) throw std::invalid_argument("fps must be positive");

  Jitter rng(seed ^ (static_cast<std::uint64_t>(scenario) * 0x9e3779b97f4a7c15ULL));
  const int frames = options.frames;
  const Eigen::Vector2d centre(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
  const int style = scenario == Scenario::push_retreat ? 2 + rng.index(2) : 1 + rng.index(3);
  const ArmPhrase& arm1 = kArms[rng.index(static_cast<int>(kArms.size()))];
  const ArmPhrase& arm2 = style == 2 ? kArms[rng.index(static_cast<int>(kArms.size()))] : arm1;

  PersonTrack p1;
  PersonTrack p2;
  p1.ground.resize(frames);
  p2.ground.resize(frames);
  p1.arm = arm1.arm;
  p2.arm = arm2.arm;
  p1.wave_phase = rng.uniform(0.0, 0.5);
  p2.wave_phase = rng.uniform(0.0, 0.5);
  auto u_of = [frames](int f) { return f / static_cast<double>(frames - 1); };

  std::string prompt;
  switch (scenario) {
    case Scenario::approach: {
      const double far = 2.8 + rng.uniform(-0.1, 0.1);
      const double near = 0.8 + rng.uniform(-0.1, 0.1);
      for (int f = 0; f < frames; ++f) {
        const double d = far + (near - far) * smoothstep(u_of(f));
        if (style == 2) {
          p2.ground[f] = centre + Eigen::Vector2d(far / 2.0, 0.0);
          p1.ground[f] = p2.ground[f] - Eigen::Vector2d(d, 0.0);
        } else {
          p1.ground[f] = centre - Eigen::Vector2d(d / 2.0, 0.0);
          p2.ground[f] = centre + Eigen::Vector2d(d / 2.0, 0.0);
        }
      }
      if (style == 1) {
        prompt = "two people walk toward each other and " + std::string(arm1.plural);
      } else if (style == 2) {
        prompt = "one person walks toward the other and " + std::string(arm1.singular) +
                 ", the other person stands still and " + arm2.singular;
      } else {
        prompt = "the first person walks toward the second and " + std::string(arm1.singular);
      }
      break;
    }
    case Scenario::mirror: {
      const double d = 1.5 + rng.uniform(-0.1, 0.1);
      for (int f = 0; f < frames; ++f) {
        const double sway = 0.35 * std::sin(2.0 * kPi * 1.5 * u_of(f));
        p1.ground[f] = centre + Eigen::Vector2d(-d / 2.0, sway);
        p2.ground[f] = centre + Eigen::Vector2d(d / 2.0, sway);
      }
      if (style == 1) {
        prompt = "two people sway side to side facing each other and " + std::string(arm1.plural);
      } else if (style == 2) {
        prompt = "one person sways side to side facing the other and " + std::string(arm1.singular) +
                 ", the other person mirrors the movement and " + arm2.singular;
      } else {
        prompt = "the first person sways side to side facing the second and " +
                 std::string(arm1.singular);
      }
      break;
    }
    case Scenario::orbit: {
      const double radius = 0.8 + rng.uniform(-0.05, 0.05);
      const bool clockwise = rng.index(2) == 0;
      const double dir = clockwise ? -1.0 : 1.0;
      const double start = kPi + rng.uniform(-0.1, 0.1);
      for (int f = 0; f < frames; ++f) {
        const double a = start + dir * 2.0 * kPi * 0.75 * u_of(f);
        const Eigen::Vector2d r(radius * std::cos(a), radius * std::sin(a));
        p1.ground[f] = centre + r;
        p2.ground[f] = centre - r;
      }
      const std::string way = clockwise ? "clockwise" : "counterclockwise";
      if (style == 1) {
        prompt = "two people circle " + way + " around each other and " + arm1.plural;
      } else if (style == 2) {
        prompt = "one person circles " + way + " around the other and " + arm1.singular +
                 ", the other person circles along and " + arm2.singular;
      } else {
        prompt = "the first person circles " + way + " around the second and " + arm1.singular;
      }
      break;
    }
    case Scenario::push_retreat: {
      const double far = 2.2 + rng.uniform(-0.1, 0.1);
      const double near = 0.6 + rng.uniform(-0.05, 0.05);
      p1.arm = Arm::reach;
      if (style == 3) p2.arm = Arm::rest;
      for (int f = 0; f < frames; ++f) {
        const double u = u_of(f);
        const double advance = (far - near) * smoothstep(2.0 * u);
        const double retreat = (far - near) * smoothstep(2.0 * u - 1.0);
        p1.ground[f] = centre + Eigen::Vector2d(-far / 2.0 + advance, 0.0);
        p2.ground[f] = centre + Eigen::Vector2d(far / 2.0 + retreat, 0.0);
      }
      if (style == 2) {
        prompt = "one person walks up and pushes the other, the other person stumbles backward and " +
                 std::string(arm2.singular);
      } else {
        prompt = "the first person walks up and pushes the second";
      }
      break;
    }
  }
  face_each_other(p1, p2);

  SynthSample out;
  out.motion.person1 = render(p1, options);
  out.motion.person2 = render(p2, options);
  out.motion.id = std::string(to_string(scenario)) + "-" + std::to_string(seed);
  out.prompt = sentence(prompt);
  return out;
}

Vector root_distances(const DualMotion& motion) {
  const JointPositions a = joint_positions(motion.person1);
  const JointPositions b = joint_positions(motion.person2);
  Vector d(a.frames());
  for (int f = 0; f < a.frames(); ++f) d(f) = (a.at(f, 0) - b.at(f, 0)).norm();
  return d;
}

}  // namespace duet
