#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "duet/motion.hpp"

namespace duet {

/// Scripted two-person scenarios, each with a characteristic root-distance
/// curve.
enum class Scenario {
  approach,      // distance decreases monotonically
  mirror,        // constant distance, mirrored sway
  orbit,         // both circle a common centre at constant radius
  push_retreat,  // distance decreases, then increases
};

Scenario parse_scenario(std::string_view name);
std::string_view to_string(Scenario scenario);

struct SynthOptions {
  int frames = 60;
  int joints = 5;
  float fps = 20.0F;
  /// A designated foot joint is in contact when its height is below this.
  double contact_threshold = 0.05;
};

struct SynthSample {
  DualMotion motion;
  std::string prompt;
};

/// Generates one scenario instance. The prompt fixes the scenario variant and
/// both persons' arm actions; the seed only adds small placement jitter.
/// Requires joints >= 3 (root plus two feet). Output is bit-identical for
/// identical arguments.
SynthSample synth_generate(Scenario scenario, const SynthOptions& options, std::uint64_t seed);

/// Horizontal root distance per frame.
Vector root_distances(const DualMotion& motion);

}  // namespace duet
