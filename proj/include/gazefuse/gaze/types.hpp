#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "gazefuse/errors.hpp"

namespace gazefuse::gaze {

enum class StimulusCategory {
  animals,
  buildings_objects,
  nature,
  people_group,
  people_with_objects,
  single_person,
  single_person_multi_object,
};

inline constexpr std::size_t kCategoryCount = 7;

inline constexpr std::array<std::string_view, kCategoryCount> kCategoryNames = {
    "animals",       "buildings_objects", "nature", "people_group", "people_with_objects",
    "single_person", "single_person_multi_object",
};

inline std::string_view category_name(StimulusCategory c) { return kCategoryNames[static_cast<std::size_t>(c)]; }

inline StimulusCategory parse_category(std::string_view name) {
  for (std::size_t i = 0; i < kCategoryCount; ++i) {
    if (kCategoryNames[i] == name) return static_cast<StimulusCategory>(i);
  }
  throw ConfigError("unknown stimulus category '" + std::string(name) + "'");
}

/// One raw tracker sample; x/y in screen pixels.
struct RawGazeSample {
  double t_ms = 0.0;
  double x = 0.0;
  double y = 0.0;
  bool valid = true;
};

/// A detected fixation. Coordinates are normalized to [0,1]^2 once a path
/// has been through `normalize`.
struct Fixation {
  double x = 0.0;
  double y = 0.0;
  double duration_ms = 0.0;
  double onset_ms = 0.0;

  bool operator==(const Fixation&) const = default;
};

struct ScanPath {
  std::string subject_id;
  std::string stimulus_id;
  StimulusCategory category = StimulusCategory::animals;
  int label = 0;  // 0 = non-ASD, 1 = ASD
  std::vector<Fixation> fixations;

  bool operator==(const ScanPath&) const = default;
};

/// Normalized density over an H x W grid, row-major, summing to 1.
struct SaliencyMap {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> grid;

  double at(std::size_t r, std::size_t c) const { return grid[r * cols + c]; }
};

}  // namespace gazefuse::gaze
