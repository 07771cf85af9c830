// Flat key = value configuration with [section] headers.
//
//   # comment
//   [tracker]
//   optimizer = qpso
//   parallel = true
//
// Keys before the first header belong to the section named by the caller
// (scene files for `synth` may omit the header).
#pragma once

#include "qtrack/scene.hpp"
#include "qtrack/tracker.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qtrack {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfigEntry {
  std::string value;
  int line = 0;
};

using ConfigSection = std::map<std::string, ConfigEntry>;

struct ConfigFile {
  std::string source;
  std::map<std::string, ConfigSection> sections;

  bool has(const std::string& section) const { return sections.count(section) > 0; }
};

ConfigFile parse_config(const std::string& text, const std::string& source = "<config>",
                        const std::string& default_section = "");
ConfigFile read_config(const std::filesystem::path& path, const std::string& default_section = "");

enum class TraceLevel {
  none,
  /// Dominant-point and flow CSVs.
  points,
  /// Additionally the per-iteration gbest trace.
  full,
};

enum class BenchSequence { static_scene, dynamic_scene };

std::string to_string(BenchSequence seq);

struct BenchConfig {
  std::vector<OptimizerKind> optimizers{OptimizerKind::pso, OptimizerKind::qpso};
  std::vector<BenchSequence> sequences{BenchSequence::static_scene, BenchSequence::dynamic_scene};
  /// Background pan per frame in the dynamic sequence.
  Point2 dynamic_pan{1.0, 0.0};
};

struct RunConfig {
  /// Frame directory; empty selects the synthetic scene.
  std::filesystem::path input;
  std::string frame_pattern = "*.p[gn][mg]";
  SceneSpec scene;
  TrackerConfig tracker;
  BenchConfig bench;
  TraceLevel trace = TraceLevel::none;
  bool annotate = true;
  /// "pgm" or "png".
  std::string image_format = "pgm";
};

/// Applies the [scene] keys of `file` onto `scene`.
void apply_scene(const ConfigFile& file, SceneSpec& scene);
/// Builds a RunConfig from [run], [scene], [tracker] and [bench].
RunConfig run_config_from(const ConfigFile& file);

}  // namespace qtrack
