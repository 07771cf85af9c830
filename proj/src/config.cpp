#include "qtrack/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace qtrack {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (!quoted && (line[i] == '#' || line[i] == ';')) return line.substr(0, i);
  }
  return line;
}

std::string unquote(const std::string& v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  return v;
}

class Reader {
 public:
  Reader(const ConfigFile& file, const std::string& section) : file_(file), name_(section) {
    if (auto it = file.sections.find(section); it != file.sections.end()) section_ = &it->second;
  }

  template <typename F>
  void with(const std::string& key, F&& apply) {
    if (!section_) return;
    auto it = section_->find(key);
    if (it == section_->end()) return;
    used_.push_back(key);
    try {
      apply(it->second.value);
    } catch (const ConfigError& e) {
      fail(it->second, e.what());
    } catch (const std::exception& e) {
      fail(it->second, e.what());
    }
  }

  void get(const std::string& key, int& out) {
    with(key, [&](const std::string& v) { out = parse_int(v); });
  }
  void get(const std::string& key, std::uint64_t& out) {
    with(key, [&](const std::string& v) {
      const long long x = parse_int(v);
      if (x < 0) throw ConfigError("expected a non-negative integer");
      out = static_cast<std::uint64_t>(x);
    });
  }
  void get(const std::string& key, double& out) {
    with(key, [&](const std::string& v) { out = parse_double(v); });
  }
  void get(const std::string& key, bool& out) {
    with(key, [&](const std::string& v) {
      if (v == "true" || v == "yes" || v == "on" || v == "1")
        out = true;
      else if (v == "false" || v == "no" || v == "off" || v == "0")
        out = false;
      else
        throw ConfigError("expected true or false, got '" + v + "'");
    });
  }
  void get(const std::string& key, std::string& out) {
    with(key, [&](const std::string& v) { out = v; });
  }
  void get(const std::string& key, Point2& out) {
    with(key, [&](const std::string& v) {
      const auto comma = v.find(',');
      if (comma == std::string::npos) throw ConfigError("expected 'x, y', got '" + v + "'");
      out = {parse_double(trim(v.substr(0, comma))), parse_double(trim(v.substr(comma + 1)))};
    });
  }

  /// Rejects keys nobody asked for.
  void finish() const {
    if (!section_) return;
    for (const auto& [key, entry] : *section_)
      if (std::find(used_.begin(), used_.end(), key) == used_.end())
        fail(entry, "unknown key '" + key + "' in [" + name_ + "]");
  }

  [[noreturn]] void fail(const ConfigEntry& entry, const std::string& what) const {
    throw ConfigError(file_.source + ":" + std::to_string(entry.line) + ": " + what);
  }

  static long long parse_int(const std::string& v) {
    long long x = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("expected an integer, got '" + v + "'");
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
      throw ConfigError("integer out of range: '" + v + "'");
    return x;
  }

  static double parse_double(const std::string& v) {
    if (v == "inf" || v == "infinity") return std::numeric_limits<double>::infinity();
    double x = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("expected a number, got '" + v + "'");
    return x;
  }

 private:
  const ConfigFile& file_;
  std::string name_;
  const ConfigSection* section_ = nullptr;
  std::vector<std::string> used_;
};

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) throw ConfigError("expected a non-empty comma-separated list");
  return out;
}

BenchSequence parse_sequence(const std::string& name) {
  if (name == "static") return BenchSequence::static_scene;
  if (name == "dynamic" || name == "variable") return BenchSequence::dynamic_scene;
  throw ConfigError("unknown sequence '" + name + "' (expected static or dynamic)");
}

SearchRegion parse_search_region(const std::string& name) {
  if (name == "segment") return SearchRegion::segment;
  if (name == "image") return SearchRegion::image;
  throw ConfigError("unknown search region '" + name + "' (expected segment or image)");
}

TraceLevel parse_trace(const std::string& name) {
  if (name == "none") return TraceLevel::none;
  if (name == "points") return TraceLevel::points;
  if (name == "full") return TraceLevel::full;
  throw ConfigError("unknown trace level '" + name + "' (expected none, points or full)");
}

void apply_tracker(const ConfigFile& file, TrackerConfig& t) {
  Reader r(file, "tracker");
  r.with("background", [&](const std::string& v) { t.background = parse_background(v); });
  r.with("optimizer", [&](const std::string& v) { t.optimizer = parse_optimizer(v); });
  r.get("swarm_size", t.swarm_size);
  r.get("group_size", t.group_size);
  r.get("fitness_epsilon", t.fitness_epsilon);
  r.get("max_iters", t.max_iters);
  r.get("reinit_patience", t.reinit_patience);
  r.get("bbox_p", t.bbox_p);
  r.get("seed", t.seed);
  r.get("beta_start", t.beta_start);
  r.get("beta_end", t.beta_end);
  r.get("pso_w", t.pso_w);
  r.get("pso_c1", t.pso_c1);
  r.get("pso_c2", t.pso_c2);
  r.get("pso_v_max", t.pso_v_max);
  r.with("pairing", [&](const std::string& v) { t.pairing = parse_pairing(v); });
  r.get("min_dominant_points", t.min_dominant_points);
  r.with("search_region", [&](const std::string& v) { t.search_region = parse_search_region(v); });
  r.get("init_margin", t.init_margin);
  r.get("flow_consensus", t.flow_consensus);
  r.get("consensus_tolerance", t.consensus_tolerance);
  r.get("warm_start", t.warm_start);
  r.get("parallel", t.parallel);
  r.get("flow_window", t.flow.window);
  r.get("flow_max_iters", t.flow.max_iters);
  r.get("flow_min_eigenvalue", t.flow.min_eigenvalue);
  r.get("flow_min_step", t.flow.min_step);
  r.finish();
  try {
    t.validate();
  } catch (const std::exception& e) {
    throw ConfigError(file.source + ": [tracker] " + e.what());
  }
}

}  // namespace

ConfigFile parse_config(const std::string& text, const std::string& source, const std::string& default_section) {
  ConfigFile file;
  file.source = source;
  std::string section = default_section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  auto fail = [&](const std::string& what) -> void {
    throw ConfigError(source + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) fail("empty section name");
      if (section != "run" && section != "scene" && section != "tracker" && section != "bench")
        fail("unknown section [" + section + "] (expected run, scene, tracker or bench)");
      file.sections[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = unquote(trim(line.substr(eq + 1)));
    if (key.empty()) fail("missing key before '='");
    if (section.empty()) fail("key '" + key + "' appears before any [section] header");
    auto& sec = file.sections[section];
    if (sec.count(key)) fail("duplicate key '" + key + "' in [" + section + "]");
    sec[key] = {value, line_no};
  }
  return file;
}

ConfigFile read_config(const std::filesystem::path& path, const std::string& default_section) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string(), default_section);
}

std::string to_string(BenchSequence seq) { return seq == BenchSequence::static_scene ? "static" : "dynamic"; }

void apply_scene(const ConfigFile& file, SceneSpec& s) {
  Reader r(file, "scene");
  r.get("width", s.width);
  r.get("height", s.height);
  r.with("shape", [&](const std::string& v) { s.shape = parse_shape(v); });
  r.get("size", s.size);
  r.get("origin", s.origin);
  r.get("velocity", s.velocity);
  r.get("pan", s.pan);
  r.get("foreground", s.foreground);
  r.get("background", s.background);
  r.get("noise", s.noise);
  r.get("texture_scale", s.texture_scale);
  r.get("frames", s.frames);
  r.get("seed", s.seed);
  r.get("occluder_x", s.occluder_x);
  r.get("occluder_width", s.occluder_width);
  r.get("occluder_start", s.occluder_start);
  r.get("occluder_frames", s.occluder_frames);
  r.get("occluder_intensity", s.occluder_intensity);
  r.finish();
  try {
    s.validate();
  } catch (const std::exception& e) {
    throw ConfigError(file.source + ": [scene] " + e.what());
  }
}

RunConfig run_config_from(const ConfigFile& file) {
  RunConfig rc;
  {
    Reader r(file, "run");
    std::string input;
    r.get("input", input);
    rc.input = input;
    r.get("pattern", rc.frame_pattern);
    r.with("trace", [&](const std::string& v) { rc.trace = parse_trace(v); });
    r.get("annotate", rc.annotate);
    r.with("image_format", [&](const std::string& v) {
      if (v != "pgm" && v != "png") throw ConfigError("image_format must be pgm or png");
      rc.image_format = v;
    });
    r.finish();
  }
  apply_scene(file, rc.scene);
  apply_tracker(file, rc.tracker);
  {
    Reader r(file, "bench");
    r.with("optimizers", [&](const std::string& v) {
      rc.bench.optimizers.clear();
      for (const auto& name : split_list(v)) {
        const OptimizerKind kind = parse_optimizer(name);
        if (std::find(rc.bench.optimizers.begin(), rc.bench.optimizers.end(), kind) != rc.bench.optimizers.end())
          throw ConfigError("optimizer '" + name + "' listed twice");
        rc.bench.optimizers.push_back(kind);
      }
    });
    r.with("sequences", [&](const std::string& v) {
      rc.bench.sequences.clear();
      for (const auto& name : split_list(v)) {
        const BenchSequence seq = parse_sequence(name);
        if (std::find(rc.bench.sequences.begin(), rc.bench.sequences.end(), seq) != rc.bench.sequences.end())
          throw ConfigError("sequence '" + name + "' listed twice");
        rc.bench.sequences.push_back(seq);
      }
    });
    r.get("dynamic_pan", rc.bench.dynamic_pan);
    r.finish();
  }
  return rc;
}

}  // namespace qtrack
