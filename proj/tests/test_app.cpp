#include "qtrack/app.hpp"
#include "qtrack/config.hpp"
#include "qtrack/image_io.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace qtrack;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t data_rows(const fs::path& csv) {
  std::ifstream in(csv);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) n += !line.empty();
  return n == 0 ? 0 : n - 1;
}

std::string first_line(const fs::path& csv) {
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  return line;
}

RunConfig short_scene(int frames) {
  RunConfig c;
  c.scene.frames = frames;
  return c;
}

}  // namespace

TEST_CASE("config syntax") {
  const ConfigFile f = parse_config(
      "# comment\n"
      "[tracker]\n"
      "swarm_size = 9   ; trailing\n"
      "optimizer = \"pso\"\n"
      "\n"
      "[scene]\n"
      "origin = 10, 12\n",
      "t.conf");
  CHECK(f.sections.at("tracker").at("swarm_size").value == "9");
  CHECK(f.sections.at("tracker").at("swarm_size").line == 3);
  CHECK(f.sections.at("tracker").at("optimizer").value == "pso");

  const RunConfig rc = run_config_from(f);
  CHECK(rc.tracker.swarm_size == 9);
  CHECK(rc.tracker.optimizer == OptimizerKind::pso);
  CHECK(rc.scene.origin == Point2(10, 12));
}

TEST_CASE("config errors carry the location") {
  auto message = [](const std::string& text) {
    try {
      run_config_from(parse_config(text, "x.conf"));
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("[tracker]\nswarm_size = 3\nswarm_size = 4\n").find("x.conf:3") != std::string::npos);
  CHECK(message("[tracker]\nbogus = 1\n").find("x.conf:2") != std::string::npos);
  CHECK(message("[tracker]\nswarm_size = many\n").find("x.conf:2") != std::string::npos);
  CHECK(message("[nowhere]\n").find("x.conf:1") != std::string::npos);
  CHECK_FALSE(message("key = 1\n").empty());
  CHECK_FALSE(message("[tracker]\nnot a pair\n").empty());
  CHECK(message("[tracker]\nfitness_epsilon = -1\n").find("x.conf") != std::string::npos);
}

TEST_CASE("default section for bare scene files") {
  const ConfigFile f = parse_config("width = 200\nheight = 70\nshape = disk\n", "s.conf", "scene");
  SceneSpec spec;
  apply_scene(f, spec);
  CHECK(spec.width == 200);
  CHECK(spec.height == 70);
  CHECK(spec.shape == ShapeKind::disk);
}

TEST_CASE("bench and run keys") {
  const RunConfig rc = run_config_from(parse_config(
      "[run]\ntrace = full\nannotate = false\nimage_format = png\n"
      "[bench]\noptimizers = qpso\nsequences = static, dynamic\ndynamic_pan = 2, 0\n"
      "[tracker]\npso_v_max = inf\nseed = 12\n"));
  CHECK(rc.trace == TraceLevel::full);
  CHECK_FALSE(rc.annotate);
  CHECK(rc.image_format == "png");
  CHECK(rc.bench.optimizers == std::vector<OptimizerKind>{OptimizerKind::qpso});
  CHECK(rc.bench.sequences.size() == 2);
  CHECK(rc.bench.dynamic_pan == Point2(2, 0));
  CHECK(std::isinf(rc.tracker.pso_v_max));
  CHECK(rc.tracker.seed == 12);
}

TEST_CASE("shipped example config parses") {
  const fs::path example = fs::path(QTRACK_SOURCE_DIR) / "configs" / "example.conf";
  REQUIRE(fs::exists(example));
  CHECK_NOTHROW(run_config_from(read_config(example)));
}

TEST_CASE("track on the synthetic scene") {
  test::TempDir out;
  std::ostringstream log, err;
  RunConfig c;
  c.trace = TraceLevel::full;
  REQUIRE(run_track(c, out.path(), log, err) == 0);
  CHECK(data_rows(out.path() / "results.csv") == 50);
  CHECK(first_line(out.path() / "results.csv") ==
        "frame,box_x,box_y,B,L,alive_swarms,total_iterations,accepted_particles");
  CHECK(first_line(out.path() / "iterations.csv") == "frame,swarm_id,iteration,gbest_value,gbest_x,gbest_y");
  CHECK(first_line(out.path() / "dominant_points.csv") == "frame,index,x,y,score");
  CHECK(first_line(out.path() / "flow.csv") == "frame,point_index,dx,dy,tracked,residual");
  std::size_t frames = 0;
  for (const auto& e : fs::directory_iterator(out.path() / "frames")) {
    ++frames;
    const GrayImage img = read_image(e.path());
    CHECK(img.width() == c.scene.width);
    CHECK(img.height() == c.scene.height);
  }
  CHECK(frames == 50);
  CHECK(log.str().find("frames=50") != std::string::npos);
  CHECK(log.str().find("mean_iterations_per_frame=") != std::string::npos);
  CHECK(log.str().find("wall_time_s=") != std::string::npos);
}

TEST_CASE("track reruns are byte-identical") {
  test::TempDir a, b, p;
  std::ostringstream log, err;
  RunConfig c = short_scene(12);
  c.trace = TraceLevel::full;
  REQUIRE(run_track(c, a.path(), log, err) == 0);
  REQUIRE(run_track(c, b.path(), log, err) == 0);
  c.tracker.parallel = true;
  REQUIRE(run_track(c, p.path(), log, err) == 0);
  for (const char* name : {"results.csv", "iterations.csv", "dominant_points.csv", "flow.csv"}) {
    CHECK(slurp(a.path() / name) == slurp(b.path() / name));
    CHECK(slurp(a.path() / name) == slurp(p.path() / name));
  }
}

TEST_CASE("track on a frame directory") {
  test::TempDir scene, out;
  std::ostringstream log, err;
  SceneSpec spec;
  spec.frames = 6;
  REQUIRE(run_synth(spec, scene.path(), log, err) == 0);
  CHECK(fs::exists(scene.path() / "mask.pgm"));
  CHECK(data_rows(scene.path() / "ground_truth.csv") == 6);

  RunConfig c;
  c.input = scene.path();
  SUBCASE("full sequence") {
    CHECK(run_track(c, out.path(), log, err) == 0);
    CHECK(data_rows(out.path() / "results.csv") == 6);
  }
  SUBCASE("missing mask") {
    fs::remove(scene.path() / "mask.pgm");
    CHECK(run_track(c, out.path(), log, err) == 1);
    CHECK(err.str().find((scene.path() / "mask.pgm").string()) != std::string::npos);
  }
  SUBCASE("single frame") {
    for (int i = 1; i < 6; ++i) fs::remove(scene.path() / ("frame_000" + std::to_string(i) + ".pgm"));
    CHECK(run_track(c, out.path(), log, err) == 0);
    CHECK(data_rows(out.path() / "results.csv") == 1);
  }
  SUBCASE("lost track keeps partial output") {
    write_image(scene.path() / "frame_0003.pgm", GrayImage(spec.width, spec.height, 0.0));
    CHECK(run_track(c, out.path(), log, err) == 2);
    CHECK(data_rows(out.path() / "results.csv") == 3);
  }
  SUBCASE("mismatched mask") {
    write_mask(scene.path() / "mask.pgm", BinaryMask(10, 10, 1));
    CHECK(run_track(c, out.path(), log, err) == 1);
  }
  SUBCASE("missing directory") {
    c.input = scene.path() / "absent";
    CHECK(run_track(c, out.path(), log, err) == 1);
  }
}

TEST_CASE("bench") {
  RunConfig c = short_scene(6);
  SUBCASE("one seed is rejected") {
    CHECK_THROWS_AS(run_bench(c, {1}), AppError);
    test::TempDir out;
    std::ostringstream log, err;
    CHECK(run_bench_command(c, 1, out.path(), log, err) == 1);
  }
  SUBCASE("cells cover every requested pair") {
    const BenchReport r = run_bench(c, {1, 2});
    REQUIRE(r.cells.size() == 4);
    for (const auto& cell : r.cells) {
      CHECK_FALSE(cell.failed);
      CHECK(cell.seeds == 2);
      CHECK(cell.settings == bench_settings(cell.optimizer, cell.sequence));
    }
  }
  SUBCASE("single optimizer") {
    c.bench.optimizers = {OptimizerKind::qpso};
    const BenchReport r = run_bench(c, {1, 2});
    REQUIRE(r.cells.size() == 2);
    for (const auto& cell : r.cells) CHECK(cell.optimizer == OptimizerKind::qpso);
  }
  SUBCASE("failed cell is still reported") {
    c.scene.velocity = {400, 0};
    const BenchReport r = run_bench(c, {1, 2});
    REQUIRE(r.cells.size() == 4);
    for (const auto& cell : r.cells) {
      CHECK(cell.failed);
      CHECK_FALSE(cell.error.empty());
    }
    std::ostringstream csv;
    write_bench_csv(csv, r);
    CHECK(csv.str().find("failed") != std::string::npos);
  }
  SUBCASE("outputs are byte-identical across runs") {
    c.bench.optimizers = {OptimizerKind::qpso};
    c.bench.sequences = {BenchSequence::static_scene};
    test::TempDir a, b;
    std::ostringstream log, err;
    REQUIRE(run_bench_command(c, 2, a.path(), log, err) == 0);
    REQUIRE(run_bench_command(c, 2, b.path(), log, err) == 0);
    CHECK(slurp(a.path() / "bench.csv") == slurp(b.path() / "bench.csv"));
    CHECK(first_line(a.path() / "bench.csv") ==
          "optimizer,sequence,swarm_size,iter_cap,seeds,median_iterations,converged_fraction,iou_hit_rate,status");
    CHECK(fs::exists(a.path() / "bench.txt"));
  }
  SUBCASE("table settings") {
    CHECK(bench_settings(OptimizerKind::pso, BenchSequence::static_scene) == BenchSettings{25, 1000});
    CHECK(bench_settings(OptimizerKind::pso, BenchSequence::dynamic_scene) == BenchSettings{35, 2000});
    CHECK(bench_settings(OptimizerKind::qpso, BenchSequence::static_scene) == BenchSettings{15, 100});
    CHECK(bench_settings(OptimizerKind::qpso, BenchSequence::dynamic_scene) == BenchSettings{20, 150});
  }
}
