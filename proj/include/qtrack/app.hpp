// Drivers behind the qpso_track subcommands.
//
// Output files (all CSVs carry a header row):
//   results.csv         frame,box_x,box_y,B,L,alive_swarms,total_iterations,accepted_particles
//   dominant_points.csv frame,index,x,y,score            (trace = points | full)
//   flow.csv            frame,point_index,dx,dy,tracked,residual   (trace = points | full)
//   iterations.csv      frame,swarm_id,iteration,gbest_value,gbest_x,gbest_y   (trace = full)
//   frames/frame_NNNN.{pgm,png}   annotated frames (annotate = true)
//   bench.csv, bench.txt          bench results
//   frame_NNNN.pgm, mask.pgm, ground_truth.csv (frame,x0,y0,x1,y1)   synth output
#pragma once

#include "qtrack/config.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace qtrack {

class Executor;

class AppError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FrameSource {
  int count = 0;
  std::function<GrayImage(int)> frame;
};

struct SequenceResult {
  std::vector<FrameReport> reports;
  bool lost = false;
  std::string lost_message;
  /// Monotonic time spent in tracker init/advance, excluding frame I/O.
  double compute_seconds = 0;
};

using FrameCallback = std::function<void(int index, const GrayImage& frame, const FrameReport& report, const Tracker& tracker)>;

/// Runs the tracker over every frame. Tracking loss ends the run early with
/// `lost` set; other errors propagate.
SequenceResult track_sequence(const FrameSource& frames, const BinaryMask& mask, const TrackerConfig& config,
                              Executor* executor = nullptr, const FrameCallback& on_frame = {},
                              const IterationObserver& observer = {});

/// Frame with particle dots and box edges drawn at intensity 1.
GrayImage annotate_frame(const GrayImage& frame, const Tracker& tracker);

/// Frames of a synthetic scene, plus the ground-truth box of each.
FrameSource scene_frames(const SceneSpec& spec);

/// Fraction of frames whose box has IoU >= threshold with the ground truth.
double iou_hit_rate(const SequenceResult& result, const SceneSpec& spec, double threshold = 0.5);

/// Iterations-to-acceptance of a frame: the largest per-swarm count.
double median_frame_iterations(const SequenceResult& result);

struct BenchSettings {
  int swarm_size = 0;
  int iter_cap = 0;
  bool operator==(const BenchSettings&) const = default;
};

/// Table settings: PSO 25/1000 static, 35/2000 dynamic; QPSO 15/100 static, 20/150 dynamic.
BenchSettings bench_settings(OptimizerKind optimizer, BenchSequence sequence);

struct BenchCell {
  OptimizerKind optimizer = OptimizerKind::qpso;
  BenchSequence sequence = BenchSequence::static_scene;
  BenchSettings settings;
  std::size_t seeds = 0;
  /// Median over seeds of the per-seed median frame iterations.
  double median_iterations = 0;
  /// Mean over seeds of the tracking compute time.
  double wall_seconds = 0;
  /// Fraction of all frames (all seeds) where every swarm converged.
  double converged_fraction = 0;
  double mean_iou_hit_rate = 0;
  bool failed = false;
  std::string error;
};

struct BenchReport {
  std::vector<BenchCell> cells;
};

SceneSpec bench_scene(const RunConfig& config, BenchSequence sequence);

/// One cell: the full pipeline once per seed. Errors mark the cell failed.
BenchCell run_bench_cell(const RunConfig& config, OptimizerKind optimizer, BenchSequence sequence,
                         const std::vector<std::uint64_t>& seeds, Executor* executor = nullptr);

/// Throws AppError for fewer than two seeds.
BenchReport run_bench(const RunConfig& config, const std::vector<std::uint64_t>& seeds, Executor* executor = nullptr);

void write_bench_csv(std::ostream& out, const BenchReport& report);
void write_bench_table(std::ostream& out, const BenchReport& report);

/// Exit status: 0 full sequence tracked, 2 tracking lost (outputs kept), 1 error.
int run_track(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log, std::ostream& err);
int run_synth(const SceneSpec& spec, const std::filesystem::path& out_dir, std::ostream& log, std::ostream& err);
int run_bench_command(const RunConfig& config, int seeds, const std::filesystem::path& out_dir, std::ostream& log,
                      std::ostream& err);

}  // namespace qtrack
