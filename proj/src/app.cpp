#include "qtrack/app.hpp"

#include "qtrack/image_io.hpp"
#include "qtrack/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>

namespace qtrack {

namespace fs = std::filesystem;

namespace {

std::string num(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string frame_name(int index, const std::string& ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%04d.%s", index, ext.c_str());
  return buf;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::ofstream open_csv(const fs::path& path, const std::string& header) {
  std::ofstream out(path);
  if (!out) throw AppError("cannot write " + path.string());
  out << header << '\n';
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw AppError("cannot create output directory " + dir.string());
}

std::unique_ptr<Executor> make_executor(const TrackerConfig& config) {
  if (!config.parallel) return nullptr;
  return std::make_unique<Executor>(Executor::threads_from_env());
}

}  // namespace

SequenceResult track_sequence(const FrameSource& frames, const BinaryMask& mask, const TrackerConfig& config,
                              Executor* executor, const FrameCallback& on_frame, const IterationObserver& observer) {
  if (frames.count < 1) throw AppError("no frames to track");
  using clock = std::chrono::steady_clock;
  SequenceResult result;
  Tracker tracker(config, executor);
  if (observer) tracker.set_observer(observer);

  GrayImage prev = frames.frame(0);
  auto t0 = clock::now();
  FrameReport report = tracker.init(prev, mask);
  result.compute_seconds += std::chrono::duration<double>(clock::now() - t0).count();
  result.reports.push_back(report);
  if (on_frame) on_frame(0, prev, report, tracker);

  for (int i = 1; i < frames.count; ++i) {
    GrayImage next = frames.frame(i);
    t0 = clock::now();
    try {
      report = tracker.advance(prev, next);
    } catch (const TrackingLost& e) {
      result.compute_seconds += std::chrono::duration<double>(clock::now() - t0).count();
      result.lost = true;
      result.lost_message = e.what();
      return result;
    }
    result.compute_seconds += std::chrono::duration<double>(clock::now() - t0).count();
    result.reports.push_back(report);
    if (on_frame) on_frame(i, next, report, tracker);
    prev = std::move(next);
  }
  return result;
}

GrayImage annotate_frame(const GrayImage& frame, const Tracker& tracker) {
  GrayImage out = frame;
  auto plot = [&](long x, long y) {
    if (out.contains(static_cast<int>(x), static_cast<int>(y))) out(static_cast<int>(x), static_cast<int>(y)) = 1.0;
  };
  for (const auto& slot : tracker.state().swarms) {
    if (!slot.alive) continue;
    for (const auto& p : slot.swarm.particles) plot(std::lround(p.position.x()), std::lround(p.position.y()));
  }
  const Rect r = tracker.state().box.rect();
  const long x0 = std::lround(r.x0), y0 = std::lround(r.y0), x1 = std::lround(r.x1), y1 = std::lround(r.y1);
  for (long x = x0; x <= x1; ++x) {
    plot(x, y0);
    plot(x, y1);
  }
  for (long y = y0; y <= y1; ++y) {
    plot(x0, y);
    plot(x1, y);
  }
  return out;
}

FrameSource scene_frames(const SceneSpec& spec) {
  spec.validate();
  return {spec.frames, [spec](int i) { return render_scene(spec, i).image; }};
}

double iou_hit_rate(const SequenceResult& result, const SceneSpec& spec, double threshold) {
  if (spec.frames == 0) return 0;
  int hits = 0;
  for (const auto& r : result.reports)
    if (iou(r.box.rect(), render_scene(spec, r.frame).box.rect()) >= threshold) ++hits;
  return double(hits) / double(spec.frames);
}

double median_frame_iterations(const SequenceResult& result) {
  std::vector<double> its;
  for (const auto& r : result.reports) its.push_back(r.max_iterations);
  return median(its);
}

BenchSettings bench_settings(OptimizerKind optimizer, BenchSequence sequence) {
  const bool dynamic = sequence == BenchSequence::dynamic_scene;
  if (optimizer == OptimizerKind::pso) return dynamic ? BenchSettings{35, 2000} : BenchSettings{25, 1000};
  return dynamic ? BenchSettings{20, 150} : BenchSettings{15, 100};
}

SceneSpec bench_scene(const RunConfig& config, BenchSequence sequence) {
  SceneSpec spec = config.scene;
  spec.pan = sequence == BenchSequence::dynamic_scene ? config.bench.dynamic_pan : Point2::Zero();
  return spec;
}

BenchCell run_bench_cell(const RunConfig& config, OptimizerKind optimizer, BenchSequence sequence,
                         const std::vector<std::uint64_t>& seeds, Executor* executor) {
  BenchCell cell;
  cell.optimizer = optimizer;
  cell.sequence = sequence;
  cell.settings = bench_settings(optimizer, sequence);
  cell.seeds = seeds.size();
  try {
    const SceneSpec spec = bench_scene(config, sequence);
    const FrameSource frames = scene_frames(spec);
    const BinaryMask mask = render_scene(spec, 0).mask;
    TrackerConfig tc = config.tracker;
    tc.optimizer = optimizer;
    tc.background = sequence == BenchSequence::dynamic_scene ? BackgroundMode::variable_background
                                                             : BackgroundMode::static_background;
    tc.swarm_size = cell.settings.swarm_size;
    tc.max_iters = cell.settings.iter_cap;

    std::vector<double> medians;
    double wall = 0, hit = 0;
    std::size_t converged = 0, total = 0;
    for (std::uint64_t seed : seeds) {
      tc.seed = seed;
      const SequenceResult run = track_sequence(frames, mask, tc, executor);
      if (run.lost) throw AppError(run.lost_message);
      medians.push_back(median_frame_iterations(run));
      wall += run.compute_seconds;
      hit += iou_hit_rate(run, spec);
      for (const auto& r : run.reports) converged += r.converged ? 1 : 0;
      total += run.reports.size();
    }
    cell.median_iterations = median(medians);
    cell.wall_seconds = wall / double(seeds.size());
    cell.converged_fraction = total ? double(converged) / double(total) : 0;
    cell.mean_iou_hit_rate = hit / double(seeds.size());
  } catch (const std::exception& e) {
    cell.failed = true;
    cell.error = e.what();
  }
  return cell;
}

BenchReport run_bench(const RunConfig& config, const std::vector<std::uint64_t>& seeds, Executor* executor) {
  if (seeds.size() < 2) throw AppError("bench needs at least two seeds");
  if (config.bench.optimizers.empty()) throw AppError("bench needs at least one optimizer");
  BenchReport report;
  for (OptimizerKind opt : config.bench.optimizers)
    for (BenchSequence seq : config.bench.sequences) report.cells.push_back(run_bench_cell(config, opt, seq, seeds, executor));
  return report;
}

void write_bench_csv(std::ostream& out, const BenchReport& report) {
  out << "optimizer,sequence,swarm_size,iter_cap,seeds,median_iterations,converged_fraction,iou_hit_rate,status\n";
  for (const auto& c : report.cells) {
    out << to_string(c.optimizer) << ',' << to_string(c.sequence) << ',' << c.settings.swarm_size << ','
        << c.settings.iter_cap << ',' << c.seeds << ',';
    if (c.failed)
      out << ",,,failed\n";
    else
      out << num(c.median_iterations, 1) << ',' << num(c.converged_fraction) << ',' << num(c.mean_iou_hit_rate)
          << ",ok\n";
  }
}

void write_bench_table(std::ostream& out, const BenchReport& report) {
  const std::vector<std::string> head{"optimizer", "sequence", "swarm", "cap",      "seeds",
                                      "median it", "wall s",   "conv",  "iou>=0.5", "status"};
  std::vector<std::vector<std::string>> rows{head};
  for (const auto& c : report.cells) {
    std::vector<std::string> row{to_string(c.optimizer), to_string(c.sequence), std::to_string(c.settings.swarm_size),
                                 std::to_string(c.settings.iter_cap), std::to_string(c.seeds)};
    if (c.failed) {
      row.insert(row.end(), {"-", "-", "-", "-", "failed: " + c.error});
    } else {
      row.insert(row.end(), {num(c.median_iterations, 1), num(c.wall_seconds, 3), num(c.converged_fraction, 3),
                             num(c.mean_iou_hit_rate, 3), "ok"});
    }
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& row : rows)
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i + 1 == row.size())
        out << row[i];
      else
        out << std::left << std::setw(static_cast<int>(width[i] + 2)) << row[i];
    }
    out << '\n';
  }
}

int run_track(const RunConfig& config, const fs::path& out_dir, std::ostream& log, std::ostream& err) {
  FrameSource frames;
  BinaryMask mask;
  try {
    if (config.input.empty()) {
      frames = scene_frames(config.scene);
      mask = render_scene(config.scene, 0).mask;
    } else {
      if (!fs::is_directory(config.input)) throw AppError("input directory not found: " + config.input.string());
      const fs::path mask_path = config.input / "mask.pgm";
      if (!fs::exists(mask_path)) throw AppError("frame-0 mask not found: " + mask_path.string());
      mask = read_mask(mask_path);
      std::vector<fs::path> paths = list_frames(config.input, config.frame_pattern);
      std::erase_if(paths, [](const fs::path& p) { return p.filename() == "mask.pgm"; });
      if (paths.empty()) throw AppError("no frames matching '" + config.frame_pattern + "' in " + config.input.string());
      std::vector<GrayImage> images;
      for (const auto& p : paths) {
        images.push_back(read_image(p));
        if (!images.back().same_size(images.front()))
          throw AppError("frame " + p.string() + " differs in size from " + paths.front().string());
      }
      if (images.front().width() != mask.width() || images.front().height() != mask.height()) throw AppError("mask " + mask_path.string() + " differs in size from the frames");
      auto shared = std::make_shared<std::vector<GrayImage>>(std::move(images));
      frames = {static_cast<int>(shared->size()), [shared](int i) { return (*shared)[static_cast<std::size_t>(i)]; }};
    }
    ensure_dir(out_dir);
    if (config.annotate) ensure_dir(out_dir / "frames");
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    const auto executor = make_executor(config.tracker);
    std::ofstream results = open_csv(out_dir / "results.csv",
                                     "frame,box_x,box_y,B,L,alive_swarms,total_iterations,accepted_particles");
    std::ofstream points, flow, iterations;
    if (config.trace != TraceLevel::none) {
      points = open_csv(out_dir / "dominant_points.csv", "frame,index,x,y,score");
      flow = open_csv(out_dir / "flow.csv", "frame,point_index,dx,dy,tracked,residual");
    }
    if (config.trace == TraceLevel::full)
      iterations = open_csv(out_dir / "iterations.csv", "frame,swarm_id,iteration,gbest_value,gbest_x,gbest_y");

    IterationObserver observer;
    if (config.trace == TraceLevel::full) {
      observer = [&](int swarm, const IterationRecord& rec) {
        iterations << rec.frame << ',' << swarm << ',' << rec.iteration << ',' << num(rec.gbest_value, 6) << ','
                   << num(rec.gbest.x(), 6) << ',' << num(rec.gbest.y(), 6) << '\n';
      };
    }
    auto on_frame = [&](int index, const GrayImage& frame, const FrameReport& r, const Tracker& tracker) {
      results << r.frame << ',' << num(r.box.q.x()) << ',' << num(r.box.q.y()) << ',' << num(r.box.breadth) << ','
              << num(r.box.length) << ',' << r.alive_swarms << ',' << r.total_iterations << ',' << r.accepted_particles
              << '\n';
      if (config.trace != TraceLevel::none) {
        const auto& st = tracker.state();
        for (std::size_t i = 0; i < st.points.size(); ++i)
          if (st.point_alive[i])
            points << r.frame << ',' << i << ',' << num(st.points[i].x()) << ',' << num(st.points[i].y()) << ','
                   << num(i < st.point_scores.size() ? st.point_scores[i] : 0.0, 6) << '\n';
        for (std::size_t i = 0; i < r.flow.size(); ++i)
          flow << r.frame << ',' << i << ',' << num(r.flow[i].displacement.x()) << ','
               << num(r.flow[i].displacement.y()) << ',' << (r.flow[i].tracked ? 1 : 0) << ','
               << num(r.flow[i].residual, 6) << '\n';
      }
      if (config.annotate) write_image(out_dir / "frames" / frame_name(index, config.image_format), annotate_frame(frame, tracker));
    };

    const SequenceResult run = track_sequence(frames, mask, config.tracker, executor.get(), on_frame, observer);
    double iters = 0;
    for (const auto& r : run.reports) iters += r.total_iterations;
    log << "frames=" << run.reports.size() << " mean_iterations_per_frame="
        << num(run.reports.empty() ? 0.0 : iters / double(run.reports.size()), 2)
        << " wall_time_s=" << num(run.compute_seconds, 3) << '\n';
    if (run.lost) {
      err << "tracking lost: " << run.lost_message << '\n';
      return 2;
    }
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int run_synth(const SceneSpec& spec, const fs::path& out_dir, std::ostream& log, std::ostream& err) {
  try {
    spec.validate();
    ensure_dir(out_dir);
    std::ofstream truth = open_csv(out_dir / "ground_truth.csv", "frame,x0,y0,x1,y1");
    for (int i = 0; i < spec.frames; ++i) {
      const RenderedFrame f = render_scene(spec, i);
      write_image(out_dir / frame_name(i, "pgm"), f.image);
      if (i == 0) write_mask(out_dir / "mask.pgm", f.mask);
      truth << i << ',' << f.box.x0 << ',' << f.box.y0 << ',' << f.box.x1 << ',' << f.box.y1 << '\n';
    }
    log << "wrote " << spec.frames << " frames to " << out_dir.string() << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int run_bench_command(const RunConfig& config, int seeds, const fs::path& out_dir, std::ostream& log,
                      std::ostream& err) {
  try {
    if (seeds < 2) throw AppError("bench needs at least two seeds (got " + std::to_string(seeds) + ")");
    ensure_dir(out_dir);
    std::vector<std::uint64_t> list;
    for (int s = 1; s <= seeds; ++s) list.push_back(static_cast<std::uint64_t>(s));
    const auto executor = make_executor(config.tracker);
    const BenchReport report = run_bench(config, list, executor.get());
    std::ofstream csv(out_dir / "bench.csv");
    std::ofstream txt(out_dir / "bench.txt");
    if (!csv || !txt) throw AppError("cannot write bench outputs in " + out_dir.string());
    write_bench_csv(csv, report);
    write_bench_table(txt, report);
    write_bench_table(log, report);
    const bool any_failed =
        std::any_of(report.cells.begin(), report.cells.end(), [](const BenchCell& c) { return c.failed; });
    return any_failed ? 1 : 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace qtrack
