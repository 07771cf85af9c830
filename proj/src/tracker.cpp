#include "qtrack/tracker.hpp"

#include "qtrack/parallel.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <numeric>

namespace qtrack {

namespace {

constexpr std::uint64_t kPlacementStream = 0x51ED;
constexpr std::uint64_t kReinitStream = 0xBEEF;

Rect image_rect(int width, int height) { return {0.0, 0.0, width - 1.0, height - 1.0}; }

}  // namespace

Fitness curvature_fitness(const CurvatureSegment& seg) {
  if (!(segment_length(seg) > 0)) throw TrackerError("curvature_fitness: zero-length segment");
  return [seg](const Point2& p) { return perp_dist(seg, p); };
}

std::string to_string(PairingMode mode) { return mode == PairingMode::disjoint ? "disjoint" : "closed-chain"; }

PairingMode parse_pairing(const std::string& name) {
  if (name == "disjoint") return PairingMode::disjoint;
  if (name == "closed-chain" || name == "closed_chain" || name == "overlapping") return PairingMode::closed_chain;
  throw TrackerError("unknown pairing '" + name + "' (expected disjoint or closed-chain)");
}

Pairing pair_segments(std::span<const Point2> points, PairingMode mode) {
  if (points.size() < 2) throw TrackerError("pair_segments needs at least two dominant points");
  Pairing out;
  auto add = [&](std::size_t a, std::size_t b) {
    if (points[a] == points[b]) {
      ++out.degenerate_dropped;
      return;
    }
    out.segments.push_back({points[a], points[b], a, b});
  };
  const std::size_t n = points.size();
  if (mode == PairingMode::disjoint) {
    for (std::size_t i = 0; i + 1 < n; i += 2) add(i, i + 1);
    out.unpaired_last = n % 2 == 1;
  } else {
    for (std::size_t i = 0; i + 1 < n; ++i) add(i, i + 1);
    if (n > 2) add(n - 1, 0);
  }
  return out;
}

Point2 reinit_particle(Swarm& swarm, std::size_t i, RandomStream& rng, const Fitness& fitness, double accept_below) {
  const std::size_t n = swarm.size();
  if (i >= n) throw std::out_of_range("reinit_particle: particle index out of range");
  Point2 pos;
  if (n < 3) {
    pos = {rng.uniform(swarm.bounds.lo.x(), swarm.bounds.hi.x()), rng.uniform(swarm.bounds.lo.y(), swarm.bounds.hi.y())};
  } else {
    auto accepted = [&](std::size_t j) { return swarm.particles[j].pbest_value < accept_below; };
    std::optional<std::size_t> left, right;
    for (std::size_t s = 1; s < n && !left; ++s)
      if (const std::size_t j = (i + n - s) % n; accepted(j)) left = j;
    for (std::size_t s = 1; s < n && !right; ++s)
      if (const std::size_t j = (i + s) % n; accepted(j) && j != left) right = j;
    if (!left || !right) {
      std::vector<std::size_t> order;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) order.push_back(j);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return swarm.particles[a].pbest_value < swarm.particles[b].pbest_value;
      });
      left = order[0];
      right = order[1];
    }
    const Point2& a = swarm.particles[*left].pbest;
    const Point2& b = swarm.particles[*right].pbest;
    pos = {rng.uniform(std::min(a.x(), b.x()), std::max(a.x(), b.x())),
           rng.uniform(std::min(a.y(), b.y()), std::max(a.y(), b.y()))};
  }
  pos = swarm.bounds.clamp(pos);
  Particle& p = swarm.particles[i];
  p.position = pos;
  p.velocity = Point2::Zero();
  p.pbest = pos;
  p.value = fitness(pos);
  p.pbest_value = p.value;
  update_gbest(swarm);
  return pos;
}

BoundingBox bounding_box(std::span<const Point2> accepted, int p, const std::optional<Rect>& clip) {
  if (accepted.empty()) throw TrackerError("bounding_box needs at least one accepted particle");
  const std::size_t n = accepted.size();
  const std::size_t take = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(p, 1)), 1, n);

  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = accepted[i].x();
    ys[i] = accepted[i].y();
  }
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  auto mean = [take](auto first) { return std::accumulate(first, first + take, 0.0) / double(take); };

  BoundingBox box;
  box.q = {std::ceil(mean(xs.begin())), std::ceil(mean(ys.begin()))};
  box.breadth = std::max(0.0, mean(xs.end() - take) - box.q.x());
  box.length = std::max(0.0, mean(ys.end() - take) - box.q.y());

  if (clip) {
    const double x0 = std::clamp(box.q.x(), clip->x0, clip->x1);
    const double y0 = std::clamp(box.q.y(), clip->y0, clip->y1);
    const double x1 = std::clamp(box.q.x() + box.breadth, clip->x0, clip->x1);
    const double y1 = std::clamp(box.q.y() + box.length, clip->y0, clip->y1);
    box.q = {x0, y0};
    box.breadth = x1 - x0;
    box.length = y1 - y0;
  }
  return box;
}

std::string to_string(BackgroundMode mode) {
  return mode == BackgroundMode::static_background ? "static" : "variable";
}

BackgroundMode parse_background(const std::string& name) {
  if (name == "static") return BackgroundMode::static_background;
  if (name == "variable" || name == "dynamic") return BackgroundMode::variable_background;
  throw TrackerError("unknown background mode '" + name + "' (expected static or variable)");
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::qpso ? "qpso" : "pso"; }

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "qpso") return OptimizerKind::qpso;
  if (name == "pso") return OptimizerKind::pso;
  throw TrackerError("unknown optimizer '" + name + "' (expected qpso or pso)");
}

int TrackerConfig::effective_swarm_size() const {
  if (swarm_size > 0) return swarm_size;
  return background == BackgroundMode::static_background ? 7 : 10;
}

int TrackerConfig::effective_group_size() const {
  if (group_size > 0) return group_size;
  return background == BackgroundMode::static_background ? 5 : 10;
}

void TrackerConfig::validate() const {
  if (effective_swarm_size() < 2) throw TrackerError("swarm size must be at least 2");
  if (effective_group_size() < 2) throw TrackerError("group size must be at least 2");
  if (!(fitness_epsilon > 0)) throw TrackerError("fitness epsilon must be positive");
  if (bbox_p < 1) throw TrackerError("bbox p must be at least 1");
  if (max_iters < 1) throw TrackerError("max iterations per frame must be at least 1");
  if (reinit_patience < 1) throw TrackerError("reinit patience must be at least 1");
  if (min_dominant_points < 2) throw TrackerError("min dominant points must be at least 2");
  if (!(init_margin > 0)) throw TrackerError("init margin must be positive");
  if (!(consensus_tolerance >= 0)) throw TrackerError("consensus tolerance must be non-negative");
  if (optimizer == OptimizerKind::qpso)
    QpsoParams{beta_start, beta_end, max_iters, fitness_epsilon, seed}.validate();
  else
    PsoParams{pso_w, pso_c1, pso_c2, pso_v_max, max_iters, fitness_epsilon, seed}.validate();
}

std::size_t TrackerState::alive_swarms() const {
  return static_cast<std::size_t>(std::count_if(swarms.begin(), swarms.end(), [](const SwarmSlot& s) { return s.alive; }));
}

std::size_t TrackerState::swarm_floor() const {
  return static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(initial_segments)));
}

Propagation propagate_points(std::span<const FlowResult> flow, bool consensus, double tolerance,
                             const Point2& previous) {
  Propagation out;
  out.moves.resize(flow.size());
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };

  std::size_t best_size = 0;
  Point2 best_ref = Point2::Zero();
  double best_gap = std::numeric_limits<double>::infinity();
  if (consensus) {
    for (std::size_t i = 0; i < flow.size(); ++i) {
      if (!flow[i].tracked) continue;
      std::vector<double> dx, dy;
      for (const auto& f : flow)
        if (f.tracked && (f.displacement - flow[i].displacement).norm() <= tolerance) {
          dx.push_back(f.displacement.x());
          dy.push_back(f.displacement.y());
        }
      const Point2 ref(median(dx), median(dy));
      const double gap = (ref - previous).norm();
      if (dx.size() > best_size || (dx.size() == best_size && gap < best_gap)) {
        best_size = dx.size();
        best_ref = ref;
        best_gap = gap;
      }
    }
  }
  if (best_size < 2) {
    for (std::size_t i = 0; i < flow.size(); ++i)
      if (flow[i].tracked) out.moves[i] = flow[i].displacement;
    return out;
  }
  out.consensus = best_ref;
  for (std::size_t i = 0; i < flow.size(); ++i) {
    if (flow[i].tracked && (flow[i].displacement - best_ref).norm() <= tolerance) {
      out.moves[i] = flow[i].displacement;
    } else {
      out.moves[i] = best_ref;
      ++out.coasted;
    }
  }
  return out;
}

Bounds search_bounds(const CurvatureSegment& seg, SearchRegion region, double margin, int width, int height) {
  const Bounds image = Bounds::of_image(width, height);
  if (region == SearchRegion::image) return image;
  const Point2 lo = (seg.d1.cwiseMin(seg.d2).array() - margin).matrix();
  const Point2 hi = (seg.d1.cwiseMax(seg.d2).array() + margin).matrix();
  return {image.clamp(lo), image.clamp(hi)};
}

DominantPointSet tracking_dominant_points(const BinaryMask& mask, int group_size, int min_points) {
  const BreakpointSet breaks = eliminate_linear(trace_boundary(mask));
  DominantPointSet best;
  for (int g = group_size; g >= 2; --g) {
    DominantPointSet d = select_dominant(breaks, static_cast<std::size_t>(g));
    if (static_cast<int>(d.size()) >= min_points) return d;
    if (d.size() > best.size()) best = std::move(d);
  }
  if (breaks.size() <= best.size()) return best;
  DominantPointSet all;
  const std::span<const Point2> pts(breaks.points);
  for (std::size_t i = 0; i < breaks.size(); ++i) {
    all.points.push_back(breaks.points[i]);
    all.scores.push_back(support_score(pts, i, breaks.size()).value_or(-1.0));
    all.breakpoint_indices.push_back(i);
    all.trace_indices.push_back(breaks.trace_indices[i]);
  }
  return all;
}

BinaryMask segment_region(const GrayImage& frame, const Rect& region) {
  const int x0 = std::max(0, static_cast<int>(std::floor(region.x0)));
  const int y0 = std::max(0, static_cast<int>(std::floor(region.y0)));
  const int x1 = std::min(frame.width() - 1, static_cast<int>(std::ceil(region.x1)));
  const int y1 = std::min(frame.height() - 1, static_cast<int>(std::ceil(region.y1)));
  if (x1 - x0 < 2 || y1 - y0 < 2) throw TrackerError("re-detection region is too small");

  std::array<double, 256> hist{};
  double border_sum = 0;
  int border_count = 0;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double v = frame(x, y);
      hist[static_cast<std::size_t>(std::lround(v * 255.0))] += 1;
      if (x == x0 || x == x1 || y == y0 || y == y1) {
        border_sum += v;
        ++border_count;
      }
    }
  }
  // Otsu: maximize between-class variance over 8-bit thresholds.
  const double total = std::accumulate(hist.begin(), hist.end(), 0.0);
  double sum_all = 0;
  for (int i = 0; i < 256; ++i) sum_all += i * hist[i];
  double w0 = 0, sum0 = 0, best_var = -1;
  int threshold = 0;
  for (int t = 0; t < 256; ++t) {
    w0 += hist[t];
    sum0 += t * hist[t];
    const double w1 = total - w0;
    if (w0 == 0 || w1 == 0) continue;
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    const double var = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (var > best_var) {
      best_var = var;
      threshold = t;
    }
  }
  if (!(best_var > 0)) throw TrackerError("re-detection region has no contrast");
  double lo_sum = 0, hi_sum = 0, lo_n = 0, hi_n = 0;
  for (int i = 0; i < 256; ++i) (i <= threshold ? lo_sum : hi_sum) += i * hist[i], (i <= threshold ? lo_n : hi_n) += hist[i];
  const double border_mean = 255.0 * border_sum / std::max(1, border_count);
  const double lo_mean = lo_n > 0 ? lo_sum / lo_n : 0;
  const double hi_mean = hi_n > 0 ? hi_sum / hi_n : 255;
  const bool bright_object = std::abs(hi_mean - border_mean) >= std::abs(lo_mean - border_mean);

  BinaryMask mask(frame.width(), frame.height(), 0);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const int level = static_cast<int>(std::lround(frame(x, y) * 255.0));
      mask(x, y) = (bright_object ? level > threshold : level <= threshold) ? 1 : 0;
    }
  return largest_component(mask);
}

Tracker::Tracker(TrackerConfig config, Executor* executor) : config_(std::move(config)), executor_(executor) {
  config_.validate();
}

OptimizerParams Tracker::optimizer_params(int slot_id) const {
  const std::uint64_t seed = splitmix64(config_.seed ^ splitmix64(static_cast<std::uint64_t>(slot_id)));
  if (config_.optimizer == OptimizerKind::qpso)
    return QpsoParams{config_.beta_start, config_.beta_end, config_.max_iters, config_.fitness_epsilon, seed};
  return PsoParams{config_.pso_w,     config_.pso_c1,          config_.pso_c2, config_.pso_v_max,
                   config_.max_iters, config_.fitness_epsilon, seed};
}

void Tracker::rebuild(const GrayImage& frame, const BinaryMask& mask) {
  if (frame.width() != mask.width() || frame.height() != mask.height()) throw TrackerError("mask and frame differ in size");
  const DominantPointSet dps =
      tracking_dominant_points(mask, config_.effective_group_size(), config_.min_dominant_points);
  if (dps.size() < 2) throw TrackerError("fewer than two dominant points on the object");
  const Pairing pairing = pair_segments(dps.points, config_.pairing);
  if (pairing.segments.empty()) throw TrackerError("no non-degenerate curvature segment");

  state_.points = dps.points;
  state_.point_alive.assign(dps.size(), true);
  state_.point_scores = dps.scores;
  state_.swarms.clear();
  for (std::size_t s = 0; s < pairing.segments.size(); ++s) {
    SwarmSlot slot;
    slot.id = static_cast<int>(s);
    slot.segment = pairing.segments[s];
    state_.swarms.push_back(std::move(slot));
  }
  state_.initial_segments = state_.swarms.size();
}

void Tracker::converge_swarm(SwarmSlot& slot, bool reseed) {
  const Fitness fitness = curvature_fitness(slot.segment);
  const auto size = static_cast<std::size_t>(config_.effective_swarm_size());
  const Bounds bounds =
      search_bounds(slot.segment, config_.search_region, config_.init_margin, state_.width, state_.height);
  const OptimizerParams params = optimizer_params(slot.id);
  const std::uint64_t slot_seed = std::visit([](const auto& p) { return p.seed; }, params);
  const double eps = config_.fitness_epsilon;

  if (reseed || slot.swarm.size() != size) {
    if (config_.search_region == SearchRegion::image) {
      slot.swarm = init_swarm(size, bounds, slot_seed);
    } else {
      slot.swarm = Swarm{};
      slot.swarm.bounds = bounds;
      slot.swarm.particles.resize(size);
      RandomStream placement = RandomStream(slot_seed).split(kPlacementStream);
      const Point2 along = slot.segment.d2 - slot.segment.d1;
      const Point2 normal = Point2(-along.y(), along.x()).normalized();
      for (auto& p : slot.swarm.particles) {
        const double t = placement.uniform();
        const double s = placement.uniform(-config_.init_margin, config_.init_margin);
        p.position = bounds.clamp(slot.segment.d1 + t * along + s * normal);
      }
    }
    evaluate_swarm(slot.swarm, fitness);
    slot.rng = SwarmRng(slot_seed, size);
  } else {
    // warm start: same particles, scored against the moved segment
    slot.swarm.bounds = bounds;
    for (auto& p : slot.swarm.particles) {
      p.position = bounds.clamp(p.position);
      p.pbest = bounds.clamp(p.pbest);
      p.value = fitness(p.position);
      p.pbest_value = fitness(p.pbest);
    }
    update_gbest(slot.swarm);
  }

  std::vector<int> misses(size, 0);
  RandomStream reinit = RandomStream(slot_seed).split(kReinitStream);
  slot.trace.clear();
  RunHooks hooks;
  // a swarm is done once every particle sits inside the acceptance slab
  hooks.converged = [eps](const Swarm& swarm) {
    return std::all_of(swarm.particles.begin(), swarm.particles.end(), [eps](const Particle& p) { return p.value < eps; });
  };
  hooks.after_step = [&](Swarm& swarm, int iteration) {
    for (std::size_t i = 0; i < swarm.size(); ++i) {
      if (swarm.particles[i].value < eps) {
        misses[i] = 0;
      } else if (++misses[i] > config_.reinit_patience) {
        reinit_particle(swarm, i, reinit, fitness, eps);
        misses[i] = 0;
      }
    }
    slot.trace.push_back({state_.frame, iteration, swarm.gbest_value, swarm.gbest});
  };
  const RunResult run = run_to_convergence(slot.swarm, fitness, params, slot.rng, nullptr, hooks);
  slot.last_iterations = run.iterations;
  slot.last_converged = run.converged;
}

FrameReport Tracker::converge_all() {
  std::vector<std::size_t> alive;
  for (std::size_t s = 0; s < state_.swarms.size(); ++s)
    if (state_.swarms[s].alive) alive.push_back(s);

  const bool reseed = !config_.warm_start;
  auto body = [&](std::size_t k) { converge_swarm(state_.swarms[alive[k]], reseed); };
  if (config_.parallel && executor_)
    executor_->for_each(alive.size(), body);
  else
    for (std::size_t k = 0; k < alive.size(); ++k) body(k);

  FrameReport report;
  report.frame = state_.frame;
  report.alive_swarms = alive.size();
  report.converged = true;
  std::vector<Point2> accepted;
  for (std::size_t s : alive) {
    const SwarmSlot& slot = state_.swarms[s];
    report.total_iterations += slot.last_iterations;
    report.max_iterations = std::max(report.max_iterations, slot.last_iterations);
    report.converged = report.converged && slot.last_converged;
    for (const auto& p : slot.swarm.particles)
      if (p.value < config_.fitness_epsilon) accepted.push_back(p.position);
    if (observer_)
      for (const auto& rec : slot.trace) observer_(slot.id, rec);
  }
  report.accepted_particles = accepted.size();
  if (accepted.empty()) {
    report.box_carried = true;
  } else {
    state_.box = bounding_box(accepted, config_.bbox_p, image_rect(state_.width, state_.height));
  }
  report.box = state_.box;
  return report;
}

FrameReport Tracker::init(const GrayImage& frame, const BinaryMask& mask) {
  state_ = TrackerState{};
  state_.width = frame.width();
  state_.height = frame.height();
  state_.frame = 0;
  rebuild(frame, mask);
  FrameReport report = converge_all();
  report.redetected = true;
  return report;
}

FrameReport Tracker::advance(const GrayImage& prev, const GrayImage& next) {
  if (state_.swarms.empty() && state_.points.empty()) throw TrackerError("tracker is not initialized");
  if (!prev.same_size(next) || next.width() != state_.width || next.height() != state_.height)
    throw TrackerError("frame size differs from the tracked sequence");
  ++state_.frame;

  std::vector<std::size_t> live;
  std::vector<Point2> query;
  for (std::size_t i = 0; i < state_.points.size(); ++i)
    if (state_.point_alive[i]) {
      live.push_back(i);
      query.push_back(state_.points[i]);
    }
  const std::vector<FlowResult> flow = track_points(prev, next, query, config_.flow, config_.parallel ? executor_ : nullptr);
  const Propagation moves =
      propagate_points(flow, config_.flow_consensus, config_.consensus_tolerance, state_.last_flow);
  if (moves.consensus) state_.last_flow = *moves.consensus;
  std::vector<FlowResult> flow_all(state_.points.size());
  for (std::size_t k = 0; k < live.size(); ++k) {
    const std::size_t i = live[k];
    flow_all[i] = flow[k];
    if (moves.moves[k])
      state_.points[i] += *moves.moves[k];
    else
      state_.point_alive[i] = false;
  }
  for (auto& slot : state_.swarms) {
    if (!slot.alive) continue;
    if (!state_.point_alive[slot.segment.first] || !state_.point_alive[slot.segment.second]) {
      slot.alive = false;
      continue;
    }
    slot.segment.d1 = state_.points[slot.segment.first];
    slot.segment.d2 = state_.points[slot.segment.second];
    if (!(segment_length(slot.segment) > 1e-9)) slot.alive = false;
  }

  bool redetected = false;
  if (state_.alive_swarms() < std::max<std::size_t>(1, state_.swarm_floor())) {
    const BoundingBox last = state_.box;
    const double grow_x = 0.1 * std::max(last.breadth, 1.0) + config_.flow.window;
    const double grow_y = 0.1 * std::max(last.length, 1.0) + config_.flow.window;
    const Rect region{last.q.x() - grow_x, last.q.y() - grow_y, last.q.x() + last.breadth + grow_x,
                      last.q.y() + last.length + grow_y};
    try {
      rebuild(next, segment_region(next, region));
    } catch (const std::exception& e) {
      throw TrackingLost("tracking lost at frame " + std::to_string(state_.frame) + ": " + e.what(), last);
    }
    redetected = true;
  }

  FrameReport report = converge_all();
  report.redetected = redetected;
  report.flow = std::move(flow_all);
  report.coasted_points = moves.coasted;
  return report;
}

}  // namespace qtrack
