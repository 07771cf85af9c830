// Multi-swarm object tracking: dominant points are paired into line
// segments, each segment gets its own swarm minimizing the perpendicular
// distance to the segment's line, dominant points move between frames by
// Lucas-Kanade flow, and the accepted particles of all swarms define the
// bounding box.
#pragma once

#include "qtrack/contour.hpp"
#include "qtrack/optical_flow.hpp"
#include "qtrack/swarm.hpp"

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qtrack {

class TrackerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CurvatureSegment {
  Point2 d1 = Point2::Zero();
  Point2 d2 = Point2::Zero();
  /// Indices of the endpoints in the dominant point list they came from.
  std::size_t first = 0;
  std::size_t second = 0;
};

template <typename Scalar>
Scalar segment_length(const Point2T<Scalar>& d1, const Point2T<Scalar>& d2) {
  return std::sqrt((d2.x() - d1.x()) * (d2.x() - d1.x()) + (d2.y() - d1.y()) * (d2.y() - d1.y()));
}

/// Distance from p to the infinite line through d1 and d2: twice the area of
/// the triangle (d1, d2, p) over the base length.
template <typename Scalar>
Scalar perp_dist(const Point2T<Scalar>& d1, const Point2T<Scalar>& d2, const Point2T<Scalar>& p) {
  const Scalar len = segment_length(d1, d2);
  if (!(len > Scalar(0))) throw TrackerError("perp_dist: zero-length segment");
  const Scalar twice_area =
      (d2.y() - d1.y()) * p.x() - (d2.x() - d1.x()) * p.y() + d2.x() * d1.y() - d2.y() * d1.x();
  return std::abs(twice_area) / len;
}

inline double segment_length(const CurvatureSegment& seg) { return segment_length<double>(seg.d1, seg.d2); }
inline double perp_dist(const CurvatureSegment& seg, const Point2& p) { return perp_dist<double>(seg.d1, seg.d2, p); }

/// p -> perp_dist(seg, p). Throws TrackerError for a zero-length segment.
Fitness curvature_fitness(const CurvatureSegment& seg);

enum class PairingMode {
  /// (p0,p1), (p2,p3), ...: D/2 segments.
  disjoint,
  /// (p0,p1), (p1,p2), ..., (p[n-1],p0): the closed polygon through the points.
  closed_chain,
};

std::string to_string(PairingMode mode);
PairingMode parse_pairing(const std::string& name);

struct Pairing {
  std::vector<CurvatureSegment> segments;
  /// Disjoint pairing of an odd count leaves the last point without a partner.
  bool unpaired_last = false;
  /// Pairs skipped because both endpoints coincide.
  std::size_t degenerate_dropped = 0;
};

/// Throws TrackerError with fewer than two points.
Pairing pair_segments(std::span<const Point2> points, PairingMode mode = PairingMode::disjoint);

/// Moves particle i between the pbest positions of its nearest accepted
/// neighbours (scanning i-1, i-2, ... and i+1, i+2, ... cyclically; a
/// neighbour is accepted when pbest_value < accept_below). Falls back to the
/// two lowest-pbest other particles when fewer than two are accepted, and to
/// a uniform draw over the bounds for swarms smaller than three. The particle's
/// pbest is reset to the new position and gbest refreshed. Returns the new position.
Point2 reinit_particle(Swarm& swarm, std::size_t i, RandomStream& rng, const Fitness& fitness, double accept_below);

struct BoundingBox {
  /// Top-left anchor.
  Point2 q = Point2::Zero();
  /// y-extent.
  double length = 0;
  /// x-extent.
  double breadth = 0;

  Point2 ql() const { return {q.x(), q.y() + length}; }
  Point2 qb() const { return {q.x() + breadth, q.y()}; }
  Point2 qlb() const { return {q.x() + breadth, q.y() + length}; }
  Rect rect() const { return {q.x(), q.y(), q.x() + breadth, q.y() + length}; }
};

/// Anchor = ceil of the mean of the p smallest x and of the p smallest y;
/// breadth and length reach the means of the p largest x and y. p is clamped
/// to [1, n]. With `clip`, the box is clamped into that rectangle.
BoundingBox bounding_box(std::span<const Point2> accepted, int p, const std::optional<Rect>& clip = std::nullopt);

enum class BackgroundMode { static_background, variable_background };
enum class OptimizerKind { qpso, pso };

std::string to_string(BackgroundMode mode);
BackgroundMode parse_background(const std::string& name);
std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(const std::string& name);

/// Where a swarm searches.
enum class SearchRegion {
  /// Particles start uniform in the band of half-width init_margin around the
  /// segment and are clamped to the segment's bounding rectangle grown by
  /// init_margin.
  segment,
  /// Particles start uniform over the image and are clamped to it.
  image,
};

struct TrackerConfig {
  BackgroundMode background = BackgroundMode::static_background;
  OptimizerKind optimizer = OptimizerKind::qpso;
  /// 0 selects the background default (7 static, 10 variable).
  int swarm_size = 0;
  /// 0 selects the background default (5 static, 10 variable).
  int group_size = 0;
  double fitness_epsilon = 2.0;
  int max_iters = 100;
  int reinit_patience = 10;
  int bbox_p = 10;
  std::uint64_t seed = 1;

  double beta_start = 1.0;
  double beta_end = 0.5;
  double pso_w = 0.7;
  double pso_c1 = 1.5;
  double pso_c2 = 1.5;
  double pso_v_max = 10.0;

  PairingMode pairing = PairingMode::closed_chain;
  /// Fewer dominant points than this makes detection retry with smaller groups.
  int min_dominant_points = 4;
  SearchRegion search_region = SearchRegion::segment;
  double init_margin = 6.0;
  /// Move points whose flow failed or disagrees with the consensus flow by
  /// the consensus instead of dropping them.
  bool flow_consensus = true;
  /// Flows closer than this (px) agree.
  double consensus_tolerance = 0.5;
  /// Keep particle positions between frames instead of reseeding.
  bool warm_start = false;
  bool parallel = false;
  LkOptions flow;

  int effective_swarm_size() const;
  int effective_group_size() const;
  void validate() const;
};

struct IterationRecord {
  int frame = 0;
  int iteration = 0;
  double gbest_value = 0;
  Point2 gbest = Point2::Zero();
};

struct SwarmSlot {
  int id = 0;
  CurvatureSegment segment;
  Swarm swarm;
  SwarmRng rng;
  bool alive = true;
  int last_iterations = 0;
  bool last_converged = false;
  std::vector<IterationRecord> trace;
};

struct TrackerState {
  std::vector<Point2> points;
  std::vector<bool> point_alive;
  /// k-cosine score of each point at its last detection.
  std::vector<double> point_scores;
  /// Consensus flow of the last frame.
  Point2 last_flow = Point2::Zero();
  std::vector<SwarmSlot> swarms;
  /// Segment count C at the last (re)detection.
  std::size_t initial_segments = 0;
  BoundingBox box;
  int frame = 0;
  int width = 0;
  int height = 0;

  std::size_t alive_swarms() const;
  /// ceil(0.1 * C).
  std::size_t swarm_floor() const;
};

struct FrameReport {
  int frame = 0;
  BoundingBox box;
  std::size_t alive_swarms = 0;
  /// Sum over swarms of iterations used this frame.
  int total_iterations = 0;
  /// Largest per-swarm iteration count this frame.
  int max_iterations = 0;
  std::size_t accepted_particles = 0;
  /// Every alive swarm had all particles accepted within max_iters.
  bool converged = false;
  bool redetected = false;
  /// No particle was accepted; the previous box was carried over.
  bool box_carried = false;
  std::vector<FlowResult> flow;
  std::size_t coasted_points = 0;
};

/// Raised when every swarm is lost and re-detection fails.
class TrackingLost : public TrackerError {
 public:
  TrackingLost(const std::string& what, BoundingBox last) : TrackerError(what), last_box_(last) {}
  const BoundingBox& last_box() const { return last_box_; }

 private:
  BoundingBox last_box_;
};

/// Receives every swarm's per-iteration gbest, in swarm order after each frame.
using IterationObserver = std::function<void(int swarm_id, const IterationRecord&)>;

struct Propagation {
  /// Displacement to apply to each point; nullopt drops the point.
  std::vector<std::optional<Point2>> moves;
  /// Points moved by the consensus flow rather than their own.
  std::size_t coasted = 0;
  /// The consensus flow, when one was found.
  std::optional<Point2> consensus;
};

/// Without consensus, tracked points move by their flow and the rest are
/// dropped. With consensus, the reference flow is the component-wise median
/// of the largest group of tracked flows lying within `tolerance` of one
/// flow of the group (ties go to the group closest to `previous`, then to
/// the lower index). Given a group of at least two, every point moves by its
/// own flow if that is within `tolerance` of the reference, else by the
/// reference. Otherwise the non-consensus rule applies.
Propagation propagate_points(std::span<const FlowResult> flow, bool consensus, double tolerance,
                             const Point2& previous = Point2::Zero());

/// Search rectangle of a swarm bound to `seg` in a width x height image.
Bounds search_bounds(const CurvatureSegment& seg, SearchRegion region, double margin, int width, int height);

/// Dominant points for tracking: select_dominant with the configured group,
/// retrying with smaller groups, then using every breakpoint, until at
/// least min_points remain (or nothing smaller is possible).
DominantPointSet tracking_dominant_points(const BinaryMask& mask, int group_size, int min_points);

/// Otsu threshold of the pixels inside `region`, foreground being the class
/// that differs most from the region's border. The largest component is kept.
BinaryMask segment_region(const GrayImage& frame, const Rect& region);

class Tracker {
 public:
  explicit Tracker(TrackerConfig config, Executor* executor = nullptr);

  const TrackerConfig& config() const { return config_; }
  const TrackerState& state() const { return state_; }
  void set_observer(IterationObserver observer) { observer_ = std::move(observer); }

  /// Frame 0: detect dominant points on `mask`, bind swarms, converge, box.
  FrameReport init(const GrayImage& frame, const BinaryMask& mask);

  /// Flow, optional re-detection, per-swarm convergence and the box for `next`.
  /// Throws TrackingLost with the last good box.
  FrameReport advance(const GrayImage& prev, const GrayImage& next);

 private:
  void rebuild(const GrayImage& frame, const BinaryMask& mask);
  FrameReport converge_all();
  void converge_swarm(SwarmSlot& slot, bool reseed);
  /// Stream keys depend on (seed, swarm id) only, so a frame whose segments
  /// are a translate of the last one gets a translated swarm.
  OptimizerParams optimizer_params(int slot_id) const;

  TrackerConfig config_;
  Executor* executor_;
  TrackerState state_;
  IterationObserver observer_;
};

}  // namespace qtrack
