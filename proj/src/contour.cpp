#include "qtrack/contour.hpp"

#include <array>
#include <queue>

namespace qtrack {

namespace {

constexpr std::array<std::array<int, 2>, 8> kOffsets{{{1, 0}, {1, -1}, {0, -1}, {-1, -1}, {-1, 0}, {-1, 1}, {0, 1}, {1, 1}}};

bool foreground(const BinaryMask& mask, const Eigen::Vector2i& p) {
  return mask.contains(p.x(), p.y()) && mask(p.x(), p.y()) != 0;
}

// Labels 8-connected components; returns per-pixel labels (0 = background)
// and the pixel count of each label (index 0 unused).
std::pair<Image<int>, std::vector<int>> label_components(const BinaryMask& mask) {
  Image<int> labels(mask.width(), mask.height(), 0);
  std::vector<int> sizes{0};
  std::queue<Eigen::Vector2i> queue;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask(x, y) == 0 || labels(x, y) != 0) continue;
      const int label = static_cast<int>(sizes.size());
      sizes.push_back(0);
      labels(x, y) = label;
      queue.emplace(x, y);
      while (!queue.empty()) {
        const Eigen::Vector2i p = queue.front();
        queue.pop();
        ++sizes[label];
        for (const auto& o : kOffsets) {
          const Eigen::Vector2i q(p.x() + o[0], p.y() + o[1]);
          if (foreground(mask, q) && labels(q.x(), q.y()) == 0) {
            labels(q.x(), q.y()) = label;
            queue.push(q);
          }
        }
      }
    }
  }
  return {std::move(labels), std::move(sizes)};
}

}  // namespace

Eigen::Vector2i freeman_offset(FreemanCode code) {
  const auto& o = kOffsets.at(static_cast<std::size_t>(((code % 8) + 8) % 8));
  return {o[0], o[1]};
}

FreemanCode freeman_code(const Eigen::Vector2i& delta) {
  for (int c = 0; c < 8; ++c)
    if (kOffsets[c][0] == delta.x() && kOffsets[c][1] == delta.y()) return c;
  throw std::invalid_argument("freeman_code: points are not 8-adjacent");
}

int count_components(const BinaryMask& mask) { return static_cast<int>(label_components(mask).second.size()) - 1; }

BinaryMask largest_component(const BinaryMask& mask) {
  const auto [labels, sizes] = label_components(mask);
  BinaryMask out(mask.width(), mask.height(), 0);
  if (sizes.size() < 2) return out;
  int best = 1;
  for (int l = 2; l < static_cast<int>(sizes.size()); ++l)
    if (sizes[l] > sizes[best]) best = l;
  out.pixels() = (labels.pixels() == best).cast<std::uint8_t>();
  return out;
}

ChainTrace trace_boundary(const BinaryMask& mask) {
  const int components = count_components(mask);
  if (components == 0) throw ContourError(ContourError::Kind::empty_mask, "trace_boundary: mask has no foreground");
  if (components > 1)
    throw ContourError(ContourError::Kind::multiple_components,
                       "trace_boundary: mask has " + std::to_string(components) + " components, expected 1");

  Eigen::Vector2i start(-1, -1);
  for (int y = 0; y < mask.height() && start.x() < 0; ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask(x, y) != 0) {
        start = {x, y};
        break;
      }

  // Scanning neighbours in increasing Freeman order from the backtrack walks
  // the boundary counterclockwise on screen. The walk is a deterministic
  // function of (pixel, backtrack direction), so it is complete when the
  // state after the first move recurs.
  ChainTrace trace;
  trace.points.push_back(start);
  Eigen::Vector2i current = start;
  int backtrack = 4;  // west of the topmost-leftmost pixel is background
  Eigen::Vector2i second{};
  int second_backtrack = -1;
  const std::size_t limit = 8 * static_cast<std::size_t>(mask.width()) * mask.height() + 8;
  for (std::size_t step = 0;; ++step) {
    if (step > limit) throw std::logic_error("trace_boundary: walk did not close");
    int dir = -1;
    for (int s = 0; s < 8; ++s) {
      const int d = (backtrack + s) % 8;
      if (foreground(mask, current + freeman_offset(d))) {
        dir = d;
        break;
      }
    }
    if (dir < 0) break;  // isolated pixel
    const Eigen::Vector2i next = current + freeman_offset(dir);
    const int next_backtrack = freeman_code(current + freeman_offset(dir + 7) - next);
    if (second_backtrack >= 0 && current == start && next == second && next_backtrack == second_backtrack) {
      trace.points.pop_back();
      break;
    }
    if (second_backtrack < 0) {
      second = next;
      second_backtrack = next_backtrack;
    }
    trace.points.push_back(next);
    current = next;
    backtrack = next_backtrack;
  }

  if (trace.points.size() < 4)
    throw ContourError(ContourError::Kind::too_small, "trace_boundary: component has fewer than 4 boundary pixels");

  const std::size_t n = trace.points.size();
  trace.codes.resize(n);
  for (std::size_t i = 0; i < n; ++i) trace.codes[i] = freeman_code(trace.points[(i + 1) % n] - trace.points[i]);
  return trace;
}

BreakpointSet eliminate_linear(const ChainTrace& trace) {
  BreakpointSet out;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (trace.incoming(i) == trace.codes[i]) continue;
    out.points.push_back(trace.points[i].cast<double>());
    out.trace_indices.push_back(i);
  }
  return out;
}

std::size_t max_support(std::size_t n, std::size_t group_size) {
  if (group_size < 2 || n < 3) return 0;
  return std::min(group_size - 1, (n - 1) / 2);
}

std::optional<double> support_score(std::span<const Point2> points, std::size_t i, std::size_t group_size) {
  const std::size_t k_max = max_support(points.size(), group_size);
  std::optional<double> best;
  for (std::size_t k = 1; k <= k_max; ++k) {
    try {
      const double c = k_cosine(points, i, k);
      if (!best || c > *best) best = c;
    } catch (const ContourError& e) {
      // a duplicated boundary pixel gives no angle at this k
      if (e.kind() != ContourError::Kind::coincident_points) throw;
    }
  }
  return best;
}

DominantPointSet select_dominant(const BreakpointSet& breaks, std::size_t group_size) {
  if (group_size < 2) throw std::invalid_argument("select_dominant: group size must be at least 2");
  if (breaks.empty()) throw ContourError(ContourError::Kind::empty_breakpoints, "select_dominant: no breakpoints");

  const std::span<const Point2> points(breaks.points);
  const std::size_t n = points.size();
  DominantPointSet out;
  for (std::size_t begin = 0; begin < n; begin += group_size) {
    const std::size_t end = std::min(n, begin + group_size);
    if (end - begin < 2) break;
    std::optional<std::size_t> best;
    double best_score = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto score = support_score(points, i, group_size);
      if (score && (!best || *score > best_score)) {
        best = i;
        best_score = *score;
      }
    }
    if (!best) continue;
    out.points.push_back(points[*best]);
    out.scores.push_back(best_score);
    out.breakpoint_indices.push_back(*best);
    out.trace_indices.push_back(breaks.trace_indices.empty() ? *best : breaks.trace_indices[*best]);
  }
  return out;
}

DominantPointSet detect_dominant_points(const BinaryMask& mask, std::size_t group_size) {
  return select_dominant(eliminate_linear(trace_boundary(mask)), group_size);
}

}  // namespace qtrack
