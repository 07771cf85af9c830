// Boundary chain codes, linear-point elimination and k-cosine dominant point
// selection.
#pragma once

#include "qtrack/image.hpp"

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qtrack {

class ContourError : public std::runtime_error {
 public:
  enum class Kind { empty_mask, multiple_components, too_small, coincident_points, empty_breakpoints };

  ContourError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Freeman directions with y pointing down: 0 = E, 1 = NE, 2 = N, ... 7 = SE.
using FreemanCode = int;

Eigen::Vector2i freeman_offset(FreemanCode code);
/// Code of the unit move `delta`; throws std::invalid_argument unless delta is 8-adjacent.
FreemanCode freeman_code(const Eigen::Vector2i& delta);

/// Closed boundary walk. codes[i] moves points[i] to points[(i+1) % n].
struct ChainTrace {
  std::vector<Eigen::Vector2i> points;
  std::vector<FreemanCode> codes;

  std::size_t size() const { return points.size(); }
  /// Code entering points[i].
  FreemanCode incoming(std::size_t i) const { return codes[(i + codes.size() - 1) % codes.size()]; }
};

struct BreakpointSet {
  std::vector<Point2> points;
  /// Index of each breakpoint in the source trace.
  std::vector<std::size_t> trace_indices;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

struct DominantPointSet {
  std::vector<Point2> points;
  std::vector<double> scores;
  /// Index into the breakpoint set each dominant point came from.
  std::vector<std::size_t> breakpoint_indices;
  /// Index into the originating trace.
  std::vector<std::size_t> trace_indices;

  std::size_t size() const { return points.size(); }
};

/// Number of 8-connected foreground components.
int count_components(const BinaryMask& mask);

/// Keeps only the largest 8-connected foreground component (lowest scan
/// order wins ties). Returns an all-background mask when there is none.
BinaryMask largest_component(const BinaryMask& mask);

/// Outer boundary by Moore-neighbour tracing with Jacob's stopping criterion.
/// Counterclockwise on screen, starting at the topmost-then-leftmost pixel.
ChainTrace trace_boundary(const BinaryMask& mask);

/// Points whose incoming and outgoing codes differ.
BreakpointSet eliminate_linear(const ChainTrace& trace);

/// Cosine of the angle between the arms p[i-k] - p[i] and p[i+k] - p[i],
/// indices taken cyclically.
template <typename Scalar>
Scalar k_cosine(std::span<const Point2T<Scalar>> points, std::size_t i, std::size_t k) {
  const std::size_t n = points.size();
  if (n == 0 || i >= n) throw std::out_of_range("k_cosine: index outside the point sequence");
  if (k < 1) throw std::invalid_argument("k_cosine: support length must be at least 1");
  const Point2T<Scalar>& p = points[i];
  const Point2T<Scalar> a = points[(i + n - k % n) % n] - p;
  const Point2T<Scalar> b = points[(i + k) % n] - p;
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (na == Scalar(0) || nb == Scalar(0))
    throw ContourError(ContourError::Kind::coincident_points,
                       "k_cosine: arm of zero length at index " + std::to_string(i) + ", k=" + std::to_string(k));
  return std::clamp(a.dot(b) / (na * nb), Scalar(-1), Scalar(1));
}

inline double k_cosine(std::span<const Point2> points, std::size_t i, std::size_t k) {
  return k_cosine<double>(points, i, k);
}

/// Largest support length whose arms stay distinct from the centre and from
/// each other on a closed sequence of n points, capped by group_size - 1.
std::size_t max_support(std::size_t n, std::size_t group_size);

/// Best k-cosine of breakpoint i over k = 1..max_support, or nullopt when no
/// support length gives two non-degenerate arms.
std::optional<double> support_score(std::span<const Point2> points, std::size_t i, std::size_t group_size);

/// Splits the breakpoints into consecutive groups of group_size (the last
/// group is used only if it has at least two members) and keeps the member
/// with the largest score in each, lower index on ties.
DominantPointSet select_dominant(const BreakpointSet& breaks, std::size_t group_size);

/// trace -> breakpoints -> dominant points.
DominantPointSet detect_dominant_points(const BinaryMask& mask, std::size_t group_size);

}  // namespace qtrack
