// Single-level iterative Lucas-Kanade point tracking.
#pragma once

#include "qtrack/image.hpp"

#include <span>
#include <vector>

namespace qtrack {

class Executor;

class FlowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FlowResult {
  Point2 displacement = Point2::Zero();
  bool tracked = false;
  /// Mean squared brightness error over the window at the final displacement.
  double residual = 0;
  /// Largest over smallest eigenvalue of the structure tensor.
  double condition = 0;
  int iterations = 0;
};

struct LkOptions {
  int window = 15;
  int max_iters = 10;
  /// Gate on the smaller eigenvalue of the window-averaged structure tensor
  /// (intensity^2 / px^2).
  double min_eigenvalue = 1e-4;
  /// Refinement stops once an update is shorter than this (px).
  double min_step = 0.01;
};

/// Window-averaged A^T A at p, gradients sampled bilinearly.
Eigen::Matrix2d structure_tensor(const Gradients& grad, const Point2& p, int window);

/// tracked is false when the tensor fails the eigenvalue gate, the window
/// leaves the frame, or either displacement component exceeds half the window.
/// Throws FlowError when the window at p does not fit inside the frame.
FlowResult lk_track_point(const GrayImage& prev, const GrayImage& next, const Point2& p, const LkOptions& options = {});
FlowResult lk_track_point(const GrayImage& prev, const GrayImage& next, const Point2& p, int window, int max_iters);

/// Same, with the gradients of prev precomputed.
FlowResult lk_track_point(const Gradients& prev_grad, const GrayImage& prev, const GrayImage& next, const Point2& p,
                          const LkOptions& options);

/// Element-wise lk_track_point. Points whose window leaves the frame come
/// back with tracked = false rather than an exception.
std::vector<FlowResult> track_points(const GrayImage& prev, const GrayImage& next, std::span<const Point2> points,
                                     const LkOptions& options = {}, Executor* executor = nullptr);

}  // namespace qtrack
