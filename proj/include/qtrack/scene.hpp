// Synthetic scenes with exact ground truth: a single textured shape moving
// along a linear trajectory, optionally over a panning background and behind
// a temporary occluding bar.
#pragma once

#include "qtrack/image.hpp"

#include <cstdint>
#include <string>

namespace qtrack {

enum class ShapeKind { square, disk, l_shape };

std::string to_string(ShapeKind kind);
ShapeKind parse_shape(const std::string& name);

struct SceneSpec {
  int width = 160;
  int height = 100;
  ShapeKind shape = ShapeKind::square;
  /// Side length (square, L-shape bounding square) or diameter (disk).
  int size = 20;
  /// Top-left of the shape's bounding square at frame 0.
  Point2 origin{16.0, 40.0};
  /// Shape displacement per frame.
  Point2 velocity{2.0, 0.0};
  /// Background texture displacement per frame (camera pan); zero for a static background.
  Point2 pan{0.0, 0.0};
  double foreground = 0.8;
  double background = 0.2;
  /// Peak amplitude of the smooth texture added to both object and background.
  double noise = 0.05;
  /// Texture lattice spacing in pixels.
  double texture_scale = 4.0;
  int frames = 50;
  std::uint64_t seed = 1;

  // Vertical occluding bar, fixed in the canvas, visible for occluder_frames
  // frames starting at occluder_start. Width 0 disables it.
  int occluder_x = 0;
  int occluder_width = 0;
  int occluder_start = 0;
  int occluder_frames = 0;
  double occluder_intensity = 0.5;

  /// Throws ImageError if the shape leaves the canvas on any frame.
  void validate() const;
};

struct PixelBox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  Rect rect() const { return {double(x0), double(y0), double(x1), double(y1)}; }
  bool operator==(const PixelBox&) const = default;
};

struct RenderedFrame {
  GrayImage image;
  PixelBox box;
  BinaryMask mask;
};

RenderedFrame render_scene(const SceneSpec& spec, int frame_index);

}  // namespace qtrack
