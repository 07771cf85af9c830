#include "qtrack/scene.hpp"

#include "qtrack/rng.hpp"

#include <cmath>

namespace qtrack {

std::string to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::square: return "square";
    case ShapeKind::disk: return "disk";
    case ShapeKind::l_shape: return "l-shape";
  }
  return "square";
}

ShapeKind parse_shape(const std::string& name) {
  if (name == "square") return ShapeKind::square;
  if (name == "disk") return ShapeKind::disk;
  if (name == "l-shape" || name == "l_shape" || name == "L-shape") return ShapeKind::l_shape;
  throw ImageError("unknown shape '" + name + "' (expected square, disk or l-shape)");
}

namespace {

Point2 shape_origin(const SceneSpec& spec, int frame) { return spec.origin + frame * spec.velocity; }

bool inside_shape(const SceneSpec& spec, double lx, double ly) {
  const double s = spec.size;
  if (lx < 0 || ly < 0 || lx >= s || ly >= s) return false;
  switch (spec.shape) {
    case ShapeKind::square: return true;
    case ShapeKind::disk: {
      const double c = s / 2.0 - 0.5;
      const double r = s / 2.0;
      return (lx - c) * (lx - c) + (ly - c) * (ly - c) <= r * r;
    }
    case ShapeKind::l_shape: return lx < std::floor(s / 2.0) || ly >= std::floor(s / 2.0);
  }
  return false;
}

// Smooth value noise in [-1,1]: hashed lattice values, bilinearly blended.
double texture(std::uint64_t seed, double u, double v, double scale) {
  auto lattice = [seed](std::int64_t i, std::int64_t j) {
    const std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(i) * 0x9E3779B97F4A7C15ull ^
                                                         static_cast<std::uint64_t>(j)));
    return static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
  };
  const double gu = u / scale;
  const double gv = v / scale;
  const double fu = std::floor(gu);
  const double fv = std::floor(gv);
  const auto i = static_cast<std::int64_t>(fu);
  const auto j = static_cast<std::int64_t>(fv);
  // smoothstep weights keep the texture C1 so gradients are continuous
  const double tu = gu - fu, tv = gv - fv;
  const double su = tu * tu * (3 - 2 * tu), sv = tv * tv * (3 - 2 * tv);
  const double top = (1 - su) * lattice(i, j) + su * lattice(i + 1, j);
  const double bottom = (1 - su) * lattice(i, j + 1) + su * lattice(i + 1, j + 1);
  return (1 - sv) * top + sv * bottom;
}

}  // namespace

void SceneSpec::validate() const {
  if (width <= 0 || height <= 0) throw ImageError("scene canvas must be positive");
  if (size < 2) throw ImageError("scene shape size must be at least 2");
  if (frames < 1) throw ImageError("scene needs at least one frame");
  if (!(noise >= 0) || !(texture_scale > 0)) throw ImageError("scene texture parameters out of range");
  for (int f : {0, frames - 1}) {
    const Point2 o = shape_origin(*this, f);
    if (std::ceil(o.x()) < 0 || std::ceil(o.y()) < 0 || o.x() + size > width || o.y() + size > height)
      throw ImageError("scene shape leaves the canvas at frame " + std::to_string(f));
  }
}

RenderedFrame render_scene(const SceneSpec& spec, int frame_index) {
  spec.validate();
  if (frame_index < 0 || frame_index >= spec.frames)
    throw ImageError("frame index " + std::to_string(frame_index) + " out of range [0," +
                     std::to_string(spec.frames) + ")");

  const Point2 o = shape_origin(spec, frame_index);
  const Point2 bg_shift = frame_index * spec.pan;
  const bool occluded_frame = spec.occluder_width > 0 && frame_index >= spec.occluder_start &&
                              frame_index < spec.occluder_start + spec.occluder_frames;

  RenderedFrame out{GrayImage(spec.width, spec.height), {}, BinaryMask(spec.width, spec.height)};
  int x0 = spec.width, y0 = spec.height, x1 = -1, y1 = -1;
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const double lx = x - o.x();
      const double ly = y - o.y();
      const bool fg = inside_shape(spec, lx, ly);
      double v;
      if (fg) {
        v = spec.foreground + spec.noise * texture(spec.seed * 2 + 1, lx, ly, spec.texture_scale);
        out.mask(x, y) = 1;
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      } else {
        v = spec.background +
            spec.noise * texture(spec.seed * 2, x - bg_shift.x(), y - bg_shift.y(), spec.texture_scale);
      }
      if (occluded_frame && x >= spec.occluder_x && x < spec.occluder_x + spec.occluder_width)
        v = spec.occluder_intensity;
      out.image(x, y) = std::clamp(v, 0.0, 1.0);
    }
  }
  out.box = {x0, y0, x1, y1};
  return out;
}

}  // namespace qtrack
