// Dense grayscale images, binary masks and the derivative operators used by
// the flow tracker.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace qtrack {

template <typename Scalar>
using Point2T = Eigen::Matrix<Scalar, 2, 1>;
using Point2 = Point2T<double>;

template <typename Scalar>
using PixelArray = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Row-major intensity grid. Rows index y (downward), columns index x.
template <typename Scalar>
class Image {
 public:
  using Pixels = PixelArray<Scalar>;

  Image() = default;
  Image(int width, int height, Scalar fill = Scalar(0)) : pixels_(Pixels::Constant(height, width, fill)) {
    if (width <= 0 || height <= 0) throw ImageError("image dimensions must be positive");
  }
  explicit Image(Pixels pixels) : pixels_(std::move(pixels)) {
    if (pixels_.rows() == 0 || pixels_.cols() == 0) throw ImageError("image dimensions must be positive");
  }

  int width() const { return static_cast<int>(pixels_.cols()); }
  int height() const { return static_cast<int>(pixels_.rows()); }
  bool empty() const { return pixels_.size() == 0; }

  Scalar operator()(int x, int y) const { return pixels_(y, x); }
  Scalar& operator()(int x, int y) { return pixels_(y, x); }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width() && y < height(); }

  const Pixels& pixels() const { return pixels_; }
  Pixels& pixels() { return pixels_; }

  bool same_size(const Image& other) const { return width() == other.width() && height() == other.height(); }

  /// Bilinear sample with coordinates clamped to the image rectangle.
  Scalar sample(Scalar x, Scalar y) const {
    const Scalar cx = std::clamp(x, Scalar(0), Scalar(width() - 1));
    const Scalar cy = std::clamp(y, Scalar(0), Scalar(height() - 1));
    const int x0 = std::min(static_cast<int>(cx), width() - 1);
    const int y0 = std::min(static_cast<int>(cy), height() - 1);
    const int x1 = std::min(x0 + 1, width() - 1);
    const int y1 = std::min(y0 + 1, height() - 1);
    const Scalar fx = cx - x0;
    const Scalar fy = cy - y0;
    const Scalar top = (1 - fx) * pixels_(y0, x0) + fx * pixels_(y0, x1);
    const Scalar bottom = (1 - fx) * pixels_(y1, x0) + fx * pixels_(y1, x1);
    return (1 - fy) * top + fy * bottom;
  }

 private:
  Pixels pixels_;
};

/// Axis-aligned rectangle in pixel-center coordinates, corners inclusive.
struct Rect {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
  bool contains(const Point2& p) const { return p.x() >= x0 && p.x() <= x1 && p.y() >= y0 && p.y() <= y1; }
  bool operator==(const Rect&) const = default;
};

/// Intersection over union; 0 when both rectangles are degenerate.
inline double iou(const Rect& a, const Rect& b) {
  const Rect inter{std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1), std::min(a.y1, b.y1)};
  const double i = (inter.x1 > inter.x0 && inter.y1 > inter.y0) ? inter.area() : 0.0;
  const double u = a.area() + b.area() - i;
  return u > 0 ? i / u : 0.0;
}

/// Intensities normalized to [0,1].
using GrayImage = Image<double>;
/// Signed images (derivatives, differences).
using RealImage = Image<double>;
/// Nonzero = foreground.
using BinaryMask = Image<std::uint8_t>;

/// Throws unless every intensity lies in [0,1].
void check_normalized(const GrayImage& img);

struct Gradients {
  RealImage ix;
  RealImage iy;
};

/// Central differences in the interior, one-sided differences on the border.
Gradients spatial_gradients(const GrayImage& img);

/// Per-pixel next - prev.
RealImage temporal_diff(const GrayImage& prev, const GrayImage& next);

/// Foreground where intensity > level.
BinaryMask threshold_mask(const GrayImage& img, double level);

}  // namespace qtrack
