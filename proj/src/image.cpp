#include "qtrack/image.hpp"

#include <cmath>

namespace qtrack {

void check_normalized(const GrayImage& img) {
  const auto& p = img.pixels();
  if (!p.isFinite().all() || (p < 0.0).any() || (p > 1.0).any())
    throw ImageError("intensities must lie in [0,1]");
}

Gradients spatial_gradients(const GrayImage& img) {
  const int w = img.width();
  const int h = img.height();
  if (w < 3 || h < 3) throw ImageError("spatial_gradients needs an image of at least 3x3");

  const auto& p = img.pixels();
  RealImage::Pixels ix(h, w), iy(h, w);

  ix.middleCols(1, w - 2) = (p.rightCols(w - 2) - p.leftCols(w - 2)) * 0.5;
  ix.col(0) = p.col(1) - p.col(0);
  ix.col(w - 1) = p.col(w - 1) - p.col(w - 2);

  iy.middleRows(1, h - 2) = (p.bottomRows(h - 2) - p.topRows(h - 2)) * 0.5;
  iy.row(0) = p.row(1) - p.row(0);
  iy.row(h - 1) = p.row(h - 1) - p.row(h - 2);

  return {RealImage(std::move(ix)), RealImage(std::move(iy))};
}

RealImage temporal_diff(const GrayImage& prev, const GrayImage& next) {
  if (!prev.same_size(next))
    throw ImageError("temporal_diff: dimension mismatch " + std::to_string(prev.width()) + "x" +
                     std::to_string(prev.height()) + " vs " + std::to_string(next.width()) + "x" +
                     std::to_string(next.height()));
  return RealImage(RealImage::Pixels(next.pixels() - prev.pixels()));
}

BinaryMask threshold_mask(const GrayImage& img, double level) {
  return BinaryMask(BinaryMask::Pixels((img.pixels() > level).cast<std::uint8_t>()));
}

}  // namespace qtrack
