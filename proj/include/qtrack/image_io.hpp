// Frame-sequence and still-image I/O: binary PGM (P5), PPM (P6) and PNG.
#pragma once

#include "qtrack/image.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace qtrack {

class FrameError : public ImageError {
 public:
  enum class Kind { missing_directory, zero_matches, dimension_mismatch, unreadable };

  FrameError(Kind kind, const std::string& what) : ImageError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Reads a PGM, PPM or PNG file. Color is reduced to luma with weights
/// (0.299, 0.587, 0.114); the result is scaled to [0,1].
GrayImage read_image(const std::filesystem::path& path);

/// Nonzero pixels are foreground.
BinaryMask read_mask(const std::filesystem::path& path);

/// 8-bit output. The format follows the extension: ".png" writes PNG, anything else P5.
void write_image(const std::filesystem::path& path, const GrayImage& img);
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);

/// Loads every regular file in `directory` whose name matches the glob
/// `pattern`, sorted lexicographically by filename.
std::vector<GrayImage> load_frames(const std::filesystem::path& directory, const std::string& pattern);

/// The filenames load_frames would read, in order.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& directory, const std::string& pattern);

}  // namespace qtrack
