#include "qtrack/image_io.hpp"

#include <fnmatch.h>
#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

namespace qtrack {

namespace fs = std::filesystem;

namespace {

constexpr double kLumaR = 0.299;
constexpr double kLumaG = 0.587;
constexpr double kLumaB = 0.114;

[[noreturn]] void unreadable(const fs::path& path, const std::string& why) {
  throw FrameError(FrameError::Kind::unreadable, "cannot read " + path.string() + ": " + why);
}

// Skips whitespace and '#' comments in a PNM header.
int read_pnm_int(std::istream& in, const fs::path& path) {
  int c = in.peek();
  while (in && (std::isspace(c) || c == '#')) {
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else {
      in.get();
    }
    c = in.peek();
  }
  int value = 0;
  if (!(in >> value) || value <= 0) unreadable(path, "malformed PNM header");
  return value;
}

GrayImage read_pnm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) unreadable(path, "open failed");
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6')) unreadable(path, "expected P5 or P6");
  const bool color = magic[1] == '6';
  const int w = read_pnm_int(in, path);
  const int h = read_pnm_int(in, path);
  const int maxval = read_pnm_int(in, path);
  if (maxval > 65535) unreadable(path, "maxval out of range");
  in.get();  // single whitespace before raster

  const int channels = color ? 3 : 1;
  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(static_cast<size_t>(w) * h * channels * bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) unreadable(path, "truncated raster");

  auto sample = [&](size_t i) -> double {
    if (bytes == 1) return raw[i];
    return (raw[2 * i] << 8) | raw[2 * i + 1];
  };
  GrayImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const size_t i = (static_cast<size_t>(y) * w + x) * channels;
      const double v = color ? kLumaR * sample(i) + kLumaG * sample(i + 1) + kLumaB * sample(i + 2) : sample(i);
      img(x, y) = std::clamp(v / maxval, 0.0, 1.0);
    }
  }
  return img;
}

GrayImage read_png(const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) unreadable(path, image.message);
  // Let libpng expand palettes, strip alpha and produce 8-bit RGB; luma is
  // applied here so the weights are exactly ours.
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    unreadable(path, image.message);
  }
  const int w = static_cast<int>(image.width);
  const int h = static_cast<int>(image.height);
  GrayImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const png_byte* px = &buffer[(static_cast<size_t>(y) * w + x) * 3];
      img(x, y) = std::clamp((kLumaR * px[0] + kLumaG * px[1] + kLumaB * px[2]) / 255.0, 0.0, 1.0);
    }
  }
  return img;
}

bool is_png(const fs::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png";
}

std::vector<unsigned char> to_bytes(const GrayImage& img) {
  std::vector<unsigned char> out(static_cast<size_t>(img.width()) * img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      out[static_cast<size_t>(y) * img.width() + x] =
          static_cast<unsigned char>(std::lround(std::clamp(img(x, y), 0.0, 1.0) * 255.0));
  return out;
}

}  // namespace

GrayImage read_image(const fs::path& path) {
  if (!fs::is_regular_file(path)) unreadable(path, "no such file");
  return is_png(path) ? read_png(path) : read_pnm(path);
}

BinaryMask read_mask(const fs::path& path) {
  const GrayImage img = read_image(path);
  return threshold_mask(img, 0.0);
}

void write_image(const fs::path& path, const GrayImage& img) {
  const auto bytes = to_bytes(img);
  if (is_png(path)) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width());
    image.height = static_cast<png_uint_32>(img.height());
    image.format = PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&image, path.c_str(), 0, bytes.data(), 0, nullptr))
      throw ImageError("cannot write " + path.string() + ": " + image.message);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageError("cannot write " + path.string());
  out << "P5\n" << img.width() << " " << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ImageError("cannot write " + path.string());
}

void write_mask(const fs::path& path, const BinaryMask& mask) {
  write_image(path, GrayImage(GrayImage::Pixels((mask.pixels() != 0).cast<double>())));
}

std::vector<fs::path> list_frames(const fs::path& directory, const std::string& pattern) {
  if (!fs::is_directory(directory))
    throw FrameError(FrameError::Kind::missing_directory, "frame directory does not exist: " + directory.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(directory)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (fnmatch(pattern.c_str(), name.c_str(), 0) == 0) files.push_back(entry.path());
  }
  if (files.empty())
    throw FrameError(FrameError::Kind::zero_matches,
                     "zero matches for pattern '" + pattern + "' in " + directory.string());
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  return files;
}

std::vector<GrayImage> load_frames(const fs::path& directory, const std::string& pattern) {
  const auto files = list_frames(directory, pattern);
  std::vector<GrayImage> frames;
  frames.reserve(files.size());
  for (const auto& file : files) {
    frames.push_back(read_image(file));
    if (!frames.back().same_size(frames.front()))
      throw FrameError(FrameError::Kind::dimension_mismatch,
                       "dimension mismatch: " + files.front().filename().string() + " is " +
                           std::to_string(frames.front().width()) + "x" + std::to_string(frames.front().height()) +
                           " but " + file.filename().string() + " is " + std::to_string(frames.back().width()) + "x" +
                           std::to_string(frames.back().height()));
  }
  return frames;
}

}  // namespace qtrack
