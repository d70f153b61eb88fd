#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "handoff/geometry.hpp"

namespace handoff {

using Rgb = std::array<std::uint8_t, 3>;

// Interleaved 8-bit RGB raster.
class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgb fill = {0, 0, 0});

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ == 0 || height_ == 0; }

  Rgb at(int x, int y) const {
    const auto* p = &data_[index(x, y)];
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, Rgb c) {
    auto* p = &data_[index(x, y)];
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }

  std::span<const std::uint8_t> bytes() const { return data_; }
  std::span<std::uint8_t> bytes() { return data_; }

  // Copies the integer-pixel region covered by `box` after clipping to the image.
  Image crop(const BBox& box) const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

// Integer pixel span [x0,x1) x [y0,y1) of the pixels whose centers fall inside `box`,
// clipped to a width x height raster.
struct PixelRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  long area() const { return empty() ? 0 : static_cast<long>(x1 - x0) * (y1 - y0); }
};
PixelRect rasterize(const BBox& box, int width, int height);

// A frame as seen by perception: pixels plus the stream it came from.
struct Frame {
  std::string camera_id;
  long index = 0;
  std::shared_ptr<const Image> image;

  int width() const { return image ? image->width() : 0; }
  int height() const { return image ? image->height() : 0; }
};

class ImageFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary PPM (P6, maxval 255).
std::string encode_ppm(const Image& img);
Image decode_ppm(std::string_view data);

std::string encode_png(const Image& img);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::string base64_encode(std::string_view bytes);
// Throws ImageFormatError on characters outside the standard alphabet or bad padding.
std::string base64_decode(std::string_view text);

}  // namespace handoff
