#include "handoff/image.hpp"

#include <openssl/evp.h>
#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>

namespace handoff {

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw std::invalid_argument("negative image size");
  data_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
  for (std::size_t i = 0; i < data_.size(); i += 3) {
    data_[i] = fill[0];
    data_[i + 1] = fill[1];
    data_[i + 2] = fill[2];
  }
}

PixelRect rasterize(const BBox& box, int width, int height) {
  const auto lo = [](double v) { return static_cast<int>(std::ceil(v - 0.5)); };
  PixelRect r;
  if (!box.valid()) return r;
  r.x0 = std::clamp(lo(box.x), 0, width);
  r.x1 = std::clamp(lo(box.right()), 0, width);
  r.y0 = std::clamp(lo(box.y), 0, height);
  r.y1 = std::clamp(lo(box.bottom()), 0, height);
  return r;
}

Image Image::crop(const BBox& box) const {
  const PixelRect r = rasterize(box, width_, height_);
  if (r.empty()) return {};
  Image out(r.x1 - r.x0, r.y1 - r.y0);
  for (int y = r.y0; y < r.y1; ++y) {
    const auto* src = &data_[index(r.x0, y)];
    std::copy(src, src + static_cast<std::size_t>(out.width_) * 3, &out.data_[out.index(0, y - r.y0)]);
  }
  return out;
}

std::string encode_ppm(const Image& img) {
  std::string out = "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  const auto bytes = img.bytes();
  out.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  return out;
}

namespace {

// Reads one header token, skipping whitespace and '#' comments.
std::string_view next_token(std::string_view data, std::size_t& pos) {
  while (pos < data.size()) {
    const char c = data[pos];
    if (c == '#') {
      while (pos < data.size() && data[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
  return data.substr(start, pos - start);
}

int parse_dim(std::string_view tok) {
  if (tok.empty() || tok.size() > 6) throw ImageFormatError("bad PPM header field");
  int v = 0;
  for (char c : tok) {
    if (!std::isdigit(static_cast<unsigned char>(c))) throw ImageFormatError("bad PPM header field");
    v = v * 10 + (c - '0');
  }
  return v;
}

}  // namespace

Image decode_ppm(std::string_view data) {
  std::size_t pos = 0;
  if (next_token(data, pos) != "P6") throw ImageFormatError("not a binary PPM (P6)");
  const int w = parse_dim(next_token(data, pos));
  const int h = parse_dim(next_token(data, pos));
  const int maxval = parse_dim(next_token(data, pos));
  if (maxval != 255) throw ImageFormatError("only maxval 255 is supported");
  if (w <= 0 || h <= 0) throw ImageFormatError("PPM has zero size");
  if (pos >= data.size() || !std::isspace(static_cast<unsigned char>(data[pos])))
    throw ImageFormatError("truncated PPM header");
  ++pos;
  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
  if (data.size() - pos != need) throw ImageFormatError("PPM payload size mismatch");
  Image img(w, h);
  std::memcpy(img.bytes().data(), data.data() + pos, need);
  return img;
}

std::string encode_png(const Image& img) {
  if (img.empty()) throw std::invalid_argument("cannot encode an empty image");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::string out;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    throw std::runtime_error("PNG encoding failed");
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t len) {
        static_cast<std::string*>(png_get_io_ptr(p))->append(reinterpret_cast<const char*>(data), len);
      },
      nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const auto bytes = img.bytes();
  const std::size_t stride = static_cast<std::size_t>(img.width()) * 3;
  for (int y = 0; y < img.height(); ++y) {
    png_write_row(png, const_cast<png_bytep>(bytes.data() + stride * static_cast<std::size_t>(y)));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_encode(std::string_view bytes) {
  return base64_encode(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

std::string base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw ImageFormatError("base64 length is not a multiple of 4");
  if (text.empty()) return {};
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    const bool alpha = std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '/';
    const bool pad = c == '=' && i + 2 >= text.size();
    if (!alpha && !pad) throw ImageFormatError("invalid base64 character");
  }
  if (text[text.size() - 2] == '=' && text.back() != '=') throw ImageFormatError("invalid base64 padding");
  std::string out(3 * text.size() / 4, '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
  if (n < 0) throw ImageFormatError("invalid base64 payload");
  std::size_t pad = 0;
  if (text.back() == '=') ++pad;
  if (text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

}  // namespace handoff
