#pragma once

// Synthetic frames for tracker tests: a textured target pasted onto a
// textured background at arbitrary integer positions.

#include <cstdint>
#include <random>

#include "handoff/image.hpp"

namespace synth {

inline handoff::Image noise(int w, int h, std::uint64_t seed, int lo = 0, int hi = 255) {
  handoff::Image img(w, h);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> v(lo, hi);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto g = static_cast<std::uint8_t>(v(rng));
      img.set(x, y, {g, g, g});
    }
  return img;
}

// Paste `patch` with its top-left corner at (x, y), clipping at the borders.
inline void paste(handoff::Image& dst, const handoff::Image& patch, int x, int y) {
  for (int r = 0; r < patch.height(); ++r)
    for (int c = 0; c < patch.width(); ++c) {
      const int px = x + c, py = y + r;
      if (px >= 0 && py >= 0 && px < dst.width() && py < dst.height()) dst.set(px, py, patch.at(c, r));
    }
}

// Smooth-ish background: low-contrast blocks so the target stands out.
inline handoff::Image background(int w, int h, std::uint64_t seed) {
  handoff::Image img(w, h);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> v(60, 110);
  const int block = 8;
  for (int by = 0; by < h; by += block)
    for (int bx = 0; bx < w; bx += block) {
      const auto g = static_cast<std::uint8_t>(v(rng));
      for (int y = by; y < std::min(h, by + block); ++y)
        for (int x = bx; x < std::min(w, bx + block); ++x) img.set(x, y, {g, g, g});
    }
  return img;
}

// A blocky high-contrast target texture.
inline handoff::Image target(int w, int h, std::uint64_t seed) {
  handoff::Image img(w, h);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> v(0, 1);
  const int block = 4;
  for (int by = 0; by < h; by += block)
    for (int bx = 0; bx < w; bx += block) {
      const std::uint8_t g = v(rng) ? 240 : 10;
      for (int y = by; y < std::min(h, by + block); ++y)
        for (int x = bx; x < std::min(w, bx + block); ++x) img.set(x, y, {g, g, g});
    }
  return img;
}

}  // namespace synth
