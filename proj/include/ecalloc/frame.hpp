#ifndef ECALLOC_FRAME_HPP
#define ECALLOC_FRAME_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ecalloc {

// A single 8-bit luma plane. Dimensions are always multiples of 8; when the
// source geometry is not, the plane is padded by edge replication and the
// original geometry is kept in source_width/source_height.
struct FramePlane {
  static constexpr int kBitDepth = 8;
  static constexpr int kMaxSample = 255;

  int width = 0;   // padded, multiple of 8
  int height = 0;  // padded, multiple of 8
  int source_width = 0;
  int source_height = 0;
  std::vector<uint8_t> samples;  // row-major, width*height

  FramePlane() = default;

  FramePlane(int w, int h, uint8_t fill = 0)
      : width(w), height(h), source_width(w), source_height(h),
        samples(static_cast<size_t>(w) * h, fill) {
    if (w <= 0 || h <= 0) throw std::invalid_argument("FramePlane: non-positive dimensions");
    if (w % 8 != 0 || h % 8 != 0)
      throw std::invalid_argument("FramePlane: dimensions must be multiples of 8");
  }

  uint8_t at(int x, int y) const { return samples[static_cast<size_t>(y) * width + x]; }
  uint8_t& at(int x, int y) { return samples[static_cast<size_t>(y) * width + x]; }

  size_t pixel_count() const { return samples.size(); }

  bool same_geometry(const FramePlane& o) const {
    return width == o.width && height == o.height;
  }

  bool operator==(const FramePlane& o) const = default;
};

// Builds a padded plane from raw source samples of geometry src_w x src_h.
// Padding replicates the last source column/row; interior samples are copied
// unchanged.
inline FramePlane pad_to_block_multiple(const uint8_t* src, int src_w, int src_h) {
  if (src_w <= 0 || src_h <= 0)
    throw std::invalid_argument("pad_to_block_multiple: non-positive dimensions");
  const int w = (src_w + 7) / 8 * 8;
  const int h = (src_h + 7) / 8 * 8;
  FramePlane p(w, h);
  p.source_width = src_w;
  p.source_height = src_h;
  for (int y = 0; y < h; ++y) {
    const int sy = y < src_h ? y : src_h - 1;
    for (int x = 0; x < w; ++x) {
      const int sx = x < src_w ? x : src_w - 1;
      p.at(x, y) = src[static_cast<size_t>(sy) * src_w + sx];
    }
  }
  return p;
}

struct VideoSequence {
  std::vector<FramePlane> frames;
  std::string label;

  void push(FramePlane f) {
    if (!frames.empty() && !frames.front().same_geometry(f))
      throw std::invalid_argument("VideoSequence: mixed frame geometry");
    frames.push_back(std::move(f));
  }
};

// MSE between two planes over the padded geometry.
inline double plane_mse(const FramePlane& a, const FramePlane& b) {
  if (!a.same_geometry(b)) throw std::invalid_argument("plane_mse: geometry mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < a.samples.size(); ++i) {
    const double d = static_cast<double>(a.samples[i]) - static_cast<double>(b.samples[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(a.samples.size());
}

}  // namespace ecalloc

#endif  // ECALLOC_FRAME_HPP
