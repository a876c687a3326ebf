#ifndef ECALLOC_PIXEL_IO_HPP
#define ECALLOC_PIXEL_IO_HPP

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecalloc/frame.hpp"

namespace ecalloc {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<uint8_t> read_exact(std::istream& in, size_t n, const char* what) {
  std::vector<uint8_t> buf(n);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n)
    throw IoError(std::string("truncated payload while reading ") + what);
  return buf;
}

}  // namespace detail

// Reads a YUV4MPEG2 stream and returns the luma planes in display order.
// 4:2:0 variants and mono are accepted; chroma is read and discarded.
inline VideoSequence read_y4m(std::istream& in, const std::string& label = "y4m") {
  std::string header;
  if (!std::getline(in, header) || header.rfind("YUV4MPEG2", 0) != 0)
    throw IoError("read_y4m: missing YUV4MPEG2 signature");

  int w = 0, h = 0;
  std::string colorspace = "420";
  std::istringstream hs(header);
  std::string tok;
  hs >> tok;  // signature
  while (hs >> tok) {
    if (tok.size() < 2) continue;
    switch (tok[0]) {
      case 'W': w = std::stoi(tok.substr(1)); break;
      case 'H': h = std::stoi(tok.substr(1)); break;
      case 'C': colorspace = tok.substr(1); break;
      default: break;  // frame rate, aspect, interlacing: irrelevant here
    }
  }
  if (w <= 0 || h <= 0) throw IoError("read_y4m: malformed header (missing W/H)");

  size_t chroma_bytes;
  if (colorspace.rfind("420", 0) == 0) {
    chroma_bytes = 2 * (static_cast<size_t>((w + 1) / 2) * ((h + 1) / 2));
  } else if (colorspace == "mono" || colorspace == "400") {
    chroma_bytes = 0;
  } else {
    throw IoError("read_y4m: unsupported colorspace C" + colorspace);
  }
  if (colorspace.find("p1") != std::string::npos)
    throw IoError("read_y4m: unsupported bit depth in C" + colorspace);

  VideoSequence seq;
  seq.label = label;
  std::string frame_line;
  while (std::getline(in, frame_line)) {
    if (frame_line.rfind("FRAME", 0) != 0)
      throw IoError("read_y4m: expected FRAME marker");
    auto luma = detail::read_exact(in, static_cast<size_t>(w) * h, "luma plane");
    if (chroma_bytes) detail::read_exact(in, chroma_bytes, "chroma planes");
    seq.push(pad_to_block_multiple(luma.data(), w, h));
  }
  return seq;
}

inline VideoSequence read_y4m_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("read_y4m: cannot open " + path);
  return read_y4m(f, path);
}

// Writes luma-only Y4M (Cmono) using the source geometry of each plane.
inline void write_y4m(std::ostream& out, const VideoSequence& seq) {
  if (seq.frames.empty()) throw IoError("write_y4m: empty sequence");
  const auto& f0 = seq.frames.front();
  out << "YUV4MPEG2 W" << f0.source_width << " H" << f0.source_height
      << " F30:1 Ip A1:1 Cmono\n";
  for (const auto& f : seq.frames) {
    out << "FRAME\n";
    for (int y = 0; y < f.source_height; ++y)
      out.write(reinterpret_cast<const char*>(f.samples.data() + static_cast<size_t>(y) * f.width),
                f.source_width);
  }
}

inline void write_y4m_file(const std::string& path, const VideoSequence& seq) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("write_y4m: cannot open " + path);
  write_y4m(f, seq);
}

// Headerless planar I420: per frame, a w*h luma plane followed by two
// half-resolution chroma planes (skipped).
inline VideoSequence read_raw_yuv(const std::string& path, int width, int height,
                                  int frame_count) {
  if (width <= 0 || height <= 0) throw IoError("read_raw_yuv: non-positive geometry");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_raw_yuv: cannot open " + path);
  const size_t luma_bytes = static_cast<size_t>(width) * height;
  const size_t chroma_bytes = 2 * (static_cast<size_t>((width + 1) / 2) * ((height + 1) / 2));
  VideoSequence seq;
  seq.label = path;
  for (int t = 0; t < frame_count; ++t) {
    auto luma = detail::read_exact(in, luma_bytes, "raw luma plane");
    if (t + 1 < frame_count) detail::read_exact(in, chroma_bytes, "raw chroma planes");
    else {
      // last frame's chroma may be absent in luma-appended files; skip what exists
      in.ignore(static_cast<std::streamsize>(chroma_bytes));
    }
    seq.push(pad_to_block_multiple(luma.data(), width, height));
  }
  return seq;
}

// ---- deterministic synthetic sequences ----

// SplitMix64 (Steele et al.); the one PRNG used for synthesis so that output
// is bit-reproducible across platforms.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

struct SynthSpec {
  int width = 64;
  int height = 64;
  int frame_count = 33;
  uint64_t seed = 1;
  int motion_px_per_frame = 1;
  int noise_amplitude = 2;
};

namespace detail {

// triangle wave in [0, period/2], integer arithmetic only
inline int tri(int64_t i, int period) {
  int64_t m = i % period;
  if (m < 0) m += period;
  return static_cast<int>(m < period / 2 ? m : period - m);
}

}  // namespace detail

// Translating smooth gradient plus seeded noise in two parts: a static
// texture field riding on the pattern (so it translates with it and keeps
// inter prediction meaningful while defeating intra-block compression) and a
// weaker per-frame component at a third of the amplitude. With zero noise,
// frame t+1 equals frame t shifted horizontally by motion_px_per_frame.
inline VideoSequence synth_sequence(const SynthSpec& spec) {
  if (spec.width <= 0 || spec.height <= 0)
    throw IoError("synth_sequence: zero dimensions");
  VideoSequence seq;
  seq.label = "synth";
  const int temporal_amp = spec.noise_amplitude / 3;
  for (int t = 0; t < spec.frame_count; ++t) {
    const int src_w = spec.width, src_h = spec.height;
    std::vector<uint8_t> raw(static_cast<size_t>(src_w) * src_h);
    for (int y = 0; y < src_h; ++y) {
      for (int x = 0; x < src_w; ++x) {
        const int64_t u = static_cast<int64_t>(x) - static_cast<int64_t>(t) * spec.motion_px_per_frame;
        int v = 92 + detail::tri(u, 16) + detail::tri(y, 48);
        if (spec.noise_amplitude > 0) {
          uint64_t k = splitmix64(spec.seed ^ 0x7465787475726500ull);
          k = splitmix64(k ^ (static_cast<uint64_t>(u) * 0x100000001B3ull) ^
                         (static_cast<uint64_t>(y) << 32));
          v += static_cast<int>(k % (2ull * spec.noise_amplitude + 1)) - spec.noise_amplitude;
        }
        if (temporal_amp > 0) {
          uint64_t k = splitmix64(spec.seed + static_cast<uint64_t>(t) + 1);
          k = splitmix64(k ^ (static_cast<uint64_t>(y) * 0x100000001B3ull + static_cast<uint64_t>(x)));
          v += static_cast<int>(k % (2ull * temporal_amp + 1)) - temporal_amp;
        }
        raw[static_cast<size_t>(y) * src_w + x] =
            static_cast<uint8_t>(v < 0 ? 0 : (v > 255 ? 255 : v));
      }
    }
    seq.push(pad_to_block_multiple(raw.data(), src_w, src_h));
  }
  return seq;
}

}  // namespace ecalloc

#endif  // ECALLOC_PIXEL_IO_HPP
