#ifndef ECALLOC_EC_CODEC_HPP
#define ECALLOC_EC_CODEC_HPP

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ecalloc/bitio.hpp"
#include "ecalloc/frame.hpp"

namespace ecalloc {

// Lossy embedded compression of 8x8 blocks: DPCM along a boustrophedon scan,
// significant-bit-truncation group coding of the residuals, and LSB
// quantization escalated until the block meets its data-reduction target.

constexpr int kBlockDim = 8;
constexpr int kBlockSamples = 64;
constexpr int kResidualsPerGroup = 7;
constexpr int kGroupsPerBlock = 9;
constexpr int kGroupHeaderBits = 4;
constexpr int kBlockHeaderBits = 3;  // truncation level M
constexpr int kBlockRawBits = kBlockSamples * FramePlane::kBitDepth;  // 512

using Block = std::array<uint8_t, kBlockSamples>;
using ResidualArray = std::array<int16_t, kBlockSamples - 1>;

struct CodecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Boustrophedon (snake) scan: even rows left-to-right, odd rows right-to-left,
// so every consecutive scan pair is spatially adjacent.
constexpr std::array<int, kBlockSamples> make_snake_scan() {
  std::array<int, kBlockSamples> scan{};
  for (int i = 0; i < kBlockSamples; ++i) {
    const int row = i / kBlockDim;
    const int col = (row % 2 == 0) ? i % kBlockDim : kBlockDim - 1 - i % kBlockDim;
    scan[i] = row * kBlockDim + col;
  }
  return scan;
}
inline constexpr std::array<int, kBlockSamples> kSnakeScan = make_snake_scan();

struct DpcmResult {
  uint8_t anchor;
  ResidualArray residuals;
};

inline DpcmResult dpcm_forward(const Block& block) {
  DpcmResult r;
  r.anchor = block[kSnakeScan[0]];
  int prev = r.anchor;
  for (int i = 1; i < kBlockSamples; ++i) {
    const int cur = block[kSnakeScan[i]];
    r.residuals[i - 1] = static_cast<int16_t>(cur - prev);
    prev = cur;
  }
  return r;
}

// max_value bounds the reconstructed samples; 255 for full-depth blocks,
// 255 >> M when operating on quantized samples.
inline Block dpcm_inverse(uint8_t anchor, const ResidualArray& residuals, int max_value = 255) {
  Block block{};
  int cur = anchor;
  if (cur > max_value) throw CodecError("dpcm_inverse: anchor out of range");
  block[kSnakeScan[0]] = static_cast<uint8_t>(cur);
  for (int i = 1; i < kBlockSamples; ++i) {
    cur += residuals[i - 1];
    if (cur < 0 || cur > max_value) throw CodecError("dpcm_inverse: sample out of range");
    block[kSnakeScan[i]] = static_cast<uint8_t>(cur);
  }
  return block;
}

struct SbtGroup {
  uint8_t k = 0;  // residual bit-width, 0..9; k=0 means all residuals zero
  std::array<int16_t, kResidualsPerGroup> residuals{};
};

// minimal two's-complement width for v: smallest k with v in [-2^(k-1), 2^(k-1)-1]
inline int min_signed_width(int v) {
  if (v == 0) return 0;
  int k = 1;
  while (v < -(1 << (k - 1)) || v > (1 << (k - 1)) - 1) ++k;
  return k;
}

struct SbtResult {
  std::array<SbtGroup, kGroupsPerBlock> groups;
  int payload_bits = 0;  // sum of group headers + residual payloads
};

inline SbtResult sbt_encode(const ResidualArray& residuals) {
  SbtResult out;
  for (int g = 0; g < kGroupsPerBlock; ++g) {
    SbtGroup& grp = out.groups[g];
    int k = 0;
    for (int j = 0; j < kResidualsPerGroup; ++j) {
      const int v = residuals[g * kResidualsPerGroup + j];
      if (v < -256 || v > 255) throw CodecError("sbt_encode: residual out of range");
      grp.residuals[j] = static_cast<int16_t>(v);
      const int w = min_signed_width(v);
      if (w > k) k = w;
    }
    grp.k = static_cast<uint8_t>(k);
    out.payload_bits += kGroupHeaderBits + kResidualsPerGroup * k;
  }
  return out;
}

inline ResidualArray sbt_decode(const std::array<SbtGroup, kGroupsPerBlock>& groups) {
  ResidualArray residuals{};
  for (int g = 0; g < kGroupsPerBlock; ++g)
    for (int j = 0; j < kResidualsPerGroup; ++j)
      residuals[g * kResidualsPerGroup + j] = groups[g].residuals[j];
  return residuals;
}

// LSB truncation with reconstruction at the bin midpoint. For 8-bit input the
// midpoint never leaves [0,255], so the clip is a formality.
inline uint8_t truncate_sample(uint8_t v, int m) {
  if (m == 0) return v;
  int r = ((v >> m) << m) + (1 << (m - 1));
  if (r < 0) r = 0;
  if (r > 255) r = 255;
  return static_cast<uint8_t>(r);
}

inline Block truncate_lsb(const Block& block, int m) {
  if (m < 0 || m > 7) throw CodecError("truncate_lsb: M out of range");
  Block out;
  for (int i = 0; i < kBlockSamples; ++i) out[i] = truncate_sample(block[i], m);
  return out;
}

struct CompressedBlock {
  int m = 0;            // truncation level
  uint8_t anchor = 0;   // first scanned sample, stored in (8 - m) bits (>> m)
  std::array<SbtGroup, kGroupsPerBlock> groups;  // residuals of the quantized samples
  int size_bits = 0;    // block header + anchor + all group headers/payloads
};

struct BlockCompressResult {
  CompressedBlock block;
  Block reconstructed;
  double achieved_drr = 0.0;
  bool shortfall = false;
};

namespace detail {

// Encode the block at a fixed truncation level: DPCM+SBT over the quantized
// samples (v >> m), which carry all information of the truncated block.
inline BlockCompressResult encode_at_level(const Block& block, int m) {
  Block q;
  for (int i = 0; i < kBlockSamples; ++i) q[i] = static_cast<uint8_t>(block[i] >> m);
  const DpcmResult dp = dpcm_forward(q);
  const SbtResult sbt = sbt_encode(dp.residuals);

  BlockCompressResult res;
  res.block.m = m;
  res.block.anchor = dp.anchor;
  res.block.groups = sbt.groups;
  res.block.size_bits =
      kBlockHeaderBits + (FramePlane::kBitDepth - m) + sbt.payload_bits;
  for (int i = 0; i < kBlockSamples; ++i) {
    res.reconstructed[i] =
        m == 0 ? block[i]
               : static_cast<uint8_t>((q[i] << m) + (1 << (m - 1)));
  }
  res.achieved_drr =
      static_cast<double>(kBlockRawBits - res.block.size_bits) / kBlockRawBits;
  return res;
}

}  // namespace detail

// Escalates M from 0 until the target DRR is met. If even M=7 falls short the
// result carries a shortfall flag rather than failing.
inline BlockCompressResult compress_block(const Block& block, double target_drr) {
  if (target_drr < 0.0 || target_drr > 0.70)
    throw CodecError("compress_block: target DRR outside [0, 0.70]");
  BlockCompressResult res;
  for (int m = 0; m <= 7; ++m) {
    res = detail::encode_at_level(block, m);
    if (res.achieved_drr >= target_drr) return res;
  }
  res.shortfall = true;
  return res;
}

inline Block decompress_block(const CompressedBlock& cb) {
  const int max_q = 255 >> cb.m;
  const Block q = dpcm_inverse(cb.anchor, sbt_decode(cb.groups), max_q);
  if (cb.m == 0) return q;
  Block out;
  for (int i = 0; i < kBlockSamples; ++i)
    out[i] = static_cast<uint8_t>((q[i] << cb.m) + (1 << (cb.m - 1)));
  return out;
}

// ---- bitstream form (used by roundtrip tests and the optional dump) ----

inline void serialize_block(const CompressedBlock& cb, BitWriter& bw) {
  bw.write_bits(static_cast<uint32_t>(cb.m), kBlockHeaderBits);
  bw.write_bits(cb.anchor, FramePlane::kBitDepth - cb.m);
  for (const auto& g : cb.groups) {
    bw.write_bits(g.k, kGroupHeaderBits);
    for (int j = 0; j < kResidualsPerGroup; ++j) bw.write_signed(g.residuals[j], g.k);
  }
}

inline CompressedBlock parse_block(BitReader& br) {
  CompressedBlock cb;
  cb.m = static_cast<int>(br.read_bits(kBlockHeaderBits));
  if (cb.m > 7) throw CodecError("parse_block: bad truncation level");
  cb.anchor = static_cast<uint8_t>(br.read_bits(FramePlane::kBitDepth - cb.m));
  cb.size_bits = kBlockHeaderBits + (FramePlane::kBitDepth - cb.m);
  for (auto& g : cb.groups) {
    g.k = static_cast<uint8_t>(br.read_bits(kGroupHeaderBits));
    if (g.k > 9) throw CodecError("parse_block: bad group width");
    for (int j = 0; j < kResidualsPerGroup; ++j)
      g.residuals[j] = static_cast<int16_t>(br.read_signed(g.k));
    cb.size_bits += kGroupHeaderBits + kResidualsPerGroup * g.k;
  }
  return cb;
}

// ---- frame-level application ----

struct FrameEcStats {
  double mean_achieved_drr = 0.0;
  std::array<int, 8> m_histogram{};
  int shortfall_count = 0;
  int block_count = 0;
};

struct FrameCompressResult {
  FramePlane reconstructed;
  FrameEcStats stats;
};

inline Block extract_block(const FramePlane& f, int bx, int by) {
  Block b;
  for (int y = 0; y < kBlockDim; ++y)
    for (int x = 0; x < kBlockDim; ++x)
      b[y * kBlockDim + x] = f.at(bx * kBlockDim + x, by * kBlockDim + y);
  return b;
}

inline void insert_block(FramePlane& f, int bx, int by, const Block& b) {
  for (int y = 0; y < kBlockDim; ++y)
    for (int x = 0; x < kBlockDim; ++x)
      f.at(bx * kBlockDim + x, by * kBlockDim + y) = b[y * kBlockDim + x];
}

inline FrameCompressResult compress_frame(const FramePlane& frame, double target_drr) {
  FrameCompressResult out{frame, {}};
  const int bw = frame.width / kBlockDim;
  const int bh = frame.height / kBlockDim;
  double drr_sum = 0.0;
  for (int by = 0; by < bh; ++by) {
    for (int bx = 0; bx < bw; ++bx) {
      const BlockCompressResult r = compress_block(extract_block(frame, bx, by), target_drr);
      insert_block(out.reconstructed, bx, by, r.reconstructed);
      drr_sum += r.achieved_drr;
      ++out.stats.m_histogram[r.block.m];
      if (r.shortfall) ++out.stats.shortfall_count;
      ++out.stats.block_count;
    }
  }
  out.stats.mean_achieved_drr = drr_sum / (bw * bh);
  return out;
}

}  // namespace ecalloc

#endif  // ECALLOC_EC_CODEC_HPP
