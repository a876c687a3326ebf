#ifndef ECALLOC_GOP_SIM_HPP
#define ECALLOC_GOP_SIM_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ecalloc/analytic_model.hpp"
#include "ecalloc/ec_codec.hpp"
#include "ecalloc/frame.hpp"

namespace ecalloc {

// Toy hierarchical-B encode/decode pipeline. The encoder runs once without
// embedded compression; decoding optionally passes each reconstructed frame
// through the lossy EC codec before it enters the reference/display buffer,
// which reproduces the decoder-side drift the allocation model is about.

struct SimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dyadic GOP of size 8. Relative POC 0 and 8 are the level0 anchors; POC 4 is
// level1, POCs 2/6 level2, odd POCs level3 (non-reference).
struct GopStructure {
  static constexpr int kGopSize = 8;

  std::array<int, kGopSize + 1> level_of{};                 // by relative POC 0..8
  std::array<std::vector<int>, kGopSize + 1> refs_of{};     // relative POCs
  std::array<int, kGopSize> coding_order{};                 // relative POCs 1..8
};

inline GopStructure build_hierarchical_gop() {
  GopStructure g;
  g.level_of = {0, 3, 2, 3, 1, 3, 2, 3, 0};
  g.refs_of[8] = {0};
  g.refs_of[4] = {0, 8};
  g.refs_of[2] = {0, 4};
  g.refs_of[6] = {4, 8};
  g.refs_of[1] = {0, 2};
  g.refs_of[3] = {2, 4};
  g.refs_of[5] = {4, 6};
  g.refs_of[7] = {6, 8};
  g.coding_order = {8, 4, 2, 1, 3, 6, 5, 7};
  return g;
}

inline int level_of_poc(int poc) {
  static const GopStructure g = build_hierarchical_gop();
  return g.level_of[poc % GopStructure::kGopSize == 0 ? 0 : poc % GopStructure::kGopSize];
}

struct CodecConfig {
  int qp = 32;            // typical evaluation set: 22, 27, 32, 37
  int search_range = 0;   // 0 = co-located prediction
  int intra_period = 32;
  // random-access style cascading: higher temporal levels take a higher Qp
  std::array<int, 4> qp_offset_of_level{0, 1, 2, 3};

  double quant_step() const { return std::exp2((qp - 4) / 6.0); }
  double quant_step(int level) const {
    return std::exp2((qp + qp_offset_of_level[level] - 4) / 6.0);
  }
};

enum class FrameType : uint8_t { kIntra, kP, kB };

struct MotionVector {
  int dx = 0, dy = 0;
};

struct EncodedFrame {
  FrameType type = FrameType::kIntra;
  int poc = 0;
  std::vector<int> ref_pocs;                   // empty / 1 / 2 entries
  std::vector<std::array<MotionVector, 2>> motion;  // per block, per reference
  std::vector<int16_t> qlevels;                // quantized residual levels, row-major
};

struct EncodedStream {
  int width = 0, height = 0;
  int frame_count = 0;  // frames actually encoded (POC 0 .. frame_count-1)
  CodecConfig cfg;
  std::vector<EncodedFrame> frames;  // coding order
};

namespace detail {

inline uint8_t sample_clamped(const FramePlane& f, int x, int y) {
  if (x < 0) x = 0;
  if (x >= f.width) x = f.width - 1;
  if (y < 0) y = 0;
  if (y >= f.height) y = f.height - 1;
  return f.at(x, y);
}

inline Block predict_block(const std::vector<const FramePlane*>& refs,
                           const std::array<MotionVector, 2>& mv, int bx, int by) {
  Block pred{};
  for (int y = 0; y < kBlockDim; ++y) {
    for (int x = 0; x < kBlockDim; ++x) {
      const int px = bx * kBlockDim + x;
      const int py = by * kBlockDim + y;
      if (refs.size() == 1) {
        pred[y * kBlockDim + x] =
            sample_clamped(*refs[0], px + mv[0].dx, py + mv[0].dy);
      } else {
        const int a = sample_clamped(*refs[0], px + mv[0].dx, py + mv[0].dy);
        const int b = sample_clamped(*refs[1], px + mv[1].dx, py + mv[1].dy);
        pred[y * kBlockDim + x] = static_cast<uint8_t>((a + b + 1) >> 1);
      }
    }
  }
  return pred;
}

inline long block_sad(const FramePlane& src, const FramePlane& ref, int bx, int by,
                      int dx, int dy) {
  long sad = 0;
  for (int y = 0; y < kBlockDim; ++y)
    for (int x = 0; x < kBlockDim; ++x) {
      const int px = bx * kBlockDim + x;
      const int py = by * kBlockDim + y;
      sad += std::abs(static_cast<int>(src.at(px, py)) -
                      static_cast<int>(sample_clamped(ref, px + dx, py + dy)));
    }
  return sad;
}

// full search, raster scan, first minimum wins (deterministic)
inline MotionVector search_motion(const FramePlane& src, const FramePlane& ref, int bx,
                                  int by, int range) {
  MotionVector best{};
  if (range == 0) return best;
  long best_sad = -1;
  for (int dy = -range; dy <= range; ++dy)
    for (int dx = -range; dx <= range; ++dx) {
      const long sad = block_sad(src, ref, bx, by, dx, dy);
      if (best_sad < 0 || sad < best_sad) {
        best_sad = sad;
        best = {dx, dy};
      }
    }
  return best;
}

inline uint8_t clip255(long v) {
  return static_cast<uint8_t>(v < 0 ? 0 : (v > 255 ? 255 : v));
}

// Shared by encoder and decoder: reconstruct one frame from prediction
// references and quantized residual levels.
inline FramePlane reconstruct_frame(const EncodedFrame& ef,
                                    const std::vector<const FramePlane*>& refs,
                                    int width, int height, double step) {
  FramePlane recon(width, height);
  const int bw = width / kBlockDim;
  const int bh = height / kBlockDim;
  for (int by = 0; by < bh; ++by) {
    for (int bx = 0; bx < bw; ++bx) {
      Block pred{};
      if (ef.type != FrameType::kIntra)
        pred = predict_block(refs, ef.motion[by * bw + bx], bx, by);
      for (int y = 0; y < kBlockDim; ++y)
        for (int x = 0; x < kBlockDim; ++x) {
          const size_t idx =
              static_cast<size_t>(by * kBlockDim + y) * width + bx * kBlockDim + x;
          const long level = ef.qlevels[idx];
          recon.samples[idx] =
              clip255(pred[y * kBlockDim + x] + std::lround(level * step));
        }
    }
  }
  return recon;
}

}  // namespace detail

// Builds the coding-order frame list: POC 0, then for each GOP the dyadic
// order {8,4,2,1,3,6,5,7} offset by the GOP base. Frames beyond the last full
// GOP anchor are dropped.
inline std::vector<std::pair<int, std::vector<int>>> coding_plan(int frame_count,
                                                                 int intra_period) {
  if (frame_count < GopStructure::kGopSize + 1)
    throw SimError("coding_plan: need at least 9 frames (one GOP plus anchor)");
  static const GopStructure g = build_hierarchical_gop();
  const int gops = (frame_count - 1) / GopStructure::kGopSize;
  std::vector<std::pair<int, std::vector<int>>> plan;
  plan.push_back({0, {}});  // leading intra anchor
  for (int gi = 0; gi < gops; ++gi) {
    const int base = gi * GopStructure::kGopSize;
    for (int rel : g.coding_order) {
      const int poc = base + rel;
      std::vector<int> refs;
      if (rel == GopStructure::kGopSize) {
        if (poc % intra_period != 0) refs = {base};  // P anchor, single reference
      } else {
        for (int r : g.refs_of[rel]) refs.push_back(base + r);
      }
      plan.push_back({poc, std::move(refs)});
    }
  }
  return plan;
}

inline EncodedStream encode(const VideoSequence& seq, const CodecConfig& cfg) {
  if (seq.frames.size() < GopStructure::kGopSize + 1)
    throw SimError("encode: sequence too short (need >= 9 frames)");
  const auto plan = coding_plan(static_cast<int>(seq.frames.size()), cfg.intra_period);
  const int width = seq.frames[0].width;
  const int height = seq.frames[0].height;
  const int bw = width / kBlockDim;
  const int bh = height / kBlockDim;

  EncodedStream stream;
  stream.width = width;
  stream.height = height;
  stream.cfg = cfg;
  stream.frame_count = 1 + GopStructure::kGopSize *
                               ((static_cast<int>(seq.frames.size()) - 1) / GopStructure::kGopSize);

  std::vector<FramePlane> recon_by_poc(stream.frame_count);
  for (const auto& [poc, ref_pocs] : plan) {
    const FramePlane& src = seq.frames[poc];
    const double step = cfg.quant_step(level_of_poc(poc));
    EncodedFrame ef;
    ef.poc = poc;
    ef.ref_pocs = ref_pocs;
    ef.type = ref_pocs.empty() ? FrameType::kIntra
                               : (ref_pocs.size() == 1 ? FrameType::kP : FrameType::kB);
    std::vector<const FramePlane*> refs;
    for (int r : ref_pocs) refs.push_back(&recon_by_poc[r]);

    ef.qlevels.resize(static_cast<size_t>(width) * height);
    if (ef.type != FrameType::kIntra) ef.motion.resize(static_cast<size_t>(bw) * bh);
    for (int by = 0; by < bh; ++by) {
      for (int bx = 0; bx < bw; ++bx) {
        Block pred{};
        if (ef.type != FrameType::kIntra) {
          auto& mv = ef.motion[by * bw + bx];
          for (size_t ri = 0; ri < refs.size(); ++ri)
            mv[ri] = detail::search_motion(src, *refs[ri], bx, by, cfg.search_range);
          pred = detail::predict_block(refs, mv, bx, by);
        }
        for (int y = 0; y < kBlockDim; ++y)
          for (int x = 0; x < kBlockDim; ++x) {
            const size_t idx =
                static_cast<size_t>(by * kBlockDim + y) * width + bx * kBlockDim + x;
            const long r = static_cast<long>(src.samples[idx]) - pred[y * kBlockDim + x];
            ef.qlevels[idx] = static_cast<int16_t>(std::lround(r / step));
          }
      }
    }
    recon_by_poc[poc] =
        detail::reconstruct_frame(ef, refs, width, height, step);
    stream.frames.push_back(std::move(ef));
  }
  return stream;
}

// Per-level EC applied at decode time. Level 0 is always lossless. The policy
// either targets a DRR per level or truncates by a fixed M (used by the
// propagation-bound measurements).
struct EcPolicy {
  std::array<double, 4> drr_of_level{};  // fractions, [0, 0.70]
  std::array<int, 4> fixed_m{};
  bool use_fixed_m = false;

  static EcPolicy from_drr(double d1, double d2, double d3) {
    EcPolicy p;
    p.drr_of_level = {0.0, d1, d2, d3};
    for (double d : p.drr_of_level)
      if (d < 0.0 || d > 0.70) throw SimError("EcPolicy: DRR outside [0, 0.70]");
    return p;
  }

  static EcPolicy from_fixed_m(int m1, int m2, int m3) {
    EcPolicy p;
    p.fixed_m = {0, m1, m2, m3};
    p.use_fixed_m = true;
    for (int m : p.fixed_m)
      if (m < 0 || m > 7) throw SimError("EcPolicy: M outside [0, 7]");
    return p;
  }

  bool lossless() const {
    if (use_fixed_m) return fixed_m == std::array<int, 4>{};
    return drr_of_level == std::array<double, 4>{};
  }
};

namespace detail {

inline FramePlane apply_ec(const FramePlane& f, const EcPolicy& policy, int level) {
  if (level == 0) return f;
  if (policy.use_fixed_m) {
    const int m = policy.fixed_m[level];
    if (m == 0) return f;
    FramePlane out = f;
    for (auto& s : out.samples) s = truncate_sample(s, m);
    return out;
  }
  const double target = policy.drr_of_level[level];
  if (target == 0.0) return f;
  return compress_frame(f, target).reconstructed;
}

}  // namespace detail

// Decodes in coding order. Both later prediction and the display output read
// the EC-processed plane, mirroring a decoder whose output is fetched from
// the same compressed DRAM.
inline VideoSequence decode(const EncodedStream& stream, const EcPolicy& policy) {
  std::vector<FramePlane> out_by_poc(stream.frame_count);
  for (const auto& ef : stream.frames) {
    const double step = stream.cfg.quant_step(level_of_poc(ef.poc));
    std::vector<const FramePlane*> refs;
    for (int r : ef.ref_pocs) {
      if (r >= stream.frame_count || out_by_poc[r].pixel_count() == 0)
        throw SimError("decode: reference frame not yet decoded (stream/GOP mismatch)");
      refs.push_back(&out_by_poc[r]);
    }
    FramePlane recon =
        detail::reconstruct_frame(ef, refs, stream.width, stream.height, step);
    out_by_poc[ef.poc] = detail::apply_ec(recon, policy, level_of_poc(ef.poc));
  }
  VideoSequence seq;
  seq.label = "decoded";
  for (auto& f : out_by_poc) seq.push(std::move(f));
  return seq;
}

struct SimulationReport {
  std::vector<int> level;        // per frame, display order
  std::vector<double> psnr_wo, psnr_w, delta_psnr;
  std::vector<double> mse_wo, mse_w;
  std::array<double, 4> mean_delta_by_level{};
  std::array<int, 4> frames_by_level{};
  double mean_delta = 0.0;
  double sd_psnr_w = 0.0;
  double sd_psnr_wo = 0.0;
  int frame_count = 0;
};

namespace detail {

// PSNR values are capped at the CSV sentinel before aggregation so that a
// lossless frame does not poison mean/SD.
inline double capped(double psnr) {
  return std::isinf(psnr) ? kPsnrInfSentinelCsv : psnr;
}

inline double stddev(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += capped(x);
  mean /= static_cast<double>(v.size());
  double acc = 0.0;
  for (double x : v) acc += (capped(x) - mean) * (capped(x) - mean);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

}  // namespace detail

// Caches the encode and the no-EC decode so that many policies can be
// evaluated against one stream (the allocation sweep does exactly that).
class SimContext {
 public:
  SimContext(VideoSequence source, const CodecConfig& cfg)
      : source_(std::move(source)), stream_(encode(source_, cfg)),
        no_ec_(decode(stream_, EcPolicy{})) {
    mse_wo_.reserve(stream_.frame_count);
    for (int poc = 0; poc < stream_.frame_count; ++poc)
      mse_wo_.push_back(plane_mse(source_.frames[poc], no_ec_.frames[poc]));
  }

  const EncodedStream& stream() const { return stream_; }
  const VideoSequence& no_ec_decode() const { return no_ec_; }

  SimulationReport run(const EcPolicy& policy) const {
    const VideoSequence with_ec = policy.lossless() ? no_ec_ : decode(stream_, policy);
    SimulationReport rep;
    rep.frame_count = stream_.frame_count;
    for (int poc = 0; poc < stream_.frame_count; ++poc) {
      const int lvl = level_of_poc(poc);
      const double mw = plane_mse(source_.frames[poc], with_ec.frames[poc]);
      const double pw = psnr_from_mse(mw);
      const double pwo = psnr_from_mse(mse_wo_[poc]);
      const double d = detail::capped(pwo) - detail::capped(pw);
      rep.level.push_back(lvl);
      rep.mse_wo.push_back(mse_wo_[poc]);
      rep.mse_w.push_back(mw);
      rep.psnr_wo.push_back(pwo);
      rep.psnr_w.push_back(pw);
      rep.delta_psnr.push_back(d);
      rep.mean_delta_by_level[lvl] += d;
      ++rep.frames_by_level[lvl];
      rep.mean_delta += d;
    }
    for (int l = 0; l < 4; ++l)
      if (rep.frames_by_level[l]) rep.mean_delta_by_level[l] /= rep.frames_by_level[l];
    rep.mean_delta /= rep.frame_count;
    rep.sd_psnr_w = detail::stddev(rep.psnr_w);
    rep.sd_psnr_wo = detail::stddev(rep.psnr_wo);
    return rep;
  }

 private:
  VideoSequence source_;
  EncodedStream stream_;
  VideoSequence no_ec_;
  std::vector<double> mse_wo_;
};

inline SimulationReport simulate(const VideoSequence& seq, const CodecConfig& cfg,
                                 const EcPolicy& policy) {
  return SimContext(seq, cfg).run(policy);
}

}  // namespace ecalloc

#endif  // ECALLOC_GOP_SIM_HPP
