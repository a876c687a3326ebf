#ifndef ECALLOC_REPORT_IO_HPP
#define ECALLOC_REPORT_IO_HPP

#include <cstdint>
#include <fstream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "ecalloc/allocator.hpp"
#include "ecalloc/analytic_model.hpp"
#include "ecalloc/gop_sim.hpp"

namespace ecalloc {

constexpr const char* kToolVersion = "0.1.0";

// FNV-1a over the canonical config string; stamped into every emitted file so
// outputs can be traced back to the exact invocation.
inline uint64_t config_hash(const std::string& canonical) {
  uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

struct OutputMeta {
  std::string config;  // canonical config string
  std::string prng = "splitmix64";

  nlohmann::json to_json() const {
    char hex[20];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(config_hash(config)));
    return {{"tool_version", kToolVersion}, {"config_hash", hex}, {"prng", prng}};
  }

  void write_csv_header(std::ostream& out) const {
    out << "# tool_version=" << kToolVersion << " config_hash="
        << to_json()["config_hash"].get<std::string>() << '\n';
  }
};

inline nlohmann::json report_to_json(const SimulationReport& rep) {
  nlohmann::json frames = nlohmann::json::array();
  for (int i = 0; i < rep.frame_count; ++i) {
    frames.push_back({{"poc", i},
                      {"level", rep.level[i]},
                      {"psnr_wo", detail::capped(rep.psnr_wo[i])},
                      {"psnr_w", detail::capped(rep.psnr_w[i])},
                      {"delta_psnr", rep.delta_psnr[i]},
                      {"mse_wo", rep.mse_wo[i]},
                      {"mse_w", rep.mse_w[i]}});
  }
  return {{"schema", "ecalloc-sim-report-v1"},
          {"frames", frames},
          {"mean_delta_psnr_by_level", rep.mean_delta_by_level},
          {"frames_by_level", rep.frames_by_level},
          {"mean_delta_psnr", rep.mean_delta},
          {"sd_psnr_w", rep.sd_psnr_w},
          {"sd_psnr_wo", rep.sd_psnr_wo}};
}

inline void write_report_csv(std::ostream& out, const SimulationReport& rep,
                             const OutputMeta& meta) {
  meta.write_csv_header(out);
  out << "poc,level,psnr_wo,psnr_w,delta_psnr,mse_wo,mse_w\n";
  for (int i = 0; i < rep.frame_count; ++i) {
    out << i << ',' << rep.level[i] << ',' << csv_float(rep.psnr_wo[i]) << ','
        << csv_float(rep.psnr_w[i]) << ',' << csv_float(rep.delta_psnr[i]) << ','
        << csv_float(rep.mse_wo[i]) << ',' << csv_float(rep.mse_w[i]) << '\n';
  }
}

inline nlohmann::json curve_to_json(const AllocationCurve& curve) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : curve)
    rows.push_back({{"target_seq_drr", e.target},
                    {"drr1_pct", e.alloc.p1},
                    {"drr2_pct", e.alloc.p2},
                    {"drr3_pct", e.alloc.p3},
                    {"mean_delta_psnr", e.mean_delta_psnr}});
  return {{"schema", "ecalloc-opda-curve-v1"}, {"rows", rows}};
}

inline void write_curve_csv(std::ostream& out, const AllocationCurve& curve,
                            const OutputMeta& meta) {
  meta.write_csv_header(out);
  out << "target_seq_drr,drr1_pct,drr2_pct,drr3_pct,mean_delta_psnr\n";
  for (const auto& e : curve)
    out << csv_float(e.target) << ',' << e.alloc.p1 << ',' << e.alloc.p2 << ','
        << e.alloc.p3 << ',' << csv_float(e.mean_delta_psnr) << '\n';
}

inline nlohmann::json fit_to_json(const FopdaFit& fit) {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : fit.segments)
    segs.push_back({{"x_lo", s.x_lo},
                    {"x_hi", s.x_hi},
                    {"slope", s.slope},
                    {"intercept", s.intercept}});
  return {{"schema", "ecalloc-fopda-v1"}, {"segments", segs}};
}

inline FopdaFit fit_from_json(const nlohmann::json& j) {
  if (j.value("schema", "") != "ecalloc-fopda-v1")
    throw AllocError("fit_from_json: unknown schema");
  FopdaFit fit;
  for (const auto& s : j.at("segments")) {
    FopdaFit::Segment seg;
    seg.x_lo = s.at("x_lo");
    seg.x_hi = s.at("x_hi");
    seg.slope = s.at("slope");
    seg.intercept = s.at("intercept");
    fit.segments.push_back(seg);
  }
  return fit;
}

inline AllocationCurve curve_from_json(const nlohmann::json& j) {
  if (j.value("schema", "") != "ecalloc-opda-curve-v1")
    throw AllocError("curve_from_json: unknown schema");
  AllocationCurve curve;
  for (const auto& r : j.at("rows"))
    curve.push_back({r.at("target_seq_drr"),
                     {r.at("drr1_pct"), r.at("drr2_pct"), r.at("drr3_pct")},
                     r.at("mean_delta_psnr")});
  return curve;
}

inline nlohmann::json comparison_to_json(const std::vector<ComparisonRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows)
    out.push_back({{"target_seq_drr", r.target},
                   {"strategy", r.strategy},
                   {"drr1_pct", r.alloc.p1},
                   {"drr2_pct", r.alloc.p2},
                   {"drr3_pct", r.alloc.p3},
                   {"mean_delta_psnr", r.mean_delta_psnr},
                   {"sd_psnr", r.sd_psnr}});
  return {{"schema", "ecalloc-comparison-v1"}, {"rows", out}};
}

inline void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows,
                                 const OutputMeta& meta) {
  meta.write_csv_header(out);
  out << "target_seq_drr,strategy,drr1_pct,drr2_pct,drr3_pct,mean_delta_psnr,sd_psnr\n";
  for (const auto& r : rows)
    out << csv_float(r.target) << ',' << r.strategy << ',' << r.alloc.p1 << ','
        << r.alloc.p2 << ',' << r.alloc.p3 << ',' << csv_float(r.mean_delta_psnr)
        << ',' << csv_float(r.sd_psnr) << '\n';
}

}  // namespace ecalloc

#endif  // ECALLOC_REPORT_IO_HPP
