#ifndef ECALLOC_ANALYTIC_MODEL_HPP
#define ECALLOC_ANALYTIC_MODEL_HPP

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ecalloc {

// Closed-form model of the PSNR degradation caused by decoder-side lossy
// embedded compression: the in-frame term, the one-hop propagated-error upper
// bound, and the crossover quantity comparing non-reference-only against even
// allocation.

constexpr double kMaxSampleValue = 255.0;
constexpr double kPsnrInfSentinelCsv = 99.99;  // serialized stand-in for MSE 0

inline double psnr_from_mse(double mse) {
  if (mse < 0.0) throw std::invalid_argument("psnr_from_mse: negative MSE");
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(kMaxSampleValue * kMaxSampleValue / mse);
}

inline double mse_from_psnr(double psnr_db) {
  return kMaxSampleValue * kMaxSampleValue / std::pow(10.0, psnr_db / 10.0);
}

// E[e^2] of the truncation error, uniform over 2^M values: (2^(2M-1)+1)/6.
// Zero for M=0 (lossless).
inline double ec_error_second_moment(int m) {
  if (m < 0 || m > 7) throw std::invalid_argument("ec_error_second_moment: M out of range");
  if (m == 0) return 0.0;
  return std::pow(4.0, m) / 12.0 + 1.0 / 6.0;
}

// In-frame degradation of the current frame under M-bit truncation.
inline double delta_psnr_current(double mse_wo, int m) {
  if (mse_wo <= 0.0) throw std::invalid_argument("delta_psnr_current: MSE must be positive");
  if (m == 0) return 0.0;
  return 10.0 * std::log10((mse_wo + ec_error_second_moment(m)) / mse_wo);
}

// Upper bound when one reference hop of propagated error is included.
inline double delta_psnr_propagated_bound(double mse_wo, int m) {
  if (mse_wo <= 0.0)
    throw std::invalid_argument("delta_psnr_propagated_bound: MSE must be positive");
  if (m == 0) return 0.0;  // lossless convention; the bound form assumes M >= 1
  return 10.0 * std::log10((mse_wo + std::pow(4.0, m) / 3.0 + 2.0 / 3.0) / mse_wo);
}

struct PropagationScenario {
  double mse_ref = 0.0;  // MSE without EC, reference frame
  double mse_cur = 0.0;  // MSE without EC, current frame
  int m = 0;
};

// Lower bound of the average-quality gap between allocating only on the
// non-reference frame (truncated by 2M bits) and allocating evenly (M bits on
// both frames). Positive means even allocation wins.
inline double delta2_psnr_lower_bound(const PropagationScenario& s) {
  if (s.mse_ref <= 0.0 || s.mse_cur <= 0.0)
    throw std::invalid_argument("delta2_psnr_lower_bound: MSE must be positive");
  if (s.m == 0) return 0.0;
  const double nonref_term = std::pow(4.0, 2 * s.m) / 12.0 + 1.0 / 6.0;
  const double even_ref = std::pow(4.0, s.m) / 12.0 + 1.0 / 6.0;
  const double even_cur = std::pow(4.0, s.m) / 3.0 + 2.0 / 3.0;
  return 10.0 * std::log10(s.mse_ref * (s.mse_cur + nonref_term) /
                           ((s.mse_ref + even_ref) * (s.mse_cur + even_cur)));
}

// ---- tabular emission ----

struct ModelCurveRow {
  double psnr_wo;  // reference-frame quality anchor of the row group
  int m;
  double drr;  // M/8 at 8-bit depth
  double delta_psnr;
  double propagated_bound;
  double delta2_lower_bound;  // computed with psnr_cur = psnr_wo - gap
};

struct ModelCurveConfig {
  std::vector<double> psnr_wo_list{30.0, 35.0, 40.0};
  double psnr_gap = 1.0;  // PSNR_wo,r - PSNR_wo,c
  int max_m = 7;
};

inline std::vector<ModelCurveRow> emit_model_curves(const ModelCurveConfig& cfg) {
  std::vector<ModelCurveRow> rows;
  for (double psnr : cfg.psnr_wo_list) {
    const double mse_r = mse_from_psnr(psnr);
    const double mse_c = mse_from_psnr(psnr - cfg.psnr_gap);
    for (int m = 0; m <= cfg.max_m; ++m) {
      rows.push_back({psnr, m, m / 8.0, delta_psnr_current(mse_r, m),
                      delta_psnr_propagated_bound(mse_r, m),
                      delta2_psnr_lower_bound({mse_r, mse_c, m})});
    }
  }
  return rows;
}

// 6 significant digits; +inf as the documented sentinel
inline std::string csv_float(double v) {
  if (std::isinf(v)) v = kPsnrInfSentinelCsv;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline void write_model_csv(std::ostream& out, const std::vector<ModelCurveRow>& rows) {
  out << "psnr_wo,M,drr,delta_psnr,propagated_bound,delta2_lower_bound\n";
  for (const auto& r : rows) {
    out << csv_float(r.psnr_wo) << ',' << r.m << ',' << csv_float(r.drr) << ','
        << csv_float(r.delta_psnr) << ',' << csv_float(r.propagated_bound) << ','
        << csv_float(r.delta2_lower_bound) << '\n';
  }
}

}  // namespace ecalloc

#endif  // ECALLOC_ANALYTIC_MODEL_HPP
