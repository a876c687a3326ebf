#ifndef ECALLOC_ALLOCATOR_HPP
#define ECALLOC_ALLOCATOR_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ecalloc/gop_sim.hpp"

namespace ecalloc {

// Frame-level DRR allocation: enumerate the (DRR1, DRR2, DRR3) surface,
// search isoDRR bands for the optimal allocation per target SeqDRR, fit the
// piecewise-linear simplification, and evaluate the baselines.

struct AllocError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Per-level DRR in integer percent on the even grid {0, 2, ..., 70}.
struct DrrAllocation {
  int p1 = 0, p2 = 0, p3 = 0;

  auto operator<=>(const DrrAllocation&) const = default;
};

constexpr int kMaxDrrPct = 70;
constexpr int kSeqDrrDenom = 800;  // seq_drr = (p1 + 2*p2 + 4*p3) / 800
constexpr int kIsoBandHalfWidthNum = 4;  // +-0.5% SeqDRR in the same units

inline void validate_allocation(const DrrAllocation& a) {
  for (int p : {a.p1, a.p2, a.p3})
    if (p < 0 || p > kMaxDrrPct || p % 2 != 0)
      throw AllocError("DrrAllocation: level DRR off the even [0,70]% grid");
}

// Exact integer numerator of the sequence DRR (level populations 1/8, 2/8,
// 4/8 of the GOP).
inline int seq_drr_num(const DrrAllocation& a) { return a.p1 + 2 * a.p2 + 4 * a.p3; }

inline double seq_drr(const DrrAllocation& a) {
  return static_cast<double>(seq_drr_num(a)) / kSeqDrrDenom;
}

constexpr double kMaxSeqDrr = 490.0 / kSeqDrrDenom;  // 0.6125

inline bool in_iso_band(const DrrAllocation& a, double target) {
  return std::abs(seq_drr_num(a) - kSeqDrrDenom * target) <=
         kIsoBandHalfWidthNum + 1e-9;
}

struct SurfaceEntry {
  double mean_delta_psnr = 0.0;  // per-frame average over level0..3
  double sd_psnr = 0.0;
};

class AllocationSurface {
 public:
  explicit AllocationSurface(int grid_step_pct = 10) : grid_step_(grid_step_pct) {
    if (grid_step_pct != 2 && grid_step_pct != 10)
      throw AllocError("AllocationSurface: grid step must be 2% or 10%");
  }

  int grid_step_pct() const { return grid_step_; }

  std::vector<int> grid_values() const {
    std::vector<int> v;
    for (int p = 0; p <= kMaxDrrPct; p += grid_step_) v.push_back(p);
    return v;
  }

  bool contains(const DrrAllocation& a) const { return entries_.count(key(a)) != 0; }

  const SurfaceEntry& at(const DrrAllocation& a) const {
    auto it = entries_.find(key(a));
    if (it == entries_.end()) throw AllocError("AllocationSurface: missing entry");
    return it->second;
  }

  void insert(const DrrAllocation& a, const SurfaceEntry& e) {
    validate_allocation(a);
    entries_[key(a)] = e;
  }

  size_t size() const { return entries_.size(); }

  template <typename F>
  void for_each(F&& f) const {
    for (const auto& [k, e] : entries_)
      f(DrrAllocation{k / 10000, k / 100 % 100, k % 100}, e);
  }

 private:
  static int key(const DrrAllocation& a) { return a.p1 * 10000 + a.p2 * 100 + a.p3; }

  int grid_step_;
  std::map<int, SurfaceEntry> entries_;
};

// ---- surface persistence (line-delimited JSON, resumable) ----

inline void save_surface(const std::string& path, const AllocationSurface& surface,
                         const nlohmann::json& provenance = {}) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw AllocError("save_surface: cannot open " + path);
  nlohmann::json meta{{"schema", "ecalloc-surface-v1"},
                      {"grid_step_pct", surface.grid_step_pct()},
                      {"provenance", provenance}};
  out << meta.dump() << '\n';
  surface.for_each([&](const DrrAllocation& a, const SurfaceEntry& e) {
    nlohmann::json row{{"p1", a.p1}, {"p2", a.p2}, {"p3", a.p3},
                       {"mean_delta_psnr", e.mean_delta_psnr}, {"sd_psnr", e.sd_psnr}};
    out << row.dump() << '\n';
  });
}

inline AllocationSurface load_surface(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw AllocError("load_surface: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw AllocError("load_surface: empty file");
  const auto meta = nlohmann::json::parse(line);
  if (meta.value("schema", "") != "ecalloc-surface-v1")
    throw AllocError("load_surface: unknown schema");
  AllocationSurface surface(meta.at("grid_step_pct").get<int>());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto row = nlohmann::json::parse(line);
    surface.insert({row.at("p1"), row.at("p2"), row.at("p3")},
                   {row.at("mean_delta_psnr"), row.at("sd_psnr")});
  }
  return surface;
}

struct SweepOptions {
  int grid_step_pct = 10;
  int jobs = 1;
  std::string store_path;  // empty: in-memory only
  nlohmann::json provenance;
  std::function<void(size_t done, size_t total)> progress;
};

// One simulation per grid triple that is not already present. Triples are
// processed in parallel batches but results are committed in canonical order,
// so the store content is independent of the worker count.
inline AllocationSurface enumerate_surface(const SimContext& ctx,
                                           const SweepOptions& opt) {
  AllocationSurface surface(opt.grid_step_pct);
  if (!opt.store_path.empty()) {
    std::ifstream probe(opt.store_path);
    if (probe.good()) {
      surface = load_surface(opt.store_path);
      if (surface.grid_step_pct() != opt.grid_step_pct)
        throw AllocError("enumerate_surface: store grid step mismatch");
    }
  }

  std::vector<DrrAllocation> todo;
  const auto grid = surface.grid_values();
  for (int p1 : grid)
    for (int p2 : grid)
      for (int p3 : grid) {
        const DrrAllocation a{p1, p2, p3};
        if (!surface.contains(a)) todo.push_back(a);
      }

  const size_t total = todo.size();
  size_t done = 0;
  const size_t batch = std::max<size_t>(1, static_cast<size_t>(opt.jobs) * 8);
  for (size_t start = 0; start < todo.size(); start += batch) {
    const size_t end = std::min(todo.size(), start + batch);
    std::vector<SurfaceEntry> results(end - start);
    std::atomic<size_t> next{start};
    auto worker = [&] {
      for (size_t i = next.fetch_add(1); i < end; i = next.fetch_add(1)) {
        const auto& a = todo[i];
        const auto rep = ctx.run(
            EcPolicy::from_drr(a.p1 / 100.0, a.p2 / 100.0, a.p3 / 100.0));
        results[i - start] = {rep.mean_delta, rep.sd_psnr_w};
      }
    };
    std::vector<std::thread> pool;
    const int workers = std::max(1, opt.jobs);
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    for (size_t i = start; i < end; ++i) surface.insert(todo[i], results[i - start]);
    if (!opt.store_path.empty()) save_surface(opt.store_path, surface, opt.provenance);
    done += end - start;
    if (opt.progress) opt.progress(done, total);
  }
  return surface;
}

// ---- isoDRR search ----

struct OpdaEntry {
  double target = 0.0;
  DrrAllocation alloc;
  double mean_delta_psnr = 0.0;
};

using AllocationCurve = std::vector<OpdaEntry>;

// Minimum mean delta-PSNR over (drr2, drr3) inside the isoDRR band at a fixed
// drr1. Ties go to lower drr2, then lower drr3.
inline std::optional<OpdaEntry> min_delta_psnr_23(const AllocationSurface& surface,
                                                  int p1, double target) {
  std::optional<OpdaEntry> best;
  for (int p2 : surface.grid_values()) {
    for (int p3 : surface.grid_values()) {
      const DrrAllocation a{p1, p2, p3};
      if (!in_iso_band(a, target) || !surface.contains(a)) continue;
      const double d = surface.at(a).mean_delta_psnr;
      if (!best || d < best->mean_delta_psnr) best = OpdaEntry{target, a, d};
    }
  }
  return best;
}

// Optimal allocation for a target SeqDRR: minimum over drr1 of the band
// minima. Ties break toward lower drr1, then lower drr2.
inline std::optional<OpdaEntry> opda_search(const AllocationSurface& surface,
                                            double target) {
  std::optional<OpdaEntry> best;
  for (int p1 : surface.grid_values()) {
    const auto cand = min_delta_psnr_23(surface, p1, target);
    if (cand && (!best || cand->mean_delta_psnr < best->mean_delta_psnr)) best = cand;
  }
  return best;
}

inline AllocationCurve build_opda_curve(const AllocationSurface& surface,
                                        const std::vector<double>& targets) {
  AllocationCurve curve;
  for (double t : targets) {
    if (auto e = opda_search(surface, t)) curve.push_back(*e);
  }
  return curve;
}

// 1% target grid covering the feasible SeqDRR range.
inline std::vector<double> default_targets() {
  std::vector<double> t;
  for (int pct = 0; pct <= 61; ++pct) t.push_back(pct / 100.0);
  return t;
}

// ---- baselines ----

// Near-even allocation on the 2% grid whose SeqDRR matches the target
// exactly in band units (components differ by at most 2%).
inline DrrAllocation baseline_evda(double target) {
  if (target < 0.0) throw AllocError("baseline_evda: negative target");
  long tn = std::lround(kSeqDrrDenom * target);
  if (tn > 7L * kMaxDrrPct)
    throw AllocError("baseline_evda: target needs per-level DRR above 70%");
  tn -= tn % 2;  // achievable numerators are even
  const long fl = tn / 7;
  const long base = fl - fl % 2;
  long rem = tn - 7 * base;
  DrrAllocation a{static_cast<int>(base), static_cast<int>(base), static_cast<int>(base)};
  if (rem >= 8) { a.p3 += 2; rem -= 8; }
  if (rem >= 4) { a.p2 += 2; rem -= 4; }
  if (rem >= 2) { a.p1 += 2; rem -= 2; }
  validate_allocation(a);
  return a;
}

// Loss only in the non-reference level: (0, 0, 2*target) snapped to the grid.
inline DrrAllocation baseline_l3da(double target) {
  if (target < 0.0) throw AllocError("baseline_l3da: negative target");
  const long p3 = 2 * std::lround(100.0 * target);
  if (p3 > kMaxDrrPct)
    throw AllocError("baseline_l3da: target above the 35% l3DA frontier");
  return {0, 0, static_cast<int>(p3)};
}

// ---- piecewise-linear fit of the opDA curve (fopDA) ----

struct FopdaFit {
  struct Segment {
    double x_lo = 0.0, x_hi = 0.0;
    std::array<double, 3> slope{}, intercept{};  // per level, fractions
  };
  std::vector<Segment> segments;

  std::array<double, 3> eval_raw(double target) const {
    if (segments.empty()) throw AllocError("FopdaFit: empty fit");
    const Segment* seg = &segments.back();
    for (const auto& s : segments)
      if (target <= s.x_hi + 1e-12) { seg = &s; break; }
    std::array<double, 3> y;
    for (int l = 0; l < 3; ++l) y[l] = seg->slope[l] * target + seg->intercept[l];
    return y;
  }

  // clamp to [0, 0.70] and snap to the 2% grid
  DrrAllocation eval(double target) const {
    const auto y = eval_raw(target);
    std::array<int, 3> p;
    for (int l = 0; l < 3; ++l) {
      const double c = std::clamp(y[l], 0.0, 0.70);
      p[l] = 2 * static_cast<int>(std::lround(c * 50.0));
    }
    return {p[0], p[1], p[2]};
  }
};

namespace detail {

struct LineFit {
  double slope = 0.0, intercept = 0.0, sse = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y,
                        size_t i, size_t j) {
  const double n = static_cast<double>(j - i + 1);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t t = i; t <= j; ++t) {
    sx += x[t];
    sy += y[t];
    sxx += x[t] * x[t];
    sxy += x[t] * y[t];
  }
  LineFit f;
  const double den = n * sxx - sx * sx;
  if (std::abs(den) < 1e-15) {
    f.slope = 0.0;
    f.intercept = sy / n;
  } else {
    f.slope = (n * sxy - sx * sy) / den;
    f.intercept = (sy - f.slope * sx) / n;
  }
  for (size_t t = i; t <= j; ++t) {
    const double e = y[t] - (f.slope * x[t] + f.intercept);
    f.sse += e * e;
  }
  return f;
}

}  // namespace detail

// Least-squares piecewise-linear fit of the three per-level curves with
// shared breakpoints chosen by dynamic programming over the target grid.
// Each segment covers at least two curve points.
inline FopdaFit fit_fopda(const AllocationCurve& curve, int segment_count = 3) {
  const size_t n = curve.size();
  if (segment_count < 1) throw AllocError("fit_fopda: segment_count must be >= 1");
  if (n < 2 * static_cast<size_t>(segment_count))
    throw AllocError("fit_fopda: fewer curve points than 2 x segment_count");

  std::vector<double> x(n);
  std::array<std::vector<double>, 3> y;
  for (auto& v : y) v.resize(n);
  for (size_t i = 0; i < n; ++i) {
    x[i] = curve[i].target;
    y[0][i] = curve[i].alloc.p1 / 100.0;
    y[1][i] = curve[i].alloc.p2 / 100.0;
    y[2][i] = curve[i].alloc.p3 / 100.0;
  }

  // cost[i][j]: combined SSE of the three level lines over points i..j
  const double kInf = 1e300;
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, kInf));
  for (size_t i = 0; i + 1 < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      double c = 0.0;
      for (int l = 0; l < 3; ++l) c += detail::fit_line(x, y[l], i, j).sse;
      cost[i][j] = c;
    }

  const int S = segment_count;
  std::vector<std::vector<double>> best(S + 1, std::vector<double>(n, kInf));
  std::vector<std::vector<size_t>> cut(S + 1, std::vector<size_t>(n, 0));
  for (size_t j = 1; j < n; ++j) best[1][j] = cost[0][j];
  for (int s = 2; s <= S; ++s)
    for (size_t j = 1; j < n; ++j)
      for (size_t i = 2; i + 1 <= j; ++i) {  // previous segments cover 0..i-1
        if (best[s - 1][i - 1] >= kInf) continue;
        const double c = best[s - 1][i - 1] + cost[i][j];
        if (c < best[s][j]) {
          best[s][j] = c;
          cut[s][j] = i;
        }
      }
  if (best[S][n - 1] >= kInf) throw AllocError("fit_fopda: infeasible segmentation");

  std::vector<std::pair<size_t, size_t>> spans;
  size_t j = n - 1;
  for (int s = S; s >= 1; --s) {
    const size_t i = s == 1 ? 0 : cut[s][j];
    spans.push_back({i, j});
    if (s > 1) j = i - 1;
  }
  std::reverse(spans.begin(), spans.end());

  FopdaFit fit;
  for (const auto& [i, jj] : spans) {
    FopdaFit::Segment seg;
    seg.x_lo = x[i];
    seg.x_hi = x[jj];
    for (int l = 0; l < 3; ++l) {
      const auto lf = detail::fit_line(x, y[l], i, jj);
      seg.slope[l] = lf.slope;
      seg.intercept[l] = lf.intercept;
    }
    fit.segments.push_back(seg);
  }
  return fit;
}

// Pointwise mean of per-Qp opDA curves sharing the same target grid.
inline AllocationCurve mean_curves(const std::vector<AllocationCurve>& curves) {
  if (curves.empty()) throw AllocError("mean_curves: no curves");
  AllocationCurve out;
  for (size_t i = 0; i < curves.front().size(); ++i) {
    double p1 = 0, p2 = 0, p3 = 0, d = 0;
    for (const auto& c : curves) {
      if (c.size() != curves.front().size() ||
          std::abs(c[i].target - curves.front()[i].target) > 1e-9)
        throw AllocError("mean_curves: target grids differ");
      p1 += c[i].alloc.p1;
      p2 += c[i].alloc.p2;
      p3 += c[i].alloc.p3;
      d += c[i].mean_delta_psnr;
    }
    const double n = static_cast<double>(curves.size());
    // mean allocation snapped back to the even grid
    auto snap = [&](double v) { return 2 * static_cast<int>(std::lround(v / n / 2.0)); };
    out.push_back({curves.front()[i].target, {snap(p1), snap(p2), snap(p3)}, d / n});
  }
  return out;
}

// ---- strategy comparison ----

struct ComparisonRow {
  double target = 0.0;
  std::string strategy;
  DrrAllocation alloc;
  double mean_delta_psnr = 0.0;
  double sd_psnr = 0.0;
};

// Runs each strategy's allocation through the simulator on the (test)
// context. l3DA rows are omitted beyond its 35% frontier; opDA rows require a
// curve entry at the target.
inline std::vector<ComparisonRow> evaluate_allocations(
    const SimContext& ctx, const AllocationCurve& opda, const FopdaFit& fopda,
    const std::vector<double>& targets) {
  auto run = [&](double t, const std::string& name, const DrrAllocation& a) {
    const auto rep = ctx.run(EcPolicy::from_drr(a.p1 / 100.0, a.p2 / 100.0, a.p3 / 100.0));
    return ComparisonRow{t, name, a, rep.mean_delta, rep.sd_psnr_w};
  };
  std::vector<ComparisonRow> rows;
  for (double t : targets) {
    for (const auto& e : opda)
      if (std::abs(e.target - t) < 1e-9) {
        rows.push_back(run(t, "opDA", e.alloc));
        break;
      }
    rows.push_back(run(t, "fopDA", fopda.eval(t)));
    rows.push_back(run(t, "evDA", baseline_evda(t)));
    if (200.0 * t <= kMaxDrrPct + 1e-9) rows.push_back(run(t, "l3DA", baseline_l3da(t)));
  }
  return rows;
}

}  // namespace ecalloc

#endif  // ECALLOC_ALLOCATOR_HPP
