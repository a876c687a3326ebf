// ecalloc: decoder-side lossy embedded compression with fixed DRR, the
// analytic quality-degradation model, and GOP-level DRR allocation search.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ecalloc/allocator.hpp"
#include "ecalloc/analytic_model.hpp"
#include "ecalloc/ec_codec.hpp"
#include "ecalloc/gop_sim.hpp"
#include "ecalloc/pixel_io.hpp"
#include "ecalloc/report_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitRuntimeError = 3;

struct InputOpts {
  std::string y4m_path;
  std::string raw_path;
  int raw_width = 0, raw_height = 0, raw_frames = 0;
  bool use_synth = false;
  ecalloc::SynthSpec synth;

  void add_to(CLI::App* cmd) {
    auto* y4m = cmd->add_option("--y4m", y4m_path, "Y4M input file");
    auto* raw = cmd->add_option("--raw", raw_path, "headerless I420 input file");
    cmd->add_option("--raw-width", raw_width, "raw input width")->needs(raw);
    cmd->add_option("--raw-height", raw_height, "raw input height")->needs(raw);
    cmd->add_option("--raw-frames", raw_frames, "raw input frame count")->needs(raw);
    auto* synth_flag = cmd->add_flag("--synth", use_synth, "use a synthetic sequence");
    cmd->add_option("--width", synth.width, "synthetic width")->capture_default_str();
    cmd->add_option("--height", synth.height, "synthetic height")->capture_default_str();
    cmd->add_option("--frames", synth.frame_count, "synthetic frame count")
        ->capture_default_str();
    cmd->add_option("--seed", synth.seed, "synthesis seed")->capture_default_str();
    cmd->add_option("--motion", synth.motion_px_per_frame, "synthetic motion px/frame")
        ->capture_default_str();
    cmd->add_option("--noise", synth.noise_amplitude, "synthetic noise amplitude")
        ->capture_default_str();
    y4m->excludes(raw)->excludes(synth_flag);
    raw->excludes(synth_flag);
  }

  ecalloc::VideoSequence load() const {
    if (!y4m_path.empty()) return ecalloc::read_y4m_file(y4m_path);
    if (!raw_path.empty()) {
      if (raw_width <= 0 || raw_height <= 0 || raw_frames <= 0)
        throw CLI::ValidationError("--raw requires --raw-width/--raw-height/--raw-frames");
      return ecalloc::read_raw_yuv(raw_path, raw_width, raw_height, raw_frames);
    }
    if (use_synth) return ecalloc::synth_sequence(synth);
    throw CLI::ValidationError("exactly one of --y4m, --raw, --synth is required");
  }

  std::string describe() const {
    std::ostringstream s;
    if (!y4m_path.empty()) s << "y4m:" << y4m_path;
    else if (!raw_path.empty())
      s << "raw:" << raw_path << ':' << raw_width << 'x' << raw_height << 'x' << raw_frames;
    else
      s << "synth:" << synth.width << 'x' << synth.height << 'x' << synth.frame_count
        << ":seed=" << synth.seed << ":motion=" << synth.motion_px_per_frame
        << ":noise=" << synth.noise_amplitude;
    return s.str();
  }
};

std::string default_out_dir() {
  const char* env = std::getenv("ECALLOC_OUT");
  return env && *env ? env : ".";
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ecalloc::IoError("cannot open output file " + path.string());
  out << content;
}

std::vector<double> default_test_targets() {
  return {0.0, 0.10, 0.175, 0.2625, 0.35, 0.45, 0.55};
}

int run_model(const std::string& out_dir, const std::vector<double>& psnr_list,
              double gap) {
  ecalloc::ModelCurveConfig cfg;
  if (!psnr_list.empty()) cfg.psnr_wo_list = psnr_list;
  cfg.psnr_gap = gap;
  ecalloc::OutputMeta meta;
  {
    std::ostringstream c;
    c << "model gap=" << gap << " psnr=";
    for (double p : psnr_list) c << p << ',';
    meta.config = c.str();
  }

  const auto rows = ecalloc::emit_model_curves(cfg);
  {
    std::ostringstream s;
    meta.write_csv_header(s);
    ecalloc::write_model_csv(s, rows);
    write_text_file(fs::path(out_dir) / "model_delta_psnr.csv", s.str());
  }
  {
    // crossover view: average quality of (reference, current) pair under even
    // vs non-reference-only allocation, plus the second-order lower bound
    std::ostringstream s;
    meta.write_csv_header(s);
    s << "psnr_r,psnr_c,M,drr,avg_delta_even_bound,avg_delta_nonref,delta2_lower_bound\n";
    for (double psnr : cfg.psnr_wo_list) {
      const double mse_r = ecalloc::mse_from_psnr(psnr);
      const double mse_c = ecalloc::mse_from_psnr(psnr - gap);
      for (int m = 0; m <= 7; ++m) {
        const double even =
            (ecalloc::delta_psnr_current(mse_r, m) +
             ecalloc::delta_psnr_propagated_bound(mse_c, m)) / 2.0;
        const double nonref =
            m == 0 ? 0.0
                   : 5.0 * std::log10((mse_c + std::pow(4.0, 2 * m) / 12.0 + 1.0 / 6.0) /
                                      mse_c);
        s << ecalloc::csv_float(psnr) << ',' << ecalloc::csv_float(psnr - gap) << ','
          << m << ',' << ecalloc::csv_float(m / 8.0) << ',' << ecalloc::csv_float(even)
          << ',' << ecalloc::csv_float(nonref) << ','
          << ecalloc::csv_float(ecalloc::delta2_psnr_lower_bound({mse_r, mse_c, m}))
          << '\n';
      }
    }
    write_text_file(fs::path(out_dir) / "model_delta2_bound.csv", s.str());
  }
  std::cout << "wrote " << out_dir << "/model_delta_psnr.csv and model_delta2_bound.csv\n";
  return 0;
}

int run_synth(const InputOpts& in, const std::string& out_path) {
  const auto seq = ecalloc::synth_sequence(in.synth);
  ecalloc::write_y4m_file(out_path, seq);
  ecalloc::OutputMeta meta;
  meta.config = in.describe();
  json j = meta.to_json();
  j["frames"] = in.synth.frame_count;
  j["width"] = in.synth.width;
  j["height"] = in.synth.height;
  write_text_file(out_path + ".json", j.dump(2) + "\n");
  std::cout << "wrote " << out_path << " (" << in.synth.frame_count << " frames)\n";
  return 0;
}

int run_compress(const InputOpts& in, double target, const std::string& out_dir) {
  const auto seq = in.load();
  if (seq.frames.empty()) throw ecalloc::IoError("compress: empty input");
  ecalloc::OutputMeta meta;
  meta.config = "compress target=" + std::to_string(target) + " " + in.describe();

  json per_frame = json::array();
  std::array<long, 8> hist{};
  long shortfalls = 0;
  double drr_sum = 0.0;
  std::ostringstream csv;
  meta.write_csv_header(csv);
  csv << "frame,psnr,mean_achieved_drr,shortfall_count\n";
  for (size_t t = 0; t < seq.frames.size(); ++t) {
    const auto res = ecalloc::compress_frame(seq.frames[t], target);
    const double psnr =
        ecalloc::psnr_from_mse(ecalloc::plane_mse(seq.frames[t], res.reconstructed));
    for (int m = 0; m < 8; ++m) hist[m] += res.stats.m_histogram[m];
    shortfalls += res.stats.shortfall_count;
    drr_sum += res.stats.mean_achieved_drr;
    per_frame.push_back({{"frame", t},
                         {"psnr", ecalloc::detail::capped(psnr)},
                         {"mean_achieved_drr", res.stats.mean_achieved_drr},
                         {"shortfall_count", res.stats.shortfall_count}});
    csv << t << ',' << ecalloc::csv_float(psnr) << ','
        << ecalloc::csv_float(res.stats.mean_achieved_drr) << ','
        << res.stats.shortfall_count << '\n';
  }
  json j{{"schema", "ecalloc-compress-report-v1"},
         {"meta", meta.to_json()},
         {"target_drr", target},
         {"mean_achieved_drr", drr_sum / static_cast<double>(seq.frames.size())},
         {"m_histogram", hist},
         {"shortfall_count", shortfalls},
         {"frames", per_frame}};
  write_text_file(fs::path(out_dir) / "compress_report.json", j.dump(2) + "\n");
  write_text_file(fs::path(out_dir) / "compress_report.csv", csv.str());
  std::cout << "mean achieved DRR " << drr_sum / static_cast<double>(seq.frames.size())
            << ", shortfalls " << shortfalls << '\n';
  return 0;
}

int run_simulate(const InputOpts& in, int qp, double d1, double d2, double d3,
                 const std::string& out_dir) {
  const auto seq = in.load();
  ecalloc::CodecConfig cfg;
  cfg.qp = qp;
  const auto rep =
      ecalloc::simulate(seq, cfg, ecalloc::EcPolicy::from_drr(d1, d2, d3));
  ecalloc::OutputMeta meta;
  {
    std::ostringstream c;
    c << "simulate qp=" << qp << " drr=" << d1 << '/' << d2 << '/' << d3 << ' '
      << in.describe();
    meta.config = c.str();
  }
  json j = ecalloc::report_to_json(rep);
  j["meta"] = meta.to_json();
  write_text_file(fs::path(out_dir) / "sim_report.json", j.dump(2) + "\n");
  std::ostringstream csv;
  ecalloc::write_report_csv(csv, rep, meta);
  write_text_file(fs::path(out_dir) / "sim_report.csv", csv.str());
  std::cout << "mean dPSNR " << rep.mean_delta << " dB, SD(PSNR) " << rep.sd_psnr_w
            << " dB\n";
  return 0;
}

int run_train(const InputOpts& in, std::vector<int> qps, int grid_step, int jobs,
              int segments, const std::string& out_dir) {
  const auto seq = in.load();
  if (qps.empty()) qps = {32};
  const auto targets = ecalloc::default_targets();
  std::vector<ecalloc::AllocationCurve> curves;
  ecalloc::OutputMeta meta;
  {
    std::ostringstream c;
    c << "train grid=" << grid_step << " qp=";
    for (int q : qps) c << q << ',';
    c << ' ' << in.describe();
    meta.config = c.str();
  }

  for (int qp : qps) {
    ecalloc::CodecConfig cfg;
    cfg.qp = qp;
    ecalloc::SimContext ctx(seq, cfg);
    ecalloc::SweepOptions opt;
    opt.grid_step_pct = grid_step;
    opt.jobs = jobs;
    opt.store_path = (fs::path(out_dir) / ("surface_qp" + std::to_string(qp) + ".jsonl")).string();
    opt.provenance = {{"qp", qp}, {"input", in.describe()}, {"meta", meta.to_json()}};
    opt.progress = [qp](size_t done, size_t total) {
      if (done == total || done % 256 == 0)
        std::cout << "qp " << qp << ": " << done << '/' << total << " sweep points\r"
                  << std::flush;
    };
    const auto surface = ecalloc::enumerate_surface(ctx, opt);
    std::cout << '\n';
    auto curve = ecalloc::build_opda_curve(surface, targets);
    {
      std::ostringstream csv;
      ecalloc::write_curve_csv(csv, curve, meta);
      write_text_file(fs::path(out_dir) / ("opda_qp" + std::to_string(qp) + ".csv"),
                      csv.str());
      json j = ecalloc::curve_to_json(curve);
      j["meta"] = meta.to_json();
      write_text_file(fs::path(out_dir) / ("opda_qp" + std::to_string(qp) + ".json"),
                      j.dump(2) + "\n");
    }
    curves.push_back(std::move(curve));
  }

  const auto merged = curves.size() == 1 ? curves.front() : ecalloc::mean_curves(curves);
  const auto fit = ecalloc::fit_fopda(merged, segments);
  json j = ecalloc::fit_to_json(fit);
  j["meta"] = meta.to_json();
  write_text_file(fs::path(out_dir) / "fopda.json", j.dump(2) + "\n");
  std::cout << "wrote surface/opda/fopda artifacts to " << out_dir << '\n';
  return 0;
}

int run_test(const InputOpts& in, int qp, const std::string& artifacts_dir,
             std::vector<double> targets, const std::string& out_dir) {
  const auto seq = in.load();
  if (targets.empty()) targets = default_test_targets();
  ecalloc::CodecConfig cfg;
  cfg.qp = qp;
  ecalloc::SimContext ctx(seq, cfg);

  const auto opda_path = fs::path(artifacts_dir) / ("opda_qp" + std::to_string(qp) + ".json");
  std::ifstream opda_in(opda_path);
  if (!opda_in) throw ecalloc::AllocError("test: missing trained artifact " + opda_path.string());
  const auto opda = ecalloc::curve_from_json(json::parse(opda_in));
  std::ifstream fopda_in(fs::path(artifacts_dir) / "fopda.json");
  if (!fopda_in) throw ecalloc::AllocError("test: missing trained artifact fopda.json");
  const auto fit = ecalloc::fit_from_json(json::parse(fopda_in));

  // match requested targets to curve entries at 1% precision
  ecalloc::AllocationCurve matched;
  for (double t : targets)
    for (const auto& e : opda)
      if (std::abs(e.target - t) < 5e-3 + 1e-9) {
        auto copy = e;
        copy.target = t;
        matched.push_back(copy);
        break;
      }

  const auto rows = ecalloc::evaluate_allocations(ctx, matched, fit, targets);
  ecalloc::OutputMeta meta;
  {
    std::ostringstream c;
    c << "test qp=" << qp << " artifacts=" << artifacts_dir << ' ' << in.describe();
    meta.config = c.str();
  }
  json j = ecalloc::comparison_to_json(rows);
  j["meta"] = meta.to_json();
  write_text_file(fs::path(out_dir) / "comparison.json", j.dump(2) + "\n");
  std::ostringstream csv;
  ecalloc::write_comparison_csv(csv, rows, meta);
  write_text_file(fs::path(out_dir) / "comparison.csv", csv.str());
  std::cout << "wrote " << rows.size() << " comparison rows to " << out_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lossy embedded compression, quality model, and DRR allocation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file; flags override");

  std::string out_dir = default_out_dir();
  app.add_option("--out-dir", out_dir, "output directory (env ECALLOC_OUT)")
      ->capture_default_str();

  // model
  auto* model = app.add_subcommand("model", "emit analytic model curves");
  std::vector<double> psnr_list{30.0, 35.0, 40.0};
  double gap = 1.0;
  model->add_option("--psnr", psnr_list, "PSNR_w/o anchors (dB)")->capture_default_str();
  model->add_option("--gap", gap, "PSNR_w/o,r - PSNR_w/o,c (dB)")->capture_default_str();

  // synth
  auto* synth = app.add_subcommand("synth", "write a synthetic Y4M sequence");
  InputOpts synth_in;
  synth->add_option("--width", synth_in.synth.width)->capture_default_str();
  synth->add_option("--height", synth_in.synth.height)->capture_default_str();
  synth->add_option("--frames", synth_in.synth.frame_count)->capture_default_str();
  synth->add_option("--seed", synth_in.synth.seed)->capture_default_str();
  synth->add_option("--motion", synth_in.synth.motion_px_per_frame)->capture_default_str();
  synth->add_option("--noise", synth_in.synth.noise_amplitude)->capture_default_str();
  std::string synth_out = "synth.y4m";
  synth->add_option("--out", synth_out, "output Y4M path")->capture_default_str();

  // compress
  auto* compress = app.add_subcommand("compress", "run fixed-DRR EC over the input");
  InputOpts compress_in;
  compress_in.add_to(compress);
  double target = 0.5;
  compress->add_option("--target", target, "target DRR fraction [0, 0.70]")
      ->capture_default_str();

  // simulate
  auto* simulate = app.add_subcommand("simulate", "hierarchical-B EC drift simulation");
  InputOpts sim_in;
  sim_in.add_to(simulate);
  int sim_qp = 32;
  double d1 = 0.0, d2 = 0.0, d3 = 0.0;
  simulate->add_option("--qp", sim_qp)->capture_default_str();
  simulate->add_option("--drr1", d1, "level1 DRR fraction")->capture_default_str();
  simulate->add_option("--drr2", d2, "level2 DRR fraction")->capture_default_str();
  simulate->add_option("--drr3", d3, "level3 DRR fraction")->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "sweep the allocation surface and fit fopDA");
  InputOpts train_in;
  train_in.add_to(train);
  std::vector<int> train_qps{32};
  int grid_step = 10, jobs = 1, segments = 3;
  train->add_option("--qp", train_qps, "Qp values")->capture_default_str();
  train->add_option("--grid-step", grid_step, "level-DRR grid step in percent (2 or 10)")
      ->check(CLI::IsMember({2, 10}))->capture_default_str();
  train->add_option("--jobs", jobs, "parallel sweep workers")->capture_default_str();
  train->add_option("--segments", segments, "fopDA piecewise-linear segments")
      ->capture_default_str();

  // test
  auto* test = app.add_subcommand("test", "compare opDA/fopDA/evDA/l3DA on test frames");
  InputOpts test_in;
  test_in.add_to(test);
  test_in.use_synth = false;
  test_in.synth.frame_count = 100;  // default test length
  int test_qp = 32;
  std::string artifacts_dir;
  std::vector<double> test_targets;
  test->add_option("--qp", test_qp)->capture_default_str();
  test->add_option("--artifacts", artifacts_dir, "directory with train outputs")
      ->required();
  test->add_option("--targets", test_targets, "target SeqDRR fractions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfigError;
  }

  try {
    fs::create_directories(out_dir);
    if (model->parsed()) return run_model(out_dir, psnr_list, gap);
    if (synth->parsed()) {
      synth_in.use_synth = true;
      return run_synth(synth_in, synth_out);
    }
    if (compress->parsed()) return run_compress(compress_in, target, out_dir);
    if (simulate->parsed()) return run_simulate(sim_in, sim_qp, d1, d2, d3, out_dir);
    if (train->parsed()) return run_train(train_in, train_qps, grid_step, jobs, segments, out_dir);
    if (test->parsed()) return run_test(test_in, test_qp, artifacts_dir, test_targets, out_dir);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntimeError;
  }
  return 0;
}
