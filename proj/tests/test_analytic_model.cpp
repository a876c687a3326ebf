#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "ecalloc/analytic_model.hpp"

using namespace ecalloc;

TEST_CASE("psnr_from_mse: anchor values") {
  CHECK(psnr_from_mse(255.0 * 255.0) == Catch::Approx(0.0).margin(1e-12));
  CHECK(std::isinf(psnr_from_mse(0.0)));
  CHECK(psnr_from_mse(20.5627) == Catch::Approx(35.0).margin(1e-3));
  CHECK(mse_from_psnr(35.0) == Catch::Approx(20.5627).margin(1e-3));
  CHECK_THROWS(psnr_from_mse(-1.0));
}

TEST_CASE("ec_error_second_moment: closed form equals support enumeration") {
  CHECK(ec_error_second_moment(0) == 0.0);
  for (int m = 1; m <= 7; ++m) {
    double acc = 0.0;
    const int half = 1 << (m - 1);
    for (int e = -half; e <= half - 1; ++e) acc += static_cast<double>(e) * e;
    acc /= static_cast<double>(1 << m);
    CHECK(ec_error_second_moment(m) == Catch::Approx(acc).epsilon(1e-14));
  }
  CHECK(ec_error_second_moment(1) == Catch::Approx(0.5));
  CHECK(ec_error_second_moment(2) == Catch::Approx(1.5));
}

TEST_CASE("delta_psnr_current: direct evaluation and lossless convention") {
  CHECK(delta_psnr_current(20.5613, 0) == 0.0);
  CHECK(delta_psnr_current(20.5613, 2) ==
        Catch::Approx(10.0 * std::log10(22.0613 / 20.5613)).epsilon(1e-12));
  CHECK(delta_psnr_current(20.5613, 2) == Catch::Approx(0.306).margin(2e-3));
}

TEST_CASE("delta_psnr_current: higher base quality degrades more at every M") {
  for (int m = 1; m <= 7; ++m) {
    const double d30 = delta_psnr_current(mse_from_psnr(30.0), m);
    const double d35 = delta_psnr_current(mse_from_psnr(35.0), m);
    const double d40 = delta_psnr_current(mse_from_psnr(40.0), m);
    CHECK(d30 < d35);
    CHECK(d35 < d40);
  }
}

TEST_CASE("propagated bound: direct evaluation and dominance") {
  CHECK(delta_psnr_propagated_bound(20.5613, 0) == 0.0);
  CHECK(delta_psnr_propagated_bound(20.5613, 2) ==
        Catch::Approx(10.0 * std::log10(26.5613 / 20.5613)).epsilon(1e-12));
  CHECK(delta_psnr_propagated_bound(20.5613, 2) == Catch::Approx(1.113).margin(2e-3));
  for (double mse : {1.0, 10.0, 100.0, 1000.0})
    for (int m = 1; m <= 7; ++m)
      CHECK(delta_psnr_propagated_bound(mse, m) >= delta_psnr_current(mse, m));
}

TEST_CASE("delta2 lower bound: worked example is positive") {
  const PropagationScenario s{mse_from_psnr(35.0), mse_from_psnr(34.0), 2};
  CHECK(s.mse_ref == Catch::Approx(20.56).margin(0.01));
  CHECK(s.mse_cur == Catch::Approx(25.89).margin(0.01));
  const double d2 = delta2_psnr_lower_bound(s);
  CHECK(d2 > 0.0);
  CHECK(d2 == Catch::Approx(1.4).margin(0.05));
}

TEST_CASE("delta2 lower bound: positive for M>=2 over the studied range") {
  for (int m = 2; m <= 7; ++m)
    for (int pr10 = 300; pr10 <= 400; pr10 += 1)
      for (int gap10 = 0; gap10 <= 20; gap10 += 1) {
        const double pr = pr10 / 10.0;
        const double pc = pr - gap10 / 10.0;
        CHECK(delta2_psnr_lower_bound({mse_from_psnr(pr), mse_from_psnr(pc), m}) > 0.0);
      }
}

TEST_CASE("delta2 lower bound: never positive at M=1") {
  // At M=1 positivity of the bound would require
  // -0.5*(MSE_r + MSE_c) - 1 > 0, impossible for non-negative MSEs, so the
  // guarantee genuinely starts at M=2.
  for (int pr10 = 300; pr10 <= 400; ++pr10)
    for (int gap10 = 0; gap10 <= 20; ++gap10) {
      const double pr = pr10 / 10.0;
      const double d =
          delta2_psnr_lower_bound({mse_from_psnr(pr), mse_from_psnr(pr - gap10 / 10.0), 1});
      CHECK(d <= 0.0);
    }
}

TEST_CASE("convexity: second difference in M is non-negative") {
  for (int i = 0; i < 100; ++i) {
    const double mse = std::pow(10.0, 3.0 * i / 99.0);  // log grid over [1, 1000]
    for (int m = 0; m <= 5; ++m) {
      const double d2 = delta_psnr_current(mse, m + 2) - 2.0 * delta_psnr_current(mse, m + 1) +
                        delta_psnr_current(mse, m);
      CHECK(d2 >= -1e-12);
    }
  }
}

TEST_CASE("emit_model_curves: accounting, monotonicity, and CSV shape") {
  const auto rows = emit_model_curves({});
  REQUIRE(rows.size() == 24);
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].m > 1) CHECK(rows[i].delta_psnr > rows[i - 1].delta_psnr);
    CHECK(rows[i].drr == Catch::Approx(rows[i].m / 8.0));
  }
  std::ostringstream csv;
  write_model_csv(csv, rows);
  std::string first_line;
  std::istringstream in(csv.str());
  std::getline(in, first_line);
  CHECK(first_line == "psnr_wo,M,drr,delta_psnr,propagated_bound,delta2_lower_bound");
  int lines = 0;
  while (std::getline(in, first_line)) ++lines;
  CHECK(lines == 24);
}

TEST_CASE("csv_float: sentinel and 6 significant digits") {
  CHECK(csv_float(std::numeric_limits<double>::infinity()) == "99.99");
  CHECK(csv_float(0.30612345678) == "0.306123");
}
