#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "deepen/errors.hpp"
#include "deepen/experiments.hpp"
#include "deepen/fft.hpp"
#include "deepen/metrics.hpp"
#include "deepen/phantom.hpp"

using namespace deepen;

TEST_CASE("gen_phantom: zero ellipses give the zero image") {
  PhantomSpec spec;
  spec.n_ellipses = 0;
  CHECK(max_abs(gen_phantom(spec)) == 0.0);
}

TEST_CASE("gen_phantom: deterministic per seed") {
  PhantomSpec spec;
  spec.seed = 17;
  ComplexGrid a = gen_phantom(spec);
  ComplexGrid b = gen_phantom(spec);
  for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(a.values[i] == b.values[i]);
}

TEST_CASE("gen_phantom: magnitude bounds hold across 100 seeds") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    PhantomSpec spec;
    spec.seed = seed;
    const double peak = max_abs(gen_phantom(spec));
    CHECK(peak <= 1.0 + 1e-12);
    CHECK(peak >= 0.5);
  }
}

TEST_CASE("gen_phantom: rejects non-power-of-two sizes") {
  PhantomSpec spec;
  spec.size = 20;
  CHECK_THROWS_AS(gen_phantom(spec), ValidationError);
}

TEST_CASE("psnr: identical images return the 99 dB sentinel") {
  PhantomSpec spec;
  ComplexGrid x = gen_phantom(spec);
  CHECK(psnr(x, x) == 99.0);
}

TEST_CASE("psnr: forced MSE 0.01 at peak 1 gives 20 dB") {
  ComplexGrid ref(16, 16), rec(16, 16);
  for (auto& v : ref.values) v = 1.0;
  for (auto& v : rec.values) v = 0.9;  // |ref|-|rec| = 0.1 everywhere -> MSE 0.01
  CHECK(psnr(ref, rec) == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("psnr: agrees with an independent two-pass recomputation") {
  PhantomSpec spec;
  spec.seed = 3;
  ComplexGrid ref = gen_phantom(spec);
  spec.seed = 4;
  ComplexGrid rec = gen_phantom(spec);

  double peak = 0.0;
  for (const auto& v : ref.values) peak = std::max(peak, std::abs(v));
  double mse = 0.0;
  for (std::size_t i = 0; i < ref.values.size(); ++i) {
    const double d = std::abs(ref.values[i]) - std::abs(rec.values[i]);
    mse += d * d;
  }
  mse /= static_cast<double>(ref.size());
  const double expect = 20.0 * std::log10(peak / std::sqrt(mse));
  CHECK(std::abs(psnr(ref, rec) - expect) < 1e-10);
}

TEST_CASE("psnr: zero reference raises a validation error") {
  ComplexGrid zero(16, 16), rec(16, 16);
  CHECK_THROWS_AS(psnr(zero, rec), ValidationError);
}

TEST_CASE("ssim: identical images score exactly one") {
  PhantomSpec spec;
  spec.seed = 9;
  ComplexGrid x = gen_phantom(spec);
  CHECK(ssim(x, x) == 1.0);
}

TEST_CASE("ssim: zero reconstruction of a structured phantom scores low") {
  PhantomSpec spec;
  spec.seed = 10;
  ComplexGrid ref = gen_phantom(spec);
  ComplexGrid rec(ref.height, ref.width);
  CHECK(ssim(ref, rec) < 0.1);
}

TEST_CASE("ssim: symmetric under swap at a fixed dynamic range") {
  PhantomSpec spec;
  spec.seed = 11;
  ComplexGrid a = gen_phantom(spec);
  spec.seed = 12;
  ComplexGrid b = gen_phantom(spec);
  const double L = 1.0;
  CHECK(ssim(a, b, L) == doctest::Approx(ssim(b, a, L)).epsilon(1e-14));
}

TEST_CASE("ssim: rejects images smaller than the window") {
  ComplexGrid small(8, 8);
  for (auto& v : small.values) v = 1.0;
  CHECK_THROWS_AS(ssim(small, small), ValidationError);
}

namespace {

struct LandscapeFixture {
  ForwardOperator op;
  KspaceData b;
  ComplexGrid x_ref;

  explicit LandscapeFixture(std::uint64_t seed) {
    RngStream rng(seed);
    PhantomSpec spec;
    spec.seed = seed;
    x_ref = gen_phantom(spec);
    op.mask = gen_mask(MaskKind::twoD, spec.size, spec.size, 4.0, 4, rng);
    op.csm = gen_csm(2, spec.size, spec.size, rng);
    op.noise_std = 0.01;
    RngStream nrng(seed + 100);
    b = simulate_measurements(op, x_ref, nrng);
  }
};

}  // namespace

TEST_CASE("landscape_sweep: zero net minimizer equals the data-consistency argmin") {
  LandscapeFixture fx(21);
  ZeroEnergy zero;
  LandscapeSpec spec;
  spec.n_points = 11;
  RngStream rng(22);
  LandscapeResult res = landscape_sweep(zero, fx.op, fx.b, fx.x_ref, spec, rng);

  // direct recomputation of the DC-only objective over the same grid
  double best = std::numeric_limits<double>::infinity();
  double best_l1 = std::numeric_limits<double>::infinity();
  double as_best = 0.0, az_best = 0.0;
  for (double as : res.grid.alpha_s) {
    for (double az : res.grid.alpha_z) {
      ComplexGrid x = fx.x_ref;
      axpy(as, res.structural, x);
      axpy(az, res.noise, x);
      double dc = 0.0;
      for (int c = 0; c < fx.op.num_coils(); ++c)
        dc += squared_norm(apply_A(fx.op, x).coils[c] - fx.b.coils[c]);
      dc *= 0.5;
      const double l1 = std::abs(as) + std::abs(az);
      if (dc < best || (dc == best && l1 < best_l1)) {
        best = dc;
        best_l1 = l1;
        as_best = as;
        az_best = az;
      }
    }
  }
  CHECK(res.grid.min_alpha_s == as_best);
  CHECK(res.grid.min_alpha_z == az_best);
}

TEST_CASE("landscape_sweep: single-point grid at zero returns the reference") {
  LandscapeFixture fx(23);
  ZeroEnergy zero;
  LandscapeSpec spec;
  spec.alpha_min = 0.0;
  spec.alpha_max = 0.0;
  spec.n_points = 1;
  RngStream rng(24);
  LandscapeResult res = landscape_sweep(zero, fx.op, fx.b, fx.x_ref, spec, rng);
  for (std::size_t i = 0; i < res.reconstructed.values.size(); ++i)
    CHECK(res.reconstructed.values[i] == fx.x_ref.values[i]);
  CHECK(max_abs(res.error) == 0.0);
}

TEST_CASE("landscape_sweep: default grid covers 0 and 1 exactly") {
  LandscapeSpec spec;
  const auto axis = spec.axis();
  CHECK(axis.size() == 41);
  bool has0 = false, has1 = false;
  for (double a : axis) {
    has0 = has0 || a == 0.0;
    has1 = has1 || a == 1.0;
  }
  CHECK(has0);
  CHECK(has1);
}

TEST_CASE("landscape_sweep: grid missing zero is rejected") {
  LandscapeFixture fx(25);
  ZeroEnergy zero;
  LandscapeSpec spec;
  spec.alpha_min = 0.25;
  spec.alpha_max = 1.0;
  spec.n_points = 4;
  RngStream rng(26);
  CHECK_THROWS_AS(landscape_sweep(zero, fx.op, fx.b, fx.x_ref, spec, rng), ValidationError);
}

TEST_CASE("generalization_run: matched test config reproduces the baseline numbers") {
  std::vector<ComplexGrid> test_images;
  for (std::uint64_t s = 0; s < 3; ++s) {
    PhantomSpec spec;
    spec.seed = 40 + s;
    test_images.push_back(gen_phantom(spec));
  }
  OperatorConfig train_cfg;
  train_cfg.acceleration = 2.0;
  train_cfg.acs_lines = 4;

  OperatorConfig alt = train_cfg;
  alt.mask_kind = MaskKind::oneD;
  alt.acceleration = 2.0;
  alt.mask_seed = 77;

  ZeroEnergy zero;
  MmConfig mm;
  mm.max_outer = 60;
  GeneralizationResult res =
      generalization_run(zero, test_images, train_cfg, {train_cfg, alt}, mm, 5);

  REQUIRE(res.rows.size() == 2);  // row count = number of test configs
  // identical config, identical seeds: bit-identical metrics
  CHECK(res.rows[0].report.psnr_mean == res.matched.psnr_mean);
  CHECK(res.rows[0].report.ssim_mean == res.matched.ssim_mean);
  CHECK(res.rows[0].psnr_delta_vs_matched == 0.0);
}
