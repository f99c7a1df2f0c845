#include "deepen/experiments.hpp"

#include <cmath>

#include "deepen/errors.hpp"
#include "deepen/parallel.hpp"

namespace deepen {

Dataset build_dataset(int n_images, const PhantomSpec& spec, const OperatorConfig& op_cfg) {
  if (n_images < 1) throw ValidationError("build_dataset: n_images must be >= 1");
  Dataset data;
  const auto op = std::make_shared<const ForwardOperator>(
      build_operator(op_cfg, spec.size, spec.size));
  RngStream seeds(spec.seed);
  for (int i = 0; i < n_images; ++i) {
    PhantomSpec s = spec;
    s.seed = seeds.substream(static_cast<std::uint64_t>(i)).key();
    data.images.push_back(gen_phantom(s));
    data.descriptors.push_back(op_cfg);
    data.ops.push_back(op);
  }
  return data;
}

std::vector<double> LandscapeSpec::axis() const {
  if (n_points < 1) throw ValidationError("landscape: n_points must be >= 1");
  std::vector<double> out(static_cast<std::size_t>(n_points));
  if (n_points == 1) {
    out[0] = alpha_min;
    return out;
  }
  const int last = n_points - 1;
  for (int k = 0; k <= last; ++k) {
    // lerp form hits rational grid values (like 0 and 1) exactly
    out[static_cast<std::size_t>(k)] = (alpha_min * (last - k) + alpha_max * k) / last;
  }
  return out;
}

LandscapeResult landscape_sweep(const EnergyModel& model, const ForwardOperator& op,
                                const KspaceData& b, const ComplexGrid& x_ref,
                                const LandscapeSpec& spec, RngStream& rng, double sense_lambda) {
  LandscapeResult res;
  res.grid.alpha_s = spec.axis();
  res.grid.alpha_z = spec.axis();

  bool has_zero = false;
  for (double a : res.grid.alpha_s) has_zero = has_zero || a == 0.0;
  if (!has_zero) throw ValidationError("landscape_sweep: grid must cover alpha = 0 exactly");

  res.structural = sense_init(op, b, sense_lambda) - x_ref;
  res.noise = gaussian_grid(rng, x_ref.height, x_ref.width, 1.0);

  const int n_s = static_cast<int>(res.grid.alpha_s.size());
  const int n_z = static_cast<int>(res.grid.alpha_z.size());
  res.grid.energies = RealGrid(n_s, n_z);

  parallel_for(n_s, [&](int i) {
    const double as = res.grid.alpha_s[static_cast<std::size_t>(i)];
    for (int j = 0; j < n_z; ++j) {
      const double az = res.grid.alpha_z[static_cast<std::size_t>(j)];
      ComplexGrid x = x_ref;
      axpy(as, res.structural, x);
      axpy(az, res.noise, x);
      res.grid.energies.at(i, j) = posterior_cost(model, op, b, x);
    }
  });

  // exhaustive argmin; ties toward smaller |alpha_s| + |alpha_z|
  double best = std::numeric_limits<double>::infinity();
  double best_l1 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_s; ++i) {
    for (int j = 0; j < n_z; ++j) {
      const double v = res.grid.energies.at(i, j);
      const double l1 = std::abs(res.grid.alpha_s[static_cast<std::size_t>(i)]) +
                        std::abs(res.grid.alpha_z[static_cast<std::size_t>(j)]);
      if (v < best || (v == best && l1 < best_l1)) {
        best = v;
        best_l1 = l1;
        res.grid.min_alpha_s = res.grid.alpha_s[static_cast<std::size_t>(i)];
        res.grid.min_alpha_z = res.grid.alpha_z[static_cast<std::size_t>(j)];
      }
    }
  }

  res.reconstructed = x_ref;
  axpy(res.grid.min_alpha_s, res.structural, res.reconstructed);
  axpy(res.grid.min_alpha_z, res.noise, res.reconstructed);
  res.error = res.reconstructed - x_ref;
  return res;
}

namespace {

// Content hash, so equal configurations replay the same measurement noise.
std::uint64_t config_tag(const OperatorConfig& cfg) {
  RngStream h(static_cast<std::uint64_t>(cfg.mask_kind));
  std::uint64_t tag = h.substream(static_cast<std::uint64_t>(cfg.acceleration * 4096.0)).key();
  tag ^= RngStream(tag).substream(static_cast<std::uint64_t>(cfg.acs_lines)).key();
  tag ^= RngStream(tag).substream(static_cast<std::uint64_t>(cfg.coils)).key();
  tag ^= RngStream(tag).substream(cfg.mask_seed).key();
  tag ^= RngStream(tag).substream(cfg.csm_seed).key();
  tag ^= RngStream(tag).substream(static_cast<std::uint64_t>(cfg.noise_std * 1e9)).key();
  return tag;
}

MetricsReport reconstruct_suite(const EnergyModel& model,
                                const std::vector<ComplexGrid>& test_images,
                                const OperatorConfig& cfg, const MmConfig& mm_cfg,
                                std::uint64_t measurement_seed, std::uint64_t config_tag) {
  if (test_images.empty()) throw ValidationError("generalization_run: no test images");
  const ForwardOperator op =
      build_operator(cfg, test_images[0].height, test_images[0].width);

  MetricsReport report;
  report.per_image.resize(test_images.size());
  RngStream root = RngStream(measurement_seed).substream(config_tag);

  parallel_for(static_cast<int>(test_images.size()), [&](int i) {
    RngStream noise_rng = root.substream(static_cast<std::uint64_t>(i));
    const ComplexGrid& x = test_images[static_cast<std::size_t>(i)];
    const KspaceData b = simulate_measurements(op, x, noise_rng);
    const ReconResult rec = map_reconstruct(model, op, b, mm_cfg);
    report.per_image[static_cast<std::size_t>(i)] = {psnr(x, rec.image), ssim(x, rec.image)};
  });
  report.finalize();
  return report;
}

}  // namespace

GeneralizationResult generalization_run(const EnergyModel& model,
                                        const std::vector<ComplexGrid>& test_images,
                                        const OperatorConfig& train_cfg,
                                        const std::vector<OperatorConfig>& test_cfgs,
                                        const MmConfig& mm_cfg, std::uint64_t measurement_seed) {
  GeneralizationResult res;
  res.matched = reconstruct_suite(model, test_images, train_cfg, mm_cfg, measurement_seed,
                                  config_tag(train_cfg));
  for (const auto& cfg : test_cfgs) {
    GeneralizationRow row;
    row.config = cfg;
    row.report =
        reconstruct_suite(model, test_images, cfg, mm_cfg, measurement_seed, config_tag(cfg));
    row.psnr_delta_vs_matched = row.report.psnr_mean - res.matched.psnr_mean;
    res.rows.push_back(std::move(row));
  }
  return res;
}

}  // namespace deepen
