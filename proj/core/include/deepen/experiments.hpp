#pragma once

#include <cstdint>
#include <vector>

#include "deepen/energy_model.hpp"
#include "deepen/forward_model.hpp"
#include "deepen/map_solver.hpp"
#include "deepen/metrics.hpp"
#include "deepen/phantom.hpp"
#include "deepen/trainer.hpp"

namespace deepen {

/// Toy dataset: n phantoms with per-image seeds forked from spec.seed, all
/// sharing one forward operator built from op_cfg.
Dataset build_dataset(int n_images, const PhantomSpec& spec, const OperatorConfig& op_cfg);

/// Energy-landscape sweep axes. The default covers [-0.5, 1.5] with 41
/// points, hitting 0 and 1 exactly.
struct LandscapeSpec {
  double alpha_min = -0.5;
  double alpha_max = 1.5;
  int n_points = 41;

  std::vector<double> axis() const;
};

struct LandscapeGrid {
  std::vector<double> alpha_s;  // structural-perturbation axis
  std::vector<double> alpha_z;  // Gaussian-perturbation axis
  RealGrid energies;            // energies.at(i_s, i_z) = C(x_ref + as*s + az*z)
  double min_alpha_s = 0.0;
  double min_alpha_z = 0.0;
};

struct LandscapeResult {
  LandscapeGrid grid;
  ComplexGrid structural;     // s = sense_init(b) - x_ref
  ComplexGrid noise;          // z, a fixed standard Gaussian draw
  ComplexGrid reconstructed;  // x_ref + as* s + az* z at the grid minimizer
  ComplexGrid error;          // reconstructed - x_ref
};

/// Evaluates the posterior cost over the (alpha_s, alpha_z) grid. The
/// minimizer is the exhaustive grid argmin; ties break toward smaller
/// |alpha_s| + |alpha_z|. The grid must contain alpha = 0 exactly.
LandscapeResult landscape_sweep(const EnergyModel& model, const ForwardOperator& op,
                                const KspaceData& b, const ComplexGrid& x_ref,
                                const LandscapeSpec& spec, RngStream& rng,
                                double sense_lambda = 1e-2);

struct GeneralizationRow {
  OperatorConfig config;
  MetricsReport report;
  double psnr_delta_vs_matched = 0.0;  // mean PSNR minus the matched-setting mean
};

struct GeneralizationResult {
  MetricsReport matched;  // reconstruction under the training configuration
  std::vector<GeneralizationRow> rows;
};

/// MAP-reconstructs every test image under the training operator
/// configuration and under each test configuration, reporting metric deltas.
/// measurement_seed forks one noise substream per (config, image).
GeneralizationResult generalization_run(const EnergyModel& model,
                                        const std::vector<ComplexGrid>& test_images,
                                        const OperatorConfig& train_cfg,
                                        const std::vector<OperatorConfig>& test_cfgs,
                                        const MmConfig& mm_cfg, std::uint64_t measurement_seed);

}  // namespace deepen
