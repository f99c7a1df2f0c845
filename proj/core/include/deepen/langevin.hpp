#pragma once

#include <cstdint>
#include <vector>

#include "deepen/complex_grid.hpp"
#include "deepen/energy_model.hpp"
#include "deepen/forward_model.hpp"
#include "deepen/rng.hpp"

namespace deepen {

/// Langevin MCMC settings. The default update is the scaled form
///   x' = x - (A^H(Ax - b) + score(x)) + eps * z
/// (unit step on the posterior gradient, eps only on the noise). The
/// alternative kEps2 form takes the eps^2/2-scaled gradient step
///   x' = x - eps^2/2 * (A^H(Ax - b) + score(x)) + eps * z.
struct LangevinConfig {
  enum class Form { kScaled, kEps2 };

  double epsilon = 0.01;
  int n_iter = 100;
  double init_std = 1.0;
  std::uint64_t seed = 0;
  Form form = Form::kScaled;
  bool zero_noise = false;  // test hook: z draws still advance rng, scaled by 0

  void validate() const;
};

/// Per-pixel posterior statistics over a set of samples: complex mean (the
/// MMSE estimate) and variance of the magnitudes (the uncertainty map).
struct SampleStats {
  ComplexGrid mean;
  RealGrid variance;
  int n_samples = 0;
};

struct PosteriorSamples {
  SampleStats stats;
  std::vector<ComplexGrid> samples;
};

/// One Langevin update. Throws DivergenceError (with the iteration unknown at
/// this level reported as 0) on a non-finite result.
ComplexGrid langevin_step(const EnergyModel& model, const ForwardOperator& op,
                          const KspaceData& b, const ComplexGrid& x, RngStream& rng,
                          const LangevinConfig& cfg);

/// Runs cfg.n_iter steps from a Gaussian init drawn from rng. n_iter = 0
/// returns the init itself. Throws DivergenceError with the iteration index
/// and a short energy trace when the chain blows up (non-finite iterate or
/// norm exceeding 1e3 x the init norm).
ComplexGrid generate_fake(const EnergyModel& model, const ForwardOperator& op,
                          const KspaceData& b, const LangevinConfig& cfg, RngStream& rng);

/// n_samples independent chains with substreams of cfg.seed, aggregated in
/// chain order. Chains run in parallel; results are deterministic regardless
/// of thread count.
PosteriorSamples sample_posterior(const EnergyModel& model, const ForwardOperator& op,
                                  const KspaceData& b, const LangevinConfig& cfg, int n_samples);

/// Mean and magnitude-variance of an explicit sample list (used both by
/// sample_posterior and as the naive second-pass oracle in tests).
SampleStats compute_stats(const std::vector<ComplexGrid>& samples);

}  // namespace deepen
