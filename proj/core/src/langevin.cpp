#include "deepen/langevin.hpp"

#include <cmath>
#include <sstream>

#include "deepen/errors.hpp"
#include "deepen/parallel.hpp"

namespace deepen {

void LangevinConfig::validate() const {
  if (epsilon <= 0.0) throw ValidationError("langevin: epsilon must be > 0");
  if (init_std <= 0.0) throw ValidationError("langevin: init_std must be > 0");
  if (n_iter < 0) throw ValidationError("langevin: n_iter must be >= 0");
}

ComplexGrid langevin_step(const EnergyModel& model, const ForwardOperator& op,
                          const KspaceData& b, const ComplexGrid& x, RngStream& rng,
                          const LangevinConfig& cfg) {
  // posterior gradient A^H(Ax - b) + score(x)
  KspaceData residual = apply_A(op, x);
  for (int c = 0; c < residual.num_coils(); ++c) residual.coils[c] -= b.coils[c];
  ComplexGrid grad = apply_AH(op, residual);
  grad += model.score(x);

  const double step = cfg.form == LangevinConfig::Form::kScaled
                          ? 1.0
                          : 0.5 * cfg.epsilon * cfg.epsilon;
  ComplexGrid next = x;
  axpy(-step, grad, next);

  const double noise_scale = cfg.zero_noise ? 0.0 : cfg.epsilon;
  ComplexGrid z = gaussian_grid(rng, x.height, x.width, 1.0);
  axpy(noise_scale, z, next);

  if (!all_finite(next)) throw DivergenceError("langevin_step: non-finite iterate");
  return next;
}

ComplexGrid generate_fake(const EnergyModel& model, const ForwardOperator& op,
                          const KspaceData& b, const LangevinConfig& cfg, RngStream& rng) {
  cfg.validate();
  ComplexGrid x = gaussian_grid(rng, op.height(), op.width(), cfg.init_std);
  const double init_norm = std::max(norm(x), 1e-12);

  // Energies are only probed once a chain starts to run away, so healthy
  // chains pay nothing for the diagnostics.
  std::vector<double> energy_trace;
  for (int n = 0; n < cfg.n_iter; ++n) {
    try {
      x = langevin_step(model, op, b, x, rng, cfg);
    } catch (const DivergenceError&) {
      throw DivergenceError("generate_fake: non-finite iterate at iteration " +
                            std::to_string(n));
    }
    const double xn = norm(x);
    if (xn > 10.0 * init_norm) energy_trace.push_back(model.energy(x));
    if (xn > 1e3 * init_norm) {
      std::ostringstream msg;
      msg << "generate_fake: chain diverged at iteration " << n << " (|x| " << xn
          << " > 1e3 x init " << init_norm << "); energy trace:";
      for (double e : energy_trace) msg << " " << e;
      throw DivergenceError(msg.str());
    }
  }
  return x;
}

PosteriorSamples sample_posterior(const EnergyModel& model, const ForwardOperator& op,
                                  const KspaceData& b, const LangevinConfig& cfg, int n_samples) {
  cfg.validate();
  if (n_samples < 1) throw ValidationError("sample_posterior: n_samples must be >= 1");

  PosteriorSamples out;
  out.samples.assign(n_samples, ComplexGrid());

  RngStream root(cfg.seed);
  parallel_for(n_samples, [&](int i) {
    RngStream chain_rng = root.substream(static_cast<std::uint64_t>(i));
    try {
      out.samples[static_cast<std::size_t>(i)] = generate_fake(model, op, b, cfg, chain_rng);
    } catch (const DivergenceError& e) {
      throw DivergenceError("chain " + std::to_string(i) + ": " + e.what());
    }
  });

  out.stats = compute_stats(out.samples);
  return out;
}

SampleStats compute_stats(const std::vector<ComplexGrid>& samples) {
  SampleStats stats;
  stats.n_samples = static_cast<int>(samples.size());
  if (samples.empty()) return stats;

  const int h = samples[0].height, w = samples[0].width;
  stats.mean = ComplexGrid(h, w);
  for (const auto& s : samples) stats.mean += s;
  stats.mean *= 1.0 / static_cast<double>(samples.size());

  // variance of magnitudes around the mean magnitude (population form)
  RealGrid mag_mean(h, w);
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < s.values.size(); ++i) mag_mean.values[i] += std::abs(s.values[i]);
  }
  for (auto& v : mag_mean.values) v /= static_cast<double>(samples.size());

  stats.variance = RealGrid(h, w);
  if (samples.size() == 1) return stats;  // variance identically zero
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      const double d = std::abs(s.values[i]) - mag_mean.values[i];
      stats.variance.values[i] += d * d;
    }
  }
  for (auto& v : stats.variance.values) v /= static_cast<double>(samples.size());
  return stats;
}

}  // namespace deepen
