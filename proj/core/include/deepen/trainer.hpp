#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "deepen/energy_model.hpp"
#include "deepen/forward_model.hpp"
#include "deepen/langevin.hpp"
#include "deepen/optimizer.hpp"

namespace deepen {

/// Everything needed to rebuild a ForwardOperator deterministically.
struct OperatorConfig {
  MaskKind mask_kind = MaskKind::twoD;
  double acceleration = 4.0;
  int acs_lines = 4;
  int coils = 2;
  std::uint64_t mask_seed = 1;
  std::uint64_t csm_seed = 2;
  double noise_std = 0.01;
};

ForwardOperator build_operator(const OperatorConfig& cfg, int h, int w);

/// Ground-truth images paired with per-image operator descriptors. Descriptors
/// that coincide share one built operator.
struct Dataset {
  std::vector<ComplexGrid> images;
  std::vector<OperatorConfig> descriptors;
  std::vector<std::shared_ptr<const ForwardOperator>> ops;

  int size() const { return static_cast<int>(images.size()); }
  int height() const { return images.empty() ? 0 : images[0].height; }
  int width() const { return images.empty() ? 0 : images[0].width; }
};

struct TrainConfig {
  int batch_size = 10;
  int epochs = 30;
  AdamConfig adam;                 // lr 1e-4, betas 0.9/0.999
  LangevinConfig langevin;         // epsilon 0.01, 100 iterations, init_std
  double data_noise_std = -1.0;    // < 0 means the 2 * epsilon^2 coupling
  std::uint64_t seed = 1;

  double effective_data_noise() const {
    return data_noise_std >= 0.0 ? data_noise_std
                                 : 2.0 * langevin.epsilon * langevin.epsilon;
  }
};

struct StepRecord {
  int step = 0;
  double e_true = 0.0;    // mean posterior cost of true samples
  double e_fake = 0.0;    // mean posterior cost of Langevin fakes
  double gap = 0.0;       // e_true - e_fake
  double grad_norm = 0.0;
  bool skipped = false;
};

struct TrainLog {
  std::vector<StepRecord> records;

  void append(StepRecord r) { records.push_back(r); }
  /// |mean(e_true) - mean(e_fake)| over the non-skipped records of one epoch.
  double epoch_gap(int epoch, int steps_per_epoch) const;
};

/// Called after every epoch with the freshly updated state.
using CheckpointFn =
    std::function<void(int epoch, const EnergyNet& net, const AdamState& opt, const TrainLog&)>;

/// One optimizer step of maximum-likelihood training: for each batch image,
/// perturb it with Gaussian data noise, simulate measurements, generate a
/// Langevin fake, and accumulate grad E(true) - grad E(fake). A diverged fake
/// chain skips the whole step (optimizer untouched, record marked skipped).
StepRecord deepen_train_step(EnergyNet& net, AdamState& opt, const Dataset& data,
                             const std::vector<int>& batch, const TrainConfig& cfg,
                             RngStream& rng, int step_index);

struct DeepenTrainResult {
  EnergyNet net;
  TrainLog log;
};

/// Full training run: epochs x batches steps with per-epoch deterministic
/// shuffles. Throws DivergenceError when more than half the steps of an epoch
/// were skipped. Checkpoint callback fires once per epoch.
DeepenTrainResult train_deepen(const Dataset& data, const TrainConfig& cfg,
                               const CheckpointFn& checkpoint = nullptr);

/// Resume-style entry point: continues a run whose state (net, optimizer,
/// log) was produced by the same config up to first_epoch.
void train_deepen_epochs(EnergyNet& net, AdamState& opt, TrainLog& log, const Dataset& data,
                         const TrainConfig& cfg, int first_epoch, int last_epoch,
                         const CheckpointFn& checkpoint = nullptr);

// --- denoising-score-matching baseline -------------------------------------

/// DSM objective for one sample: sigma^2 ||score(x + sigma n) - n/sigma||^2
/// on the denoising-form energy. Returns the loss; when grad is non-null,
/// accumulates scale times the parameter gradient (computed with the residual
/// direction frozen, via a central difference of parameter gradients along
/// it).
double dsm_loss_grad(const ImageNet& psi, const ComplexGrid& x, double sigma,
                     const ComplexGrid& n, double scale, std::vector<double>* grad);

/// One DSM step: per sample, draw sigma ~ U[sigma_min, sigma_max] (floored at
/// 1e-4) and n ~ N(0, I), and descend the mean of dsm_loss_grad over the
/// batch. e_true in the record holds the mean DSM loss.
StepRecord dsm_train_step(ImageNet& psi, AdamState& opt, const Dataset& data,
                          const std::vector<int>& batch, double sigma_min, double sigma_max,
                          const TrainConfig& cfg, RngStream& rng, int step_index);

struct ImageNetTrainResult {
  ImageNet net;
  TrainLog log;
};

ImageNetTrainResult train_dsm(const Dataset& data, const TrainConfig& cfg, double sigma_min,
                              double sigma_max);

/// One step of plain Gaussian-denoiser training at fixed sigma (residual
/// net), squared-error loss. e_true holds the mean loss.
StepRecord denoiser_train_step(ImageNet& denoiser, AdamState& opt, const Dataset& data,
                               const std::vector<int>& batch, double sigma,
                               const TrainConfig& cfg, RngStream& rng, int step_index);

ImageNetTrainResult train_denoiser(const Dataset& data, const TrainConfig& cfg, double sigma);

}  // namespace deepen
