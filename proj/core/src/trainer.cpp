#include "deepen/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "deepen/errors.hpp"
#include "deepen/map_solver.hpp"
#include "deepen/parallel.hpp"

namespace deepen {

namespace {

// Purpose tags for substream derivation; any fixed distinct constants work.
constexpr std::uint64_t kInitStream = 0xA11CE;
constexpr std::uint64_t kShuffleStream = 0x5F13;
constexpr std::uint64_t kStepStream = 0x57E9;

RngStream step_stream(const TrainConfig& cfg, int epoch, int step_in_epoch) {
  return RngStream(cfg.seed)
      .substream(kStepStream)
      .substream((static_cast<std::uint64_t>(epoch) << 32) |
                 static_cast<std::uint64_t>(step_in_epoch));
}

void shuffle_order(std::vector<int>& order, RngStream rng) {
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = rng.next_u64() % i;
    std::swap(order[i - 1], order[j]);
  }
}

std::vector<std::vector<int>> make_batches(std::vector<int> order, int batch_size) {
  std::vector<std::vector<int>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t end = std::min(order.size(), i + batch_size);
    batches.emplace_back(order.begin() + i, order.begin() + end);
  }
  return batches;
}

void validate_train_inputs(const Dataset& data, const TrainConfig& cfg) {
  if (data.size() == 0) throw ValidationError("train: dataset is empty");
  if (data.size() < cfg.batch_size) {
    throw ValidationError("train: dataset smaller than one batch");
  }
  if (cfg.batch_size < 1 || cfg.epochs < 0) {
    throw ValidationError("train: batch_size >= 1 and epochs >= 0 required");
  }
  if (cfg.effective_data_noise() < 0.0) {
    throw ValidationError("train: data_noise_std must be >= 0");
  }
  cfg.langevin.validate();
}

// Shared epoch scaffolding for all three trainers.
void run_epochs(const Dataset& data, const TrainConfig& cfg, int first_epoch, int last_epoch,
                TrainLog& log,
                const std::function<StepRecord(const std::vector<int>&, RngStream&, int)>& step,
                const std::function<void(int)>& end_of_epoch) {
  std::vector<int> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), 0);

  const int batches_per_epoch = (data.size() + cfg.batch_size - 1) / cfg.batch_size;
  int global_step = first_epoch * batches_per_epoch;
  for (int epoch = first_epoch; epoch < last_epoch; ++epoch) {
    std::vector<int> shuffled = order;
    shuffle_order(shuffled,
                  RngStream(cfg.seed).substream(kShuffleStream).substream(
                      static_cast<std::uint64_t>(epoch)));
    const auto batches = make_batches(std::move(shuffled), cfg.batch_size);

    int skipped = 0;
    for (std::size_t s = 0; s < batches.size(); ++s) {
      RngStream rng = step_stream(cfg, epoch, static_cast<int>(s));
      StepRecord rec = step(batches[s], rng, global_step);
      if (rec.skipped) ++skipped;
      log.append(rec);
      ++global_step;
    }
    if (skipped * 2 > static_cast<int>(batches.size())) {
      throw DivergenceError("training aborted: " + std::to_string(skipped) + " of " +
                            std::to_string(batches.size()) + " steps skipped in epoch " +
                            std::to_string(epoch));
    }
    if (end_of_epoch) end_of_epoch(epoch);
  }
}

}  // namespace

ForwardOperator build_operator(const OperatorConfig& cfg, int h, int w) {
  RngStream mask_rng(cfg.mask_seed);
  RngStream csm_rng(cfg.csm_seed);
  ForwardOperator op;
  op.mask = gen_mask(cfg.mask_kind, h, w, cfg.acceleration, cfg.acs_lines, mask_rng);
  op.csm = gen_csm(cfg.coils, h, w, csm_rng);
  op.noise_std = cfg.noise_std;
  return op;
}

double TrainLog::epoch_gap(int epoch, int steps_per_epoch) const {
  double te = 0.0, tf = 0.0;
  int n = 0;
  for (int s = epoch * steps_per_epoch; s < (epoch + 1) * steps_per_epoch; ++s) {
    if (s >= static_cast<int>(records.size())) break;
    if (records[static_cast<std::size_t>(s)].skipped) continue;
    te += records[static_cast<std::size_t>(s)].e_true;
    tf += records[static_cast<std::size_t>(s)].e_fake;
    ++n;
  }
  if (n == 0) return 0.0;
  return std::abs(te / n - tf / n);
}

StepRecord deepen_train_step(EnergyNet& net, AdamState& opt, const Dataset& data,
                             const std::vector<int>& batch, const TrainConfig& cfg,
                             RngStream& rng, int step_index) {
  StepRecord rec;
  rec.step = step_index;
  if (batch.empty()) throw ValidationError("deepen_train_step: empty batch");

  const int nb = static_cast<int>(batch.size());
  const double data_noise = cfg.effective_data_noise();
  const EnergyNetView view(net);

  std::vector<EnergyGrad> grads(static_cast<std::size_t>(nb), EnergyGrad(net));
  std::vector<double> e_true(static_cast<std::size_t>(nb), 0.0);
  std::vector<double> e_fake(static_cast<std::size_t>(nb), 0.0);

  try {
    parallel_for(nb, [&](int i) {
      RngStream slot = rng.substream(static_cast<std::uint64_t>(i));
      const int idx = batch[static_cast<std::size_t>(i)];
      const ForwardOperator& op = *data.ops[static_cast<std::size_t>(idx)];

      ComplexGrid x_true = data.images[static_cast<std::size_t>(idx)];
      x_true += gaussian_grid(slot, x_true.height, x_true.width, data_noise);
      const KspaceData b = simulate_measurements(op, x_true, slot);
      const ComplexGrid x_fake = generate_fake(view, op, b, cfg.langevin, slot);

      e_true[static_cast<std::size_t>(i)] = posterior_cost(view, op, b, x_true);
      e_fake[static_cast<std::size_t>(i)] = posterior_cost(view, op, b, x_fake);

      EnergyTape tape;
      energy(net, x_true, &tape);
      param_grad(net, tape, +1.0, grads[static_cast<std::size_t>(i)]);
      energy(net, x_fake, &tape);
      param_grad(net, tape, -1.0, grads[static_cast<std::size_t>(i)]);
    });
  } catch (const DivergenceError&) {
    rec.skipped = true;
    return rec;
  }

  EnergyGrad total(net);
  for (const auto& g : grads) total.add_scaled(g, 1.0 / nb);

  rec.e_true = std::accumulate(e_true.begin(), e_true.end(), 0.0) / nb;
  rec.e_fake = std::accumulate(e_fake.begin(), e_fake.end(), 0.0) / nb;
  rec.gap = rec.e_true - rec.e_fake;
  rec.grad_norm = std::sqrt(total.squared_norm());
  if (!std::isfinite(rec.grad_norm)) {
    rec.skipped = true;
    return rec;
  }

  opt.begin_step();
  adam_update_block(opt, 0, net.stack.params, total.stack, cfg.adam);
  adam_update_block(opt, net.stack.param_count(), net.head, total.head, cfg.adam);
  return rec;
}

DeepenTrainResult train_deepen(const Dataset& data, const TrainConfig& cfg,
                               const CheckpointFn& checkpoint) {
  validate_train_inputs(data, cfg);
  RngStream init_rng = RngStream(cfg.seed).substream(kInitStream);
  DeepenTrainResult result;
  result.net = EnergyNet::random_init(init_rng);
  AdamState opt(result.net.param_count());
  train_deepen_epochs(result.net, opt, result.log, data, cfg, 0, cfg.epochs, checkpoint);
  return result;
}

void train_deepen_epochs(EnergyNet& net, AdamState& opt, TrainLog& log, const Dataset& data,
                         const TrainConfig& cfg, int first_epoch, int last_epoch,
                         const CheckpointFn& checkpoint) {
  validate_train_inputs(data, cfg);
  run_epochs(
      data, cfg, first_epoch, last_epoch, log,
      [&](const std::vector<int>& batch, RngStream& rng, int step_index) {
        return deepen_train_step(net, opt, data, batch, cfg, rng, step_index);
      },
      [&](int epoch) {
        if (checkpoint) checkpoint(epoch, net, opt, log);
      });
}

double dsm_loss_grad(const ImageNet& psi, const ComplexGrid& x, double sigma,
                     const ComplexGrid& n, double scale, std::vector<double>* grad) {
  if (sigma <= 0.0) throw ValidationError("dsm_loss_grad: sigma must be > 0");
  ComplexGrid xt = x;
  axpy(sigma, n, xt);

  ComplexGrid r = muse_score(psi, xt);
  axpy(-1.0 / sigma, n, r);  // r = score(xt) - n/sigma
  const double loss = sigma * sigma * squared_norm(r);

  if (grad) {
    // d/dtheta of sigma^2 ||score - n/sigma||^2 with r frozen: a central
    // difference of the parameter gradient along the residual direction.
    const double h = 1e-5 * std::max(1.0, norm(xt)) / std::max(norm(r), 1e-12);
    ComplexGrid xp = xt, xm = xt;
    axpy(h, r, xp);
    axpy(-h, r, xm);
    muse_param_grad(psi, xp, scale * sigma * sigma / h, *grad);
    muse_param_grad(psi, xm, -scale * sigma * sigma / h, *grad);
  }
  return loss;
}

StepRecord dsm_train_step(ImageNet& psi, AdamState& opt, const Dataset& data,
                          const std::vector<int>& batch, double sigma_min, double sigma_max,
                          const TrainConfig& cfg, RngStream& rng, int step_index) {
  StepRecord rec;
  rec.step = step_index;
  if (batch.empty()) throw ValidationError("dsm_train_step: empty batch");
  if (!(sigma_min >= 0.0 && sigma_min < sigma_max)) {
    throw ValidationError("dsm_train_step: need 0 <= sigma_min < sigma_max");
  }
  const double sig_lo = std::max(sigma_min, 1e-4);  // division guard

  const int nb = static_cast<int>(batch.size());
  std::vector<std::vector<double>> grads(static_cast<std::size_t>(nb),
                                         std::vector<double>(psi.stack.param_count(), 0.0));
  std::vector<double> losses(static_cast<std::size_t>(nb), 0.0);

  parallel_for(nb, [&](int i) {
    RngStream slot = rng.substream(static_cast<std::uint64_t>(i));
    const ComplexGrid& x = data.images[static_cast<std::size_t>(batch[static_cast<std::size_t>(i)])];
    const double sigma = sig_lo + (sigma_max - sig_lo) * slot.uniform01();
    const ComplexGrid n = gaussian_grid(slot, x.height, x.width, 1.0);
    losses[static_cast<std::size_t>(i)] =
        dsm_loss_grad(psi, x, sigma, n, 1.0, &grads[static_cast<std::size_t>(i)]);
  });

  std::vector<double> total(psi.stack.param_count(), 0.0);
  for (const auto& g : grads) {
    for (std::size_t j = 0; j < total.size(); ++j) total[j] += g[j] / nb;
  }
  double gn2 = 0.0;
  for (double v : total) gn2 += v * v;

  rec.e_true = std::accumulate(losses.begin(), losses.end(), 0.0) / nb;
  rec.gap = rec.e_true;
  rec.grad_norm = std::sqrt(gn2);
  if (!std::isfinite(rec.grad_norm) || !std::isfinite(rec.e_true)) {
    rec.skipped = true;
    return rec;
  }

  opt.begin_step();
  adam_update_block(opt, 0, psi.stack.params, total, cfg.adam);
  return rec;
}

ImageNetTrainResult train_dsm(const Dataset& data, const TrainConfig& cfg, double sigma_min,
                              double sigma_max) {
  validate_train_inputs(data, cfg);
  RngStream init_rng = RngStream(cfg.seed).substream(kInitStream);
  ImageNetTrainResult result;
  result.net = ImageNet::random_init(init_rng, false);
  AdamState opt(result.net.stack.param_count());
  run_epochs(data, cfg, 0, cfg.epochs, result.log,
             [&](const std::vector<int>& batch, RngStream& rng, int step_index) {
               return dsm_train_step(result.net, opt, data, batch, sigma_min, sigma_max, cfg, rng,
                                     step_index);
             },
             nullptr);
  return result;
}

StepRecord denoiser_train_step(ImageNet& denoiser, AdamState& opt, const Dataset& data,
                               const std::vector<int>& batch, double sigma,
                               const TrainConfig& cfg, RngStream& rng, int step_index) {
  StepRecord rec;
  rec.step = step_index;
  if (batch.empty()) throw ValidationError("denoiser_train_step: empty batch");
  if (sigma < 0.0) throw ValidationError("denoiser_train_step: sigma must be >= 0");

  const int nb = static_cast<int>(batch.size());
  std::vector<std::vector<double>> grads(static_cast<std::size_t>(nb),
                                         std::vector<double>(denoiser.stack.param_count(), 0.0));
  std::vector<double> losses(static_cast<std::size_t>(nb), 0.0);

  parallel_for(nb, [&](int i) {
    RngStream slot = rng.substream(static_cast<std::uint64_t>(i));
    const ComplexGrid& x = data.images[static_cast<std::size_t>(batch[static_cast<std::size_t>(i)])];
    ComplexGrid xt = x;
    xt += gaussian_grid(slot, x.height, x.width, sigma);

    StackTape tape;
    const ComplexGrid d = apply_net(denoiser, xt, &tape);
    const ComplexGrid r = d - x;
    losses[static_cast<std::size_t>(i)] = 0.5 * squared_norm(r);
    stack_backward(denoiser.stack, tape, grid_to_tensor(r), &grads[static_cast<std::size_t>(i)],
                   1.0, false);
  });

  std::vector<double> total(denoiser.stack.param_count(), 0.0);
  for (const auto& g : grads) {
    for (std::size_t j = 0; j < total.size(); ++j) total[j] += g[j] / nb;
  }
  double gn2 = 0.0;
  for (double v : total) gn2 += v * v;

  rec.e_true = std::accumulate(losses.begin(), losses.end(), 0.0) / nb;
  rec.gap = rec.e_true;
  rec.grad_norm = std::sqrt(gn2);
  if (!std::isfinite(rec.grad_norm) || !std::isfinite(rec.e_true)) {
    rec.skipped = true;
    return rec;
  }

  opt.begin_step();
  adam_update_block(opt, 0, denoiser.stack.params, total, cfg.adam);
  return rec;
}

ImageNetTrainResult train_denoiser(const Dataset& data, const TrainConfig& cfg, double sigma) {
  validate_train_inputs(data, cfg);
  RngStream init_rng = RngStream(cfg.seed).substream(kInitStream);
  ImageNetTrainResult result;
  result.net = ImageNet::random_init(init_rng, true);
  // zero final layer: the residual net starts as the identity denoiser
  const int last = result.net.stack.num_layers() - 1;
  double* w = result.net.stack.weights(last);
  std::fill(w, w + result.net.stack.weight_count(last), 0.0);

  AdamState opt(result.net.stack.param_count());
  run_epochs(data, cfg, 0, cfg.epochs, result.log,
             [&](const std::vector<int>& batch, RngStream& rng, int step_index) {
               return denoiser_train_step(result.net, opt, data, batch, sigma, cfg, rng,
                                          step_index);
             },
             nullptr);
  return result;
}

}  // namespace deepen
