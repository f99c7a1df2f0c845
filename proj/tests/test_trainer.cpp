#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "deepen/errors.hpp"
#include "deepen/experiments.hpp"
#include "deepen/io.hpp"
#include "deepen/map_solver.hpp"
#include "deepen/trainer.hpp"

using namespace deepen;

namespace {

Dataset tiny_dataset(int n_images = 8, int size = 16) {
  PhantomSpec ph;
  ph.size = size;
  ph.seed = 5;
  OperatorConfig op;
  op.acs_lines = 2;
  op.acceleration = 2.0;
  op.noise_std = 0.01;
  return build_dataset(n_images, ph, op);
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.epochs = 1;
  cfg.langevin.n_iter = 10;
  cfg.langevin.init_std = 0.3;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("deepen_train_step: zero learning rate leaves parameters bit-exact") {
  Dataset data = tiny_dataset();
  TrainConfig cfg = tiny_config();
  cfg.adam.learning_rate = 0.0;

  RngStream init(1);
  EnergyNet net = EnergyNet::random_init(init);
  const std::vector<double> stack_before = net.stack.params;
  const std::vector<double> head_before = net.head;

  AdamState opt(net.param_count());
  RngStream rng(2);
  StepRecord rec = deepen_train_step(net, opt, data, {0, 1, 2, 3}, cfg, rng, 0);
  CHECK_FALSE(rec.skipped);
  CHECK(net.stack.params == stack_before);
  CHECK(net.head == head_before);
}

TEST_CASE("deepen gradient matches finite differences with frozen fakes") {
  Dataset data = tiny_dataset(4, 16);
  TrainConfig cfg = tiny_config();

  RngStream init(7);
  EnergyNet net = EnergyNet::random_init(init);
  const EnergyNetView view(net);

  // assemble a frozen batch: perturbed truths and fixed fakes
  std::vector<ComplexGrid> xs, fakes;
  RngStream rng(8);
  for (int i = 0; i < 4; ++i) {
    ComplexGrid x = data.images[static_cast<std::size_t>(i)];
    x += gaussian_grid(rng, x.height, x.width, cfg.effective_data_noise());
    const KspaceData b = simulate_measurements(*data.ops[static_cast<std::size_t>(i)], x, rng);
    xs.push_back(std::move(x));
    fakes.push_back(generate_fake(view, *data.ops[static_cast<std::size_t>(i)], b, cfg.langevin,
                                  rng));
  }

  // accumulated batch gradient, the same assembly the train step uses
  EnergyGrad grad(net);
  for (int i = 0; i < 4; ++i) {
    EnergyTape tape;
    energy(net, xs[static_cast<std::size_t>(i)], &tape);
    param_grad(net, tape, +0.25, grad);
    energy(net, fakes[static_cast<std::size_t>(i)], &tape);
    param_grad(net, tape, -0.25, grad);
  }

  auto objective = [&](const EnergyNet& candidate) {
    double v = 0.0;
    for (int i = 0; i < 4; ++i) {
      v += energy(candidate, xs[static_cast<std::size_t>(i)]) / 4.0;
      v -= energy(candidate, fakes[static_cast<std::size_t>(i)]) / 4.0;
    }
    return v;
  };

  RngStream pick(9);
  const double h = 1e-5;
  for (int t = 0; t < 8; ++t) {
    const std::size_t i = pick.next_u64() % net.stack.param_count();
    EnergyNet plus = net, minus = net;
    plus.stack.params[i] += h;
    minus.stack.params[i] -= h;
    const double fd = (objective(plus) - objective(minus)) / (2.0 * h);
    CHECK(std::abs(fd - grad.stack[i]) <= 1e-4 * std::max(1.0, std::abs(grad.stack[i])));
  }
}

TEST_CASE("train_deepen: deterministic, logs every step, parameters move") {
  Dataset data = tiny_dataset();
  TrainConfig cfg = tiny_config();
  cfg.epochs = 2;

  DeepenTrainResult a = train_deepen(data, cfg);
  DeepenTrainResult b = train_deepen(data, cfg);
  CHECK(a.net.stack.params == b.net.stack.params);
  CHECK(a.net.head == b.net.head);
  CHECK(a.log.records.size() == 4);  // 8 images / batch 4 x 2 epochs

  RngStream init = RngStream(cfg.seed).substream(0xA11CE);
  EnergyNet fresh = EnergyNet::random_init(init);
  CHECK(a.net.stack.params != fresh.stack.params);
}

TEST_CASE("train_deepen: resuming from a checkpoint reproduces the run bit-exactly") {
  Dataset data = tiny_dataset();
  TrainConfig cfg = tiny_config();
  cfg.epochs = 2;

  DeepenTrainResult full = train_deepen(data, cfg);

  // stop after epoch 0, then resume through epoch 1
  RngStream init = RngStream(cfg.seed).substream(0xA11CE);
  EnergyNet net = EnergyNet::random_init(init);
  AdamState opt(net.param_count());
  TrainLog log;
  train_deepen_epochs(net, opt, log, data, cfg, 0, 1);
  train_deepen_epochs(net, opt, log, data, cfg, 1, 2);

  CHECK(net.stack.params == full.net.stack.params);
  CHECK(net.head == full.net.head);
  REQUIRE(log.records.size() == full.log.records.size());
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    CHECK(log.records[i].e_true == full.log.records[i].e_true);
    CHECK(log.records[i].grad_norm == full.log.records[i].grad_norm);
  }
}

TEST_CASE("dsm_train_step: zero learning rate leaves parameters unchanged") {
  Dataset data = tiny_dataset();
  TrainConfig cfg = tiny_config();
  cfg.adam.learning_rate = 0.0;

  RngStream init(11);
  ImageNet psi = ImageNet::random_init(init, false);
  const std::vector<double> before = psi.stack.params;
  AdamState opt(psi.stack.param_count());
  RngStream rng(12);
  StepRecord rec = dsm_train_step(psi, opt, data, {0, 1, 2, 3}, 0.0, 0.1, cfg, rng, 0);
  CHECK_FALSE(rec.skipped);
  CHECK(rec.e_true > 0.0);
  CHECK(psi.stack.params == before);
}

TEST_CASE("dsm gradient matches finite differences on the composite objective") {
  Dataset data = tiny_dataset(2, 16);
  RngStream init(13);
  ImageNet psi = ImageNet::random_init(init, false);

  RngStream rng(14);
  const ComplexGrid& x = data.images[0];
  const double sigma = 0.05;
  const ComplexGrid n = gaussian_grid(rng, x.height, x.width, 1.0);

  std::vector<double> grad(psi.stack.param_count(), 0.0);
  dsm_loss_grad(psi, x, sigma, n, 1.0, &grad);

  RngStream pick(15);
  const double h = 1e-6;
  for (int t = 0; t < 10; ++t) {
    const std::size_t i = pick.next_u64() % psi.stack.param_count();
    ImageNet plus = psi, minus = psi;
    plus.stack.params[i] += h;
    minus.stack.params[i] -= h;
    const double fd = (dsm_loss_grad(plus, x, sigma, n, 1.0, nullptr) -
                       dsm_loss_grad(minus, x, sigma, n, 1.0, nullptr)) /
                      (2.0 * h);
    CHECK(std::abs(fd - grad[i]) <= 1e-3 * std::max(1.0, std::abs(grad[i])));
  }
}

TEST_CASE("train_dsm: runs deterministically and reduces the loss on a tiny problem") {
  Dataset data = tiny_dataset();
  TrainConfig cfg = tiny_config();
  cfg.epochs = 4;
  cfg.adam.learning_rate = 1e-3;

  ImageNetTrainResult a = train_dsm(data, cfg, 0.0, 0.1);
  ImageNetTrainResult b = train_dsm(data, cfg, 0.0, 0.1);
  CHECK(a.net.stack.params == b.net.stack.params);
  REQUIRE(a.log.records.size() == 8);
  CHECK(a.log.records.back().e_true < a.log.records.front().e_true);
}

TEST_CASE("denoiser: zero-parameter residual net has zero loss at zero noise") {
  Dataset data = tiny_dataset();
  TrainConfig cfg = tiny_config();
  cfg.adam.learning_rate = 0.0;

  ImageNet denoiser(true);  // identity
  AdamState opt(denoiser.stack.param_count());
  RngStream rng(16);
  StepRecord rec = denoiser_train_step(denoiser, opt, data, {0, 1, 2, 3}, 0.0, cfg, rng, 0);
  CHECK(rec.e_true == 0.0);
}

TEST_CASE("train_denoiser: deterministic under a fixed seed") {
  Dataset data = tiny_dataset();
  TrainConfig cfg = tiny_config();
  cfg.epochs = 2;
  cfg.adam.learning_rate = 1e-3;
  ImageNetTrainResult a = train_denoiser(data, cfg, 0.01);
  ImageNetTrainResult b = train_denoiser(data, cfg, 0.01);
  CHECK(a.net.stack.params == b.net.stack.params);
  CHECK(a.log.records.back().e_true < a.log.records.front().e_true);
}

TEST_CASE("trainer rejects invalid configs") {
  Dataset data = tiny_dataset();
  TrainConfig cfg = tiny_config();
  cfg.batch_size = 100;  // bigger than dataset
  CHECK_THROWS_AS(train_deepen(data, cfg), ValidationError);
}

TEST_CASE("TrainLog: epoch gap aggregates non-skipped records") {
  TrainLog log;
  log.append({0, 10.0, 4.0, 6.0, 1.0, false});
  log.append({1, 8.0, 6.0, 2.0, 1.0, false});
  log.append({2, 5.0, 4.5, 0.5, 1.0, false});
  log.append({3, 5.0, 5.5, -0.5, 1.0, false});
  CHECK(log.epoch_gap(0, 2) == doctest::Approx(4.0));
  CHECK(log.epoch_gap(1, 2) == doctest::Approx(0.0));
}
