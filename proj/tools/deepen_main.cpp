// deepen: desk-scale multicoil Fourier image recovery with an end-to-end
// trained posterior energy. Subcommands: gen-data, train, map, sample,
// landscape, metrics, generalize.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "deepen/errors.hpp"
#include "deepen/experiments.hpp"
#include "deepen/io.hpp"
#include "deepen/langevin.hpp"
#include "deepen/map_solver.hpp"
#include "deepen/metrics.hpp"
#include "deepen/parallel.hpp"
#include "deepen/phantom.hpp"
#include "deepen/trainer.hpp"

namespace fs = std::filesystem;
using namespace deepen;

namespace {

constexpr int kElderDefaultSteps = 30;

struct GlobalOpts {
  std::uint64_t seed = 1;
  int threads = 0;
  std::string out_dir = ".";
};

using KV = std::vector<std::pair<std::string, std::string>>;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::uint64_t kv_hash(const KV& entries) {
  KV sorted = entries;
  std::sort(sorted.begin(), sorted.end());
  std::string blob;
  for (const auto& [k, v] : sorted) blob += k + "=" + v + "\n";
  return fnv1a64(reinterpret_cast<const std::uint8_t*>(blob.data()), blob.size());
}

void write_manifest(const GlobalOpts& g, const std::string& command, KV entries) {
  entries.emplace_back("command", command);
  entries.emplace_back("seed", std::to_string(g.seed));
  entries.emplace_back("threads", std::to_string(g.threads));
  entries.emplace_back("out_dir", g.out_dir);
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(kv_hash(entries)));
  entries.emplace_back("config_hash", hash);
  write_key_values((fs::path(g.out_dir) / "manifest.txt").string(), std::move(entries));
}

MaskKind parse_mask_kind(const std::string& s) {
  if (s == "1d" || s == "1D") return MaskKind::oneD;
  if (s == "2d" || s == "2D") return MaskKind::twoD;
  throw ValidationError("mask kind must be 1d or 2d, got " + s);
}

std::string mask_kind_name(MaskKind k) { return k == MaskKind::oneD ? "1d" : "2d"; }

ForwardOperator load_operator(const std::string& mask_path, const std::string& csm_path,
                              double noise_std = 0.0) {
  ForwardOperator op;
  op.mask = load_mask(mask_path);
  op.csm = load_csm(csm_path);
  op.noise_std = noise_std;
  if (op.mask.height != op.csm.height() || op.mask.width != op.csm.width()) {
    throw ValidationError("mask and coil maps disagree on dimensions");
  }
  return op;
}

// Energy interpretation of a checkpoint: 6-record files hold the trained
// posterior energy; 5-record image nets are read as the denoising-form
// energy 0.5||x - psi(x)||^2.
std::unique_ptr<EnergyModel> energy_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.energy) return std::make_unique<DeepenEnergy>(*ckpt.energy);
  if (ckpt.image) return std::make_unique<MuseEnergy>(*ckpt.image);
  throw ValidationError("checkpoint holds no usable network");
}

// ---- gen-data --------------------------------------------------------------

struct GenDataOpts {
  int n_images = 20;
  int size = 32;
  int coils = 2;
  std::string mask_kind = "2d";
  double accel = 4.0;
  int acs = 4;
  double noise_std = 0.01;
  int n_ellipses = 6;
  double intensity_lo = 0.15, intensity_hi = 0.55;
  double phase_amp = 0.7;
};

int run_gen_data(const GlobalOpts& g, const GenDataOpts& o) {
  fs::create_directories(g.out_dir);

  OperatorConfig op_cfg;
  op_cfg.mask_kind = parse_mask_kind(o.mask_kind);
  op_cfg.acceleration = o.accel;
  op_cfg.acs_lines = o.acs;
  op_cfg.coils = o.coils;
  op_cfg.mask_seed = RngStream(g.seed).substream(101).key();
  op_cfg.csm_seed = RngStream(g.seed).substream(102).key();
  op_cfg.noise_std = o.noise_std;

  PhantomSpec ph;
  ph.size = o.size;
  ph.n_ellipses = o.n_ellipses;
  ph.intensity_lo = o.intensity_lo;
  ph.intensity_hi = o.intensity_hi;
  ph.phase_amplitude = o.phase_amp;
  ph.seed = g.seed;

  Dataset data = build_dataset(o.n_images, ph, op_cfg);
  const ForwardOperator& op = *data.ops[0];
  save_mask((fs::path(g.out_dir) / "mask.mask").string(), op.mask);
  save_csm((fs::path(g.out_dir) / "csm.csms").string(), op.csm);

  RngStream meas_root = RngStream(g.seed).substream(103);
  for (int i = 0; i < data.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "truth_%03d.cgrd", i);
    save_cgrd((fs::path(g.out_dir) / name).string(), data.images[i]);
    std::snprintf(name, sizeof(name), "truth_%03d.pgm", i);
    write_pgm((fs::path(g.out_dir) / name).string(), data.images[i]);

    RngStream meas = meas_root.substream(static_cast<std::uint64_t>(i));
    KspaceData b = simulate_measurements(op, data.images[i], meas);
    std::snprintf(name, sizeof(name), "kspace_%03d.kspc", i);
    save_kspace((fs::path(g.out_dir) / name).string(), b);
  }

  write_manifest(g, "gen-data",
                 {{"n_images", std::to_string(o.n_images)},
                  {"size", std::to_string(o.size)},
                  {"coils", std::to_string(o.coils)},
                  {"mask", o.mask_kind},
                  {"accel", fmt(o.accel)},
                  {"acs", std::to_string(o.acs)},
                  {"noise_std", fmt(o.noise_std)},
                  {"n_ellipses", std::to_string(o.n_ellipses)},
                  {"intensity_lo", fmt(o.intensity_lo)},
                  {"intensity_hi", fmt(o.intensity_hi)},
                  {"phase_amp", fmt(o.phase_amp)},
                  {"mask_seed", std::to_string(op_cfg.mask_seed)},
                  {"csm_seed", std::to_string(op_cfg.csm_seed)}});
  std::cout << "wrote " << o.n_images << " images to " << g.out_dir << "\n";
  return 0;
}

// ---- train -----------------------------------------------------------------

struct TrainOpts {
  std::string mode = "deepen";
  std::uint64_t dataset_seed = 1;
  int n_images = 100;
  int size = 32;
  int coils = 2;
  std::string mask_kind = "2d";
  double accel = 4.0;
  int acs = 4;
  double noise_std = 0.01;
  int epochs = 30;
  int batch = 10;
  double lr = 1e-4;
  double epsilon = 0.01;
  int n_iter = 100;
  double init_std = 0.3;
  double data_noise_std = -1.0;
  double sigma_min = 0.0, sigma_max = 0.1;  // dsm
  double sigma = 0.01;                      // denoiser
  std::string out = "checkpoint.dpen";
  std::string resume;
};

KV train_meta(const TrainOpts& o, const TrainConfig& cfg, int epochs_done) {
  return {{"kind", o.mode},
          {"epsilon", fmt(cfg.langevin.epsilon)},
          {"n_iter", std::to_string(cfg.langevin.n_iter)},
          {"init_std", fmt(cfg.langevin.init_std)},
          {"data_noise_std", fmt(cfg.effective_data_noise())},
          {"lr", fmt(cfg.adam.learning_rate)},
          {"beta1", fmt(cfg.adam.beta1)},
          {"beta2", fmt(cfg.adam.beta2)},
          {"batch", std::to_string(cfg.batch_size)},
          {"epochs_done", std::to_string(epochs_done)},
          {"train_seed", std::to_string(cfg.seed)},
          {"sigma_min", fmt(o.sigma_min)},
          {"sigma_max", fmt(o.sigma_max)},
          {"sigma", fmt(o.sigma)}};
}

int run_train(const GlobalOpts& g, const TrainOpts& o) {
  fs::create_directories(g.out_dir);

  OperatorConfig op_cfg;
  op_cfg.mask_kind = parse_mask_kind(o.mask_kind);
  op_cfg.acceleration = o.accel;
  op_cfg.acs_lines = o.acs;
  op_cfg.coils = o.coils;
  op_cfg.mask_seed = RngStream(o.dataset_seed).substream(101).key();
  op_cfg.csm_seed = RngStream(o.dataset_seed).substream(102).key();
  op_cfg.noise_std = o.noise_std;

  PhantomSpec ph;
  ph.size = o.size;
  ph.seed = o.dataset_seed;
  Dataset data = build_dataset(o.n_images, ph, op_cfg);

  TrainConfig cfg;
  cfg.batch_size = o.batch;
  cfg.epochs = o.epochs;
  cfg.adam.learning_rate = o.lr;
  cfg.langevin.epsilon = o.epsilon;
  cfg.langevin.n_iter = o.n_iter;
  cfg.langevin.init_std = o.init_std;
  cfg.data_noise_std = o.data_noise_std;
  cfg.seed = g.seed;

  const std::string rolling = o.out + ".last";
  TrainLog log;

  if (o.mode == "deepen") {
    const CheckpointFn per_epoch = [&](int epoch, const EnergyNet& net, const AdamState& opt,
                                       const TrainLog& l) {
      save_energy_net(rolling + ".dpen", net);
      save_adam(rolling + ".opt", opt);
      write_key_values(rolling + ".meta", train_meta(o, cfg, epoch + 1));
      write_train_log_csv((fs::path(g.out_dir) / "train_log.csv").string(), l);
    };

    EnergyNet net;
    AdamState opt;
    int first_epoch = 0;
    if (!o.resume.empty()) {
      Checkpoint ckpt = load_checkpoint(o.resume + ".dpen");
      if (!ckpt.energy) throw ValidationError("resume checkpoint is not an energy net");
      net = *ckpt.energy;
      opt = load_adam(o.resume + ".opt");
      first_epoch = std::stoi(read_key_values(o.resume + ".meta").at("epochs_done"));
    } else {
      RngStream init_rng = RngStream(cfg.seed).substream(0xA11CE);
      net = EnergyNet::random_init(init_rng);
      opt = AdamState(net.param_count());
    }
    train_deepen_epochs(net, opt, log, data, cfg, first_epoch, cfg.epochs, per_epoch);
    save_energy_net(o.out, net);
    save_adam(o.out + ".opt", opt);
    write_key_values(o.out + ".meta", train_meta(o, cfg, cfg.epochs));
  } else if (o.mode == "dsm") {
    ImageNetTrainResult res = train_dsm(data, cfg, o.sigma_min, o.sigma_max);
    log = std::move(res.log);
    save_image_net(o.out, res.net);
    write_key_values(o.out + ".meta", train_meta(o, cfg, cfg.epochs));
  } else if (o.mode == "denoiser") {
    ImageNetTrainResult res = train_denoiser(data, cfg, o.sigma);
    log = std::move(res.log);
    save_image_net(o.out, res.net);
    write_key_values(o.out + ".meta", train_meta(o, cfg, cfg.epochs));
  } else {
    throw ValidationError("train: mode must be deepen, dsm, or denoiser");
  }

  write_train_log_csv((fs::path(g.out_dir) / "train_log.csv").string(), log);

  KV manifest = train_meta(o, cfg, cfg.epochs);
  manifest.emplace_back("mode", o.mode);
  manifest.emplace_back("dataset_seed", std::to_string(o.dataset_seed));
  manifest.emplace_back("n_images", std::to_string(o.n_images));
  manifest.emplace_back("size", std::to_string(o.size));
  manifest.emplace_back("coils", std::to_string(o.coils));
  manifest.emplace_back("mask", o.mask_kind);
  manifest.emplace_back("accel", fmt(o.accel));
  manifest.emplace_back("acs", std::to_string(o.acs));
  manifest.emplace_back("noise_std", fmt(o.noise_std));
  manifest.emplace_back("out", o.out);
  char cks[32];
  std::snprintf(cks, sizeof(cks), "%016llx",
                static_cast<unsigned long long>(load_checkpoint(o.out).checksum));
  manifest.emplace_back("checkpoint_checksum", cks);
  write_manifest(g, "train", std::move(manifest));

  if (!log.records.empty()) {
    const auto& last = log.records.back();
    std::cout << "trained " << o.mode << ": steps " << log.records.size() << ", final e_true "
              << last.e_true << ", e_fake " << last.e_fake << ", gap " << last.gap << "\n";
  }
  return 0;
}

// ---- map -------------------------------------------------------------------

struct MapOpts {
  std::string method = "deepen";
  std::string checkpoint;
  std::string kspace, mask, csm;
  double tol = 1e-6;
  int max_iter = 500;
  double cg_tol = 1e-8;
  int cg_max = 50;
  double sense_lambda = 1e-2;
  double alpha = -1.0;  // pnp-ista: default eta^2; elder: grid-searched default
  double eta = 1.0;
  int elder_k = kElderDefaultSteps;
  std::string out = "recon.cgrd";
};

int run_map(const GlobalOpts& g, const MapOpts& o) {
  fs::create_directories(g.out_dir);
  const ForwardOperator op = load_operator(o.mask, o.csm);
  const KspaceData b = load_kspace(o.kspace);

  MmConfig cfg;
  cfg.rel_tol = o.tol;
  cfg.max_outer = o.max_iter;
  cfg.cg_tol = o.cg_tol;
  cfg.cg_max = o.cg_max;
  cfg.sense_lambda = o.sense_lambda;

  Checkpoint ckpt = load_checkpoint(o.checkpoint);
  ReconResult res;
  if (o.method == "deepen") {
    res = map_reconstruct(*energy_from_checkpoint(ckpt), op, b, cfg);
  } else if (o.method == "pnp-ista") {
    if (!ckpt.image) throw ValidationError("pnp-ista needs a denoiser checkpoint");
    ImageNet denoiser = *ckpt.image;
    denoiser.residual = true;
    const double alpha = o.alpha > 0.0 ? o.alpha : o.eta * o.eta;
    res = pnp_ista_reconstruct(denoiser, op, b, alpha, o.eta, cfg);
  } else if (o.method == "elder") {
    const double alpha = o.alpha > 0.0 ? o.alpha : 0.5;
    res.image = elder_infer(*energy_from_checkpoint(ckpt), op, b, alpha, o.elder_k,
                            cfg.sense_lambda);
    res.converged = true;
    res.outer_iterations = o.elder_k;
  } else {
    throw ValidationError("map: method must be deepen, pnp-ista, or elder");
  }

  const fs::path out_path = fs::path(g.out_dir) / o.out;
  save_cgrd(out_path.string(), res.image);
  write_pgm(out_path.string() + ".pgm", res.image);
  write_cost_trace_csv((fs::path(g.out_dir) / "cost_trace.csv").string(), res.cost_trace);

  char cks[32];
  std::snprintf(cks, sizeof(cks), "%016llx", static_cast<unsigned long long>(ckpt.checksum));
  write_manifest(g, "map",
                 {{"method", o.method},
                  {"checkpoint", o.checkpoint},
                  {"checkpoint_checksum", cks},
                  {"kspace", o.kspace},
                  {"mask", o.mask},
                  {"csm", o.csm},
                  {"tol", fmt(o.tol)},
                  {"max_iter", std::to_string(o.max_iter)},
                  {"cg_tol", fmt(o.cg_tol)},
                  {"cg_max", std::to_string(o.cg_max)},
                  {"sense_lambda", fmt(o.sense_lambda)},
                  {"alpha", fmt(o.alpha)},
                  {"eta", fmt(o.eta)},
                  {"elder_k", std::to_string(o.elder_k)},
                  {"out", o.out}});

  std::cout << "reconstructed " << o.kspace << ": " << res.outer_iterations << " iterations, "
            << (res.converged ? "converged" : "max-iter") << "\n";
  return 0;
}

// ---- sample ----------------------------------------------------------------

struct SampleOpts {
  std::string checkpoint;
  std::string kspace, mask, csm;
  int n_samples = 100;
  int n_iter = 100;
  double epsilon = -1.0;  // default: checkpoint meta, else 0.01
  double init_std = 0.3;
  bool keep_samples = false;
};

int run_sample(const GlobalOpts& g, const SampleOpts& o) {
  fs::create_directories(g.out_dir);
  const ForwardOperator op = load_operator(o.mask, o.csm);
  const KspaceData b = load_kspace(o.kspace);
  Checkpoint ckpt = load_checkpoint(o.checkpoint);

  LangevinConfig cfg;
  cfg.n_iter = o.n_iter;
  cfg.init_std = o.init_std;
  cfg.seed = g.seed;
  if (o.epsilon > 0.0) {
    cfg.epsilon = o.epsilon;
  } else {
    cfg.epsilon = 0.01;
    const std::string meta_path = o.checkpoint + ".meta";
    if (fs::exists(meta_path)) {
      const auto meta = read_key_values(meta_path);
      if (auto it = meta.find("epsilon"); it != meta.end()) cfg.epsilon = std::stod(it->second);
    }
  }

  PosteriorSamples ps = sample_posterior(*energy_from_checkpoint(ckpt), op, b, cfg, o.n_samples);

  save_cgrd((fs::path(g.out_dir) / "mean.cgrd").string(), ps.stats.mean);
  write_pgm((fs::path(g.out_dir) / "mean.pgm").string(), ps.stats.mean);
  ComplexGrid var(ps.stats.variance.height, ps.stats.variance.width);
  for (std::size_t i = 0; i < var.values.size(); ++i)
    var.values[i] = cplx(ps.stats.variance.values[i], 0.0);
  save_cgrd((fs::path(g.out_dir) / "variance.cgrd").string(), var);
  write_pgm((fs::path(g.out_dir) / "variance.pgm").string(), ps.stats.variance);
  if (o.keep_samples) {
    for (int i = 0; i < o.n_samples; ++i) {
      char name[64];
      std::snprintf(name, sizeof(name), "sample_%03d.cgrd", i);
      save_cgrd((fs::path(g.out_dir) / name).string(), ps.samples[static_cast<std::size_t>(i)]);
    }
  }

  char cks[32];
  std::snprintf(cks, sizeof(cks), "%016llx", static_cast<unsigned long long>(ckpt.checksum));
  write_manifest(g, "sample",
                 {{"checkpoint", o.checkpoint},
                  {"checkpoint_checksum", cks},
                  {"kspace", o.kspace},
                  {"mask", o.mask},
                  {"csm", o.csm},
                  {"n_samples", std::to_string(o.n_samples)},
                  {"n_iter", std::to_string(o.n_iter)},
                  {"epsilon", fmt(cfg.epsilon)},
                  {"init_std", fmt(o.init_std)},
                  {"keep_samples", o.keep_samples ? "1" : "0"}});

  std::cout << "sampled " << o.n_samples << " chains; mean/variance written to " << g.out_dir
            << "\n";
  return 0;
}

// ---- landscape -------------------------------------------------------------

struct LandscapeOpts {
  std::string checkpoint;
  std::string kspace, mask, csm, ref;
  double alpha_min = -0.5, alpha_max = 1.5;
  int n_points = 41;
  double sense_lambda = 1e-2;
};

int run_landscape(const GlobalOpts& g, const LandscapeOpts& o) {
  fs::create_directories(g.out_dir);
  const ForwardOperator op = load_operator(o.mask, o.csm);
  const KspaceData b = load_kspace(o.kspace);
  const ComplexGrid x_ref = load_cgrd(o.ref);
  Checkpoint ckpt = load_checkpoint(o.checkpoint);

  LandscapeSpec spec;
  spec.alpha_min = o.alpha_min;
  spec.alpha_max = o.alpha_max;
  spec.n_points = o.n_points;

  RngStream rng(g.seed);
  LandscapeResult res =
      landscape_sweep(*energy_from_checkpoint(ckpt), op, b, x_ref, spec, rng, o.sense_lambda);

  {
    std::ofstream f((fs::path(g.out_dir) / "landscape.csv").string());
    f << "alpha_s,alpha_z,energy\n";
    f.precision(17);
    for (std::size_t i = 0; i < res.grid.alpha_s.size(); ++i)
      for (std::size_t j = 0; j < res.grid.alpha_z.size(); ++j)
        f << res.grid.alpha_s[i] << "," << res.grid.alpha_z[j] << ","
          << res.grid.energies.at(static_cast<int>(i), static_cast<int>(j)) << "\n";
  }
  save_cgrd((fs::path(g.out_dir) / "landscape_recon.cgrd").string(), res.reconstructed);
  save_cgrd((fs::path(g.out_dir) / "landscape_error.cgrd").string(), res.error);
  write_pgm((fs::path(g.out_dir) / "landscape_recon.pgm").string(), res.reconstructed);
  write_pgm((fs::path(g.out_dir) / "landscape_error.pgm").string(), res.error);

  char cks[32];
  std::snprintf(cks, sizeof(cks), "%016llx", static_cast<unsigned long long>(ckpt.checksum));
  write_manifest(g, "landscape",
                 {{"checkpoint", o.checkpoint},
                  {"checkpoint_checksum", cks},
                  {"kspace", o.kspace},
                  {"mask", o.mask},
                  {"csm", o.csm},
                  {"ref", o.ref},
                  {"alpha_min", fmt(o.alpha_min)},
                  {"alpha_max", fmt(o.alpha_max)},
                  {"n_points", std::to_string(o.n_points)},
                  {"sense_lambda", fmt(o.sense_lambda)},
                  {"min_alpha_s", fmt(res.grid.min_alpha_s)},
                  {"min_alpha_z", fmt(res.grid.min_alpha_z)}});

  std::cout << "landscape minimizer: alpha_s " << res.grid.min_alpha_s << ", alpha_z "
            << res.grid.min_alpha_z << "\n";
  return 0;
}

// ---- metrics ---------------------------------------------------------------

struct MetricsOpts {
  std::vector<std::string> ref, rec;
};

int run_metrics(const GlobalOpts& g, const MetricsOpts& o) {
  fs::create_directories(g.out_dir);
  if (o.ref.size() != o.rec.size() || o.ref.empty()) {
    throw ValidationError("metrics: need equally many --ref and --rec files");
  }
  MetricsReport report;
  std::ofstream f((fs::path(g.out_dir) / "metrics.csv").string());
  f << "ref,rec,psnr_db,ssim\n";
  f.precision(17);
  for (std::size_t i = 0; i < o.ref.size(); ++i) {
    const ComplexGrid a = load_cgrd(o.ref[i]);
    const ComplexGrid b = load_cgrd(o.rec[i]);
    MetricsEntry e{psnr(a, b), ssim(a, b)};
    report.per_image.push_back(e);
    f << o.ref[i] << "," << o.rec[i] << "," << e.psnr_db << "," << e.ssim << "\n";
    std::cout << o.rec[i] << ": psnr " << e.psnr_db << " dB, ssim " << e.ssim << "\n";
  }
  report.finalize();
  std::cout << "mean psnr " << report.psnr_mean << " +/- " << report.psnr_std << " dB, mean ssim "
            << report.ssim_mean << " +/- " << report.ssim_std << "\n";

  KV manifest;
  for (std::size_t i = 0; i < o.ref.size(); ++i) {
    manifest.emplace_back("ref" + std::to_string(i), o.ref[i]);
    manifest.emplace_back("rec" + std::to_string(i), o.rec[i]);
  }
  write_manifest(g, "metrics", std::move(manifest));
  return 0;
}

// ---- generalize ------------------------------------------------------------

struct GeneralizeOpts {
  std::string checkpoint;
  std::uint64_t test_seed = 7;
  int n_test = 20;
  int size = 32;
  int coils = 2;
  std::string mask_kind = "2d";
  double accel = 4.0;
  int acs = 4;
  double noise_std = 0.01;
  std::uint64_t dataset_seed = 1;  // operator seeds must match the training run
  std::vector<std::string> test_masks;
  std::vector<double> test_accels;
  std::vector<int> test_acs;
  double tol = 1e-6;
  int max_iter = 500;
};

int run_generalize(const GlobalOpts& g, const GeneralizeOpts& o) {
  fs::create_directories(g.out_dir);
  if (o.test_masks.size() != o.test_accels.size() ||
      (!o.test_acs.empty() && o.test_acs.size() != o.test_masks.size())) {
    throw ValidationError("generalize: --test-masks and --test-accels must pair up");
  }

  Checkpoint ckpt = load_checkpoint(o.checkpoint);
  auto model = energy_from_checkpoint(ckpt);

  OperatorConfig train_cfg;
  train_cfg.mask_kind = parse_mask_kind(o.mask_kind);
  train_cfg.acceleration = o.accel;
  train_cfg.acs_lines = o.acs;
  train_cfg.coils = o.coils;
  train_cfg.mask_seed = RngStream(o.dataset_seed).substream(101).key();
  train_cfg.csm_seed = RngStream(o.dataset_seed).substream(102).key();
  train_cfg.noise_std = o.noise_std;

  std::vector<OperatorConfig> test_cfgs;
  for (std::size_t i = 0; i < o.test_masks.size(); ++i) {
    OperatorConfig c = train_cfg;
    c.mask_kind = parse_mask_kind(o.test_masks[i]);
    c.acceleration = o.test_accels[i];
    if (!o.test_acs.empty()) c.acs_lines = o.test_acs[i];
    c.mask_seed = RngStream(o.dataset_seed).substream(104).substream(i).key();
    test_cfgs.push_back(c);
  }

  PhantomSpec ph;
  ph.size = o.size;
  ph.seed = o.test_seed;
  std::vector<ComplexGrid> test_images;
  RngStream seeds(ph.seed);
  for (int i = 0; i < o.n_test; ++i) {
    PhantomSpec s = ph;
    s.seed = seeds.substream(static_cast<std::uint64_t>(i)).key();
    test_images.push_back(gen_phantom(s));
  }

  MmConfig mm_cfg;
  mm_cfg.rel_tol = o.tol;
  mm_cfg.max_outer = o.max_iter;

  GeneralizationResult res = generalization_run(*model, test_images, train_cfg, test_cfgs, mm_cfg,
                                                RngStream(o.test_seed).substream(105).key());

  std::ofstream f((fs::path(g.out_dir) / "generalize.csv").string());
  f << "mask,accel,acs,psnr_mean,psnr_std,ssim_mean,ssim_std,psnr_delta_vs_matched\n";
  f.precision(17);
  f << mask_kind_name(train_cfg.mask_kind) << "," << train_cfg.acceleration << ","
    << train_cfg.acs_lines << "," << res.matched.psnr_mean << "," << res.matched.psnr_std << ","
    << res.matched.ssim_mean << "," << res.matched.ssim_std << ",0\n";
  for (const auto& row : res.rows) {
    f << mask_kind_name(row.config.mask_kind) << "," << row.config.acceleration << ","
      << row.config.acs_lines << "," << row.report.psnr_mean << "," << row.report.psnr_std << ","
      << row.report.ssim_mean << "," << row.report.ssim_std << "," << row.psnr_delta_vs_matched
      << "\n";
  }

  std::cout << "matched setting: " << res.matched.psnr_mean << " dB\n";
  for (const auto& row : res.rows) {
    std::cout << mask_kind_name(row.config.mask_kind) << " " << row.config.acceleration
              << "x: " << row.report.psnr_mean << " dB (delta " << row.psnr_delta_vs_matched
              << ")\n";
  }

  char cks[32];
  std::snprintf(cks, sizeof(cks), "%016llx", static_cast<unsigned long long>(ckpt.checksum));
  KV manifest{{"checkpoint", o.checkpoint},
              {"checkpoint_checksum", cks},
              {"test_seed", std::to_string(o.test_seed)},
              {"n_test", std::to_string(o.n_test)},
              {"size", std::to_string(o.size)},
              {"coils", std::to_string(o.coils)},
              {"mask", o.mask_kind},
              {"accel", fmt(o.accel)},
              {"acs", std::to_string(o.acs)},
              {"noise_std", fmt(o.noise_std)},
              {"dataset_seed", std::to_string(o.dataset_seed)},
              {"tol", fmt(o.tol)},
              {"max_iter", std::to_string(o.max_iter)}};
  for (std::size_t i = 0; i < o.test_masks.size(); ++i) {
    manifest.emplace_back("test_mask" + std::to_string(i), o.test_masks[i]);
    manifest.emplace_back("test_accel" + std::to_string(i), fmt(o.test_accels[i]));
  }
  write_manifest(g, "generalize", std::move(manifest));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deepen: posterior-energy training, MAP reconstruction, and posterior sampling "
               "for undersampled multicoil Fourier imaging"};
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key=value config file (subcommand.key=value)");

  GlobalOpts g;
  app.add_option("--seed", g.seed, "global random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads (0 = hardware)")->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "output directory")->capture_default_str();

  GenDataOpts gd;
  auto* cmd_gd = app.add_subcommand("gen-data", "generate phantoms, masks, coil maps, k-space");
  cmd_gd->add_option("--n-images", gd.n_images)->capture_default_str();
  cmd_gd->add_option("--size", gd.size)->capture_default_str();
  cmd_gd->add_option("--coils", gd.coils)->capture_default_str();
  cmd_gd->add_option("--mask", gd.mask_kind, "1d or 2d")->capture_default_str();
  cmd_gd->add_option("--accel", gd.accel)->capture_default_str();
  cmd_gd->add_option("--acs", gd.acs)->capture_default_str();
  cmd_gd->add_option("--noise-std", gd.noise_std)->capture_default_str();
  cmd_gd->add_option("--n-ellipses", gd.n_ellipses)->capture_default_str();
  cmd_gd->add_option("--intensity-lo", gd.intensity_lo)->capture_default_str();
  cmd_gd->add_option("--intensity-hi", gd.intensity_hi)->capture_default_str();
  cmd_gd->add_option("--phase-amp", gd.phase_amp)->capture_default_str();

  TrainOpts tr;
  auto* cmd_tr = app.add_subcommand("train", "train an energy model, DSM baseline, or denoiser");
  cmd_tr->add_option("--mode", tr.mode, "deepen, dsm, or denoiser")->capture_default_str();
  cmd_tr->add_option("--dataset-seed", tr.dataset_seed)->capture_default_str();
  cmd_tr->add_option("--n-images", tr.n_images)->capture_default_str();
  cmd_tr->add_option("--size", tr.size)->capture_default_str();
  cmd_tr->add_option("--coils", tr.coils)->capture_default_str();
  cmd_tr->add_option("--mask", tr.mask_kind, "1d or 2d")->capture_default_str();
  cmd_tr->add_option("--accel", tr.accel)->capture_default_str();
  cmd_tr->add_option("--acs", tr.acs)->capture_default_str();
  cmd_tr->add_option("--noise-std", tr.noise_std)->capture_default_str();
  cmd_tr->add_option("--epochs", tr.epochs)->capture_default_str();
  cmd_tr->add_option("--batch", tr.batch)->capture_default_str();
  cmd_tr->add_option("--lr", tr.lr)->capture_default_str();
  cmd_tr->add_option("--epsilon", tr.epsilon)->capture_default_str();
  cmd_tr->add_option("--n-iter", tr.n_iter)->capture_default_str();
  cmd_tr->add_option("--init-std", tr.init_std)->capture_default_str();
  cmd_tr->add_option("--data-noise-std", tr.data_noise_std,
                     "negative selects the 2*epsilon^2 coupling")->capture_default_str();
  cmd_tr->add_option("--sigma-min", tr.sigma_min)->capture_default_str();
  cmd_tr->add_option("--sigma-max", tr.sigma_max)->capture_default_str();
  cmd_tr->add_option("--sigma", tr.sigma)->capture_default_str();
  cmd_tr->add_option("--out", tr.out)->capture_default_str();
  cmd_tr->add_option("--resume", tr.resume, "checkpoint base path to resume from");

  MapOpts mp;
  auto* cmd_mp = app.add_subcommand("map", "MAP reconstruction");
  cmd_mp->add_option("--method", mp.method, "deepen, pnp-ista, or elder")->capture_default_str();
  cmd_mp->add_option("--checkpoint", mp.checkpoint)->required();
  cmd_mp->add_option("--kspace", mp.kspace)->required();
  cmd_mp->add_option("--mask", mp.mask)->required();
  cmd_mp->add_option("--csm", mp.csm)->required();
  cmd_mp->add_option("--tol", mp.tol)->capture_default_str();
  cmd_mp->add_option("--max-iter", mp.max_iter)->capture_default_str();
  cmd_mp->add_option("--cg-tol", mp.cg_tol)->capture_default_str();
  cmd_mp->add_option("--cg-max", mp.cg_max)->capture_default_str();
  cmd_mp->add_option("--sense-lambda", mp.sense_lambda)->capture_default_str();
  cmd_mp->add_option("--alpha", mp.alpha, "pnp-ista/elder step size")->capture_default_str();
  cmd_mp->add_option("--eta", mp.eta, "pnp-ista likelihood scale")->capture_default_str();
  cmd_mp->add_option("--elder-k", mp.elder_k)->capture_default_str();
  cmd_mp->add_option("--out", mp.out)->capture_default_str();

  SampleOpts sm;
  auto* cmd_sm = app.add_subcommand("sample", "posterior sampling, MMSE and uncertainty maps");
  cmd_sm->add_option("--checkpoint", sm.checkpoint)->required();
  cmd_sm->add_option("--kspace", sm.kspace)->required();
  cmd_sm->add_option("--mask", sm.mask)->required();
  cmd_sm->add_option("--csm", sm.csm)->required();
  cmd_sm->add_option("--n-samples", sm.n_samples)->capture_default_str();
  cmd_sm->add_option("--n-iter", sm.n_iter)->capture_default_str();
  cmd_sm->add_option("--epsilon", sm.epsilon, "negative reads the checkpoint metadata")
      ->capture_default_str();
  cmd_sm->add_option("--init-std", sm.init_std)->capture_default_str();
  cmd_sm->add_flag("--keep-samples", sm.keep_samples, "write every per-chain sample");

  LandscapeOpts ls;
  auto* cmd_ls = app.add_subcommand("landscape", "energy sweep over structured perturbations");
  cmd_ls->add_option("--checkpoint", ls.checkpoint)->required();
  cmd_ls->add_option("--kspace", ls.kspace)->required();
  cmd_ls->add_option("--mask", ls.mask)->required();
  cmd_ls->add_option("--csm", ls.csm)->required();
  cmd_ls->add_option("--ref", ls.ref)->required();
  cmd_ls->add_option("--alpha-min", ls.alpha_min)->capture_default_str();
  cmd_ls->add_option("--alpha-max", ls.alpha_max)->capture_default_str();
  cmd_ls->add_option("--n-points", ls.n_points)->capture_default_str();
  cmd_ls->add_option("--sense-lambda", ls.sense_lambda)->capture_default_str();

  MetricsOpts mt;
  auto* cmd_mt = app.add_subcommand("metrics", "PSNR/SSIM between reference and reconstruction");
  cmd_mt->add_option("--ref", mt.ref)->required();
  cmd_mt->add_option("--rec", mt.rec)->required();

  GeneralizeOpts gn;
  auto* cmd_gn = app.add_subcommand("generalize", "cross-mask reconstruction comparison");
  cmd_gn->add_option("--checkpoint", gn.checkpoint)->required();
  cmd_gn->add_option("--test-seed", gn.test_seed)->capture_default_str();
  cmd_gn->add_option("--n-test", gn.n_test)->capture_default_str();
  cmd_gn->add_option("--size", gn.size)->capture_default_str();
  cmd_gn->add_option("--coils", gn.coils)->capture_default_str();
  cmd_gn->add_option("--mask", gn.mask_kind, "training mask kind")->capture_default_str();
  cmd_gn->add_option("--accel", gn.accel)->capture_default_str();
  cmd_gn->add_option("--acs", gn.acs)->capture_default_str();
  cmd_gn->add_option("--noise-std", gn.noise_std)->capture_default_str();
  cmd_gn->add_option("--dataset-seed", gn.dataset_seed)->capture_default_str();
  cmd_gn->add_option("--test-masks", gn.test_masks)->delimiter(',');
  cmd_gn->add_option("--test-accels", gn.test_accels)->delimiter(',');
  cmd_gn->add_option("--test-acs", gn.test_acs)->delimiter(',');
  cmd_gn->add_option("--tol", gn.tol)->capture_default_str();
  cmd_gn->add_option("--max-iter", gn.max_iter)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad flags are a validation failure
  }

  try {
    set_num_threads(g.threads);
    if (cmd_gd->parsed()) return run_gen_data(g, gd);
    if (cmd_tr->parsed()) return run_train(g, tr);
    if (cmd_mp->parsed()) return run_map(g, mp);
    if (cmd_sm->parsed()) return run_sample(g, sm);
    if (cmd_ls->parsed()) return run_landscape(g, ls);
    if (cmd_mt->parsed()) return run_metrics(g, mt);
    if (cmd_gn->parsed()) return run_generalize(g, gn);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "numerical divergence: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
