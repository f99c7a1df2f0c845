#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "deepen/complex_grid.hpp"
#include "deepen/energy_model.hpp"
#include "deepen/forward_model.hpp"
#include "deepen/optimizer.hpp"
#include "deepen/trainer.hpp"

namespace deepen {

// All multi-byte fields little-endian. Malformed files raise ValidationError.

/// "CGRD", u16 version = 1, u32 height, u32 width, then h*w (f64 re, f64 im).
void save_cgrd(const std::string& path, const ComplexGrid& g);
ComplexGrid load_cgrd(const std::string& path);

/// "KSPC", u16 version = 1, u32 coils, then one CGRD record per coil.
void save_kspace(const std::string& path, const KspaceData& k);
KspaceData load_kspace(const std::string& path);

/// Coil maps share the stack container layout under the "CSMS" magic.
void save_csm(const std::string& path, const CoilSensitivities& csm);
CoilSensitivities load_csm(const std::string& path);

/// "MASK", u8 kind, u32 h, u32 w, row-major bit-packed pattern (LSB first).
void save_mask(const std::string& path, const SamplingMask& m);
SamplingMask load_mask(const std::string& path);

/// Checkpoint: "DPEN", u16 version = 1, u16 record count, then per record a
/// u32x4 shape header (out, in, kh, kw) followed by f64 weights and biases in
/// declaration order (the 1x1 scalar head carries no bias), and a trailing
/// u64 FNV-1a checksum of everything between the magic and the checksum.
void save_energy_net(const std::string& path, const EnergyNet& net);
void save_image_net(const std::string& path, const ImageNet& net);

struct Checkpoint {
  std::optional<EnergyNet> energy;
  std::optional<ImageNet> image;  // residual flag left false; the consumer decides
  std::uint64_t checksum = 0;
};

/// Distinguishes net kinds by structure: 6 records ending in a 1x1 head is an
/// energy net, 5 records ending in 2 output channels is an image net.
Checkpoint load_checkpoint(const std::string& path);

/// Optimizer sidecar for exact training resume: "DOPT", u16 version, u64
/// step, u64 n, n f64 first moments, n f64 second moments, u64 checksum.
void save_adam(const std::string& path, const AdamState& st);
AdamState load_adam(const std::string& path);

/// 8-bit binary PGM of magnitudes, normalized to the image maximum.
void write_pgm(const std::string& path, const ComplexGrid& g);
void write_pgm(const std::string& path, const RealGrid& g);

/// CSV "step,e_true,e_fake,gap,grad_norm".
void write_train_log_csv(const std::string& path, const TrainLog& log);
/// CSV "iteration,cost".
void write_cost_trace_csv(const std::string& path, const std::vector<double>& trace);

/// key=value lines, sorted by key (manifests, checkpoint metadata, configs).
void write_key_values(const std::string& path,
                      std::vector<std::pair<std::string, std::string>> entries);
std::map<std::string, std::string> read_key_values(const std::string& path);

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n);

}  // namespace deepen
