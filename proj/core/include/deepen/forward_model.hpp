#pragma once

#include <cstdint>
#include <vector>

#include "deepen/cg.hpp"
#include "deepen/complex_grid.hpp"
#include "deepen/rng.hpp"

namespace deepen {

/// Per-coil spatial sensitivity profiles, sum-of-squares normalized:
/// sum_i |maps[i](p)|^2 == 1 at every pixel.
struct CoilSensitivities {
  std::vector<ComplexGrid> maps;

  int num_coils() const { return static_cast<int>(maps.size()); }
  int height() const { return maps.empty() ? 0 : maps[0].height; }
  int width() const { return maps.empty() ? 0 : maps[0].width; }
};

enum class MaskKind : std::uint8_t { oneD = 0, twoD = 1 };

/// Binary k-space sampling pattern with a fully sampled center (ACS) block.
struct SamplingMask {
  MaskKind kind = MaskKind::twoD;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pattern;  // row-major, 0 or 1

  bool at(int y, int x) const { return pattern[static_cast<std::size_t>(y) * width + x] != 0; }
  int ones() const;
  double acceleration() const;  // H*W / ones
};

/// Stack of per-coil k-space planes; entries outside the mask are zero.
struct KspaceData {
  std::vector<ComplexGrid> coils;

  int num_coils() const { return static_cast<int>(coils.size()); }
  int height() const { return coils.empty() ? 0 : coils[0].height; }
  int width() const { return coils.empty() ? 0 : coils[0].width; }
};

/// The measurement model: per coil i, mask .* fft2(csm_i .* x), plus
/// complex white Gaussian noise of std noise_std on sampled entries.
struct ForwardOperator {
  SamplingMask mask;
  CoilSensitivities csm;
  double noise_std = 0.0;

  int height() const { return mask.height; }
  int width() const { return mask.width; }
  int num_coils() const { return csm.num_coils(); }
};

KspaceData apply_A(const ForwardOperator& op, const ComplexGrid& x);
ComplexGrid apply_AH(const ForwardOperator& op, const KspaceData& y);
/// apply_AH(apply_A(x)) without materializing the intermediate stack.
ComplexGrid normal_op(const ForwardOperator& op, const ComplexGrid& x);

/// b = A x + n, with n drawn on masked entries only.
KspaceData simulate_measurements(const ForwardOperator& op, const ComplexGrid& x, RngStream& rng);

/// Regularized least-squares initialization: solves (A^H A + lambda I) x = A^H b
/// by conjugate gradients (tol 1e-8, at most 200 iterations).
ComplexGrid sense_init(const ForwardOperator& op, const KspaceData& b, double lambda);

/// Variable-density undersampling pattern at the requested acceleration
/// (matched within rounding by construction). oneD samples whole columns with
/// a Gaussian density over column index; twoD samples points with radially
/// decaying density. The center acs x acs block (acs columns for oneD) is
/// always fully sampled. Throws ValidationError when the ACS region alone
/// exceeds the sample budget.
SamplingMask gen_mask(MaskKind kind, int h, int w, double acceleration, int acs_lines,
                      RngStream& rng);

/// Synthetic smooth coil profiles (Gaussian bumps with slowly varying phase),
/// sum-of-squares normalized pixelwise.
CoilSensitivities gen_csm(int num_coils, int h, int w, RngStream& rng);

}  // namespace deepen
