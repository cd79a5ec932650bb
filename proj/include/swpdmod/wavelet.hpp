#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "swpdmod/image.hpp"

namespace swpdmod {

// Orthonormal 2D separable DWT with periodic boundary extension. Periodic
// extension keeps the transform exactly orthogonal, which the subspace
// construction leans on: basis vectors from distinct coefficients are
// orthonormal by construction, no Gram pass needed on unpadded grids.
struct WaveletBank {
  std::string family;            // "symlet4" or "haar"
  std::vector<double> lowpass;   // analysis taps h
  std::vector<double> highpass;  // QMF pair g[k] = (-1)^k h[L-1-k]
  int levels = 1;

  static WaveletBank make(const std::string& family, int levels);
  // Orthogonality identities within 1e-12; throws ContractError otherwise.
  void validate() const;
};

// Depth that leaves the coarsest band at least 4x4 (1 for tiny images).
int default_levels(const GridShape& shape);

struct WaveletCoeffs {
  GridShape orig_shape;
  int padded_width = 0;   // multiples of 2^levels
  int padded_height = 0;
  int levels = 0;
  Eigen::VectorXd data;   // row-major over the padded grid
};

WaveletCoeffs dwt2_forward(const ImageGrid& image, const WaveletBank& bank);
ImageGrid dwt2_inverse(const WaveletCoeffs& coeffs, const WaveletBank& bank);

// Canonical decomposition layout (Mallat): the level-l approximation block
// occupies rows [0, H/2^l) x cols [0, W/2^l) of the padded grid; each level's
// detail bands sit beside it. Orientations: 'a' approximation, 'h' highpass
// along width, 'v' highpass along height, 'd' both.
struct BasisIndex {
  int level = 0;
  char orientation = 'a';
  int row = 0;
  int col = 0;
  int flat = 0;  // canonical (padded, row-major) coefficient index
};
BasisIndex locate_coefficient(int flat, int padded_width, int padded_height, int levels);

struct SweepSubspace {
  Eigen::MatrixXd basis;            // P x N_j, orthonormal columns
  std::vector<BasisIndex> indices;  // empty for oracle subspaces
  std::string provenance;           // "wavelet" or "oracle"
  int frame_index = 0;
};

struct SubspaceOptions {
  std::string family = "symlet4";
  int levels = 0;  // 0 = auto from grid size
  bool force_include_scaling = false;
  void validate() const;
};

// Top-N_j selection by |coefficient| descending, ties broken by ascending
// canonical index. Padded coefficients participate in the ranking; basis
// vectors are cropped back to the grid and re-orthonormalized by QR when
// padding was needed.
SweepSubspace build_subspace(const Eigen::VectorXd& frame, const GridShape& shape,
                             const WaveletBank& bank, int n_coeffs,
                             bool force_include_scaling = false);
std::vector<SweepSubspace> build_subspaces(const FrameStack& stack, int n_coeffs,
                                           const SubspaceOptions& opts = {});

// Span of the noiseless distortion column for frame j (simulation only).
SweepSubspace oracle_subspace(const Eigen::MatrixXd& true_distortions, int j);

// Per-frame raw matrix + provenance sidecar, so solvers can run on
// precomputed subspaces.
void write_subspaces(const std::vector<SweepSubspace>& subspaces, const GridShape& shape,
                     const std::filesystem::path& dir);
std::vector<SweepSubspace> read_subspaces(const std::filesystem::path& dir,
                                          const GridShape& expected);

}  // namespace swpdmod
