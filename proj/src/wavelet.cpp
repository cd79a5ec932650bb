#include "swpdmod/wavelet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "swpdmod/config.hpp"
#include "swpdmod/io.hpp"

namespace swpdmod {

namespace {

// Symlet-4 analysis lowpass taps. The eight values satisfy the orthogonality
// and vanishing-moment identities to ~2e-16 in float64, comfortably inside
// the 1e-12 validation gate.
const std::vector<double> kSym4Lowpass = {
    -0.07576571478950221,  -0.029635527646002493, 0.497618667632775,
    0.8037387518051321,    0.29785779560530606,   -0.09921954357663353,
    -0.012603967262031304, 0.032223100604051466,
};

int pad_up(int n, int block) { return ((n + block - 1) / block) * block; }

// One analysis step on a strided periodic signal of even length n:
// approx[i] = sum_k h[k] x[(2i+k) mod n], detail likewise with g.
void analyze_periodic(const double* x, int n, int stride, const double* h, const double* g,
                      int taps, double* approx, double* detail) {
  const int half = n / 2;
  for (int i = 0; i < half; ++i) {
    double a = 0.0, d = 0.0;
    const int base = 2 * i;
    for (int k = 0; k < taps; ++k) {
      int idx = base + k;
      if (idx >= n) idx %= n;
      const double v = x[idx * stride];
      a += h[k] * v;
      d += g[k] * v;
    }
    approx[i] = a;
    detail[i] = d;
  }
}

// Transpose of analyze_periodic: scatter each coefficient back through the
// filters. Exact adjoint, so forward/inverse are orthogonal inverses.
void synthesize_periodic(const double* approx, const double* detail, int n, const double* h,
                         const double* g, int taps, double* x, int stride) {
  const int half = n / 2;
  for (int i = 0; i < n; ++i) x[i * stride] = 0.0;
  for (int i = 0; i < half; ++i) {
    const double a = approx[i];
    const double d = detail[i];
    const int base = 2 * i;
    for (int k = 0; k < taps; ++k) {
      int idx = base + k;
      if (idx >= n) idx %= n;
      x[idx * stride] += h[k] * a + g[k] * d;
    }
  }
}

struct PadInfo {
  int pw = 0, ph = 0;  // padded dims
  int px = 0, py = 0;  // top-left offset of the original image
};

PadInfo pad_info(const GridShape& shape, int levels) {
  PadInfo p;
  const int block = 1 << levels;
  p.pw = pad_up(std::max(shape.width, block), block);
  p.ph = pad_up(std::max(shape.height, block), block);
  p.px = (p.pw - shape.width) / 2;
  p.py = (p.ph - shape.height) / 2;
  return p;
}

void forward_in_place(std::vector<double>& buf, int pw, int ph, const WaveletBank& bank) {
  const int taps = static_cast<int>(bank.lowpass.size());
  const double* h = bank.lowpass.data();
  const double* g = bank.highpass.data();
  int cw = pw, ch = ph;
  for (int level = 0; level < bank.levels; ++level) {
    // Rows: left half approx, right half detail.
#pragma omp parallel for schedule(static)
    for (int r = 0; r < ch; ++r) {
      std::vector<double> tmp(cw);
      analyze_periodic(&buf[static_cast<size_t>(r) * pw], cw, 1, h, g, taps, tmp.data(),
                       tmp.data() + cw / 2);
      std::copy(tmp.begin(), tmp.end(), buf.begin() + static_cast<size_t>(r) * pw);
    }
    // Columns: top half approx, bottom half detail.
#pragma omp parallel for schedule(static)
    for (int c = 0; c < cw; ++c) {
      std::vector<double> tmp(ch);
      analyze_periodic(&buf[c], ch, pw, h, g, taps, tmp.data(), tmp.data() + ch / 2);
      for (int r = 0; r < ch; ++r) buf[static_cast<size_t>(r) * pw + c] = tmp[r];
    }
    cw /= 2;
    ch /= 2;
  }
}

void inverse_in_place(std::vector<double>& buf, int pw, int ph, const WaveletBank& bank) {
  const int taps = static_cast<int>(bank.lowpass.size());
  const double* h = bank.lowpass.data();
  const double* g = bank.highpass.data();
  for (int level = bank.levels - 1; level >= 0; --level) {
    const int cw = pw >> level;
    const int ch = ph >> level;
    // Columns first (reverse of the forward order).
#pragma omp parallel for schedule(static)
    for (int c = 0; c < cw; ++c) {
      std::vector<double> tmp(ch);
      for (int r = 0; r < ch; ++r) tmp[r] = buf[static_cast<size_t>(r) * pw + c];
      synthesize_periodic(tmp.data(), tmp.data() + ch / 2, ch, h, g, taps, &buf[c], pw);
    }
#pragma omp parallel for schedule(static)
    for (int r = 0; r < ch; ++r) {
      std::vector<double> tmp(cw);
      std::copy(buf.begin() + static_cast<size_t>(r) * pw,
                buf.begin() + static_cast<size_t>(r) * pw + cw, tmp.begin());
      synthesize_periodic(tmp.data(), tmp.data() + cw / 2, cw, h, g, taps,
                          &buf[static_cast<size_t>(r) * pw], 1);
    }
  }
}

std::string subspace_raw_name(int j) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "subspace_%03d.raw", j);
  return buf;
}

std::string subspace_sidecar_name(int j) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "subspace_%03d.txt", j);
  return buf;
}

}  // namespace

WaveletBank WaveletBank::make(const std::string& family, int levels) {
  if (levels < 1 || levels > 24)
    throw ContractError("WaveletBank: levels must be in [1, 24], got " + std::to_string(levels));
  WaveletBank bank;
  bank.family = family;
  bank.levels = levels;
  if (family == "symlet4") {
    bank.lowpass = kSym4Lowpass;
  } else if (family == "haar") {
    const double r = std::sqrt(0.5);
    bank.lowpass = {r, r};
  } else {
    throw DomainError("unknown wavelet family '" + family + "' (supported: symlet4, haar)");
  }
  const int taps = static_cast<int>(bank.lowpass.size());
  bank.highpass.resize(taps);
  for (int k = 0; k < taps; ++k)
    bank.highpass[k] = (k % 2 == 0 ? 1.0 : -1.0) * bank.lowpass[taps - 1 - k];
  bank.validate();
  return bank;
}

void WaveletBank::validate() const {
  const int taps = static_cast<int>(lowpass.size());
  if (taps < 2 || taps % 2 != 0) throw ContractError("WaveletBank: need an even tap count >= 2");
  if (static_cast<int>(highpass.size()) != taps)
    throw ContractError("WaveletBank: filter length mismatch");
  double unit = -1.0;
  for (int k = 0; k < taps; ++k) unit += lowpass[k] * lowpass[k];
  if (std::abs(unit) > 1e-12)
    throw ContractError("WaveletBank: lowpass norm deviates from 1 by " + format_double(unit));
  for (int m = 1; 2 * m < taps; ++m) {
    double corr = 0.0;
    for (int k = 0; k + 2 * m < taps; ++k) corr += lowpass[k] * lowpass[k + 2 * m];
    if (std::abs(corr) > 1e-12)
      throw ContractError("WaveletBank: shift-" + std::to_string(2 * m) +
                          " autocorrelation is " + format_double(corr));
  }
}

int default_levels(const GridShape& shape) {
  const int side = std::min(shape.width, shape.height);
  int levels = 0;
  while ((side >> (levels + 1)) >= 4) ++levels;
  return std::max(1, levels);
}

WaveletCoeffs dwt2_forward(const ImageGrid& image, const WaveletBank& bank) {
  image.validate();
  const PadInfo p = pad_info(image.shape, bank.levels);
  std::vector<double> buf(static_cast<size_t>(p.pw) * p.ph, 0.0);
  for (int r = 0; r < image.shape.height; ++r)
    for (int c = 0; c < image.shape.width; ++c)
      buf[static_cast<size_t>(r + p.py) * p.pw + (c + p.px)] =
          image.values[pixel_index(image.shape, r, c)];
  forward_in_place(buf, p.pw, p.ph, bank);

  WaveletCoeffs out;
  out.orig_shape = image.shape;
  out.padded_width = p.pw;
  out.padded_height = p.ph;
  out.levels = bank.levels;
  out.data = Eigen::Map<Eigen::VectorXd>(buf.data(), static_cast<Eigen::Index>(buf.size()));
  return out;
}

ImageGrid dwt2_inverse(const WaveletCoeffs& coeffs, const WaveletBank& bank) {
  if (coeffs.levels != bank.levels)
    throw ContractError("dwt2_inverse: coefficient depth does not match bank");
  const PadInfo p = pad_info(coeffs.orig_shape, bank.levels);
  if (p.pw != coeffs.padded_width || p.ph != coeffs.padded_height)
    throw ContractError("dwt2_inverse: padded dimensions inconsistent with original shape");
  if (coeffs.data.size() != static_cast<Eigen::Index>(static_cast<size_t>(p.pw) * p.ph))
    throw ContractError("dwt2_inverse: coefficient length mismatch");

  std::vector<double> buf(coeffs.data.data(), coeffs.data.data() + coeffs.data.size());
  inverse_in_place(buf, p.pw, p.ph, bank);

  Eigen::VectorXd values(coeffs.orig_shape.pixels());
  for (int r = 0; r < coeffs.orig_shape.height; ++r)
    for (int c = 0; c < coeffs.orig_shape.width; ++c)
      values[pixel_index(coeffs.orig_shape, r, c)] =
          buf[static_cast<size_t>(r + p.py) * p.pw + (c + p.px)];
  return ImageGrid(coeffs.orig_shape, std::move(values));
}

BasisIndex locate_coefficient(int flat, int padded_width, int padded_height, int levels) {
  if (flat < 0 || flat >= padded_width * padded_height)
    throw ContractError("locate_coefficient: index out of range");
  BasisIndex idx;
  idx.flat = flat;
  const int r = flat / padded_width;
  const int c = flat % padded_width;
  for (int level = 1; level <= levels; ++level) {
    const int cw = padded_width >> level;
    const int ch = padded_height >> level;
    const bool low_col = c < cw;
    const bool low_row = r < ch;
    if (low_row && low_col) {
      if (level == levels) {
        idx.level = level;
        idx.orientation = 'a';
        idx.row = r;
        idx.col = c;
        return idx;
      }
      continue;  // inside the next approximation block
    }
    idx.level = level;
    idx.row = low_row ? r : r - ch;
    idx.col = low_col ? c : c - cw;
    idx.orientation = low_row ? 'h' : (low_col ? 'v' : 'd');
    return idx;
  }
  throw ContractError("locate_coefficient: walk failed");  // unreachable
}

void SubspaceOptions::validate() const {
  if (levels < 0) throw ContractError("SubspaceOptions: levels must be >= 0");
  if (family != "symlet4" && family != "haar")
    throw DomainError("unknown wavelet family '" + family + "' (supported: symlet4, haar)");
}

SweepSubspace build_subspace(const Eigen::VectorXd& frame, const GridShape& shape,
                             const WaveletBank& bank, int n_coeffs,
                             bool force_include_scaling) {
  if (frame.size() != shape.pixels())
    throw ContractError("build_subspace: frame length does not match grid");
  if (n_coeffs < 1) throw ContractError("build_subspace: n_coeffs must be >= 1");
  if (n_coeffs > shape.pixels())
    throw DomainError("build_subspace: n_coeffs " + std::to_string(n_coeffs) +
                      " exceeds pixel count " + std::to_string(shape.pixels()));

  const WaveletCoeffs coeffs = dwt2_forward(ImageGrid(shape, frame), bank);
  const int total = static_cast<int>(coeffs.data.size());

  std::vector<int> order(total);
  std::iota(order.begin(), order.end(), 0);
  auto by_magnitude = [&](int a, int b) {
    const double ma = std::abs(coeffs.data[a]);
    const double mb = std::abs(coeffs.data[b]);
    if (ma != mb) return ma > mb;
    return a < b;  // deterministic tie-break on the canonical index
  };
  if (force_include_scaling) {
    // The coarsest approximation block ranks ahead of everything else.
    auto in_approx = [&](int flat) {
      const int cw = coeffs.padded_width >> coeffs.levels;
      const int ch = coeffs.padded_height >> coeffs.levels;
      return (flat % coeffs.padded_width) < cw && (flat / coeffs.padded_width) < ch;
    };
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const bool aa = in_approx(a);
      const bool bb = in_approx(b);
      if (aa != bb) return aa;
      return by_magnitude(a, b);
    });
  } else {
    std::sort(order.begin(), order.end(), by_magnitude);
  }

  SweepSubspace sub;
  sub.provenance = "wavelet";
  sub.basis.resize(shape.pixels(), n_coeffs);
  sub.indices.reserve(n_coeffs);

  WaveletCoeffs unit = coeffs;
  const bool padded =
      coeffs.padded_width != shape.width || coeffs.padded_height != shape.height;
  for (int n = 0; n < n_coeffs; ++n) {
    const int flat = order[n];
    unit.data.setZero();
    unit.data[flat] = 1.0;
    sub.basis.col(n) = dwt2_inverse(unit, bank).values;
    sub.indices.push_back(
        locate_coefficient(flat, coeffs.padded_width, coeffs.padded_height, coeffs.levels));
  }

  if (padded) {
    // Cropping breaks exact orthonormality; restore it with a QR pass whose
    // column signs are pinned by a nonnegative R diagonal.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(sub.basis);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(shape.pixels(), n_coeffs);
    const Eigen::MatrixXd r =
        qr.matrixQR().topRows(n_coeffs).triangularView<Eigen::Upper>();
    for (int n = 0; n < n_coeffs; ++n)
      if (r(n, n) < 0.0) q.col(n) = -q.col(n);
    sub.basis = std::move(q);
  }
  return sub;
}

std::vector<SweepSubspace> build_subspaces(const FrameStack& stack, int n_coeffs,
                                           const SubspaceOptions& opts) {
  stack.validate();
  opts.validate();
  const int levels = opts.levels > 0 ? opts.levels : default_levels(stack.shape);
  const WaveletBank bank = WaveletBank::make(opts.family, levels);
  std::vector<SweepSubspace> out(stack.frame_count());
#pragma omp parallel for schedule(dynamic)
  for (int j = 0; j < stack.frame_count(); ++j) {
    out[j] = build_subspace(stack.frames.col(j), stack.shape, bank, n_coeffs,
                            opts.force_include_scaling);
    out[j].frame_index = j;
  }
  return out;
}

SweepSubspace oracle_subspace(const Eigen::MatrixXd& true_distortions, int j) {
  if (j < 0 || j >= true_distortions.cols())
    throw ContractError("oracle_subspace: frame index out of range");
  const double norm = true_distortions.col(j).norm();
  if (!(norm > 0.0))
    throw DomainError("oracle_subspace: distortion column " + std::to_string(j) + " is zero");
  SweepSubspace sub;
  sub.basis = true_distortions.col(j) / norm;
  sub.provenance = "oracle";
  sub.frame_index = j;
  return sub;
}

void write_subspaces(const std::vector<SweepSubspace>& subspaces, const GridShape& shape,
                     const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw PersistenceError("cannot create directory " + dir.string() + ": " + ec.message());
  for (size_t j = 0; j < subspaces.size(); ++j) {
    const SweepSubspace& sub = subspaces[j];
    if (sub.basis.rows() != shape.pixels())
      throw ContractError("write_subspaces: basis rows do not match grid");
    write_raw_matrix(dir / subspace_raw_name(static_cast<int>(j)), shape, sub.basis);
    std::ostringstream side;
    side << "frame=" << sub.frame_index << "\n";
    side << "provenance=" << sub.provenance << "\n";
    for (const BasisIndex& idx : sub.indices)
      side << "index=" << idx.level << "," << idx.orientation << "," << idx.row << ","
           << idx.col << "," << idx.flat << "\n";
    atomic_write_text(dir / subspace_sidecar_name(static_cast<int>(j)), side.str());
  }
}

std::vector<SweepSubspace> read_subspaces(const std::filesystem::path& dir,
                                          const GridShape& expected) {
  std::vector<SweepSubspace> out;
  for (int j = 0;; ++j) {
    const std::filesystem::path raw_path = dir / subspace_raw_name(j);
    if (!std::filesystem::exists(raw_path)) break;
    const RawMatrix raw = read_raw_matrix(raw_path);
    if (raw.shape.width != expected.width || raw.shape.height != expected.height)
      throw FormatError("subspace grid mismatch: " + raw_path.string());

    SweepSubspace sub;
    sub.basis = raw.data;
    sub.frame_index = j;
    sub.provenance = "wavelet";
    const std::filesystem::path side = dir / subspace_sidecar_name(j);
    if (std::filesystem::exists(side)) {
      std::ifstream in(side);
      std::string line;
      while (std::getline(in, line)) {
        if (line.rfind("provenance=", 0) == 0) sub.provenance = line.substr(11);
        else if (line.rfind("frame=", 0) == 0) sub.frame_index = std::stoi(line.substr(6));
        else if (line.rfind("index=", 0) == 0) {
          BasisIndex idx;
          char orient = 'a';
          if (std::sscanf(line.c_str() + 6, "%d,%c,%d,%d,%d", &idx.level, &orient, &idx.row,
                          &idx.col, &idx.flat) != 5)
            throw FormatError("bad index line in " + side.string() + ": " + line);
          idx.orientation = orient;
          sub.indices.push_back(idx);
        }
      }
    }
    const Eigen::MatrixXd gram = sub.basis.transpose() * sub.basis;
    const double err = (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols()))
                           .cwiseAbs()
                           .maxCoeff();
    if (err > 1e-10)
      throw FormatError("subspace columns are not orthonormal (max deviation " +
                        format_double(err) + "): " + raw_path.string());
    out.push_back(std::move(sub));
  }
  if (out.empty()) throw FormatError("no subspace files found in " + dir.string());
  return out;
}

}  // namespace swpdmod
