#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "swpdmod/image.hpp"

namespace swpdmod {

// All writers are atomic: content goes to "<path>.tmp" and is renamed into
// place, so readers never observe partial artifacts.
void atomic_write_bytes(const std::filesystem::path& path, const std::string& bytes);
void atomic_write_text(const std::filesystem::path& path, const std::string& text);

// 16-bit binary PGM ("P5", maxval 65535, big-endian samples, row-major).
// Values are affinely mapped onto [0, 65535]; the mapping is returned so a
// sidecar can record it. A constant frame writes all-zero samples with the
// degenerate range flagged as scale == 0.
struct PgmScaling {
  double offset = 0.0;
  double scale = 0.0;  // value ~= offset + sample * scale; 0 flags a constant frame
};
PgmScaling write_pgm16(const std::filesystem::path& path, const GridShape& shape,
                       const Eigen::VectorXd& values);

// Fixed-range variant for rendering several frames on one gray scale;
// values outside [lo, hi] clamp to the endpoints.
PgmScaling write_pgm16(const std::filesystem::path& path, const GridShape& shape,
                       const Eigen::VectorXd& values, double lo, double hi);

struct Pgm16 {
  int width = 0;
  int height = 0;
  std::vector<uint16_t> samples;  // row-major
};
Pgm16 read_pgm16(const std::filesystem::path& path);

// Lossless matrix persistence: 16-byte magic "SWPDMOD-RAW" + 5 NULs, then
// u32 little-endian width, height, M, then (width*height) x M float64
// little-endian column-major payload. Grid-shaped data uses its true
// width/height; bare matrices encode (rows, 1, cols).
void write_raw_matrix(const std::filesystem::path& path, const GridShape& shape,
                      const Eigen::MatrixXd& data);
struct RawMatrix {
  GridShape shape;       // width/height from the header (pitch fields defaulted)
  Eigen::MatrixXd data;  // (width*height) x M
};
RawMatrix read_raw_matrix(const std::filesystem::path& path);

// FrameStack directory layout:
//   stack.meta  key=value sidecar (dimensions, pitches, sample_times,
//               per-frame PGM scale/offset, caller-provided extras)
//   stack.raw   lossless float64 matrix, the authoritative data
//   frame_XXX.pgm  one 16-bit graymap per frame for human inspection
void write_frame_stack(const FrameStack& stack, const std::filesystem::path& dir,
                       const std::map<std::string, std::string>& extra_meta = {});
FrameStack read_frame_stack(const std::filesystem::path& dir);
std::map<std::string, std::string> read_stack_meta(const std::filesystem::path& dir);

std::string frame_file_name(int index);  // "frame_007.pgm"

// Serialization helpers shared by the binary formats.
void append_u32_le(std::string& out, uint32_t v);
void append_f64_le(std::string& out, double v);
std::string format_double(double v);  // shortest round-trip decimal text

}  // namespace swpdmod
