#include "swpdmod/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "swpdmod/config.hpp"

namespace swpdmod {

namespace fs = std::filesystem;

namespace {

constexpr char kRawMagic[16] = {'S', 'W', 'P', 'D', 'M', 'O', 'D', '-',
                                'R', 'A', 'W', '\0', '\0', '\0', '\0', '\0'};

std::string read_all_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PersistenceError("cannot open for reading: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw PersistenceError("read failure: " + path.string());
  return std::move(buf).str();
}

uint32_t take_u32_le(const std::string& bytes, size_t& pos, const fs::path& path) {
  if (pos + 4 > bytes.size()) throw FormatError("truncated header: " + path.string());
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(bytes[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

double take_f64_le(const std::string& bytes, size_t& pos) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(bytes[pos + i])) << (8 * i);
  pos += 8;
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

}  // namespace

void append_u32_le(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_f64_le(std::string& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void atomic_write_bytes(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw PersistenceError("cannot open for writing: " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out.good()) throw PersistenceError("write failure: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw PersistenceError("cannot finalize " + path.string() + ": " + ec.message());
}

void atomic_write_text(const fs::path& path, const std::string& text) {
  atomic_write_bytes(path, text);
}

PgmScaling write_pgm16(const fs::path& path, const GridShape& shape,
                       const Eigen::VectorXd& values) {
  const double lo = values.size() ? values.minCoeff() : 0.0;
  const double hi = values.size() ? values.maxCoeff() : 0.0;
  return write_pgm16(path, shape, values, lo, hi);
}

PgmScaling write_pgm16(const fs::path& path, const GridShape& shape,
                       const Eigen::VectorXd& values, double lo, double hi) {
  if (values.size() != shape.pixels())
    throw ContractError("write_pgm16: value count does not match grid");
  if (!values.allFinite()) throw ContractError("write_pgm16: non-finite value");
  if (!(hi >= lo)) throw ContractError("write_pgm16: empty gray range");

  PgmScaling scaling;
  scaling.offset = lo;
  scaling.scale = hi > lo ? (hi - lo) / 65535.0 : 0.0;

  std::string out;
  out.reserve(32 + 2 * static_cast<size_t>(values.size()));
  out += "P5\n" + std::to_string(shape.width) + " " + std::to_string(shape.height) + "\n65535\n";
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    uint16_t s = 0;
    if (scaling.scale > 0.0) {
      const double clamped = std::clamp(values[i], lo, hi);
      s = static_cast<uint16_t>(std::lround((clamped - lo) / (hi - lo) * 65535.0));
    }
    out.push_back(static_cast<char>(s >> 8));  // big-endian per the PGM standard
    out.push_back(static_cast<char>(s & 0xFF));
  }
  atomic_write_bytes(path, out);
  return scaling;
}

Pgm16 read_pgm16(const fs::path& path) {
  const std::string bytes = read_all_bytes(path);
  size_t pos = 0;
  // Header tokens are whitespace-separated; '#' comments run to end of line.
  auto next_token = [&]() -> std::string {
    while (pos < bytes.size()) {
      const char c = bytes[pos];
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
      } else {
        break;
      }
    }
    size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (pos == start) throw FormatError("truncated PGM header: " + path.string());
    return bytes.substr(start, pos - start);
  };
  auto parse_int = [&](const std::string& tok, const char* what) {
    int v = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size() || v < 1)
      throw FormatError(std::string("bad PGM ") + what + " '" + tok + "': " + path.string());
    return v;
  };

  if (next_token() != "P5") throw FormatError("not a P5 graymap: " + path.string());
  Pgm16 pgm;
  pgm.width = parse_int(next_token(), "width");
  pgm.height = parse_int(next_token(), "height");
  const int maxval = parse_int(next_token(), "maxval");
  if (maxval != 65535)
    throw FormatError("expected maxval 65535, got " + std::to_string(maxval) + ": " + path.string());
  ++pos;  // single whitespace byte between header and payload

  const size_t count = static_cast<size_t>(pgm.width) * static_cast<size_t>(pgm.height);
  if (pos + 2 * count > bytes.size()) throw FormatError("truncated PGM payload: " + path.string());
  pgm.samples.resize(count);
  for (size_t i = 0; i < count; ++i) {
    pgm.samples[i] = static_cast<uint16_t>((static_cast<uint8_t>(bytes[pos]) << 8) |
                                           static_cast<uint8_t>(bytes[pos + 1]));
    pos += 2;
  }
  return pgm;
}

void write_raw_matrix(const fs::path& path, const GridShape& shape, const Eigen::MatrixXd& data) {
  if (data.rows() != shape.pixels())
    throw ContractError("write_raw_matrix: row count does not match grid");
  std::string out;
  out.reserve(28 + 8 * static_cast<size_t>(data.size()));
  out.append(kRawMagic, sizeof(kRawMagic));
  append_u32_le(out, static_cast<uint32_t>(shape.width));
  append_u32_le(out, static_cast<uint32_t>(shape.height));
  append_u32_le(out, static_cast<uint32_t>(data.cols()));
  for (Eigen::Index j = 0; j < data.cols(); ++j)
    for (Eigen::Index i = 0; i < data.rows(); ++i) append_f64_le(out, data(i, j));
  atomic_write_bytes(path, out);
}

RawMatrix read_raw_matrix(const fs::path& path) {
  const std::string bytes = read_all_bytes(path);
  if (bytes.size() < sizeof(kRawMagic) || std::memcmp(bytes.data(), kRawMagic, sizeof(kRawMagic)) != 0)
    throw FormatError("bad raw-matrix magic: " + path.string());
  size_t pos = sizeof(kRawMagic);
  RawMatrix raw;
  raw.shape.width = static_cast<int>(take_u32_le(bytes, pos, path));
  raw.shape.height = static_cast<int>(take_u32_le(bytes, pos, path));
  const uint32_t cols = take_u32_le(bytes, pos, path);
  if (raw.shape.width < 1 || raw.shape.height < 1 || cols < 1)
    throw FormatError("bad raw-matrix dimensions: " + path.string());
  const size_t rows = static_cast<size_t>(raw.shape.width) * static_cast<size_t>(raw.shape.height);
  const size_t need = pos + 8 * rows * cols;
  if (bytes.size() < need) throw FormatError("truncated raw-matrix payload: " + path.string());
  if (bytes.size() > need) throw FormatError("trailing bytes in raw matrix: " + path.string());
  raw.data.resize(static_cast<Eigen::Index>(rows), cols);
  for (uint32_t j = 0; j < cols; ++j)
    for (size_t i = 0; i < rows; ++i) raw.data(static_cast<Eigen::Index>(i), j) = take_f64_le(bytes, pos);
  return raw;
}

std::string frame_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%03d.pgm", index);
  return buf;
}

void write_frame_stack(const FrameStack& stack, const fs::path& dir,
                       const std::map<std::string, std::string>& extra_meta) {
  stack.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw PersistenceError("cannot create directory " + dir.string() + ": " + ec.message());

  write_raw_matrix(dir / "stack.raw", stack.shape, stack.frames);

  std::ostringstream meta;
  meta << "width=" << stack.shape.width << "\n";
  meta << "height=" << stack.shape.height << "\n";
  meta << "m=" << stack.frame_count() << "\n";
  meta << "pitch_x=" << format_double(stack.shape.pitch_x) << "\n";
  meta << "pitch_y=" << format_double(stack.shape.pitch_y) << "\n";
  if (!stack.sample_times.empty()) {
    meta << "sample_times=";
    for (size_t j = 0; j < stack.sample_times.size(); ++j)
      meta << (j ? "," : "") << format_double(stack.sample_times[j]);
    meta << "\n";
  }
  for (int j = 0; j < stack.frame_count(); ++j) {
    const PgmScaling s = write_pgm16(dir / frame_file_name(j), stack.shape, stack.frames.col(j));
    char key[32];
    std::snprintf(key, sizeof(key), "frame_%03d", j);
    meta << key << "_offset=" << format_double(s.offset) << "\n";
    meta << key << "_scale=" << format_double(s.scale) << "\n";
  }
  for (const auto& [k, v] : extra_meta) meta << k << "=" << v << "\n";
  atomic_write_text(dir / "stack.meta", meta.str());
}

std::map<std::string, std::string> read_stack_meta(const fs::path& dir) {
  return KeyValueConfig::from_file(dir / "stack.meta").raw_entries();
}

FrameStack read_frame_stack(const fs::path& dir) {
  KeyValueConfig meta = KeyValueConfig::from_file(dir / "stack.meta");
  FrameStack stack;
  stack.shape.width = meta.require_int("width");
  stack.shape.height = meta.require_int("height");
  const int m = meta.require_int("m");
  stack.shape.pitch_x = meta.get_double("pitch_x", 1e-4);
  stack.shape.pitch_y = meta.get_double("pitch_y", 1e-4);
  stack.sample_times = meta.get_double_list("sample_times", {});

  const RawMatrix raw = read_raw_matrix(dir / "stack.raw");
  if (raw.shape.width != stack.shape.width || raw.shape.height != stack.shape.height)
    throw FormatError("stack.raw dimensions disagree with stack.meta width/height in " + dir.string());
  if (raw.data.cols() != m)
    throw FormatError("stack.raw frame count disagrees with stack.meta m in " + dir.string());

  for (int j = 0; j < m; ++j) {
    const fs::path frame = dir / frame_file_name(j);
    if (!fs::exists(frame))
      throw FormatError("stack.meta promises m=" + std::to_string(m) + " but " +
                        frame.filename().string() + " is missing in " + dir.string());
    const Pgm16 pgm = read_pgm16(frame);
    if (pgm.width != stack.shape.width || pgm.height != stack.shape.height)
      throw FormatError("PGM header disagrees with stack.meta dimensions: " + frame.string());
  }

  stack.frames = raw.data;
  stack.validate();
  return stack;
}

}  // namespace swpdmod
