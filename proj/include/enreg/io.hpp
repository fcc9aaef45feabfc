#pragma once

// File formats: headerless feature CSV, RAW3D volumes and the named-block
// text-matrix format used to persist coefficients, PCA/ELM models and CNNs.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "enreg/errors.hpp"
#include "enreg/types.hpp"

namespace enreg {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
    return std::nullopt;
  return v;
}

// %.17g equivalent; reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

// Always 17 significant digits, e.g. 1.0000000000000000e+00.
inline std::string format_sci17(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific, 16);
  return std::string(buf, ptr);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Feature CSV

struct CsvOptions {
  std::optional<std::size_t> label_column;  // 0-based, in file coordinates
  bool skip_header = false;
};

struct CsvData {
  FeatureMatrix features;
  std::optional<LabelVector> labels;
};

inline std::vector<std::vector<double>> read_csv_rows(std::istream& in, bool skip_header) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_header && line_no == 1) continue;
    if (detail::trim(line).empty()) continue;
    std::vector<double> row;
    std::string_view rest(line);
    std::size_t col = 0;
    while (true) {
      const auto comma = rest.find(',');
      const auto cell = rest.substr(0, comma);
      ++col;
      const auto v = detail::parse_double(cell);
      if (!v) throw ParseError(line_no, col, std::string(detail::trim(cell)));
      row.push_back(*v);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (rows.empty()) {
      width = row.size();
    } else if (row.size() != width) {
      throw FormatError("ragged CSV: row " + std::to_string(line_no) + " has " +
                        std::to_string(row.size()) + " fields, expected " + std::to_string(width));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw EmptyInputError("CSV input contains no data rows");
  return rows;
}

inline CsvData load_feature_csv(std::istream& in, const CsvOptions& opt = {}) {
  const auto rows = read_csv_rows(in, opt.skip_header);
  const auto n = static_cast<Index>(rows.size());
  const auto width = static_cast<Index>(rows.front().size());
  if (opt.label_column && static_cast<Index>(*opt.label_column) >= width)
    throw ConfigError("label column " + std::to_string(*opt.label_column) + " outside a " +
                      std::to_string(width) + "-column file");
  const Index m = opt.label_column ? width - 1 : width;
  if (m < 1) throw EmptyInputError("CSV input has no feature columns");
  Eigen::MatrixXd X(n, m);
  Eigen::VectorXd y(opt.label_column ? n : 0);
  for (Index i = 0; i < n; ++i) {
    Index out = 0;
    for (Index j = 0; j < width; ++j) {
      const double v = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (opt.label_column && static_cast<std::size_t>(j) == *opt.label_column)
        y(i) = v;
      else
        X(i, out++) = v;
    }
  }
  CsvData data{FeatureMatrix(std::move(X)), std::nullopt};
  if (opt.label_column) data.labels = LabelVector(std::move(y));
  return data;
}

inline CsvData load_feature_csv(const std::string& path, const CsvOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return load_feature_csv(in, opt);
}

inline void write_feature_csv(std::ostream& out, const Eigen::MatrixXd& X,
                              const Eigen::VectorXd* labels = nullptr) {
  for (Index i = 0; i < X.rows(); ++i) {
    for (Index j = 0; j < X.cols(); ++j) {
      if (j) out << ',';
      out << detail::format_double(X(i, j));
    }
    if (labels) out << (X.cols() ? "," : "") << detail::format_double((*labels)(i));
    out << '\n';
  }
}

inline void write_feature_csv(const std::string& path, const Eigen::MatrixXd& X,
                              const Eigen::VectorXd* labels = nullptr) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_feature_csv(out, X, labels);
  if (!out) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// RAW3D: "R3D1", u32 dx, dy, dz, then dx*dy*dz float32, all little-endian.

inline constexpr char kRaw3dMagic[4] = {'R', '3', 'D', '1'};
inline constexpr std::size_t kRaw3dHeaderBytes = 16;

inline std::string encode_raw3d(const Volume3D& vol) {
  std::string bytes;
  bytes.reserve(kRaw3dHeaderBytes + 4 * vol.voxels().size());
  bytes.append(kRaw3dMagic, 4);
  auto put_u32 = [&](std::uint32_t v) {
    for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
  };
  for (auto d : vol.dims()) put_u32(d);
  for (float f : vol.voxels()) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(bits);
  }
  return bytes;
}

inline Volume3D decode_raw3d(std::string_view bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kRaw3dMagic, 4) != 0)
    throw FormatError("not a RAW3D file: bad magic");
  if (bytes.size() < kRaw3dHeaderBytes) throw LengthError(kRaw3dHeaderBytes, bytes.size());
  auto get_u32 = [&](std::size_t at) {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + b])) << (8 * b);
    return v;
  };
  const Volume3D::Dims dims{get_u32(4), get_u32(8), get_u32(12)};
  const std::size_t count = Volume3D::voxel_count(dims);
  const std::size_t expected = kRaw3dHeaderBytes + 4 * count;
  if (bytes.size() != expected) throw LengthError(expected, bytes.size());
  std::vector<float> voxels(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t bits = get_u32(kRaw3dHeaderBytes + 4 * i);
    std::memcpy(&voxels[i], &bits, 4);
  }
  return Volume3D(dims, std::move(voxels));
}

inline Volume3D load_volume_raw3d(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_raw3d(ss.str());
}

inline void save_volume_raw3d(const std::string& path, const Volume3D& vol) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  const auto bytes = encode_raw3d(vol);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Text-matrix blocks.
//
//   name: M            followed by M values on one line
//   name: R C          followed by R lines of C values
//   name: free text    attribute line (anything that is not one or two counts)

struct TextBlock {
  std::string name;
  std::vector<Index> dims;  // empty for attribute lines
  std::string attribute;
  Eigen::MatrixXd data;     // M x 1 for vectors

  Eigen::VectorXd vector() const {
    if (dims.size() != 1) throw FormatError("block '" + name + "' is not a vector");
    return data.col(0);
  }
};

class TextBlocks {
 public:
  void add_vector(const std::string& name, const Eigen::VectorXd& v) {
    blocks_.push_back({name, {v.size()}, {}, v});
  }
  void add_matrix(const std::string& name, const Eigen::MatrixXd& m) {
    blocks_.push_back({name, {m.rows(), m.cols()}, {}, m});
  }
  void add_attribute(const std::string& name, const std::string& text) {
    blocks_.push_back({name, {}, text, {}});
  }

  const TextBlock& get(const std::string& name) const {
    for (const auto& b : blocks_)
      if (b.name == name) return b;
    throw FormatError("missing block '" + name + "'");
  }
  bool has(const std::string& name) const {
    for (const auto& b : blocks_)
      if (b.name == name) return true;
    return false;
  }
  const std::vector<TextBlock>& blocks() const noexcept { return blocks_; }

  void write(std::ostream& out) const {
    for (const auto& b : blocks_) {
      out << b.name << ':';
      if (b.dims.empty()) {
        out << ' ' << b.attribute << '\n';
        continue;
      }
      for (auto d : b.dims) out << ' ' << d;
      out << '\n';
      if (b.dims.size() == 1) {
        for (Index i = 0; i < b.data.rows(); ++i) out << (i ? " " : "") << detail::format_sci17(b.data(i, 0));
        out << '\n';
      } else {
        for (Index i = 0; i < b.data.rows(); ++i) {
          for (Index j = 0; j < b.data.cols(); ++j) out << (j ? " " : "") << detail::format_sci17(b.data(i, j));
          out << '\n';
        }
      }
    }
  }

  std::string str() const {
    std::ostringstream ss;
    write(ss);
    return ss.str();
  }

  static TextBlocks read(std::istream& in) {
    TextBlocks result;
    std::string line;
    while (std::getline(in, line)) {
      if (detail::trim(line).empty()) continue;
      const auto colon = line.find(':');
      if (colon == std::string::npos) throw FormatError("expected 'name: ...' header, got '" + line + "'");
      TextBlock block;
      block.name = std::string(detail::trim(std::string_view(line).substr(0, colon)));
      const std::string rest(detail::trim(std::string_view(line).substr(colon + 1)));
      std::istringstream hs(rest);
      std::vector<std::string> tokens;
      for (std::string t; hs >> t;) tokens.push_back(t);
      const bool counts = !tokens.empty() && tokens.size() <= 2 &&
                          std::all_of(tokens.begin(), tokens.end(), [](const std::string& t) {
                            return !t.empty() && t.find_first_not_of("0123456789") == std::string::npos;
                          });
      if (!counts) {
        block.attribute = rest;
        result.blocks_.push_back(std::move(block));
        continue;
      }
      for (const auto& t : tokens) block.dims.push_back(static_cast<Index>(std::stoll(t)));
      const Index rows = block.dims[0];
      const Index cols = block.dims.size() == 2 ? block.dims[1] : 1;
      block.data.resize(rows, cols);
      // vectors are stored transposed on disk (one line), matrices row-major
      for (Index k = 0; k < rows * cols; ++k) {
        std::string tok;
        if (!(in >> tok)) throw FormatError("block '" + block.name + "' truncated");
        const auto v = detail::parse_double(tok);
        if (!v) throw FormatError("block '" + block.name + "': bad value '" + tok + "'");
        block.data(k / cols, k % cols) = *v;
      }
      result.blocks_.push_back(std::move(block));
    }
    return result;
  }

  static TextBlocks read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    return read(in);
  }

  void write_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    write(out);
    if (!out) throw IoError("write failed for '" + path + "'");
  }

 private:
  std::vector<TextBlock> blocks_;
};

inline std::string coefficients_to_text(const Coefficients& c) {
  TextBlocks b;
  b.add_vector("coefficients", c.values);
  return b.str();
}

inline Coefficients coefficients_from_text(std::istream& in) {
  return Coefficients{TextBlocks::read(in).get("coefficients").vector()};
}

}  // namespace enreg
