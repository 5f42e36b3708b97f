#include "fastsinkhorn/problems.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

namespace fastsinkhorn {

namespace {

std::vector<double> normalized_draws(std::size_t count, UniformStream& stream) {
  std::vector<double> w(count);
  double sum = 0.0;
  for (double& x : w) {
    x = stream.next();
    sum += x;
  }
  for (double& x : w) x /= sum;
  return w;
}

}  // namespace

Grid1D unit_random_grid(std::size_t n) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "need at least one grid point");
  return Grid1D(n, n == 1 ? 6.0 : 6.0 / static_cast<double>(n - 1));
}

DiscreteMeasure random_measure_1d(std::size_t n, std::uint64_t seed) {
  return random_measure_1d(n, seed, unit_random_grid(n));
}

DiscreteMeasure random_measure_1d(std::size_t n, std::uint64_t seed, const Grid1D& grid) {
  if (grid.n != n) throw Error(ErrorCode::LengthMismatch, "grid size differs from n");
  UniformStream stream(seed);
  return validate_measure(normalized_draws(n, stream), grid);
}

DiscreteMeasure random_measure_2d(std::size_t n, std::size_t m, std::uint64_t seed) {
  return random_measure_2d(n, m, seed, Grid2D(n, m, 1.0, 1.0));
}

DiscreteMeasure random_measure_2d(std::size_t n, std::size_t m, std::uint64_t seed,
                                  const Grid2D& grid) {
  if (grid.n != n || grid.m != m) throw Error(ErrorCode::LengthMismatch, "grid shape differs");
  UniformStream stream(seed);
  return validate_measure(normalized_draws(n * m, stream), grid);
}

MeasurePair random_pair_1d(std::size_t n, std::uint64_t seed) {
  const Grid1D grid = unit_random_grid(n);
  UniformStream stream(seed);
  auto u = validate_measure(normalized_draws(n, stream), grid);
  auto v = validate_measure(normalized_draws(n, stream), grid);
  return {std::move(u), std::move(v)};
}

MeasurePair random_pair_2d(std::size_t n, std::size_t m, std::uint64_t seed) {
  const Grid2D grid(n, m, 1.0, 1.0);
  UniformStream stream(seed);
  auto u = validate_measure(normalized_draws(n * m, stream), grid);
  auto v = validate_measure(normalized_draws(n * m, stream), grid);
  return {std::move(u), std::move(v)};
}

double ricker(double t, double f0, double amplitude) {
  const double a = std::numbers::pi * std::numbers::pi * f0 * f0 * t * t;
  return amplitude * (1.0 - 2.0 * a) * std::exp(-a);
}

std::vector<double> normalize_signal(std::span<const double> f, double delta) {
  if (!(delta > 0.0)) throw Error(ErrorCode::InvalidArgument, "delta must be positive");
  std::vector<double> out(f.size());
  double norm = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!std::isfinite(f[i])) throw Error(ErrorCode::NonFiniteInput, "signal is not finite");
    out[i] = f[i] * f[i];
    norm += out[i];
  }
  if (!(norm > 0.0)) throw Error(ErrorCode::ZeroSignal, "signal is identically zero");
  const double denom = 1.0 + static_cast<double>(f.size()) * delta;
  for (double& x : out) x = (x / norm + delta) / denom;
  return out;
}

RickerPair ricker_pair(std::size_t n, double t_min, double t_max, double shift, double delta) {
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "ricker pair needs at least two samples");
  if (!(t_min < t_max)) throw Error(ErrorCode::InvalidArgument, "t_min must be below t_max");
  const double span = t_max - t_min;
  const Grid1D grid(n, span / static_cast<double>(n - 1));
  std::vector<double> times(n), f(n), g(n);
  for (std::size_t i = 0; i < n; ++i) {
    times[i] = static_cast<double>(i) * span / static_cast<double>(n - 1) + t_min;
    f[i] = ricker(times[i]);
    g[i] = ricker(times[i] - shift);
  }
  auto u = validate_measure(normalize_signal(f, delta), grid);
  auto v = validate_measure(normalize_signal(g, delta), grid);
  return {{std::move(u), std::move(v)}, grid, std::move(times)};
}

namespace {

class PgmReader {
 public:
  explicit PgmReader(std::string_view bytes) : b_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      const char c = b_[pos_];
      if (c == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n' && b_[pos_] != '\r') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  unsigned long header_number(const char* what) {
    skip_space_and_comments();
    return number(what);
  }

  unsigned long number(const char* what) {
    unsigned long value = 0;
    const char* first = b_.data() + pos_;
    const char* last = b_.data() + b_.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr == first) {
      throw Error(ErrorCode::ParseError, std::string("PGM: bad ") + what);
    }
    pos_ += static_cast<std::size_t>(ptr - first);
    return value;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t k) { pos_ += k; }
  bool at_space() const {
    return pos_ < b_.size() && std::isspace(static_cast<unsigned char>(b_[pos_]));
  }
  std::string_view bytes() const { return b_; }

 private:
  std::string_view b_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

Array2D parse_pgm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5')) {
    throw Error(ErrorCode::UnsupportedFormat, "only P2 and P5 PGM files are supported");
  }
  const bool binary = bytes[1] == '5';
  PgmReader rd(bytes);
  rd.advance(2);
  const unsigned long width = rd.header_number("width");
  const unsigned long height = rd.header_number("height");
  const unsigned long maxval = rd.header_number("maxval");
  if (width == 0 || height == 0) throw Error(ErrorCode::ParseError, "PGM: empty image");
  if (maxval == 0 || maxval > 65535) throw Error(ErrorCode::ParseError, "PGM: maxval out of range");

  Array2D img(height, width);
  if (!binary) {
    for (std::size_t i = 0; i < height; ++i) {
      for (std::size_t j = 0; j < width; ++j) {
        const unsigned long v = rd.header_number("pixel");
        if (v > maxval) throw Error(ErrorCode::ParseError, "PGM: pixel above maxval");
        img(i, j) = static_cast<double>(v);
      }
    }
    rd.skip_space_and_comments();
    if (rd.pos() != bytes.size()) throw Error(ErrorCode::ParseError, "PGM: trailing data");
    return img;
  }

  if (!rd.at_space()) throw Error(ErrorCode::ParseError, "PGM: missing separator before raster");
  rd.advance(1);
  const std::size_t bpp = maxval < 256 ? 1 : 2;
  const std::size_t need = static_cast<std::size_t>(width) * height * bpp;
  if (bytes.size() - rd.pos() < need) throw Error(ErrorCode::ParseError, "PGM: truncated raster");
  const auto* raster = reinterpret_cast<const unsigned char*>(bytes.data() + rd.pos());
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      const std::size_t at = (i * width + j) * bpp;
      const unsigned v = bpp == 1 ? raster[at] : (unsigned{raster[at]} << 8) | raster[at + 1];
      if (v > maxval) throw Error(ErrorCode::ParseError, "PGM: pixel above maxval");
      img(i, j) = static_cast<double>(v);
    }
  }
  return img;
}

Array2D parse_csv(std::string_view text) {
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  std::size_t blank_run = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
    ++line_no;
    if (line.empty()) {
      ++blank_run;
      continue;
    }
    if (blank_run > 0 && !rows.empty()) {
      throw Error(ErrorCode::ParseError, "CSV: blank line inside matrix at line " + std::to_string(line_no));
    }
    blank_run = 0;
    std::vector<double> row;
    while (true) {
      const std::size_t comma = line.find(',');
      const std::string_view cell = trim(line.substr(0, comma));
      double value = 0.0;
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      if (!cell.empty() && *first == '+') ++first;
      auto [ptr, ec] = std::from_chars(first, last, value);
      if (cell.empty() || ec != std::errc() || ptr != last) {
        throw Error(ErrorCode::ParseError, "CSV: bad number on line " + std::to_string(line_no));
      }
      row.push_back(value);
      if (comma == std::string_view::npos) break;
      line = line.substr(comma + 1);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorCode::ParseError, "CSV: row " + std::to_string(line_no) + " has " +
                                             std::to_string(row.size()) + " values, expected " +
                                             std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::ParseError, "CSV: no data");
  return Array2D::from_rows(rows);
}

Array2D load_matrix(const std::filesystem::path& path, MatrixFormat format) {
  const std::string contents = read_file(path);
  return format == MatrixFormat::pgm ? parse_pgm(contents) : parse_csv(contents);
}

Array2D load_matrix(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".pgm") return load_matrix(path, MatrixFormat::pgm);
  if (ext == ".csv" || ext == ".txt") return load_matrix(path, MatrixFormat::csv);
  throw Error(ErrorCode::UnsupportedFormat, "unknown matrix file extension: " + ext);
}

DiscreteMeasure image_to_measure(const Array2D& img, double delta, double h1, double h2) {
  if (img.size() == 0) throw Error(ErrorCode::ZeroSignal, "empty image");
  return validate_measure(normalize_signal(img.flat(), delta), Grid2D(img.rows(), img.cols(), h1, h2));
}

Array2D resize_nearest(const Array2D& img, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0 || img.size() == 0) {
    throw Error(ErrorCode::InvalidArgument, "resize needs nonempty shapes");
  }
  Array2D out(rows, cols);
  for (std::size_t j = 0; j < cols; ++j) {
    const auto sj = static_cast<std::size_t>((static_cast<double>(j) + 0.5) *
                                             static_cast<double>(img.cols()) / static_cast<double>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
      const auto si = static_cast<std::size_t>((static_cast<double>(i) + 0.5) *
                                               static_cast<double>(img.rows()) / static_cast<double>(rows));
      out(i, j) = img(std::min(si, img.rows() - 1), std::min(sj, img.cols() - 1));
    }
  }
  return out;
}

}  // namespace fastsinkhorn
