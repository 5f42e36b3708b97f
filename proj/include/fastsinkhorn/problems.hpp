#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "fastsinkhorn/types.hpp"

namespace fastsinkhorn {

/// Identifier of the pseudo-random stream used by the generators. Written into
/// benchmark metadata so runs can be replayed elsewhere.
inline constexpr std::string_view kGeneratorId = "mt19937_64/u53-open";

/// Uniform draw in (0, 1): 53 high bits of mt19937_64 plus half an ulp, so
/// the value is never exactly 0 or 1 and does not depend on the standard
/// library's distribution implementation.
class UniformStream {
 public:
  explicit UniformStream(std::uint64_t seed) : engine_(seed) {}
  double next() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

 private:
  std::mt19937_64 engine_;
};

struct MeasurePair {
  DiscreteMeasure u;
  DiscreteMeasure v;
};

/// Grid points x_i = (i-1) * 6/(n-1) - 3 on [-3, 3]; spacing 6/(n-1)
/// (6 when n == 1).
Grid1D unit_random_grid(std::size_t n);

/// n uniform (0,1) draws divided by their sum.
DiscreteMeasure random_measure_1d(std::size_t n, std::uint64_t seed);
DiscreteMeasure random_measure_1d(std::size_t n, std::uint64_t seed, const Grid1D& grid);
/// n*m draws in column-major order on a unit-spaced grid.
DiscreteMeasure random_measure_2d(std::size_t n, std::size_t m, std::uint64_t seed);
DiscreteMeasure random_measure_2d(std::size_t n, std::size_t m, std::uint64_t seed,
                                  const Grid2D& grid);

/// u and v from one stream: u first, then v.
MeasurePair random_pair_1d(std::size_t n, std::uint64_t seed);
MeasurePair random_pair_2d(std::size_t n, std::size_t m, std::uint64_t seed);

/// A (1 - 2 pi^2 f0^2 t^2) exp(-pi^2 f0^2 t^2).
double ricker(double t, double f0 = 1.0, double amplitude = 1.0);

/// (f^2 / ||f^2||_1 + delta) / (1 + L delta) with L the number of samples.
/// Output sums to one and every entry is at least delta / (1 + L delta).
std::vector<double> normalize_signal(std::span<const double> f, double delta);

struct RickerPair {
  MeasurePair measures;
  Grid1D grid;
  std::vector<double> times;
};

/// Samples R(t) and R(t - shift) on n uniform points of [t_min, t_max] and
/// normalizes both.
RickerPair ricker_pair(std::size_t n, double t_min, double t_max, double shift, double delta);

enum class MatrixFormat { pgm, csv };

/// Parses a plain (P2) or binary (P5) PGM, or a comma-separated matrix.
/// Row i of the result is row i of the file; values are not rescaled.
Array2D load_matrix(const std::filesystem::path& path, MatrixFormat format);
/// Chooses the format by extension (.pgm / .csv / .txt).
Array2D load_matrix(const std::filesystem::path& path);
Array2D parse_pgm(std::string_view bytes);
Array2D parse_csv(std::string_view text);

/// Column-major flatten plus normalize_signal with L = rows * cols.
DiscreteMeasure image_to_measure(const Array2D& img, double delta, double h1 = 1.0,
                                 double h2 = 1.0);

/// Nearest-neighbour resampling: output (r, c) reads input
/// (floor((r + 0.5) * rows_in / rows_out), floor((c + 0.5) * cols_in / cols_out)).
Array2D resize_nearest(const Array2D& img, std::size_t rows, std::size_t cols);

}  // namespace fastsinkhorn
