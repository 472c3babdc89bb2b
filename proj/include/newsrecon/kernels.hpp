#pragma once

#include <cstddef>
#include <span>

// Dense kernels behind retrieval and training. The default namespace holds the
// OpenMP versions; `serial` keeps the single-threaded reference used by the
// tests and the benchmark. Every output element is reduced in a fixed order by
// one thread, so both paths are bit-identical.
namespace newsrecon::kernels {

/// scores[i] = <matrix row i, query>, accumulated in double.
void dot_rows(std::span<const float> matrix, std::size_t dim, std::span<const float> query,
              std::span<double> scores);

/// out (n x m) = a (n x k) * b^T where b is (m x k); double accumulation.
void gram(std::span<const double> a, std::span<const double> b, std::size_t n, std::size_t m,
          std::size_t k, std::span<double> out);

/// out_i = x_i * weight + bias for every row, x is (n x in), weight is (in x out).
void affine_rows(std::span<const float> x, std::size_t n, std::size_t in, std::span<const float> weight,
                 std::span<const float> bias, std::size_t out_dim, std::span<double> out);

int max_threads();
void set_threads(int n);

namespace serial {
void dot_rows(std::span<const float> matrix, std::size_t dim, std::span<const float> query,
              std::span<double> scores);
void gram(std::span<const double> a, std::span<const double> b, std::size_t n, std::size_t m,
          std::size_t k, std::span<double> out);
void affine_rows(std::span<const float> x, std::size_t n, std::size_t in, std::span<const float> weight,
                 std::span<const float> bias, std::size_t out_dim, std::span<double> out);
}  // namespace serial

}  // namespace newsrecon::kernels
