#include "newsrecon/kernels.hpp"

#include <cstdint>

#ifdef NEWSRECON_HAVE_OPENMP
#include <omp.h>
#endif

namespace newsrecon::kernels {
namespace {

inline double row_dot(const float* row, const float* q, std::size_t dim) {
  double acc = 0.0;
  for (std::size_t j = 0; j < dim; ++j) acc += static_cast<double>(row[j]) * static_cast<double>(q[j]);
  return acc;
}

inline double row_dot(const double* a, const double* b, std::size_t k) {
  double acc = 0.0;
  for (std::size_t j = 0; j < k; ++j) acc += a[j] * b[j];
  return acc;
}

inline void affine_one(const float* x, std::size_t in, const float* weight, const float* bias,
                       std::size_t out_dim, double* out) {
  for (std::size_t o = 0; o < out_dim; ++o) out[o] = static_cast<double>(bias[o]);
  for (std::size_t i = 0; i < in; ++i) {
    const double xi = static_cast<double>(x[i]);
    if (xi == 0.0) continue;
    const float* wrow = weight + i * out_dim;
    for (std::size_t o = 0; o < out_dim; ++o) out[o] += xi * static_cast<double>(wrow[o]);
  }
}

}  // namespace

void dot_rows(std::span<const float> matrix, std::size_t dim, std::span<const float> query,
              std::span<double> scores) {
  const auto n = static_cast<std::int64_t>(scores.size());
  const float* m = matrix.data();
  const float* q = query.data();
  double* s = scores.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) s[i] = row_dot(m + static_cast<std::size_t>(i) * dim, q, dim);
}

void gram(std::span<const double> a, std::span<const double> b, std::size_t n, std::size_t m, std::size_t k,
          std::span<double> out) {
  const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    for (std::size_t j = 0; j < m; ++j) out[ui * m + j] = row_dot(a.data() + ui * k, b.data() + j * k, k);
  }
}

void affine_rows(std::span<const float> x, std::size_t n, std::size_t in, std::span<const float> weight,
                 std::span<const float> bias, std::size_t out_dim, std::span<double> out) {
  const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    const auto ur = static_cast<std::size_t>(r);
    affine_one(x.data() + ur * in, in, weight.data(), bias.data(), out_dim, out.data() + ur * out_dim);
  }
}

int max_threads() {
#ifdef NEWSRECON_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef NEWSRECON_HAVE_OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

namespace serial {

void dot_rows(std::span<const float> matrix, std::size_t dim, std::span<const float> query,
              std::span<double> scores) {
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = row_dot(matrix.data() + i * dim, query.data(), dim);
}

void gram(std::span<const double> a, std::span<const double> b, std::size_t n, std::size_t m, std::size_t k,
          std::span<double> out) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = row_dot(a.data() + i * k, b.data() + j * k, k);
}

void affine_rows(std::span<const float> x, std::size_t n, std::size_t in, std::span<const float> weight,
                 std::span<const float> bias, std::size_t out_dim, std::span<double> out) {
  for (std::size_t r = 0; r < n; ++r)
    affine_one(x.data() + r * in, in, weight.data(), bias.data(), out_dim, out.data() + r * out_dim);
}

}  // namespace serial
}  // namespace newsrecon::kernels
