#include "vaecert/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

// AVX2 kernels. Compiled with -mavx2 only (no -mfma): mul followed by add
// rounds twice per element exactly like the scalar reference, and the
// horizontal reduction (s0+s2)+(s1+s3) matches the reference combine order,
// so results are bitwise-identical to scalar_kernels().

namespace vaecert::num {
namespace {

void k_add(const double* a, const double* b, double* out, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < n4; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (std::size_t i = n4; i < n; ++i) out[i] = a[i] + b[i];
}

void k_sub(const double* a, const double* b, double* out, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < n4; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (std::size_t i = n4; i < n; ++i) out[i] = a[i] - b[i];
}

void k_mul(const double* a, const double* b, double* out, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < n4; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (std::size_t i = n4; i < n; ++i) out[i] = a[i] * b[i];
}

void k_scale(const double* a, double c, double* out, std::size_t n) {
  const __m256d vc = _mm256_set1_pd(c);
  const std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < n4; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), vc));
  }
  for (std::size_t i = n4; i < n; ++i) out[i] = a[i] * c;
}

void k_axpy(double c, const double* x, double* y, std::size_t n) {
  const __m256d vc = _mm256_set1_pd(c);
  const std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d prod = _mm256_mul_pd(vc, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (std::size_t i = n4; i < n; ++i) y[i] = y[i] + c * x[i];
}

void k_relu(const double* a, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d v = _mm256_loadu_pd(a + i);
    const __m256d mask = _mm256_cmp_pd(v, zero, _CMP_GT_OQ);
    _mm256_storeu_pd(out + i, _mm256_and_pd(v, mask));
  }
  for (std::size_t i = n4; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void k_relu_mask(const double* x, const double* g, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    _mm256_storeu_pd(out + i, _mm256_and_pd(_mm256_loadu_pd(g + i), mask));
  }
  for (std::size_t i = n4; i < n; ++i) out[i] = x[i] > 0.0 ? g[i] : 0.0;
}

// Combine the four register lanes as (s0+s2)+(s1+s3).
double hsum(__m256d acc) {
  const __m128d lo = _mm256_castpd256_pd128(acc);      // s0 s1
  const __m128d hi = _mm256_extractf128_pd(acc, 1);    // s2 s3
  const __m128d p = _mm_add_pd(lo, hi);                // s0+s2, s1+s3
  return _mm_cvtsd_f64(p) + _mm_cvtsd_f64(_mm_unpackhi_pd(p, p));
}

double k_sum(const double* a, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < n4; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
  }
  double s = hsum(acc);
  for (std::size_t i = n4; i < n; ++i) s += a[i];
  return s;
}

double k_dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < n4; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  double s = hsum(acc);
  for (std::size_t i = n4; i < n; ++i) s += a[i] * b[i];
  return s;
}

double k_sumsq(const double* a, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d v = _mm256_loadu_pd(a + i);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(v, v));
  }
  double s = hsum(acc);
  for (std::size_t i = n4; i < n; ++i) s += a[i] * a[i];
  return s;
}

}  // namespace

const KernelTable& avx2_kernels() {
  static const KernelTable table = {
      k_add, k_sub, k_mul, k_scale, k_axpy, k_relu, k_relu_mask,
      k_sum, k_dot, k_sumsq, "avx2",
  };
  return table;
}

bool avx2_supported() { return __builtin_cpu_supports("avx2") != 0; }

}  // namespace vaecert::num

#endif  // x86_64
