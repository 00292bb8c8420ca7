// AVX2 kernel variants. This translation unit is compiled with -mavx2; the
// dispatcher only reaches it after a cpuid check. No FMA: mul+add keeps the
// results bit-identical to the scalar reference.

#if defined(__x86_64__)

#include <immintrin.h>

#include <cstddef>

#include "fineprune/kernels.hpp"

namespace fp::kernels {

namespace {

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0, n4 = n & ~std::size_t(3);
    for (; i < n4; i += 4)
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    alignas(32) double lane[4];
    _mm256_store_pd(lane, acc);
    double tail = 0;
    for (; i < n; ++i) tail += a[i] * b[i];
    return ((lane[0] + lane[1]) + (lane[2] + lane[3])) + tail;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0, n4 = n & ~std::size_t(3);
    for (; i < n4; i += 4)
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i),
                                              _mm256_mul_pd(va, _mm256_loadu_pd(x + i))));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void mul_avx2(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0, n4 = n & ~std::size_t(3);
    for (; i < n4; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scal_avx2(double alpha, double* x, std::size_t n) {
    __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0, n4 = n & ~std::size_t(3);
    for (; i < n4; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), va));
    for (; i < n; ++i) x[i] *= alpha;
}

double sum_avx2(const double* a, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0, n4 = n & ~std::size_t(3);
    for (; i < n4; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
    alignas(32) double lane[4];
    _mm256_store_pd(lane, acc);
    double tail = 0;
    for (; i < n; ++i) tail += a[i];
    return ((lane[0] + lane[1]) + (lane[2] + lane[3])) + tail;
}

double sumsq_avx2(const double* a, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0, n4 = n & ~std::size_t(3);
    for (; i < n4; i += 4) {
        __m256d v = _mm256_loadu_pd(a + i);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(v, v));
    }
    alignas(32) double lane[4];
    _mm256_store_pd(lane, acc);
    double tail = 0;
    for (; i < n; ++i) tail += a[i] * a[i];
    return ((lane[0] + lane[1]) + (lane[2] + lane[3])) + tail;
}

double wsqdist_avx2(const double* a, const double* b, const double* w, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0, n4 = n & ~std::size_t(3);
    for (; i < n4; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(w + i), _mm256_mul_pd(d, d)));
    }
    alignas(32) double lane[4];
    _mm256_store_pd(lane, acc);
    double tail = 0;
    for (; i < n; ++i) {
        double d = a[i] - b[i];
        tail += w[i] * (d * d);
    }
    return ((lane[0] + lane[1]) + (lane[2] + lane[3])) + tail;
}

void relu_avx2(const double* x, double* y, std::size_t n) {
    __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0, n4 = n & ~std::size_t(3);
    for (; i < n4; i += 4)
        _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

constexpr KernelTable kAvx2Table = {dot_avx2, axpy_avx2,  mul_avx2,  scal_avx2,
                                    sum_avx2, sumsq_avx2, wsqdist_avx2, relu_avx2};

}  // namespace

const KernelTable& avx2_table() { return kAvx2Table; }

}  // namespace fp::kernels

#endif  // __x86_64__
