#include "fineprune/kernels.hpp"

#include <atomic>
#include <cstdlib>

#include "fineprune/errors.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>
#endif

namespace fp::kernels {

namespace {

// ---- scalar reference ----
// Reductions keep four stride-4 partial sums and combine them as
// ((s0+s1)+(s2+s3)) + tail; the SIMD variants reproduce this exactly.

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::size_t i = 0, n4 = n & ~std::size_t(3);
    for (; i < n4; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    double tail = 0;
    for (; i < n; ++i) tail += a[i] * b[i];
    return ((s0 + s1) + (s2 + s3)) + tail;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void mul_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scal_scalar(double alpha, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

double sum_scalar(const double* a, std::size_t n) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::size_t i = 0, n4 = n & ~std::size_t(3);
    for (; i < n4; i += 4) {
        s0 += a[i];
        s1 += a[i + 1];
        s2 += a[i + 2];
        s3 += a[i + 3];
    }
    double tail = 0;
    for (; i < n; ++i) tail += a[i];
    return ((s0 + s1) + (s2 + s3)) + tail;
}

double sumsq_scalar(const double* a, std::size_t n) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::size_t i = 0, n4 = n & ~std::size_t(3);
    for (; i < n4; i += 4) {
        s0 += a[i] * a[i];
        s1 += a[i + 1] * a[i + 1];
        s2 += a[i + 2] * a[i + 2];
        s3 += a[i + 3] * a[i + 3];
    }
    double tail = 0;
    for (; i < n; ++i) tail += a[i] * a[i];
    return ((s0 + s1) + (s2 + s3)) + tail;
}

double wsqdist_scalar(const double* a, const double* b, const double* w, std::size_t n) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::size_t i = 0, n4 = n & ~std::size_t(3);
    for (; i < n4; i += 4) {
        double d0 = a[i] - b[i];
        double d1 = a[i + 1] - b[i + 1];
        double d2 = a[i + 2] - b[i + 2];
        double d3 = a[i + 3] - b[i + 3];
        s0 += w[i] * (d0 * d0);
        s1 += w[i + 1] * (d1 * d1);
        s2 += w[i + 2] * (d2 * d2);
        s3 += w[i + 3] * (d3 * d3);
    }
    double tail = 0;
    for (; i < n; ++i) {
        double d = a[i] - b[i];
        tail += w[i] * (d * d);
    }
    return ((s0 + s1) + (s2 + s3)) + tail;
}

void relu_scalar(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

constexpr KernelTable kScalarTable = {dot_scalar, axpy_scalar,  mul_scalar,
                                      scal_scalar, sum_scalar,  sumsq_scalar,
                                      wsqdist_scalar, relu_scalar};

// ---- NEON (aarch64) ----
// Two float64x2 accumulators cover the same four stride-4 lanes as the
// scalar reference.
#if defined(__aarch64__)

double dot_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t acc01 = vdupq_n_f64(0.0), acc23 = vdupq_n_f64(0.0);
    std::size_t i = 0, n4 = n & ~std::size_t(3);
    for (; i < n4; i += 4) {
        acc01 = vaddq_f64(acc01, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
        acc23 = vaddq_f64(acc23, vmulq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
    }
    double tail = 0;
    for (; i < n; ++i) tail += a[i] * b[i];
    double s0 = vgetq_lane_f64(acc01, 0), s1 = vgetq_lane_f64(acc01, 1);
    double s2 = vgetq_lane_f64(acc23, 0), s3 = vgetq_lane_f64(acc23, 1);
    return ((s0 + s1) + (s2 + s3)) + tail;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
    float64x2_t va = vdupq_n_f64(alpha);
    std::size_t i = 0, n2 = n & ~std::size_t(1);
    for (; i < n2; i += 2)
        vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void mul_neon(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0, n2 = n & ~std::size_t(1);
    for (; i < n2; i += 2) vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scal_neon(double alpha, double* x, std::size_t n) {
    float64x2_t va = vdupq_n_f64(alpha);
    std::size_t i = 0, n2 = n & ~std::size_t(1);
    for (; i < n2; i += 2) vst1q_f64(x + i, vmulq_f64(vld1q_f64(x + i), va));
    for (; i < n; ++i) x[i] *= alpha;
}

double sum_neon(const double* a, std::size_t n) {
    float64x2_t acc01 = vdupq_n_f64(0.0), acc23 = vdupq_n_f64(0.0);
    std::size_t i = 0, n4 = n & ~std::size_t(3);
    for (; i < n4; i += 4) {
        acc01 = vaddq_f64(acc01, vld1q_f64(a + i));
        acc23 = vaddq_f64(acc23, vld1q_f64(a + i + 2));
    }
    double tail = 0;
    for (; i < n; ++i) tail += a[i];
    double s0 = vgetq_lane_f64(acc01, 0), s1 = vgetq_lane_f64(acc01, 1);
    double s2 = vgetq_lane_f64(acc23, 0), s3 = vgetq_lane_f64(acc23, 1);
    return ((s0 + s1) + (s2 + s3)) + tail;
}

double sumsq_neon(const double* a, std::size_t n) {
    float64x2_t acc01 = vdupq_n_f64(0.0), acc23 = vdupq_n_f64(0.0);
    std::size_t i = 0, n4 = n & ~std::size_t(3);
    for (; i < n4; i += 4) {
        float64x2_t v01 = vld1q_f64(a + i), v23 = vld1q_f64(a + i + 2);
        acc01 = vaddq_f64(acc01, vmulq_f64(v01, v01));
        acc23 = vaddq_f64(acc23, vmulq_f64(v23, v23));
    }
    double tail = 0;
    for (; i < n; ++i) tail += a[i] * a[i];
    double s0 = vgetq_lane_f64(acc01, 0), s1 = vgetq_lane_f64(acc01, 1);
    double s2 = vgetq_lane_f64(acc23, 0), s3 = vgetq_lane_f64(acc23, 1);
    return ((s0 + s1) + (s2 + s3)) + tail;
}

double wsqdist_neon(const double* a, const double* b, const double* w, std::size_t n) {
    float64x2_t acc01 = vdupq_n_f64(0.0), acc23 = vdupq_n_f64(0.0);
    std::size_t i = 0, n4 = n & ~std::size_t(3);
    for (; i < n4; i += 4) {
        float64x2_t d01 = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
        float64x2_t d23 = vsubq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
        acc01 = vaddq_f64(acc01, vmulq_f64(vld1q_f64(w + i), vmulq_f64(d01, d01)));
        acc23 = vaddq_f64(acc23, vmulq_f64(vld1q_f64(w + i + 2), vmulq_f64(d23, d23)));
    }
    double tail = 0;
    for (; i < n; ++i) {
        double d = a[i] - b[i];
        tail += w[i] * (d * d);
    }
    double s0 = vgetq_lane_f64(acc01, 0), s1 = vgetq_lane_f64(acc01, 1);
    double s2 = vgetq_lane_f64(acc23, 0), s3 = vgetq_lane_f64(acc23, 1);
    return ((s0 + s1) + (s2 + s3)) + tail;
}

void relu_neon(const double* x, double* y, std::size_t n) {
    float64x2_t zero = vdupq_n_f64(0.0);
    std::size_t i = 0, n2 = n & ~std::size_t(1);
    for (; i < n2; i += 2) vst1q_f64(y + i, vmaxq_f64(vld1q_f64(x + i), zero));
    for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

constexpr KernelTable kNeonTable = {dot_neon, axpy_neon,  mul_neon,  scal_neon,
                                    sum_neon, sumsq_neon, wsqdist_neon, relu_neon};
#endif  // __aarch64__

std::atomic<const KernelTable*> g_active{nullptr};
std::atomic<Backend> g_backend{Backend::scalar};

Backend default_backend() {
#if defined(__x86_64__)
    if (backend_available(Backend::avx2)) return Backend::avx2;
#elif defined(__aarch64__)
    return Backend::neon;
#endif
    return Backend::scalar;
}

void activate(Backend b) {
    g_active.store(&table(b), std::memory_order_release);
    g_backend.store(b, std::memory_order_release);
}

const KernelTable& active() {
    const KernelTable* t = g_active.load(std::memory_order_acquire);
    if (t == nullptr) {
        Backend b = default_backend();
        if (const char* env = std::getenv("FINEPRUNE_KERNELS")) {
            if (!set_backend(env)) activate(b);
            return *g_active.load(std::memory_order_acquire);
        }
        activate(b);
        t = g_active.load(std::memory_order_acquire);
    }
    return *t;
}

}  // namespace

#if defined(__x86_64__)
// Defined in kernels_avx2.cpp (compiled with -mavx2).
const KernelTable& avx2_table();
#endif

bool backend_available(Backend b) {
    switch (b) {
        case Backend::scalar:
            return true;
        case Backend::avx2:
#if defined(__x86_64__)
            return __builtin_cpu_supports("avx2");
#else
            return false;
#endif
        case Backend::neon:
#if defined(__aarch64__)
            return true;
#else
            return false;
#endif
    }
    return false;
}

const KernelTable& table(Backend b) {
    switch (b) {
        case Backend::scalar:
            return kScalarTable;
        case Backend::avx2:
#if defined(__x86_64__)
            if (backend_available(Backend::avx2)) return avx2_table();
#endif
            break;
        case Backend::neon:
#if defined(__aarch64__)
            return kNeonTable;
#else
            break;
#endif
    }
    throw ArgumentError("kernel backend unavailable on this CPU");
}

Backend active_backend() {
    active();
    return g_backend.load(std::memory_order_acquire);
}

const char* backend_name(Backend b) {
    switch (b) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
        case Backend::neon: return "neon";
    }
    return "?";
}

bool set_backend(std::string_view name) {
    Backend b;
    if (name == "auto") {
        b = default_backend();
    } else if (name == "scalar") {
        b = Backend::scalar;
    } else if (name == "avx2") {
        b = Backend::avx2;
    } else if (name == "neon") {
        b = Backend::neon;
    } else {
        return false;
    }
    if (!backend_available(b)) return false;
    activate(b);
    return true;
}

double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
void axpy(double alpha, const double* x, double* y, std::size_t n) { active().axpy(alpha, x, y, n); }
void mul(const double* a, const double* b, double* out, std::size_t n) { active().mul(a, b, out, n); }
void scal(double alpha, double* x, std::size_t n) { active().scal(alpha, x, n); }
double sum(const double* a, std::size_t n) { return active().sum(a, n); }
double sumsq(const double* a, std::size_t n) { return active().sumsq(a, n); }
double weighted_sqdist(const double* a, const double* b, const double* w, std::size_t n) {
    return active().weighted_sqdist(a, b, w, n);
}
void relu(const double* x, double* y, std::size_t n) { active().relu(x, y, n); }

}  // namespace fp::kernels
