#pragma once

#include <cstddef>
#include <string_view>

namespace fp::kernels {

// f64 inner-loop primitives with scalar and SIMD backends. All backends
// perform the same IEEE operations in the same order (reductions use four
// stride-4 partial sums, matching one AVX2 register / two NEON registers),
// so results are bit-identical across backends. The build disables FP
// contraction to keep that true.

enum class Backend { scalar, avx2, neon };

Backend active_backend();
const char* backend_name(Backend b);

// Selects "scalar", "avx2", "neon" or "auto". Returns false if the request
// is unsupported on this CPU (backend unchanged). The FINEPRUNE_KERNELS
// environment variable is honored at first use.
bool set_backend(std::string_view name);

double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);  // y += alpha*x
void mul(const double* a, const double* b, double* out, std::size_t n);
void scal(double alpha, double* x, std::size_t n);
double sum(const double* a, std::size_t n);
double sumsq(const double* a, std::size_t n);
// Sum_i w_i * (a_i - b_i)^2
double weighted_sqdist(const double* a, const double* b, const double* w, std::size_t n);
void relu(const double* x, double* y, std::size_t n);  // y = max(x, 0)

// Table of entry points for one backend; used to test backends against each
// other without flipping the global dispatch.
struct KernelTable {
    double (*dot)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*mul)(const double*, const double*, double*, std::size_t);
    void (*scal)(double, double*, std::size_t);
    double (*sum)(const double*, std::size_t);
    double (*sumsq)(const double*, std::size_t);
    double (*weighted_sqdist)(const double*, const double*, const double*, std::size_t);
    void (*relu)(const double*, double*, std::size_t);
};

const KernelTable& table(Backend b);   // throws ArgumentError if unavailable
bool backend_available(Backend b);

}  // namespace fp::kernels
