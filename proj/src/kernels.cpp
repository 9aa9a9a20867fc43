#include "netsyn/kernels.hpp"

#include <cstdlib>
#include <cstring>

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>
#define NETSYN_HAVE_X86 1
#endif

namespace netsyn::kernels {

// ==== scalar ====
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double sqnorm_diff_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void axpy_scalar(double s, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += s * x[i];
}

void acc_scaled_diff_scalar(double s, const double* a, const double* b, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += s * (a[i] - b[i]);
}

void average_scalar(const double* a, const double* b, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = 0.5 * (a[i] + b[i]);
}

}  // namespace

// ==== avx2 ====
#ifdef NETSYN_HAVE_X86
namespace {

__attribute__((target("avx2"))) double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

__attribute__((target("avx2"))) double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    double s = hsum(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

__attribute__((target("avx2"))) double sqnorm_diff_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
    }
    double s = hsum(acc);
    for (; i < n; ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

__attribute__((target("avx2"))) void axpy_avx2(double s, const double* x, double* y, std::size_t n) {
    __m256d vs = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_mul_pd(vs, _mm256_loadu_pd(x + i))));
    for (; i < n; ++i) y[i] += s * x[i];
}

__attribute__((target("avx2"))) void acc_scaled_diff_avx2(double s, const double* a, const double* b, double* y,
                                                          std::size_t n) {
    __m256d vs = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_mul_pd(vs, d)));
    }
    for (; i < n; ++i) y[i] += s * (a[i] - b[i]);
}

__attribute__((target("avx2"))) void average_avx2(const double* a, const double* b, double* y, std::size_t n) {
    __m256d h = _mm256_set1_pd(0.5);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_mul_pd(h, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i))));
    for (; i < n; ++i) y[i] = 0.5 * (a[i] + b[i]);
}

}  // namespace
#endif

const Table& scalar_table() {
    static const Table t{"scalar", dot_scalar, sqnorm_diff_scalar, axpy_scalar, acc_scaled_diff_scalar,
                         average_scalar};
    return t;
}

const Table* avx2_table() {
#ifdef NETSYN_HAVE_X86
    static const Table t{"avx2", dot_avx2, sqnorm_diff_avx2, axpy_avx2, acc_scaled_diff_avx2, average_avx2};
    if (__builtin_cpu_supports("avx2")) return &t;
#endif
    return nullptr;
}

const Table& active() {
    static const Table* chosen = [] {
        const char* env = std::getenv("NETSYN_SIMD");
        if (env && std::strcmp(env, "scalar") == 0) return &scalar_table();
        const Table* v = avx2_table();
        return v ? v : &scalar_table();
    }();
    return *chosen;
}

}  // namespace netsyn::kernels
