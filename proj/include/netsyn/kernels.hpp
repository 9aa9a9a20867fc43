#pragma once

#include <cstddef>

namespace netsyn::kernels {

// Vector kernels used by the consensus bookkeeping and the solver's residual checks.
// Each has a scalar and an AVX2 body; the active table is picked once at startup.
// Elementwise kernels give identical bits on both paths (no FMA contraction);
// reductions differ only by summation order.
struct Table {
    const char* name;
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*sqnorm_diff)(const double* a, const double* b, std::size_t n);
    // y += s * x
    void (*axpy)(double s, const double* x, double* y, std::size_t n);
    // y += s * (a - b)
    void (*acc_scaled_diff)(double s, const double* a, const double* b, double* y, std::size_t n);
    // y = 0.5 * (a + b)
    void (*average)(const double* a, const double* b, double* y, std::size_t n);
};

const Table& scalar_table();
// nullptr when the CPU or compiler lacks AVX2.
const Table* avx2_table();

// Honors NETSYN_SIMD=scalar|avx2 when set.
const Table& active();

inline double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
inline double sqnorm_diff(const double* a, const double* b, std::size_t n) {
    return active().sqnorm_diff(a, b, n);
}
inline void axpy(double s, const double* x, double* y, std::size_t n) { active().axpy(s, x, y, n); }
inline void acc_scaled_diff(double s, const double* a, const double* b, double* y, std::size_t n) {
    active().acc_scaled_diff(s, a, b, y, n);
}
inline void average(const double* a, const double* b, double* y, std::size_t n) {
    active().average(a, b, y, n);
}

}  // namespace netsyn::kernels
