#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "netsyn/kernels.hpp"
#include "netsyn/rng.hpp"

using namespace netsyn;

// ==== RNG ====

TEST(Rng, SplitmixReferenceValue) {
    // first output of the reference splitmix64 generator started from state 0
    EXPECT_EQ(splitmix64(0), 0xe220a8397b1dcdafULL);
}

TEST(Rng, EngineIsPortable) {
    // the standard fixes the 10000th output of a default-constructed mt19937_64
    std::mt19937_64 e;
    e.discard(9999);
    EXPECT_EQ(e(), 9981545732273789042ULL);
}

TEST(Rng, SameSeedAndStreamRepeat) {
    Rng a(42, 7), b(42, 7);
    for (int i = 0; i < 1000; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, StreamsDiffer) {
    Rng a(42, subsystem_stream(1)), b(42, subsystem_stream(2)), c(42, edge_stream(1, 2));
    const auto x = a.next_u64(), y = b.next_u64(), z = c.next_u64();
    EXPECT_NE(x, y);
    EXPECT_NE(x, z);
    EXPECT_NE(y, z);
}

TEST(Rng, StreamIdsAreDistinct) {
    EXPECT_EQ(edge_stream(3, 4), 1003004u);
    EXPECT_NE(edge_stream(1, 2), edge_stream(2, 1));
    EXPECT_NE(subsystem_stream(5), edge_stream(0, 5));
}

TEST(Rng, UniformRangeAndMoments) {
    Rng r(1, 0);
    double s = 0.0, s2 = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform(5.0, 10.0);
        ASSERT_GE(u, 5.0);
        ASSERT_LT(u, 10.0);
        s += u;
    }
    EXPECT_NEAR(s / n, 7.5, 0.03);
    for (int i = 0; i < n; ++i) {
        const double z = r.normal();
        s2 += z * z;
    }
    EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

// ==== Kernels ====

namespace {

std::vector<double> random_vec(Rng& r, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = r.normal();
    return v;
}

const kernels::Table* simd() { return kernels::avx2_table(); }

}  // namespace

TEST(Kernels, ScalarMatchesReference) {
    Rng r(3, 0);
    const auto& s = kernels::scalar_table();
    for (std::size_t n : {0u, 1u, 5u, 64u}) {
        auto a = random_vec(r, n), b = random_vec(r, n);
        double d = 0.0, q = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d += a[i] * b[i];
            q += (a[i] - b[i]) * (a[i] - b[i]);
        }
        EXPECT_DOUBLE_EQ(s.dot(a.data(), b.data(), n), d);
        EXPECT_DOUBLE_EQ(s.sqnorm_diff(a.data(), b.data(), n), q);
    }
}

TEST(Kernels, SimdElementwiseBitIdentical) {
    if (!simd()) GTEST_SKIP() << "no AVX2";
    Rng r(4, 0);
    const auto& s = kernels::scalar_table();
    const auto& v = *simd();
    for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 13u, 100u, 1027u}) {
        auto a = random_vec(r, n), b = random_vec(r, n), y0 = random_vec(r, n);
        auto y1 = y0, y2 = y0;
        s.axpy(0.37, a.data(), y1.data(), n);
        v.axpy(0.37, a.data(), y2.data(), n);
        EXPECT_EQ(0, std::memcmp(y1.data(), y2.data(), n * sizeof(double)));
        y1 = y0;
        y2 = y0;
        s.acc_scaled_diff(-1.3, a.data(), b.data(), y1.data(), n);
        v.acc_scaled_diff(-1.3, a.data(), b.data(), y2.data(), n);
        EXPECT_EQ(0, std::memcmp(y1.data(), y2.data(), n * sizeof(double)));
        s.average(a.data(), b.data(), y1.data(), n);
        v.average(a.data(), b.data(), y2.data(), n);
        EXPECT_EQ(0, std::memcmp(y1.data(), y2.data(), n * sizeof(double)));
    }
}

TEST(Kernels, SimdReductionsAgree) {
    if (!simd()) GTEST_SKIP() << "no AVX2";
    Rng r(5, 0);
    const auto& s = kernels::scalar_table();
    const auto& v = *simd();
    for (std::size_t n : {0u, 1u, 3u, 4u, 9u, 16u, 101u, 4099u}) {
        auto a = random_vec(r, n), b = random_vec(r, n);
        double mag = 0.0;
        for (std::size_t i = 0; i < n; ++i) mag += std::abs(a[i] * b[i]) + (a[i] - b[i]) * (a[i] - b[i]);
        const double tol = 1e-14 * (1.0 + mag);
        EXPECT_NEAR(s.dot(a.data(), b.data(), n), v.dot(a.data(), b.data(), n), tol);
        EXPECT_NEAR(s.sqnorm_diff(a.data(), b.data(), n), v.sqnorm_diff(a.data(), b.data(), n), tol);
    }
}

TEST(Kernels, UnalignedInputs) {
    if (!simd()) GTEST_SKIP() << "no AVX2";
    Rng r(6, 0);
    auto a = random_vec(r, 40), b = random_vec(r, 40);
    auto y1 = random_vec(r, 40), y2 = y1;
    kernels::scalar_table().acc_scaled_diff(2.0, a.data() + 1, b.data() + 3, y1.data() + 1, 33);
    simd()->acc_scaled_diff(2.0, a.data() + 1, b.data() + 3, y2.data() + 1, 33);
    EXPECT_EQ(y1, y2);
}

TEST(Kernels, ActiveTableIsOneOfTheTwo) {
    const auto& a = kernels::active();
    EXPECT_TRUE(&a == &kernels::scalar_table() || &a == simd());
}
