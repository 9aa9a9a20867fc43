#include "netsyn/rng.hpp"

#include <cmath>
#include <numbers>

namespace netsyn {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream) : eng_(splitmix64(seed ^ splitmix64(stream))) {}

double Rng::uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t subsystem_stream(int i) { return static_cast<std::uint64_t>(i); }

std::uint64_t edge_stream(int i, int k) {
    return 1000000ULL + static_cast<std::uint64_t>(i) * 1000ULL + static_cast<std::uint64_t>(k);
}

}  // namespace netsyn
