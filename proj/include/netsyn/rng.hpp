#pragma once

#include <cstdint>
#include <random>

namespace netsyn {

// Counter-free 64-bit mixer used to derive substream seeds.
std::uint64_t splitmix64(std::uint64_t x);

// std::mt19937_64 is fully specified by the standard, so its output is portable.
// Each substream is seeded with splitmix64(seed ^ splitmix64(stream)).
class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t next_u64() { return eng_(); }
    // 53-bit mantissa in [0,1).
    double uniform01();
    double uniform(double a, double b) { return a + (b - a) * uniform01(); }
    // Box-Muller, no cached second value.
    double normal();

private:
    std::mt19937_64 eng_;
};

// Stream ids: subsystem i uses stream i, edge (i,k) uses 1e6 + i*1000 + k.
std::uint64_t subsystem_stream(int i);
std::uint64_t edge_stream(int i, int k);

}  // namespace netsyn
