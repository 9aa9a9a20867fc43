#pragma once

// Structured plant generators shared by the synthesis tests and the acceptance binary.

#include <cstdint>
#include <string>

#include "netsyn/decomposed.hpp"
#include "netsyn/rng.hpp"
#include "netsyn/sysmodel.hpp"

namespace fixture {

// x' = A x + Bu u + Bw w, y = x, z = [Cz x; 0.5 u], with nx = 2, nu = nw = 1.
netsyn::LocalBlocks sf_local(netsyn::Rng& rng);
// Coupling through the neighbor state only, entries scaled by `scale`.
netsyn::CouplingBlocks sf_coupling(netsyn::Rng& rng, double scale);

// Independent local and coupling blocks per node and edge (ideal interconnection, all channel dims 3).
netsyn::InterconnectedSystem hetero_sf_plant(const netsyn::Topology& t, netsyn::Rng& rng, double scale = 0.3);
// One local block and one coupling block for the whole network.
netsyn::InterconnectedSystem homogeneous_sf_plant(const netsyn::Topology& t, netsyn::Rng& rng, double scale = 0.3);
// One local block per group and one coupling block per class.
netsyn::InterconnectedSystem alphabeta_sf_plant(const netsyn::Topology& t, const netsyn::ClassDescriptor& cls,
                                                netsyn::Rng& rng, double scale = 0.3);

// Mass-spring-damper network over a ring or complete graph with shared coupling, alpha contiguous
// parameter groups and beta symmetric classes: with beta = 2 the first class is the matching
// {1,2}, {3,4}, ... and the second class holds the remaining edges (n even).
struct MsdClassInstance {
    netsyn::InterconnectedSystem sys;
    netsyn::ClassDescriptor cls;
};
MsdClassInstance msd_alphabeta(const std::string& topology, int n, int alpha, int beta, std::uint64_t seed);

// The four-node graph with edges (1,2),(2,1),(2,3),(2,4),(3,2),(4,2).
netsyn::Topology star4();

}  // namespace fixture
