#include "fixtures.hpp"

#include "netsyn/bench.hpp"
#include "netsyn/errors.hpp"
#include "oracles.hpp"

namespace fixture {

using netsyn::Mat;

netsyn::LocalBlocks sf_local(netsyn::Rng& rng) {
    netsyn::LocalBlocks l;
    l.A = oracle::randn(rng, 2, 2, 0.5) - Mat::Identity(2, 2);
    l.Bu = oracle::randn(rng, 2, 1);
    l.Bw = oracle::randn(rng, 2, 1);
    l.Cy = Mat::Identity(2, 2);
    l.Cz = Mat::Zero(2, 2);
    l.Cz.row(0) = oracle::randn(rng, 1, 2);
    l.Dyw = Mat::Zero(2, 1);
    l.Dzu = Mat::Zero(2, 1);
    l.Dzu(1, 0) = 0.5;
    l.Dzw = Mat::Zero(2, 1);
    return l;
}

netsyn::CouplingBlocks sf_coupling(netsyn::Rng& rng, double scale) {
    netsyn::CouplingBlocks c;
    c.A = oracle::randn(rng, 2, 2, scale);
    return c;
}

netsyn::InterconnectedSystem hetero_sf_plant(const netsyn::Topology& t, netsyn::Rng& rng, double scale) {
    std::vector<netsyn::LocalBlocks> locals;
    for (int i = 0; i < t.n_nodes(); ++i) locals.push_back(sf_local(rng));
    std::map<netsyn::Edge, netsyn::CouplingBlocks> cp;
    for (const auto& e : t.edges()) cp[e] = sf_coupling(rng, scale);
    return netsyn::realize_edge_form(t, locals, cp);
}

netsyn::InterconnectedSystem homogeneous_sf_plant(const netsyn::Topology& t, netsyn::Rng& rng, double scale) {
    return alphabeta_sf_plant(t, netsyn::homogeneous_classes(t), rng, scale);
}

netsyn::InterconnectedSystem alphabeta_sf_plant(const netsyn::Topology& t, const netsyn::ClassDescriptor& cls,
                                                netsyn::Rng& rng, double scale) {
    std::vector<netsyn::LocalBlocks> group_blocks, locals(t.n_nodes());
    for (int a = 0; a < cls.alpha(); ++a) group_blocks.push_back(sf_local(rng));
    const auto gid = cls.group_of();
    for (int i = 0; i < t.n_nodes(); ++i) locals[i] = group_blocks[gid[i]];
    std::map<netsyn::Edge, netsyn::CouplingBlocks> cp;
    for (const auto& edges : cls.classes) {
        const auto c = sf_coupling(rng, scale);
        for (const auto& e : edges) cp[e] = c;
    }
    return netsyn::realize_edge_form(t, locals, cp);
}

netsyn::Topology star4() { return netsyn::Topology::from_edges(4, {{1, 2}, {2, 1}, {2, 3}, {2, 4}, {3, 2}, {4, 2}}); }

MsdClassInstance msd_alphabeta(const std::string& topology, int n, int alpha, int beta, std::uint64_t seed) {
    if (alpha < 1 || alpha > n || beta < 1 || beta > 2 || (beta == 2 && (n % 2 != 0 || n < 4)))
        throw netsyn::InvalidArgument("unsupported class instance");
    netsyn::MsdConfig c;
    c.topo = topology == "ring" ? netsyn::ring_topology(n) : netsyn::complete_topology(n);
    c.seed = seed;
    c.shared_coupling = true;
    for (int g = 0; g < alpha; ++g) {
        std::vector<int> grp;
        for (int i = g * n / alpha; i < (g + 1) * n / alpha; ++i) grp.push_back(i + 1);
        c.groups.push_back(grp);
    }
    MsdClassInstance out;
    out.cls.groups = c.groups;
    if (beta == 1) {
        out.cls.classes = {c.topo.edges()};
    } else {
        out.cls.classes.resize(2);
        for (const auto& [i, k] : c.topo.edges()) {
            const bool matched = (i - 1) / 2 == (k - 1) / 2;
            out.cls.classes[matched ? 0 : 1].push_back({i, k});
        }
    }
    out.sys = netsyn::generate_msd(c);
    return out;
}

}  // namespace fixture
