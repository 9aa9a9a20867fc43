#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "netsyn/decomposed.hpp"
#include "netsyn/graph.hpp"
#include "netsyn/sysmodel.hpp"

namespace netsyn {

// ==== Mass-spring-damper generator ====
enum class MsdChannels {
    Compact,  // one scalar channel per plant edge: p_ik = [k_ik, d_ik] x_k / m_k
    Full,     // p_ik = [x_k; w_k] with B_p = [A_ik, 0]
};

struct MsdConfig {
    Topology topo;  // plant graph; edge (i,k) couples x_k into subsystem i
    std::uint64_t seed = 1;
    std::pair<double, double> m{5.0, 10.0};
    std::pair<double, double> k{0.8, 1.2}, d{0.8, 1.2};
    std::pair<double, double> k_edge{0.2, 0.4}, d_edge{0.2, 0.4};
    std::pair<double, double> bu{1.0, 1.3}, dzu{1.0, 1.3}, bw{1.0, 1.2};
    MsdChannels channels = MsdChannels::Compact;
    // Nodes of one group share the parameters drawn from the stream of the group's first node.
    // Empty: every node draws its own.
    std::vector<std::vector<int>> groups;
    // One (k_ik, d_ik) for every edge, drawn from the stream of edge (0,0).
    bool shared_coupling = false;
};

struct MsdParameters {
    std::vector<double> m, k, d, bu, dzu, bw;  // per node
    std::map<Edge, std::pair<double, double>> coupling;  // (k_ik, d_ik) per plant edge
};

// Stream discipline: node i draws m, k, d, b_u, d_zu, b_w from subsystem_stream(i); edge (i,k)
// draws k_ik, d_ik from edge_stream(i,k). k_i and d_i are drawn but do not enter A_ii.
MsdParameters draw_msd_parameters(const MsdConfig& cfg);

// A_ii = [[0,1],[-sum k_ik / m_i, -sum d_ik / m_i]] over plant edges (i,k),
// A_ik = [[0,0],[k_ik / m_k, d_ik / m_k]], B_u = [0; b_u], B_w = [0; b_w], C_y = I,
// C_z = [I; 0], D_zu = [0; d_zu], everything else zero.
InterconnectedSystem generate_msd(const MsdConfig& cfg);

// ==== Benchmark fixture ====
// Plant graph {(1,5),(2,1),(3,4),(4,2),(4,7),(5,6),(6,3),(7,8),(8,5)} with E^K = E^G.
Topology fig4_topology();
inline constexpr std::uint64_t kFig4Seed = 20210401;

struct Fixture {
    InterconnectedSystem sys;
    Topology topo_k;
};
Fixture fig4_fixture(std::uint64_t seed = kFig4Seed);

// ==== Scaling report ====
struct ScalingReport {
    std::string method;  // central | decomposed | homogeneous | alphabeta | distributed
    int n = 0, n_edges = 0, alpha = 0, beta = 0;
    int nominal = 0, multiplier = 0;          // instrumented counts
    int expected_nominal = 0, expected_multiplier = 0;
    std::vector<int> nominal_sizes, multiplier_sizes;
    std::vector<int> expected_nominal_sizes, expected_multiplier_sizes;
    int n_vars = 0, expected_vars = -1;       // -1: no closed formula for this method
    double seconds = 0.0;                     // solve time, 0 when not solved
    int agent = -1;                           // distributed: the agent reported
};

struct ScalingOptions {
    bool solve = false;
    int agent = 0;  // distributed row: the agent whose local problem is counted
    ClassDescriptor classes;  // alphabeta row
    double eps = 1e-7;
};

// Assembles the program of `method` on (g, topo_k), counts its LMIs and variables and compares them
// with the closed formulas. A mismatch is a ConsistencyError.
ScalingReport scaling_report(const std::string& method, const InterconnectedSystem& g, const Topology& topo_k,
                             const ScalingOptions& opt = {});

// Closed-form variable counts of the state-feedback programs for one uniform slot size
// (dim_p = dim_q = ds on every slot), nx states and nu inputs per subsystem and one gain slot per
// controller edge.
int decomposed_var_formula(int n, int n_slots, int n_gain_slots, int nx, int nu, int ds);
int homogeneous_var_formula(int nx, int nu, int ds);

// ==== Sweeps ====
enum class SweepKind { N, Alpha, Neighbors };
SweepKind sweep_kind_from_string(const std::string& s);

struct SweepOptions {
    SweepKind kind = SweepKind::N;
    int max = 6;
    std::uint64_t seed = 1;
    bool solve = true;
    std::string topology = "complete";  // complete | ring
};

std::vector<ScalingReport> run_sweep(const SweepOptions& opt);
std::string sweep_csv(const std::vector<ScalingReport>& rows);

}  // namespace netsyn
