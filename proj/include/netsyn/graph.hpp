#pragma once

#include <complex>
#include <map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace netsyn {

// Directed edge (i,k): subsystem i receives a signal from subsystem k.
using Edge = std::pair<int, int>;

// ==== Topology ====
// Nodes are 1-based. Edges are kept sorted lexicographically and neighbor lists ascending,
// so every stacking derived from a topology is deterministic.
class Topology {
public:
    Topology() = default;

    static Topology from_edges(int n_nodes, std::vector<Edge> edges, bool require_connected = true);

    int n_nodes() const { return n_; }
    const std::vector<Edge>& edges() const { return edges_; }
    std::size_t n_edges() const { return edges_.size(); }

    bool has_edge(int i, int k) const;
    bool is_symmetric() const;
    bool is_connected() const;

    // k with (i,k) or (k,i) present, ascending.
    const std::vector<int>& neighbors(int i) const;
    // k with (i,k) present (i receives from k).
    std::vector<int> in_neighbors(int i) const;
    // k with (k,i) present (i sends to k).
    std::vector<int> out_neighbors(int i) const;

    // Longest shortest path over the undirected view; -1 when disconnected.
    int diameter() const;

    // Position of edge (i,k) in edges(), or -1.
    int edge_index(int i, int k) const;

    bool operator==(const Topology& o) const { return n_ == o.n_ && edges_ == o.edges_; }

private:
    int n_ = 0;
    std::vector<Edge> edges_;
    std::vector<std::vector<int>> nbrs_;
};

Topology mirror(const Topology& t);
Topology symmetrize(const Topology& t);
Topology unite(const Topology& a, const Topology& b);
std::vector<int> neighbors(const Topology& t, int i);

// Common shapes, all symmetric.
Topology ring_topology(int n);
Topology complete_topology(int n);
Topology path_topology(int n);

// ==== Pattern matrices ====
// Unlisted edges get weight 1; a weight for an absent edge is an error.
Eigen::MatrixXd pattern(const Topology& t, const std::map<Edge, double>& weights = {});

struct Spectrum {
    std::vector<std::complex<double>> eigenvalues;
    bool normal = false;
    bool real = false;  // every eigenvalue real within 1e-9
};

Spectrum spectrum(const Eigen::MatrixXd& p);

// Normality test with the tolerance 1e-9 * max(1, |P|_F^2).
bool is_normal(const Eigen::MatrixXd& p);

}  // namespace netsyn
