#include "netsyn/graph.hpp"

#include <algorithm>
#include <deque>

#include <fmt/core.h>

#include "netsyn/errors.hpp"

namespace netsyn {

Topology Topology::from_edges(int n_nodes, std::vector<Edge> edges, bool require_connected) {
    if (n_nodes < 1) throw InvalidArgument("topology needs at least one node");
    for (const auto& [i, k] : edges) {
        if (i < 1 || i > n_nodes || k < 1 || k > n_nodes)
            throw InvalidArgument(fmt::format("edge ({},{}) out of range 1..{}", i, k, n_nodes));
        if (i == k) throw InvalidArgument(fmt::format("self-loop at node {}", i));
    }
    std::sort(edges.begin(), edges.end());
    if (std::adjacent_find(edges.begin(), edges.end()) != edges.end())
        throw InvalidArgument("duplicate edge");

    Topology t;
    t.n_ = n_nodes;
    t.edges_ = std::move(edges);
    t.nbrs_.assign(n_nodes, {});
    for (const auto& [i, k] : t.edges_) {
        t.nbrs_[i - 1].push_back(k);
        t.nbrs_[k - 1].push_back(i);
    }
    for (auto& v : t.nbrs_) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    if (require_connected && !t.is_connected()) throw InvalidArgument("topology is not connected");
    return t;
}

bool Topology::has_edge(int i, int k) const {
    return std::binary_search(edges_.begin(), edges_.end(), Edge{i, k});
}

int Topology::edge_index(int i, int k) const {
    auto it = std::lower_bound(edges_.begin(), edges_.end(), Edge{i, k});
    if (it == edges_.end() || *it != Edge{i, k}) return -1;
    return static_cast<int>(it - edges_.begin());
}

bool Topology::is_symmetric() const {
    for (const auto& [i, k] : edges_)
        if (!has_edge(k, i)) return false;
    return true;
}

const std::vector<int>& Topology::neighbors(int i) const {
    if (i < 1 || i > n_) throw InvalidArgument(fmt::format("node {} out of range 1..{}", i, n_));
    return nbrs_[i - 1];
}

std::vector<int> Topology::in_neighbors(int i) const {
    std::vector<int> out;
    for (int k : neighbors(i))
        if (has_edge(i, k)) out.push_back(k);
    return out;
}

std::vector<int> Topology::out_neighbors(int i) const {
    std::vector<int> out;
    for (int k : neighbors(i))
        if (has_edge(k, i)) out.push_back(k);
    return out;
}

static std::vector<int> bfs_dist(const std::vector<std::vector<int>>& nbrs, int src) {
    std::vector<int> d(nbrs.size(), -1);
    std::deque<int> q{src};
    d[src] = 0;
    while (!q.empty()) {
        int u = q.front();
        q.pop_front();
        for (int v : nbrs[u]) {
            if (d[v - 1] < 0) {
                d[v - 1] = d[u] + 1;
                q.push_back(v - 1);
            }
        }
    }
    return d;
}

bool Topology::is_connected() const {
    auto d = bfs_dist(nbrs_, 0);
    return std::none_of(d.begin(), d.end(), [](int x) { return x < 0; });
}

int Topology::diameter() const {
    int best = 0;
    for (int s = 0; s < n_; ++s) {
        for (int x : bfs_dist(nbrs_, s)) {
            if (x < 0) return -1;
            best = std::max(best, x);
        }
    }
    return best;
}

Topology mirror(const Topology& t) {
    std::vector<Edge> out;
    for (const auto& [i, k] : t.edges())
        if (!t.has_edge(k, i)) out.emplace_back(k, i);
    return Topology::from_edges(t.n_nodes(), std::move(out), false);
}

Topology unite(const Topology& a, const Topology& b) {
    if (a.n_nodes() != b.n_nodes()) throw InvalidArgument("node count mismatch in union");
    std::vector<Edge> e = a.edges();
    e.insert(e.end(), b.edges().begin(), b.edges().end());
    std::sort(e.begin(), e.end());
    e.erase(std::unique(e.begin(), e.end()), e.end());
    return Topology::from_edges(a.n_nodes(), std::move(e), false);
}

Topology symmetrize(const Topology& t) { return unite(t, mirror(t)); }

std::vector<int> neighbors(const Topology& t, int i) { return t.neighbors(i); }

Topology ring_topology(int n) {
    std::vector<Edge> e;
    if (n == 2) return Topology::from_edges(2, {{1, 2}, {2, 1}});
    for (int i = 1; n > 2 && i <= n; ++i) {
        int k = i % n + 1;
        e.emplace_back(i, k);
        e.emplace_back(k, i);
    }
    return Topology::from_edges(n, std::move(e));
}

Topology complete_topology(int n) {
    std::vector<Edge> e;
    for (int i = 1; i <= n; ++i)
        for (int k = 1; k <= n; ++k)
            if (i != k) e.emplace_back(i, k);
    return Topology::from_edges(n, std::move(e));
}

Topology path_topology(int n) {
    std::vector<Edge> e;
    for (int i = 1; i < n; ++i) {
        e.emplace_back(i, i + 1);
        e.emplace_back(i + 1, i);
    }
    return Topology::from_edges(n, std::move(e));
}

Eigen::MatrixXd pattern(const Topology& t, const std::map<Edge, double>& weights) {
    for (const auto& [e, w] : weights)
        if (!t.has_edge(e.first, e.second))
            throw InvalidArgument(fmt::format("weight given for absent edge ({},{})", e.first, e.second));
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(t.n_nodes(), t.n_nodes());
    for (const auto& e : t.edges()) {
        auto it = weights.find(e);
        p(e.first - 1, e.second - 1) = it == weights.end() ? 1.0 : it->second;
    }
    return p;
}

bool is_normal(const Eigen::MatrixXd& p) {
    double scale = std::max(1.0, p.squaredNorm());
    return (p * p.transpose() - p.transpose() * p).norm() <= 1e-9 * scale;
}

Spectrum spectrum(const Eigen::MatrixXd& p) {
    if (p.rows() != p.cols()) throw InvalidArgument("spectrum of a non-square matrix");
    Spectrum s;
    s.normal = is_normal(p);
    if ((p - p.transpose()).norm() <= 1e-14 * std::max(1.0, p.norm())) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p, Eigen::EigenvaluesOnly);
        for (int i = 0; i < es.eigenvalues().size(); ++i) s.eigenvalues.emplace_back(es.eigenvalues()(i), 0.0);
    } else {
        Eigen::EigenSolver<Eigen::MatrixXd> es(p, false);
        for (int i = 0; i < es.eigenvalues().size(); ++i) s.eigenvalues.push_back(es.eigenvalues()(i));
        std::sort(s.eigenvalues.begin(), s.eigenvalues.end(), [](auto a, auto b) {
            return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
        });
    }
    s.real = std::all_of(s.eigenvalues.begin(), s.eigenvalues.end(),
                         [](auto z) { return std::abs(z.imag()) <= 1e-9; });
    return s;
}

}  // namespace netsyn
