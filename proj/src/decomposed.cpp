#include "netsyn/decomposed.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <set>

#include <Eigen/Eigenvalues>
#include <fmt/core.h>

#include "netsyn/analysis.hpp"
#include "netsyn/errors.hpp"

namespace netsyn {

namespace {

constexpr double kStructTol = 1e-10;

bool same(const Mat& a, const Mat& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    return a.size() == 0 || (a - b).cwiseAbs().maxCoeff() <= kStructTol;
}

}  // namespace

// ==== Edge pairing ====

SpMat block_permutation(const std::vector<int>& perm, const std::vector<int>& dims) {
    const int nb = static_cast<int>(dims.size());
    if (static_cast<int>(perm.size()) != nb) throw InvalidArgument("permutation and block count differ");
    std::vector<int> off(nb + 1, 0);
    for (int b = 0; b < nb; ++b) off[b + 1] = off[b] + dims[b];
    std::vector<Eigen::Triplet<double>> t;
    int row = 0;
    for (int r = 0; r < nb; ++r) {
        const int b = perm[r];
        for (int e = 0; e < dims[b]; ++e) t.emplace_back(row++, off[b] + e, 1.0);
    }
    SpMat T(off[nb], off[nb]);
    T.setFromTriplets(t.begin(), t.end());
    return T;
}

EdgePairing edge_pairing_permutation(const ChannelLayout& l) {
    std::map<Edge, int> index;
    std::vector<Edge> canon;
    std::vector<int> dp, dq;
    for (int i = 0; i < static_cast<int>(l.slots.size()); ++i)
        for (const auto& s : l.slots[i]) {
            index[{i + 1, s.label}] = static_cast<int>(canon.size());
            canon.emplace_back(i + 1, s.label);
            dp.push_back(s.dim_p);
            dq.push_back(s.dim_q);
        }
    EdgePairing ep;
    std::set<Edge> seen;
    for (const auto& e : canon) {
        if (seen.count(e)) continue;
        const Edge m{e.second, e.first};
        auto it = index.find(m);
        if (it == index.end())
            throw InvalidArgument(fmt::format("slot ({},{}) has no mirror slot", e.first, e.second));
        for (const Edge& x : {e, m}) {
            seen.insert(x);
            ep.order.push_back(x);
            ep.perm.push_back(index.at(x));
        }
    }
    ep.Tp = block_permutation(ep.perm, dp);
    ep.Tq = block_permutation(ep.perm, dq);
    return ep;
}

// ==== Edge conditions ====

Mat EdgeCondition::p_hat() const {
    const Eigen::Index pa = Pik.rows(), pb = Pki.rows(), qa = Pki.cols(), qb = Pik.cols();
    Mat ph = Mat::Zero(pa + pb, qa + qb);
    ph.block(0, qa, pa, qb) = Pik;
    ph.block(pa, 0, pb, qa) = Pki;
    return ph;
}

Mat EdgeCondition::matrix() const {
    const Mat ph = p_hat();
    const Mat Q = blkdiag({Qik, Qki}), S = blkdiag({Sik, Ski}), R = blkdiag({Rik, Rki});
    const Mat pts = ph.transpose() * S;
    return ph.transpose() * Q * ph + pts + pts.transpose() + R;
}

Mat ideal_edge_condition(const EdgeCondition& e) {
    auto identity = [](const Mat& m) { return m.rows() == m.cols() && same(m, Mat::Identity(m.rows(), m.cols())); };
    if (!identity(e.Pik) || !identity(e.Pki))
        throw InvalidArgument(
            fmt::format("edge ({},{}): ideal condition needs identity interconnection blocks", e.edge.first, e.edge.second));
    const Eigen::Index a = e.Qik.rows(), b = e.Qki.rows();
    Mat f(a + b, a + b);
    f.topLeftCorner(a, a) = e.Qik + e.Rki;
    f.topRightCorner(a, b) = e.Sik + e.Ski.transpose();
    f.bottomLeftCorner(b, a) = e.Ski + e.Sik.transpose();
    f.bottomRightCorner(b, b) = e.Qki + e.Rik;
    return f;
}

bool edge_condition_holds(const Mat& f, double eps) { return f.size() == 0 || min_eig_sym(f) >= eps; }

EdgeCondition edge_condition_values(const MultiplierVars& m, const SpMat& P, const Vec& y, int i, int k) {
    if (!m.per_slot()) throw InvalidArgument("edge conditions need a per-slot multiplier structure");
    const int s = m.layout.find(i, k), t = m.layout.find(k - 1, i + 1);
    if (s < 0 || t < 0) throw InvalidArgument(fmt::format("no slot pair for edge ({},{})", i + 1, k));
    const Slot& a = m.layout.slots[i][s];
    const Slot& b = m.layout.slots[k - 1][t];
    const Mat ph = edge_interconnection(m.layout, P, i, k);
    const MultiplierBlock& x = m.slot[i][s];
    const MultiplierBlock& z = m.slot[k - 1][t];
    EdgeCondition e;
    e.edge = {i + 1, k};
    e.Qik = x.Q.value(y);
    e.Sik = x.S.value(y);
    e.Rik = x.R.value(y);
    e.Qki = z.Q.value(y);
    e.Ski = z.S.value(y);
    e.Rki = z.R.value(y);
    e.Pik = ph.block(0, a.dim_q, a.dim_p, b.dim_q);
    e.Pki = ph.block(a.dim_p, 0, b.dim_p, a.dim_q);
    return e;
}

// ==== Heterogeneous synthesis ====

SynthesisResult decomposed_synthesis_hetero(const InterconnectedSystem& g, const Topology& topo_k,
                                            const SynthesisOptions& opt) {
    SynthesisOptions o = opt;
    o.structure = MultiplierStructure::FullPerEdge;
    o.decomposed = true;
    return synthesize_edge_form(g, topo_k, o, "decomposed");
}

SynthesisResult decomposed_synthesis_identical(const InterconnectedSystem& g, const Topology& topo_k,
                                               const SynthesisOptions& opt) {
    SynthesisOptions o = opt;
    o.structure = MultiplierStructure::IdenticalAcrossEdges;
    o.decomposed = true;
    return synthesize_edge_form(g, topo_k, o, "decomposed-identical");
}

// ==== Classes ====

int ClassDescriptor::n_nodes() const {
    int n = 0;
    for (const auto& gr : groups) n += static_cast<int>(gr.size());
    return n;
}

std::vector<int> ClassDescriptor::group_of() const {
    std::vector<int> g(n_nodes(), -1);
    for (int a = 0; a < alpha(); ++a)
        for (int i : groups[a]) {
            if (i < 1 || i > static_cast<int>(g.size()) || g[i - 1] >= 0)
                throw InvalidArgument(fmt::format("groups do not partition the nodes (node {})", i));
            g[i - 1] = a;
        }
    return g;
}

std::vector<int> ClassDescriptor::theta() const {
    std::vector<int> th{0};
    for (const auto& gr : groups) {
        for (std::size_t t = 0; t < gr.size(); ++t)
            if (gr[t] != th.back() + 1 + static_cast<int>(t)) return {};
        th.push_back(th.back() + static_cast<int>(gr.size()));
    }
    return th;
}

void ClassDescriptor::validate(const Topology& topo) const {
    if (alpha() == 0) throw InvalidArgument("class descriptor without groups");
    if (n_nodes() != topo.n_nodes())
        throw InvalidArgument(fmt::format("groups cover {} nodes, the graph has {}", n_nodes(), topo.n_nodes()));
    (void)group_of();
    std::set<Edge> seen;
    for (int j = 0; j < beta(); ++j) {
        if (classes[j].empty()) throw InvalidArgument(fmt::format("class {} is empty", j + 1));
        for (const auto& e : classes[j]) {
            if (!topo.has_edge(e.first, e.second))
                throw InvalidArgument(fmt::format("class {} lists absent edge ({},{})", j + 1, e.first, e.second));
            if (!seen.insert(e).second)
                throw InvalidArgument(fmt::format("edge ({},{}) is in more than one class", e.first, e.second));
        }
    }
    if (seen.size() != topo.n_edges()) throw InvalidArgument("some edges belong to no class");
}

ClassDescriptor homogeneous_classes(const Topology& topo) {
    ClassDescriptor c;
    c.groups.emplace_back();
    for (int i = 1; i <= topo.n_nodes(); ++i) c.groups[0].push_back(i);
    c.classes.push_back(topo.edges());
    return c;
}

ClassDescriptor fully_heterogeneous_classes(const Topology& topo) {
    ClassDescriptor c;
    for (int i = 1; i <= topo.n_nodes(); ++i) c.groups.push_back({i});
    for (const auto& e : topo.edges()) c.classes.push_back({e});
    return c;
}

Mat CompressedSystem::class_major_pattern() const { return Zp.transpose() * Pe * Zq; }

CompressedSystem compress_alphabeta(const InterconnectedSystem& g, const ClassDescriptor& cls) {
    if (!g.edge_form) throw InvalidArgument("compression needs an edge-form system");
    g.validate();
    cls.validate(g.topo);
    const int n = g.n(), beta = cls.beta();
    const std::vector<int> gid = cls.group_of();
    const ChannelLayout l = g.layout();

    // local matrices per group
    for (int i = 0; i < n; ++i) {
        const SubsystemSS& a = g.subs[i];
        const SubsystemSS& r = g.subs[cls.groups[gid[i]][0] - 1];
        const std::pair<const Mat*, const Mat*> m[] = {{&a.A, &r.A},     {&a.Bu, &r.Bu},   {&a.Bw, &r.Bw},
                                                       {&a.Cy, &r.Cy},   {&a.Cz, &r.Cz},   {&a.Dyw, &r.Dyw},
                                                       {&a.Dzu, &r.Dzu}, {&a.Dzw, &r.Dzw}};
        for (const auto& [x, y] : m)
            if (!same(*x, *y))
                throw InvalidArgument(fmt::format("subsystem {} differs from its group representative", i + 1));
    }

    std::map<Edge, int> class_of;
    for (int j = 0; j < beta; ++j)
        for (const auto& e : cls.classes[j]) class_of[e] = j;

    CompressedSystem c;
    c.cls = cls;
    c.topo_g = g.topo;
    c.Lambda.assign(beta, Mat::Zero(n, n));
    c.ns.assign(beta, -1);
    const int alpha = cls.alpha();
    struct Recv {
        bool set = false;
        Mat Bp, Dzp, Dyp;
    };
    struct Send {
        bool set = false;
        Mat Cq, Dqw;
    };
    std::vector<std::vector<Recv>> recv(alpha, std::vector<Recv>(beta));
    std::vector<std::vector<Send>> send(alpha, std::vector<Send>(beta));

    double pe_norm2 = 0.0;
    for (const auto& [e, j] : class_of) {
        const int i = e.first - 1, k = e.second - 1;
        const int s = l.find(i, e.second), t = l.find(k, e.first);
        const int dp = l.slots[i][s].dim_p, dq = l.slots[k][t].dim_q;
        if (dp != dq) throw InvalidArgument(fmt::format("edge ({},{}): non-square interconnection block", i + 1, k + 1));
        if (c.ns[j] >= 0 && c.ns[j] != dp)
            throw InvalidArgument(fmt::format("class {} mixes channel dimensions {} and {}", j + 1, c.ns[j], dp));
        c.ns[j] = dp;
        const Mat blk = Mat(g.P.block(l.p_at(i, s), l.q_at(k, t), dp, dq));
        const double w = dp > 0 ? blk(0, 0) : 1.0;
        if (!same(blk, w * Mat::Identity(dp, dp)))
            throw InvalidArgument(fmt::format("edge ({},{}): interconnection block is not a multiple of I", i + 1, k + 1));
        pe_norm2 += blk.squaredNorm();
        c.Lambda[j](i, k) = w;

        const SubsystemSS& ri = g.subs[i];
        const int po = l.p_at(i, s) - l.p_off[i];
        Recv& rv = recv[gid[i]][j];
        Mat bp = ri.Bp.middleCols(po, dp), dzp = ri.Dzp.middleCols(po, dp), dyp = ri.Dyp.middleCols(po, dp);
        if (!rv.set) {
            rv = {true, bp, dzp, dyp};
        } else if (!same(rv.Bp, bp) || !same(rv.Dzp, dzp) || !same(rv.Dyp, dyp)) {
            throw InvalidArgument(fmt::format("edge ({},{}): receiver blocks differ within group {} and class {}",
                                              i + 1, k + 1, gid[i] + 1, j + 1));
        }
        const SubsystemSS& sk = g.subs[k];
        const int qo = l.q_at(k, t) - l.q_off[k];
        Send& sd = send[gid[k]][j];
        Mat cq = sk.Cq.middleRows(qo, dq), dqw = sk.Dqw.middleRows(qo, dq);
        if (!sd.set) {
            sd = {true, cq, dqw};
        } else if (!same(sd.Cq, cq) || !same(sd.Dqw, dqw)) {
            throw InvalidArgument(fmt::format("edge ({},{}): sender blocks differ within group {} and class {}", i + 1,
                                              k + 1, gid[k] + 1, j + 1));
        }
    }
    if (std::abs(pe_norm2 - g.P.squaredNorm()) > kStructTol * std::max(1.0, pe_norm2))
        throw InvalidArgument("interconnection matrix has entries outside the plant edges");

    // compressed subsystems
    for (int i = 0; i < n; ++i) {
        const SubsystemSS& s = g.subs[i];
        const int a = gid[i];
        SubsystemSS o = s;
        std::vector<Mat> bp, dzp, dyp, cq, dqw;
        o.slots.clear();
        for (int j = 0; j < beta; ++j) {
            const int d = c.ns[j];
            o.slots.push_back({j + 1, d, d});
            const Recv& rv = recv[a][j];
            bp.push_back(rv.set ? rv.Bp : Mat::Zero(s.nx(), d));
            dzp.push_back(rv.set ? rv.Dzp : Mat::Zero(s.nz(), d));
            dyp.push_back(rv.set ? rv.Dyp : Mat::Zero(s.ny(), d));
            const Send& sd = send[a][j];
            cq.push_back(sd.set ? sd.Cq : Mat::Zero(d, s.nx()));
            dqw.push_back(sd.set ? sd.Dqw : Mat::Zero(d, s.nw()));
        }
        o.Bp = hcat(bp, s.nx());
        o.Dzp = hcat(dzp, s.nz());
        o.Dyp = hcat(dyp, s.ny());
        o.Cq = vcat(cq, s.nx());
        o.Dqw = vcat(dqw, s.nw());
        c.sys.subs.push_back(std::move(o));
    }
    c.sys.topo = g.topo;
    c.sys.edge_form = false;
    const ChannelLayout lc = c.sys.layout();
    std::vector<Eigen::Triplet<double>> trips;
    for (const auto& [e, j] : class_of) {
        const int i = e.first - 1, k = e.second - 1;
        for (int t = 0; t < c.ns[j]; ++t)
            trips.emplace_back(lc.p_at(i, j) + t, lc.q_at(k, j) + t, c.Lambda[j](i, k));
    }
    c.sys.P.resize(lc.n_p(), lc.n_q());
    c.sys.P.setFromTriplets(trips.begin(), trips.end());
    c.sys.validate();

    // edge-level selections
    std::map<Edge, int> prow, qrow;
    for (int i = 0; i < n; ++i)
        for (const auto& s : l.slots[i])
            if (g.topo.has_edge(i + 1, s.label)) prow.emplace(Edge{i + 1, s.label}, static_cast<int>(prow.size()));
    for (int k = 0; k < n; ++k)
        for (const auto& s : l.slots[k])
            if (g.topo.has_edge(s.label, k + 1)) qrow.emplace(Edge{s.label, k + 1}, static_cast<int>(qrow.size()));
    const int ne = static_cast<int>(g.topo.n_edges());
    c.Zp = Mat::Zero(ne, beta * n);
    c.Zq = Mat::Zero(ne, beta * n);
    c.Pe = Mat::Zero(ne, ne);
    for (const auto& [e, j] : class_of) {
        const int i = e.first - 1, k = e.second - 1;
        c.Zp(prow.at(e), j * n + i) = 1.0;
        c.Zq(qrow.at(e), j * n + k) = 1.0;
        c.Pe(prow.at(e), qrow.at(e)) = c.Lambda[j](i, k);
    }
    return c;
}

CompressedSystem compress_homogeneous(const InterconnectedSystem& g) {
    return compress_alphabeta(g, homogeneous_classes(g.topo));
}

// ==== Class controller ====

namespace {

// Input dimension shared by the receivers of each class.
std::vector<int> class_input_dims(const CompressedSystem& c) {
    std::vector<int> nu(c.cls.beta(), -1);
    for (int j = 0; j < c.cls.beta(); ++j)
        for (const auto& e : c.cls.classes[j]) {
            const int d = c.sys.subs[e.first - 1].nu();
            if (nu[j] >= 0 && nu[j] != d)
                throw InvalidArgument(fmt::format("receivers of class {} have different input dimensions", j + 1));
            nu[j] = d;
        }
    return nu;
}

std::vector<std::vector<bool>> group_receives(const CompressedSystem& c) {
    const std::vector<int> gid = c.cls.group_of();
    std::vector<std::vector<bool>> r(c.cls.alpha(), std::vector<bool>(c.cls.beta(), false));
    for (int j = 0; j < c.cls.beta(); ++j)
        for (const auto& e : c.cls.classes[j]) r[gid[e.first - 1]][j] = true;
    return r;
}

}  // namespace

ClassGains zero_class_gains(const CompressedSystem& c) {
    const std::vector<int> nu = class_input_dims(c);
    ClassGains k;
    for (const auto& gr : c.cls.groups) {
        const SubsystemSS& r = c.sys.subs[gr[0] - 1];
        k.K.push_back(Mat::Zero(r.nu(), r.ny()));
        k.F.emplace_back();
        for (int j = 0; j < c.cls.beta(); ++j) k.F.back().push_back(Mat::Zero(nu[j], r.ny()));
    }
    return k;
}

DistributedController class_controller(const CompressedSystem& c, const ClassGains& k) {
    const int n = c.sys.n(), beta = c.cls.beta();
    const std::vector<int> gid = c.cls.group_of();
    const std::vector<int> nu = class_input_dims(c);
    const auto recv = group_receives(c);
    if (static_cast<int>(k.K.size()) != c.cls.alpha() || static_cast<int>(k.F.size()) != c.cls.alpha())
        throw InvalidArgument("class gains need one entry per group");
    DistributedController dc;
    dc.topo = c.sys.topo;
    for (int i = 0; i < n; ++i) {
        const SubsystemSS& s = c.sys.subs[i];
        const int a = gid[i];
        ControllerSS ck;
        ck.AK = Mat::Zero(0, 0);
        ck.BK = Mat::Zero(0, s.ny());
        ck.CK = Mat::Zero(s.nu(), 0);
        ck.DK = k.K[a];
        std::vector<Mat> ckp, dkq;
        for (int j = 0; j < beta; ++j) {
            if (recv[a][j] && s.nu() != nu[j])
                throw InvalidArgument(fmt::format("subsystem {} input dimension differs from class {}", i + 1, j + 1));
            ckp.push_back(recv[a][j] ? Mat(Mat::Identity(s.nu(), nu[j])) : Mat(Mat::Zero(s.nu(), nu[j])));
            if (k.F[a][j].rows() != nu[j] || k.F[a][j].cols() != s.ny())
                throw InvalidArgument(fmt::format("class gain ({},{}) has wrong dimensions", a + 1, j + 1));
            dkq.push_back(k.F[a][j]);
            ck.slots.push_back({j + 1, nu[j], nu[j]});
        }
        ck.CKp = hcat(ckp, s.nu());
        ck.DKq = vcat(dkq, s.ny());
        ck.BKp = Mat::Zero(0, ck.CKp.cols());
        ck.CKq = Mat::Zero(ck.DKq.rows(), 0);
        ck.validate(s.nu(), s.ny());
        dc.subs.push_back(std::move(ck));
    }
    const ChannelLayout lk = dc.layout();
    std::vector<Eigen::Triplet<double>> trips;
    for (int j = 0; j < beta; ++j)
        for (const auto& e : c.cls.classes[j]) {
            const int i = e.first - 1, kk = e.second - 1;
            for (int t = 0; t < nu[j]; ++t)
                trips.emplace_back(lk.p_at(i, j) + t, lk.q_at(kk, j) + t, c.Lambda[j](i, kk));
        }
    dc.P.resize(lk.n_p(), lk.n_q());
    dc.P.setFromTriplets(trips.begin(), trips.end());
    return dc;
}

StaticGains class_to_edge_gains(const CompressedSystem& c, const ClassGains& k) {
    const std::vector<int> gid = c.cls.group_of();
    StaticGains out;
    for (int i = 0; i < c.sys.n(); ++i) out.local.push_back(k.K[gid[i]]);
    for (int j = 0; j < c.cls.beta(); ++j)
        for (const auto& e : c.cls.classes[j])
            out.edge[e] = c.Lambda[j](e.first - 1, e.second - 1) * k.F[gid[e.second - 1]][j];
    return out;
}

// ==== Class conditions ====

std::vector<std::complex<double>> eigenvalue_clusters(const Mat& lambda, double tol) {
    const Spectrum sp = spectrum(lambda);
    const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
    std::vector<std::complex<double>> reps;
    for (auto l : sp.eigenvalues) {
        if (std::abs(l.imag()) <= 1e-9 * scale) l = {l.real(), 0.0};
        bool found = false;
        for (const auto& r : reps)
            if (std::abs(r - l) <= tol * scale) found = true;
        if (!found) reps.push_back(l);
    }
    std::sort(reps.begin(), reps.end(), [](const auto& a, const auto& b) {
        const bool ra = a.imag() == 0.0, rb = b.imag() == 0.0;
        if (ra != rb) return ra;
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    return reps;
}

AffExpr eigenvalue_condition(const MultiplierBlock& m, std::complex<double> l) {
    const AffExpr sst = m.S + m.S.transpose();
    AffExpr fr = std::norm(l) * m.Q + l.real() * sst + m.R;
    if (l.imag() == 0.0) return fr;
    const AffExpr fi = l.imag() * (m.S.transpose() - m.S);
    const Eigen::Index d = fr.rows();
    BlockExpr b({d, d}, {d, d});
    b.add(0, 0, fr);
    b.add(0, 1, -fi);
    b.add(1, 0, fi);
    b.add(1, 1, fr);
    return b.build();
}

AffExpr kronecker_condition(const MultiplierBlock& m, const Mat& L) {
    const Eigen::Index n = L.rows(), d = m.R.rows();
    if (L.cols() != n || m.Q.rows() != d || m.S.rows() != d || m.S.cols() != d)
        throw InvalidArgument("Kronecker condition needs a square pattern and a square class channel");
    const Mat ltl = L.transpose() * L;
    BlockExpr b(std::vector<Eigen::Index>(n, d), std::vector<Eigen::Index>(n, d));
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index c = 0; c < n; ++c) {
            AffExpr e(d, d);
            if (ltl(a, c) != 0.0) e += ltl(a, c) * m.Q;
            if (L(c, a) != 0.0) e += L(c, a) * m.S;
            if (L(a, c) != 0.0) e += L(a, c) * m.S.transpose();
            if (a == c) e += m.R;
            b.add(static_cast<int>(a), static_cast<int>(c), e);
        }
    return b.build();
}

// ==== Class synthesis ====

namespace {

SfSharing class_sharing(const SfTemplate& t, const CompressedSystem& c) {
    const std::vector<int> gid = c.cls.group_of();
    SfSharing sh;
    std::map<std::pair<int, int>, int> keys;
    for (int i = 0; i < t.adj.n(); ++i) {
        sh.group.push_back(gid[i]);
        sh.key.emplace_back();
        for (const auto& gs : t.gain_slots[i]) {
            auto it = keys.emplace(std::make_pair(gid[i], gs.label), static_cast<int>(keys.size())).first;
            sh.key[i].push_back(it->second);
        }
    }
    return sh;
}

}  // namespace

ClassProgram build_class_program(const CompressedSystem& c, bool homogeneous, const ClassSynthesisOptions& opt) {
    const double eps = opt.base.eps;
    ClassProgram cp;
    SfProgram& sp = cp.sf;
    sp.templ = make_sf_template(c.sys, class_controller(c, zero_class_gains(c)));
    sp.sharing = class_sharing(sp.templ, c);
    sp.level = sp.prog.add_scalar();
    sp.prog.add_objective(sp.level, 1.0);
    sp.vars = create_sf_variables(sp.prog, sp.templ, sp.sharing, eps);
    const auto nom = sf_nominal_terms(sp.templ, sp.sharing, sp.vars);
    const ChannelLayout la = sp.templ.adj.layout();
    sp.mult = create_multipliers(sp.prog, la, MultiplierStructure::PerClass);
    const PerfScaling sc = gamma_scaling(sp.level);
    for (const auto& gr : c.cls.groups) {
        const int r = gr[0] - 1;
        sp.prog.add_lmi("nominal", -nominal_matrix(nom[r], sp.mult.subsystem[r], sc), eps);
    }

    for (int j = 0; j < c.cls.beta(); ++j) {
        const int s = la.find(0, j + 1);
        const MultiplierBlock& mb = sp.mult.slot[0][s];
        // the adjoint loop is interconnected through P', so its pattern is Lambda_j'
        const Mat L = c.Lambda[j].transpose();
        const bool normal = is_normal(L);
        bool eigen = opt.path == ClassPath::Eigen || (opt.path == ClassPath::Auto && normal);
        if (!normal && (opt.path == ClassPath::Eigen || homogeneous))
            throw InvalidArgument(fmt::format("class {} pattern is not normal", j + 1));
        if (homogeneous && opt.path == ClassPath::Kronecker) eigen = false;
        int added = 0;
        if (eigen) {
            const auto reps = eigenvalue_clusters(L, opt.cluster_tol);
            const bool real = std::all_of(reps.begin(), reps.end(), [](const auto& l) { return l.imag() == 0.0; });
            std::vector<std::complex<double>> use = reps;
            if (real && opt.extremes_only && reps.size() > 2) use = {reps.front(), reps.back()};
            for (const auto& l : use) {
                sp.prog.add_lmi("multiplier", eigenvalue_condition(mb, l), eps);
                ++added;
            }
            // concavity in lambda makes the extreme eigenvalues sufficient
            if (real && opt.extremes_only) sp.prog.add_lmi("concavity", -mb.Q, eps);
        } else {
            sp.prog.add_lmi("multiplier", kronecker_condition(mb, L), eps);
            added = 1;
        }
        cp.class_lmis.push_back(added);
        cp.eigen_path.push_back(eigen);
    }
    return cp;
}

namespace {

SynthesisResult class_synthesis(const InterconnectedSystem& g, const ClassDescriptor& cls, bool homogeneous,
                                const ClassSynthesisOptions& opt, const std::string& method) {
    const auto t0 = std::chrono::steady_clock::now();
    const CompressedSystem c = compress_alphabeta(g, cls);
    check_state_feedback_scope(c.sys);
    ClassProgram cp = build_class_program(c, homogeneous, opt);
    const ConicSolution sol = solve(cp.sf.prog, opt.base.solver);
    require_optimal(sol, method);

    const SfGains sg = extract_sf_gains(cp.sf.vars, sol.y);
    ClassGains kg = zero_class_gains(c);
    const std::vector<int> gid = cls.group_of();
    for (int a = 0; a < cls.alpha(); ++a) kg.K[a] = sg.K[a];
    for (int i = 0; i < c.sys.n(); ++i)
        for (std::size_t s = 0; s < cp.sf.templ.gain_slots[i].size(); ++s)
            kg.F[gid[i]][cp.sf.templ.gain_slots[i][s].label - 1] = sg.F[cp.sf.sharing.key[i][s]];

    SynthesisResult r;
    r.method = method;
    r.topo_k = g.topo;
    r.stats = program_stats(cp.sf.prog);
    r.stats.iterations = sol.iterations;
    r.gains = class_to_edge_gains(c, kg);

    Certificate cert;
    cert.level = sol.y(cp.sf.level);
    for (int i = 0; i < c.sys.n(); ++i) cert.X.push_back(ConicProgram::get_value(cp.sf.vars.X[gid[i]], sol.y));
    cert.multipliers = extract_multipliers(cp.sf.mult, sol.y);
    certify(r, close_loop(c.sys, class_controller(c, kg)), MultiplierStructure::PerClass, false, cert, opt.base.eps,
            opt.base.solver);

    // the compressed and edge-form loops are the same system
    const double h_edge = hinf_norm(flatten(close_with_gains(g, g.topo, r.gains)));
    if (!(std::abs(h_edge - r.hinf) <= 1e-6 * std::max(1.0, r.hinf)))
        throw ConsistencyError(fmt::format("{}: compressed loop norm {:.9g} differs from edge-form norm {:.9g}",
                                           method, r.hinf, h_edge));
    r.hinf = h_edge;
    if (!sol.diagnostic.empty()) r.diagnostic = sol.diagnostic;
    r.stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

}  // namespace

SynthesisResult decomposed_synthesis_homogeneous(const InterconnectedSystem& g, const ClassSynthesisOptions& opt) {
    return class_synthesis(g, homogeneous_classes(g.topo), true, opt, "homogeneous");
}

SynthesisResult decomposed_synthesis_alphabeta(const InterconnectedSystem& g, const ClassDescriptor& cls,
                                               const ClassSynthesisOptions& opt) {
    return class_synthesis(g, cls, false, opt, "alphabeta");
}

}  // namespace netsyn
