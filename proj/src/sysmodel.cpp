#include "netsyn/sysmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/core.h>

#include "netsyn/errors.hpp"

namespace netsyn {

namespace {

void expect_dims(const Mat& m, Eigen::Index r, Eigen::Index c, const char* what) {
    if (m.rows() != r || m.cols() != c)
        throw InvalidArgument(fmt::format("{} is {}x{}, expected {}x{}", what, m.rows(), m.cols(), r, c));
}

Mat or_zeros(const Mat& m, Eigen::Index r, Eigen::Index c, const char* what) {
    if (m.size() == 0) return Mat::Zero(r, c);
    expect_dims(m, r, c, what);
    return m;
}

Mat block2(const Mat& a, const Mat& b, const Mat& c, const Mat& d) {
    Mat out(a.rows() + c.rows(), a.cols() + b.cols());
    out << a, b, c, d;
    return out;
}

double entry_tol(const Mat& m) { return 1e-12 * std::max(1.0, m.size() ? m.cwiseAbs().maxCoeff() : 0.0); }

}  // namespace

// ==== ChannelLayout ====

ChannelLayout ChannelLayout::from_slots(std::vector<std::vector<Slot>> slots) {
    ChannelLayout l;
    l.slots = std::move(slots);
    l.p_off.assign(1, 0);
    l.q_off.assign(1, 0);
    for (const auto& ss : l.slots) {
        int dp = 0, dq = 0;
        for (const auto& s : ss) {
            dp += s.dim_p;
            dq += s.dim_q;
        }
        l.p_off.push_back(l.p_off.back() + dp);
        l.q_off.push_back(l.q_off.back() + dq);
    }
    return l;
}

int ChannelLayout::p_at(int i, int s) const {
    int o = p_off[i];
    for (int t = 0; t < s; ++t) o += slots[i][t].dim_p;
    return o;
}

int ChannelLayout::q_at(int i, int s) const {
    int o = q_off[i];
    for (int t = 0; t < s; ++t) o += slots[i][t].dim_q;
    return o;
}

int ChannelLayout::find(int i, int label) const {
    const auto& ss = slots[i];
    for (int s = 0; s < static_cast<int>(ss.size()); ++s)
        if (ss[s].label == label) return s;
    return -1;
}

SpMat assemble_interconnection(const ChannelLayout& layout, const std::map<Edge, Mat>& blocks) {
    std::vector<Eigen::Triplet<double>> trips;
    const int n = static_cast<int>(layout.slots.size());
    for (const auto& [e, b] : blocks) {
        auto [i, k] = e;
        if (i < 1 || i > n || k < 1 || k > n) throw InvalidArgument("interconnection block out of range");
        int s = layout.find(i - 1, k);
        int t = layout.find(k - 1, i);
        int dp = s >= 0 ? layout.slots[i - 1][s].dim_p : 0;
        int dq = t >= 0 ? layout.slots[k - 1][t].dim_q : 0;
        if (b.rows() != dp || b.cols() != dq)
            throw InvalidArgument(fmt::format("P_{}{} is {}x{}, channels need {}x{}", i, k, b.rows(), b.cols(), dp, dq));
        if (dp == 0 || dq == 0) continue;
        int r0 = layout.p_at(i - 1, s), c0 = layout.q_at(k - 1, t);
        for (int r = 0; r < dp; ++r)
            for (int c = 0; c < dq; ++c)
                if (b(r, c) != 0.0) trips.emplace_back(r0 + r, c0 + c, b(r, c));
    }
    SpMat P(layout.n_p(), layout.n_q());
    P.setFromTriplets(trips.begin(), trips.end());
    return P;
}

SpMat assemble_interconnection(int n_nodes, const std::vector<EdgeChannel>& channels,
                               const std::map<Edge, Mat>& blocks) {
    std::vector<std::vector<Slot>> slots(n_nodes);
    std::vector<EdgeChannel> sorted = channels;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.edge < b.edge; });
    for (const auto& c : sorted) {
        auto [i, k] = c.edge;
        if (i < 1 || i > n_nodes || k < 1 || k > n_nodes) throw InvalidArgument("channel out of range");
        if (c.dim_in < 0 || c.dim_out < 0) throw InvalidArgument("negative channel dimension");
        slots[i - 1].push_back({k, c.dim_in, c.dim_out});
    }
    return assemble_interconnection(ChannelLayout::from_slots(std::move(slots)), blocks);
}

// ==== Subsystems ====

void SubsystemSS::validate() const {
    const int x = nx(), u = nu(), w = nw(), y = ny(), z = nz(), p = np(), q = nq();
    expect_dims(A, x, x, "A");
    expect_dims(Bu, x, u, "Bu");
    expect_dims(Bw, x, w, "Bw");
    expect_dims(Bp, x, p, "Bp");
    expect_dims(Cy, y, x, "Cy");
    expect_dims(Cz, z, x, "Cz");
    expect_dims(Cq, q, x, "Cq");
    expect_dims(Dyw, y, w, "Dyw");
    expect_dims(Dyp, y, p, "Dyp");
    expect_dims(Dzu, z, u, "Dzu");
    expect_dims(Dzw, z, w, "Dzw");
    expect_dims(Dzp, z, p, "Dzp");
    expect_dims(Dqw, q, w, "Dqw");
    int sp = 0, sq = 0;
    for (const auto& s : slots) {
        if (s.dim_p < 0 || s.dim_q < 0) throw InvalidArgument("negative slot dimension");
        sp += s.dim_p;
        sq += s.dim_q;
    }
    if (sp != p || sq != q) throw InvalidArgument("slot dimensions do not add up to the channel sizes");
}

ChannelLayout InterconnectedSystem::layout() const {
    std::vector<std::vector<Slot>> s;
    for (const auto& g : subs) s.push_back(g.slots);
    return ChannelLayout::from_slots(std::move(s));
}

void InterconnectedSystem::validate() const {
    for (const auto& s : subs) s.validate();
    auto l = layout();
    if (P.rows() != l.n_p() || P.cols() != l.n_q()) throw InvalidArgument("interconnection matrix size mismatch");
}

InterconnectedSystem realize_edge_form(const Topology& topo_g, const std::vector<LocalBlocks>& locals,
                                       const std::map<Edge, CouplingBlocks>& couplings) {
    const int n = topo_g.n_nodes();
    if (static_cast<int>(locals.size()) != n) throw InvalidArgument("one LocalBlocks per subsystem required");
    for (const auto& [e, c] : couplings)
        if (!topo_g.has_edge(e.first, e.second))
            throw InvalidArgument(fmt::format("coupling given for absent edge ({},{})", e.first, e.second));

    auto nx = [&](int i) { return static_cast<int>(locals[i - 1].A.rows()); };
    auto nw = [&](int i) { return static_cast<int>(locals[i - 1].Bw.cols()); };
    const Topology sym_g = symmetrize(topo_g);

    InterconnectedSystem sys;
    sys.topo = topo_g;
    sys.edge_form = true;
    for (int i = 1; i <= n; ++i) {
        const LocalBlocks& L = locals[i - 1];
        const int x = nx(i), w = nw(i);
        const int u = static_cast<int>(L.Bu.cols());
        const int y = static_cast<int>(L.Cy.rows());
        const int z = static_cast<int>(L.Cz.rows());
        SubsystemSS s;
        s.A = L.A;
        s.Bu = L.Bu;
        s.Bw = L.Bw;
        s.Cy = L.Cy;
        s.Cz = L.Cz;
        s.Dyw = or_zeros(L.Dyw, y, w, "Dyw");
        s.Dzu = or_zeros(L.Dzu, z, u, "Dzu");
        s.Dzw = or_zeros(L.Dzw, z, w, "Dzw");
        std::vector<Mat> bp, dzp, dyp, cq, dqw;
        for (int k : sym_g.neighbors(i)) {
            Slot sl{k, 0, 0};
            if (topo_g.has_edge(i, k)) {
                const int xk = nx(k), wk = nw(k);
                CouplingBlocks c;
                if (auto it = couplings.find({i, k}); it != couplings.end()) c = it->second;
                bp.push_back(hcat({or_zeros(c.A, x, xk, "A_ik"), or_zeros(c.Bw, x, wk, "Bw_ik")}, x));
                dzp.push_back(hcat({or_zeros(c.Cz, z, xk, "Cz_ik"), or_zeros(c.Dzw, z, wk, "Dzw_ik")}, z));
                dyp.push_back(hcat({or_zeros(c.Cy, y, xk, "Cy_ik"), or_zeros(c.Dyw, y, wk, "Dyw_ik")}, y));
                sl.dim_p = xk + wk;
            }
            if (topo_g.has_edge(k, i)) {
                cq.push_back(vcat({Mat::Identity(x, x), Mat::Zero(w, x)}, x));
                dqw.push_back(vcat({Mat::Zero(x, w), Mat::Identity(w, w)}, w));
                sl.dim_q = x + w;
            }
            s.slots.push_back(sl);
        }
        s.Bp = hcat(bp, x);
        s.Dzp = hcat(dzp, z);
        s.Dyp = hcat(dyp, y);
        s.Cq = vcat(cq, x);
        s.Dqw = vcat(dqw, w);
        s.validate();
        sys.subs.push_back(std::move(s));
    }
    std::map<Edge, Mat> blocks;
    for (const auto& [i, k] : topo_g.edges()) blocks[{i, k}] = Mat::Identity(nx(k) + nw(k), nx(k) + nw(k));
    sys.P = assemble_interconnection(sys.layout(), blocks);
    return sys;
}

// ==== Controllers ====

void ControllerSS::validate(int nu, int ny) const {
    const int x = nxk(), p = npk(), q = nqk();
    expect_dims(AK, x, x, "AK");
    expect_dims(BK, x, ny, "BK");
    expect_dims(CK, nu, x, "CK");
    expect_dims(DK, nu, ny, "DK");
    expect_dims(BKp, x, p, "BKp");
    expect_dims(CKp, nu, p, "CKp");
    expect_dims(CKq, q, x, "CKq");
    expect_dims(DKq, q, ny, "DKq");
    int sp = 0, sq = 0;
    for (const auto& s : slots) {
        sp += s.dim_p;
        sq += s.dim_q;
    }
    if (sp != p || sq != q) throw InvalidArgument("controller slot dimensions do not add up");
}

ChannelLayout DistributedController::layout() const {
    std::vector<std::vector<Slot>> s;
    for (const auto& c : subs) s.push_back(c.slots);
    return ChannelLayout::from_slots(std::move(s));
}

namespace {

Mat gain_or_zero(const StaticGains& g, int i, int k, int rows, int cols) {
    auto it = g.edge.find({i, k});
    if (it == g.edge.end()) return Mat::Zero(rows, cols);
    expect_dims(it->second, rows, cols, "edge gain");
    return it->second;
}

DistributedController static_controller(const Topology& topo_k, const StaticGains& g, const std::vector<int>& ny,
                                        const std::vector<int>& nu, bool sender) {
    const int n = topo_k.n_nodes();
    if (static_cast<int>(g.local.size()) != n || static_cast<int>(ny.size()) != n || static_cast<int>(nu.size()) != n)
        throw InvalidArgument("gain/dimension lists must have one entry per subsystem");
    for (const auto& [e, m] : g.edge)
        if (!topo_k.has_edge(e.first, e.second))
            throw InvalidArgument(fmt::format("edge gain for ({},{}) outside the controller graph", e.first, e.second));
    const Topology sym_k = symmetrize(topo_k);
    DistributedController dc;
    dc.topo = topo_k;
    std::map<Edge, Mat> pblocks;
    for (int i = 1; i <= n; ++i) {
        const int u = nu[i - 1], y = ny[i - 1];
        ControllerSS c;
        c.AK = Mat::Zero(0, 0);
        c.BK = Mat::Zero(0, y);
        c.CK = Mat::Zero(u, 0);
        c.DK = g.local[i - 1];
        expect_dims(c.DK, u, y, "local gain");
        std::vector<Mat> ckp, dkq;
        for (int k : sym_k.neighbors(i)) {
            Slot sl{k, 0, 0};
            if (topo_k.has_edge(i, k)) {
                if (sender) {
                    ckp.push_back(Mat::Identity(u, u));
                    sl.dim_p = u;
                } else {
                    ckp.push_back(gain_or_zero(g, i, k, u, ny[k - 1]));
                    sl.dim_p = ny[k - 1];
                }
                pblocks[{i, k}] = Mat::Identity(sl.dim_p, sl.dim_p);
            }
            if (topo_k.has_edge(k, i)) {
                if (sender) {
                    dkq.push_back(gain_or_zero(g, k, i, nu[k - 1], y));
                    sl.dim_q = nu[k - 1];
                } else {
                    dkq.push_back(Mat::Identity(y, y));
                    sl.dim_q = y;
                }
            }
            c.slots.push_back(sl);
        }
        c.CKp = hcat(ckp, u);
        c.DKq = vcat(dkq, y);
        c.BKp = Mat::Zero(0, c.CKp.cols());
        c.CKq = Mat::Zero(c.DKq.rows(), 0);
        c.validate(u, y);
        dc.subs.push_back(std::move(c));
    }
    dc.P = assemble_interconnection(dc.layout(), pblocks);
    return dc;
}

}  // namespace

DistributedController static_controller_sender_side(const Topology& topo_k, const StaticGains& g,
                                                    const std::vector<int>& ny, const std::vector<int>& nu) {
    return static_controller(topo_k, g, ny, nu, true);
}

DistributedController static_controller_receiver_side(const Topology& topo_k, const StaticGains& g,
                                                      const std::vector<int>& ny, const std::vector<int>& nu) {
    return static_controller(topo_k, g, ny, nu, false);
}

// ==== Closed loop ====

ChannelLayout ClosedLoopSS::layout() const {
    std::vector<std::vector<Slot>> s;
    for (const auto& c : subs) s.push_back(c.slots);
    return ChannelLayout::from_slots(std::move(s));
}

ClosedLoopSS close_loop(const InterconnectedSystem& g, const DistributedController& k) {
    const int n = g.n();
    if (static_cast<int>(k.subs.size()) != n) throw InvalidArgument("missing controller for a subsystem");
    g.validate();
    const ChannelLayout lg = g.layout();
    const ChannelLayout lk = k.layout();
    if (k.P.rows() != lk.n_p() || k.P.cols() != lk.n_q()) throw InvalidArgument("controller interconnection size");

    ClosedLoopSS cl;
    // plant / controller channel index -> closed-loop channel index
    std::vector<int> map_p(lg.n_p()), map_q(lg.n_q()), map_pk(lk.n_p()), map_qk(lk.n_q());
    int gp = 0, gq = 0;
    for (int i = 0; i < n; ++i) {
        const SubsystemSS& s = g.subs[i];
        const ControllerSS& c = k.subs[i];
        c.validate(s.nu(), s.ny());
        std::vector<int> labels;
        for (const auto& sl : s.slots) labels.push_back(sl.label);
        for (const auto& sl : c.slots) labels.push_back(sl.label);
        std::sort(labels.begin(), labels.end());
        labels.erase(std::unique(labels.begin(), labels.end()), labels.end());

        const int np = s.np(), nq = s.nq(), npk = c.npk(), nqk = c.nqk();
        std::vector<int> pcols, qrows;  // permutation into closed-loop order
        ClosedLoopBlock b;
        for (int lab : labels) {
            int sp = lg.find(i, lab), sk = lk.find(i, lab);
            Slot out{lab, 0, 0};
            if (sp >= 0) {
                int o = lg.p_at(i, sp) - lg.p_off[i];
                for (int t = 0; t < s.slots[sp].dim_p; ++t) {
                    pcols.push_back(o + t);
                    map_p[lg.p_off[i] + o + t] = gp++;
                }
                o = lg.q_at(i, sp) - lg.q_off[i];
                for (int t = 0; t < s.slots[sp].dim_q; ++t) {
                    qrows.push_back(o + t);
                    map_q[lg.q_off[i] + o + t] = gq++;
                }
                out.dim_p += s.slots[sp].dim_p;
                out.dim_q += s.slots[sp].dim_q;
            }
            if (sk >= 0) {
                int o = lk.p_at(i, sk) - lk.p_off[i];
                for (int t = 0; t < c.slots[sk].dim_p; ++t) {
                    pcols.push_back(np + o + t);
                    map_pk[lk.p_off[i] + o + t] = gp++;
                }
                o = lk.q_at(i, sk) - lk.q_off[i];
                for (int t = 0; t < c.slots[sk].dim_q; ++t) {
                    qrows.push_back(nq + o + t);
                    map_qk[lk.q_off[i] + o + t] = gq++;
                }
                out.dim_p += c.slots[sk].dim_p;
                out.dim_q += c.slots[sk].dim_q;
            }
            b.slots.push_back(out);
        }

        const Mat& DK = c.DK;
        b.A = block2(s.A + s.Bu * DK * s.Cy, s.Bu * c.CK, c.BK * s.Cy, c.AK);
        b.B1 = vcat({s.Bw + s.Bu * DK * s.Dyw, c.BK * s.Dyw}, s.nw());
        b.C1 = hcat({s.Cz + s.Dzu * DK * s.Cy, s.Dzu * c.CK}, s.nz());
        b.D11 = s.Dzw + s.Dzu * DK * s.Dyw;
        Mat B2u = block2(s.Bp + s.Bu * DK * s.Dyp, s.Bu * c.CKp, c.BK * s.Dyp, c.BKp);
        Mat D12u = hcat({s.Dzp + s.Dzu * DK * s.Dyp, s.Dzu * c.CKp}, s.nz());
        Mat C2u = block2(s.Cq, Mat::Zero(nq, c.nxk()), c.DKq * s.Cy, c.CKq);
        Mat D21u = vcat({s.Dqw, c.DKq * s.Dyw}, s.nw());
        Mat D22u = block2(Mat::Zero(nq, np), Mat::Zero(nq, npk), c.DKq * s.Dyp, Mat::Zero(nqk, npk));

        const int nxc = b.nx();
        b.B2.resize(nxc, pcols.size());
        b.D12.resize(s.nz(), pcols.size());
        for (std::size_t t = 0; t < pcols.size(); ++t) {
            b.B2.col(t) = B2u.col(pcols[t]);
            b.D12.col(t) = D12u.col(pcols[t]);
        }
        b.C2.resize(qrows.size(), nxc);
        b.D21.resize(qrows.size(), s.nw());
        Mat D22r(qrows.size(), np + npk);
        for (std::size_t t = 0; t < qrows.size(); ++t) {
            b.C2.row(t) = C2u.row(qrows[t]);
            b.D21.row(t) = D21u.row(qrows[t]);
            D22r.row(t) = D22u.row(qrows[t]);
        }
        b.D22.resize(qrows.size(), pcols.size());
        for (std::size_t t = 0; t < pcols.size(); ++t) b.D22.col(t) = D22r.col(pcols[t]);
        cl.subs.push_back(std::move(b));
    }

    std::vector<Eigen::Triplet<double>> trips;
    for (int col = 0; col < g.P.outerSize(); ++col)
        for (SpMat::InnerIterator it(g.P, col); it; ++it) trips.emplace_back(map_p[it.row()], map_q[it.col()], it.value());
    for (int col = 0; col < k.P.outerSize(); ++col)
        for (SpMat::InnerIterator it(k.P, col); it; ++it)
            trips.emplace_back(map_pk[it.row()], map_qk[it.col()], it.value());
    cl.P.resize(gp, gq);
    cl.P.setFromTriplets(trips.begin(), trips.end());
    return cl;
}

StateSpace flatten(const ClosedLoopSS& clp) {
    std::vector<Mat> A, B1, B2, C1, C2, D11, D12, D21, D22;
    for (const auto& b : clp.subs) {
        A.push_back(b.A);
        B1.push_back(b.B1);
        B2.push_back(b.B2);
        C1.push_back(b.C1);
        C2.push_back(b.C2);
        D11.push_back(b.D11);
        D12.push_back(b.D12);
        D21.push_back(b.D21);
        D22.push_back(b.D22);
    }
    Mat Ac = blkdiag(A), B1c = blkdiag(B1), B2c = blkdiag(B2), C1c = blkdiag(C1), C2c = blkdiag(C2);
    Mat D11c = blkdiag(D11), D12c = blkdiag(D12), D21c = blkdiag(D21), D22c = blkdiag(D22);
    Mat P = Mat(clp.P);
    if (P.rows() != B2c.cols() || P.cols() != C2c.rows()) throw InvalidArgument("interconnection size mismatch");
    const int np = static_cast<int>(P.rows());
    Mat loop = Mat::Identity(np, np) - P * D22c;
    Eigen::FullPivLU<Mat> lu(loop);
    if (np > 0 && !lu.isInvertible()) throw NumericalFailure("singular interconnection loop I - P D22");
    Mat L = np > 0 ? Mat(lu.solve(P)) : Mat(P);
    StateSpace ss;
    ss.A = Ac + B2c * L * C2c;
    ss.B = B1c + B2c * L * D21c;
    ss.C = C1c + D12c * L * C2c;
    ss.D = D11c + D12c * L * D21c;
    return ss;
}

ClosedLoopSS adjoint(const ClosedLoopSS& clp) {
    ClosedLoopSS a;
    for (const auto& b : clp.subs) {
        ClosedLoopBlock t;
        t.A = b.A.transpose();
        t.B1 = b.C1.transpose();
        t.B2 = b.C2.transpose();
        t.C1 = b.B1.transpose();
        t.C2 = b.B2.transpose();
        t.D11 = b.D11.transpose();
        t.D12 = b.D21.transpose();
        t.D21 = b.D12.transpose();
        t.D22 = b.D22.transpose();
        for (const auto& s : b.slots) t.slots.push_back({s.label, s.dim_q, s.dim_p});
        a.subs.push_back(std::move(t));
    }
    a.P = clp.P.transpose();
    return a;
}

// ==== Performance augmentation ====

PerformanceAugmentation make_augmentation(const Mat& S, const Mat& T, const Mat& MQ, const Mat& MR) {
    if (S.rows() < S.cols() || numerical_rank(S) != S.cols()) throw InvalidArgument("S must have full column rank");
    if (T.rows() < T.cols() || numerical_rank(T) != T.cols()) throw InvalidArgument("T must have full column rank");
    expect_dims(MQ, S.rows(), S.rows(), "M_Q");
    expect_dims(MR, T.rows(), T.rows(), "M_R");
    if ((MQ - MQ.transpose()).norm() > 1e-12 * (1.0 + MQ.norm())) throw InvalidArgument("M_Q not symmetric");
    if ((MR - MR.transpose()).norm() > 1e-12 * (1.0 + MR.norm())) throw InvalidArgument("M_R not symmetric");

    PerformanceAugmentation a;
    a.S = S;
    a.T = T;
    a.MQ = MQ;
    a.MR = MR;
    const Mat Sp = pinv(S), Tp = pinv(T);
    if ((S.transpose() * MQ * S).norm() > 1e-9 * (1.0 + MQ.norm() * S.squaredNorm()))
        throw InvalidArgument("S' M_Q S != 0");
    if ((Tp * MR * Tp.transpose()).norm() > 1e-9 * (1.0 + MR.norm() * Tp.squaredNorm()))
        throw InvalidArgument("T+ M_R T+' != 0");
    a.Qbar = sym(Sp.transpose() * Sp + MQ);
    a.Rbar = sym(T * T.transpose() + MR);
    if (min_eig_sym(a.Qbar) <= 1e-12 * (1.0 + a.Qbar.norm())) throw InvalidArgument("Q-bar is not positive definite");
    if (min_eig_sym(a.Rbar) <= 1e-12 * (1.0 + a.Rbar.norm())) throw InvalidArgument("R-bar is not positive definite");
    a.Tl = sqrtm_psd(a.Qbar) * S;
    a.Tr = inv_sqrtm_pd(a.Rbar) * T;
    a.tl_residual = (a.Tl.transpose() * a.Tl - Mat::Identity(S.cols(), S.cols())).norm();
    a.tr_residual = (a.Tr.transpose() * a.Tr - Mat::Identity(T.cols(), T.cols())).norm();
    // The input map actually applied is T+ R^{1/2}; it must have orthonormal rows as well.
    Mat win = Tp * sqrtm_psd(a.Rbar);
    double win_res = (win * win.transpose() - Mat::Identity(T.cols(), T.cols())).norm();
    if (a.tl_residual > 1e-9 || a.tr_residual > 1e-9 || win_res > 1e-9)
        throw InvalidArgument(fmt::format("semi-orthogonality violated (Tl {:.2e}, Tr {:.2e}, input map {:.2e})",
                                          a.tl_residual, a.tr_residual, win_res));
    return a;
}

PerformanceAugmentation default_augmentation(int n_subsystems, int n_zbar, int n_wbar) {
    const double s = 1.0 / std::sqrt(static_cast<double>(n_subsystems));
    Mat S(n_zbar * n_subsystems, n_zbar), T(n_wbar * n_subsystems, n_wbar);
    for (int i = 0; i < n_subsystems; ++i) {
        S.middleRows(i * n_zbar, n_zbar) = s * Mat::Identity(n_zbar, n_zbar);
        T.middleRows(i * n_wbar, n_wbar) = s * Mat::Identity(n_wbar, n_wbar);
    }
    Mat MQ = Mat::Identity(S.rows(), S.rows()) - S * S.transpose();
    Mat MR = Mat::Identity(T.rows(), T.rows()) - T * T.transpose();
    return make_augmentation(S, T, MQ, MR);
}

GlobalPlant apply_augmentation(const GlobalPlant& g, const PerformanceAugmentation& a) {
    if (a.S.cols() != g.Cz.rows()) throw InvalidArgument("S does not match the global performance output");
    if (a.T.cols() != g.Bw.cols()) throw InvalidArgument("T does not match the global performance input");
    GlobalPlant out = g;
    const Mat win = pinv(a.T) * sqrtm_psd(a.Rbar);
    out.Cz = a.Tl * g.Cz;
    out.Dzu = a.Tl * g.Dzu;
    out.Bw = g.Bw * win;
    out.Dyw = g.Dyw * win;
    out.Dzw = a.Tl * g.Dzw * win;
    return out;
}

InterconnectedSystem localize(const GlobalPlant& g) {
    const int n = g.topo.n_nodes();
    auto offs = [](const std::vector<int>& d) {
        std::vector<int> o(d.size() + 1, 0);
        std::partial_sum(d.begin(), d.end(), o.begin() + 1);
        return o;
    };
    if (static_cast<int>(g.nx.size()) != n || static_cast<int>(g.nu.size()) != n ||
        static_cast<int>(g.ny.size()) != n || static_cast<int>(g.nz.size()) != n ||
        static_cast<int>(g.nw.size()) != n)
        throw InvalidArgument("dimension lists must have one entry per subsystem");
    const auto ox = offs(g.nx), ou = offs(g.nu), oy = offs(g.ny), oz = offs(g.nz), ow = offs(g.nw);
    expect_dims(g.A, ox[n], ox[n], "A");
    expect_dims(g.Bu, ox[n], ou[n], "Bu");
    expect_dims(g.Cy, oy[n], ox[n], "Cy");
    expect_dims(g.Bw, ox[n], ow[n], "Bw");
    expect_dims(g.Dyw, oy[n], ow[n], "Dyw");
    expect_dims(g.Cz, oz[n], ox[n], "Cz");
    expect_dims(g.Dzu, oz[n], ou[n], "Dzu");
    expect_dims(g.Dzw, oz[n], ow[n], "Dzw");

    auto blk = [](const Mat& m, const std::vector<int>& ro, const std::vector<int>& co, int i, int k) {
        return Mat(m.block(ro[i], co[k], ro[i + 1] - ro[i], co[k + 1] - co[k]));
    };
    auto nonzero = [](const Mat& b, const Mat& whole) { return b.size() && b.cwiseAbs().maxCoeff() > entry_tol(whole); };

    std::vector<LocalBlocks> locals(n);
    std::map<Edge, CouplingBlocks> couplings;
    for (int i = 0; i < n; ++i) {
        LocalBlocks& L = locals[i];
        L.A = blk(g.A, ox, ox, i, i);
        L.Bu = blk(g.Bu, ox, ou, i, i);
        L.Bw = blk(g.Bw, ox, ow, i, i);
        L.Cy = blk(g.Cy, oy, ox, i, i);
        L.Cz = blk(g.Cz, oz, ox, i, i);
        L.Dyw = blk(g.Dyw, oy, ow, i, i);
        L.Dzu = blk(g.Dzu, oz, ou, i, i);
        L.Dzw = blk(g.Dzw, oz, ow, i, i);
        for (int k = 0; k < n; ++k) {
            if (k == i) continue;
            if (nonzero(blk(g.Bu, ox, ou, i, k), g.Bu)) throw InvalidArgument("B_u must be block diagonal");
            if (nonzero(blk(g.Dzu, oz, ou, i, k), g.Dzu))
                throw InvalidArgument(fmt::format("performance output {} depends on input of subsystem {}", i + 1, k + 1));
            CouplingBlocks c;
            c.A = blk(g.A, ox, ox, i, k);
            c.Bw = blk(g.Bw, ox, ow, i, k);
            c.Cz = blk(g.Cz, oz, ox, i, k);
            c.Dzw = blk(g.Dzw, oz, ow, i, k);
            c.Cy = blk(g.Cy, oy, ox, i, k);
            c.Dyw = blk(g.Dyw, oy, ow, i, k);
            bool any = nonzero(c.A, g.A) || nonzero(c.Bw, g.Bw) || nonzero(c.Cz, g.Cz) || nonzero(c.Dzw, g.Dzw) ||
                       nonzero(c.Cy, g.Cy) || nonzero(c.Dyw, g.Dyw);
            if (!any) continue;
            if (!g.topo.has_edge(i + 1, k + 1))
                throw InvalidArgument(fmt::format("coupling from {} to {} outside the plant graph", k + 1, i + 1));
            couplings[{i + 1, k + 1}] = c;
        }
    }
    return realize_edge_form(g.topo, locals, couplings);
}

std::pair<InterconnectedSystem, PerformanceAugmentation> augment_performance(const GlobalPlant& g, const Mat& S,
                                                                             const Mat& T, const Mat& MQ,
                                                                             const Mat& MR) {
    PerformanceAugmentation a = make_augmentation(S, T, MQ, MR);
    return {localize(apply_augmentation(g, a)), a};
}

}  // namespace netsyn
