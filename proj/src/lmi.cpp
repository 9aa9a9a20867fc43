#include "netsyn/lmi.hpp"

#include <map>

#include <fmt/core.h>

#include "netsyn/errors.hpp"

namespace netsyn {

// ==== Multiplier structures ====

const char* to_string(MultiplierStructure s) {
    switch (s) {
        case MultiplierStructure::FullPerEdge: return "full-per-edge";
        case MultiplierStructure::IdenticalAcrossEdges: return "identical-across-edges";
        case MultiplierStructure::PerClass: return "per-class";
        case MultiplierStructure::PerSubsystem: return "per-subsystem";
        case MultiplierStructure::Full: return "full";
        case MultiplierStructure::Diagonal: return "diagonal";
    }
    return "?";
}

MultiplierStructure multiplier_structure_from_string(const std::string& s) {
    for (auto m : {MultiplierStructure::FullPerEdge, MultiplierStructure::IdenticalAcrossEdges,
                   MultiplierStructure::PerClass, MultiplierStructure::PerSubsystem, MultiplierStructure::Full,
                   MultiplierStructure::Diagonal})
        if (s == to_string(m)) return m;
    throw InvalidArgument(fmt::format("unknown multiplier structure '{}'", s));
}

bool is_per_slot(MultiplierStructure s) {
    return s == MultiplierStructure::FullPerEdge || s == MultiplierStructure::IdenticalAcrossEdges ||
           s == MultiplierStructure::PerClass || s == MultiplierStructure::Diagonal;
}

bool MultiplierVars::per_slot() const { return is_per_slot(structure); }

AffExpr blkdiag_expr(const std::vector<AffExpr>& blocks) {
    std::vector<Eigen::Index> r, c;
    for (const auto& b : blocks) {
        r.push_back(b.rows());
        c.push_back(b.cols());
    }
    BlockExpr be(r, c);
    for (int i = 0; i < static_cast<int>(blocks.size()); ++i) be.add(i, i, blocks[i]);
    return be.build();
}

namespace {

struct KeyDims {
    int dp = 0, dq = 0;
};

void merge_dim(int& slot, int d, const char* what) {
    if (d == 0) return;
    if (slot != 0 && slot != d)
        throw InvalidArgument(fmt::format("shared multiplier needs equal {} dimensions ({} vs {})", what, slot, d));
    slot = d;
}

}  // namespace

MultiplierVars create_multipliers(ConicProgram& p, const ChannelLayout& layout, MultiplierStructure s) {
    MultiplierVars mv;
    mv.structure = s;
    mv.layout = layout;
    const int n = static_cast<int>(layout.slots.size());
    auto new_sym = [&](int d) {
        VarHandle h = p.add_sym(d);
        mv.handles.push_back(h);
        return h.expr;
    };
    auto new_mat = [&](int r, int c) {
        VarHandle h = p.add_mat(r, c);
        mv.handles.push_back(h);
        return h.expr;
    };
    auto new_diag = [&](int d) {
        VarHandle h = p.add_mat(d, 1);
        mv.handles.push_back(h);
        AffExpr e(d, d);
        for (int j = 0; j < d; ++j) {
            SpMat c(d, d);
            c.insert(j, j) = 1.0;
            e.add_term(h.idx[j], c);
        }
        return e;
    };

    if (s == MultiplierStructure::Full) {
        mv.global = {new_sym(layout.n_p()), new_mat(layout.n_p(), layout.n_q()), new_sym(layout.n_q())};
        return mv;
    }
    if (s == MultiplierStructure::PerSubsystem) {
        for (int i = 0; i < n; ++i) {
            int np = layout.p_off[i + 1] - layout.p_off[i], nq = layout.q_off[i + 1] - layout.q_off[i];
            mv.subsystem.push_back({new_sym(np), new_mat(np, nq), new_sym(nq)});
        }
    } else {
        auto key = [&](int i, int si) -> long {
            switch (s) {
                case MultiplierStructure::IdenticalAcrossEdges: return 0;
                case MultiplierStructure::PerClass: return layout.slots[i][si].label;
                default: return 1000000L * i + si;
            }
        };
        std::map<long, KeyDims> dims;
        for (int i = 0; i < n; ++i)
            for (int si = 0; si < static_cast<int>(layout.slots[i].size()); ++si) {
                auto& d = dims[key(i, si)];
                merge_dim(d.dp, layout.slots[i][si].dim_p, "p");
                merge_dim(d.dq, layout.slots[i][si].dim_q, "q");
            }
        std::map<long, MultiplierBlock> shared;
        mv.slot.resize(n);
        for (int i = 0; i < n; ++i) {
            std::vector<AffExpr> qs, ss, rs;
            for (int si = 0; si < static_cast<int>(layout.slots[i].size()); ++si) {
                const long kk = key(i, si);
                if (!shared.count(kk)) {
                    const KeyDims d = dims[kk];
                    MultiplierBlock b;
                    if (s == MultiplierStructure::Diagonal) {
                        b = {new_diag(d.dp), AffExpr(d.dp, d.dq), new_diag(d.dq)};
                    } else {
                        AffExpr q = new_sym(d.dp);
                        AffExpr sm = d.dp > 0 && d.dq > 0 ? new_mat(d.dp, d.dq) : AffExpr(d.dp, d.dq);
                        b = {q, sm, new_sym(d.dq)};
                    }
                    shared.emplace(kk, std::move(b));
                }
                const MultiplierBlock& b = shared.at(kk);
                const int dp = layout.slots[i][si].dim_p, dq = layout.slots[i][si].dim_q;
                MultiplierBlock use{dp > 0 ? b.Q : AffExpr(0, 0), dp > 0 && dq > 0 ? b.S : AffExpr(dp, dq),
                                    dq > 0 ? b.R : AffExpr(0, 0)};
                qs.push_back(use.Q);
                ss.push_back(use.S);
                rs.push_back(use.R);
                mv.slot[i].push_back(std::move(use));
            }
            mv.subsystem.push_back({blkdiag_expr(qs), blkdiag_expr(ss), blkdiag_expr(rs)});
        }
    }
    std::vector<AffExpr> qs, ss, rs;
    for (const auto& b : mv.subsystem) {
        qs.push_back(b.Q);
        ss.push_back(b.S);
        rs.push_back(b.R);
    }
    mv.global = {blkdiag_expr(qs), blkdiag_expr(ss), blkdiag_expr(rs)};
    return mv;
}

MultiplierValues extract_multipliers(const MultiplierVars& m, const Vec& y) {
    MultiplierValues v;
    v.structure = m.structure;
    for (const auto& h : m.handles) v.values.push_back(ConicProgram::get_value(h, y));
    return v;
}

void assign_multipliers(const MultiplierVars& m, const MultiplierValues& v, Vec& point) {
    if (v.structure != m.structure || v.values.size() != m.handles.size())
        throw InvalidArgument("multiplier values do not match the program layout");
    for (std::size_t j = 0; j < m.handles.size(); ++j) ConicProgram::set_value(m.handles[j], v.values[j], point);
}

// ==== Condition matrices ====

PerfScaling gamma_scaling(int gamma_var) {
    SpMat one(1, 1);
    one.insert(0, 0) = 1.0;
    return {AffExpr::variable_term(1, 1, gamma_var, one), AffExpr::constant(Mat::Ones(1, 1))};
}

PerfScaling tau_scaling(int tau_var) {
    SpMat one(1, 1);
    one.insert(0, 0) = 1.0;
    return {AffExpr::constant(Mat::Ones(1, 1)), AffExpr::variable_term(1, 1, tau_var, one)};
}

AffExpr nominal_matrix(const NominalTerms& t, const MultiplierBlock& m, const PerfScaling& sc) {
    const Eigen::Index nx = t.XA.rows(), nw = t.D11.cols(), np = t.D12.cols(), nz = t.C1.rows(), nq = t.C2.rows();
    if (t.XB1.cols() != nw || t.XB2.cols() != np || t.C1.cols() != nx || t.C2.cols() != nx || t.D21.cols() != nw ||
        t.D22.cols() != np || t.D22.rows() != nq || m.Q.rows() != np || m.R.rows() != nq)
        throw InvalidArgument("nominal condition: inconsistent block dimensions");

    BlockExpr b({nx, nw, np, nz}, {nx, nw, np, nz});
    b.add(0, 0, herm(t.XA));
    b.add_sym(0, 1, t.XB1);
    b.add_sym(0, 2, t.XB2);
    b.add_sym(0, 3, scalar_times(sc.s, t.C1.transpose()));
    b.add(1, 1, -scalar_times(sc.g, Mat::Identity(nw, nw)));
    b.add_sym(1, 3, scalar_times(sc.s, t.D11.transpose()));
    b.add_sym(2, 3, scalar_times(sc.s, t.D12.transpose()));
    b.add(3, 3, -scalar_times(sc.g, Mat::Identity(nz, nz)));

    // G' Pi G with G = [0 0 I; C2 D21 D22] acting on (x, w, p)
    Mat G = Mat::Zero(np + nq, nx + nw + np);
    G.block(0, nx + nw, np, np) = Mat::Identity(np, np);
    G.block(np, 0, nq, nx) = t.C2;
    G.block(np, nx, nq, nw) = t.D21;
    G.block(np, nx + nw, nq, np) = t.D22;
    BlockExpr pi({np, nq}, {np, nq});
    pi.add(0, 0, m.Q);
    pi.add_sym(0, 1, m.S);
    pi.add(1, 1, m.R);
    AffExpr gpg = Mat(G.transpose()) * pi.build() * G;
    BlockExpr e({nx + nw + np, nz}, {nx + nw + np, nz});
    e.add(0, 0, gpg);
    return b.build() + e.build();
}

AffExpr multiplier_matrix(const SpMat& P, const MultiplierBlock& m) {
    const SpMat Pt = P.transpose();
    return Pt * m.Q * P + herm(Pt * m.S) + m.R;
}

Mat edge_interconnection(const ChannelLayout& l, const SpMat& P, int i, int k) {
    const int s = l.find(i, k), t = l.find(k - 1, i + 1);
    if (s < 0 || t < 0) throw InvalidArgument(fmt::format("no slot pair for edge ({},{})", i + 1, k));
    const Slot& a = l.slots[i][s];
    const Slot& b = l.slots[k - 1][t];
    Mat out = Mat::Zero(a.dim_p + b.dim_p, a.dim_q + b.dim_q);
    if (a.dim_p > 0 && b.dim_q > 0)
        out.block(0, a.dim_q, a.dim_p, b.dim_q) = Mat(P.block(l.p_at(i, s), l.q_at(k - 1, t), a.dim_p, b.dim_q));
    if (b.dim_p > 0 && a.dim_q > 0)
        out.block(a.dim_p, 0, b.dim_p, a.dim_q) = Mat(P.block(l.p_at(k - 1, t), l.q_at(i, s), b.dim_p, a.dim_q));
    return out;
}

AffExpr edge_multiplier_matrix(const MultiplierVars& m, const SpMat& P, int i, int k) {
    if (!m.per_slot()) throw InvalidArgument("edge conditions need a per-slot multiplier structure");
    const int s = m.layout.find(i, k), t = m.layout.find(k - 1, i + 1);
    const Mat Ph = edge_interconnection(m.layout, P, i, k);
    const MultiplierBlock& a = m.slot[i][s];
    const MultiplierBlock& b = m.slot[k - 1][t];
    MultiplierBlock hat{blkdiag_expr({a.Q, b.Q}), blkdiag_expr({a.S, b.S}), blkdiag_expr({a.R, b.R})};
    return multiplier_matrix(SpMat(Ph.sparseView()), hat);
}

void add_fbsp_conditions(ConicProgram& p, const std::vector<NominalTerms>& nominal, const MultiplierVars& m,
                         const SpMat& P, const PerfScaling& sc, bool decomposed, double eps) {
    const int n = static_cast<int>(nominal.size());
    if (m.structure == MultiplierStructure::Full) {
        if (decomposed) throw InvalidArgument("an unstructured multiplier cannot be decomposed");
        std::vector<AffExpr> xa, xb1, xb2;
        std::vector<Mat> c1, d11, d12, c2, d21, d22;
        for (const auto& t : nominal) {
            xa.push_back(t.XA);
            xb1.push_back(t.XB1);
            xb2.push_back(t.XB2);
            c1.push_back(t.C1);
            d11.push_back(t.D11);
            d12.push_back(t.D12);
            c2.push_back(t.C2);
            d21.push_back(t.D21);
            d22.push_back(t.D22);
        }
        NominalTerms g{blkdiag_expr(xa), blkdiag_expr(xb1), blkdiag_expr(xb2), blkdiag(c1), blkdiag(d11),
                       blkdiag(d12),     blkdiag(c2),       blkdiag(d21),      blkdiag(d22)};
        p.add_lmi("nominal", -nominal_matrix(g, m.global, sc), eps);
        p.add_lmi("multiplier", multiplier_matrix(P, m.global), eps);
        return;
    }
    if (decomposed && !m.per_slot())
        throw InvalidArgument("decomposed conditions need a per-slot multiplier structure");
    std::vector<AffExpr> blocks;
    for (int i = 0; i < n; ++i) blocks.push_back(-nominal_matrix(nominal[i], m.subsystem[i], sc));
    if (decomposed) {
        for (const auto& b : blocks) p.add_lmi("nominal", b, eps);
        for (int i = 0; i < n; ++i)
            for (const auto& sl : m.layout.slots[i])
                p.add_lmi("multiplier", edge_multiplier_matrix(m, P, i, sl.label), eps);
    } else {
        p.add_lmi_blocks("nominal", blocks, eps);
        p.add_lmi("multiplier", multiplier_matrix(P, m.global), eps);
    }
}

}  // namespace netsyn
