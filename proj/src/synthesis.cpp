#include "netsyn/synthesis.hpp"

#include <chrono>
#include <cmath>

#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "netsyn/errors.hpp"

namespace netsyn {

ProgramStats program_stats(const ConicProgram& p) {
    ProgramStats s;
    s.nominal_lmis = p.count("nominal");
    s.multiplier_lmis = p.count("multiplier");
    s.nominal_sizes = p.sizes("nominal");
    s.multiplier_sizes = p.sizes("multiplier");
    s.n_vars = p.n_vars();
    return s;
}

// ==== State-feedback scope ====

void check_state_feedback_scope(const InterconnectedSystem& g) {
    for (int i = 0; i < g.n(); ++i) {
        const SubsystemSS& s = g.subs[i];
        const bool cy = s.Cy.rows() == s.nx() && s.Cy.isApprox(Mat::Identity(s.nx(), s.nx()), 0.0);
        const bool dyw = s.Dyw.size() == 0 || s.Dyw.cwiseAbs().maxCoeff() == 0.0;
        const bool dyp = s.Dyp.size() == 0 || s.Dyp.cwiseAbs().maxCoeff() == 0.0;
        if (!cy || !dyw || !dyp)
            throw InvalidArgument(
                fmt::format("subsystem {}: state feedback needs C_y = I, D_yw = 0 and D_yp = 0", i + 1));
    }
}

// ==== Program assembly ====

SfTemplate make_sf_template(const InterconnectedSystem& g, const DistributedController& k0) {
    check_state_feedback_scope(g);
    for (const auto& c : k0.subs)
        if (c.nxk() != 0 || c.DK.cwiseAbs().sum() != 0.0 || c.DKq.cwiseAbs().sum() != 0.0)
            throw InvalidArgument("template controller must be static with zero gains");
    const ClosedLoopSS cl = close_loop(g, k0);
    const ChannelLayout lc = cl.layout(), lg = g.layout(), lk = k0.layout();
    SfTemplate t;
    t.adj = adjoint(cl);
    t.gain_slots.resize(g.n());
    for (int i = 0; i < g.n(); ++i) {
        t.Bu.push_back(g.subs[i].Bu);
        t.Dzu.push_back(g.subs[i].Dzu);
        for (int s = 0; s < static_cast<int>(lc.slots[i].size()); ++s) {
            const int label = lc.slots[i][s].label;
            const int sp = lg.find(i, label), sk = lk.find(i, label);
            const int plant_q = sp >= 0 ? lg.slots[i][sp].dim_q : 0;
            const int ctrl_q = sk >= 0 ? lk.slots[i][sk].dim_q : 0;
            if (ctrl_q == 0) continue;
            t.gain_slots[i].push_back({s, label, lc.q_at(i, s) - lc.q_off[i] + plant_q, ctrl_q});
        }
    }
    return t;
}

SfTemplate make_sf_template(const InterconnectedSystem& g, const Topology& topo_k) {
    if (topo_k.n_nodes() != g.n()) throw InvalidArgument("controller graph size differs from the plant");
    StaticGains zero;
    std::vector<int> ny, nu;
    for (const auto& s : g.subs) {
        zero.local.push_back(Mat::Zero(s.nu(), s.ny()));
        ny.push_back(s.ny());
        nu.push_back(s.nu());
    }
    return make_sf_template(g, static_controller_sender_side(topo_k, zero, ny, nu));
}

SfSharing independent_sharing(const SfTemplate& t) {
    SfSharing sh;
    int key = 0;
    for (int i = 0; i < t.adj.n(); ++i) {
        sh.group.push_back(i);
        sh.key.emplace_back();
        for (std::size_t s = 0; s < t.gain_slots[i].size(); ++s) sh.key[i].push_back(key++);
    }
    return sh;
}

SfVariables create_sf_variables(ConicProgram& p, const SfTemplate& t, const SfSharing& sh, double eps) {
    const int n = t.adj.n();
    if (static_cast<int>(sh.group.size()) != n || static_cast<int>(sh.key.size()) != n)
        throw InvalidArgument("sharing must list every subsystem");
    int ng = 0, nk = 0;
    for (int i = 0; i < n; ++i) {
        ng = std::max(ng, sh.group[i] + 1);
        if (sh.key[i].size() != t.gain_slots[i].size()) throw InvalidArgument("sharing must key every gain slot");
        for (int k : sh.key[i]) nk = std::max(nk, k + 1);
    }
    // representative dimensions, checked for consistency
    std::vector<int> gx(ng, -1), gu(ng, -1), kd(nk, -1);
    SfVariables v;
    v.key_group.assign(nk, -1);
    for (int i = 0; i < n; ++i) {
        const int g = sh.group[i], nx = t.adj.subs[i].nx(), nu = static_cast<int>(t.Bu[i].cols());
        if ((gx[g] >= 0 && gx[g] != nx) || (gu[g] >= 0 && gu[g] != nu))
            throw InvalidArgument("subsystems sharing a Lyapunov block need equal dimensions");
        gx[g] = nx;
        gu[g] = nu;
        for (std::size_t s = 0; s < t.gain_slots[i].size(); ++s) {
            const int k = sh.key[i][s], d = t.gain_slots[i][s].dim;
            if ((kd[k] >= 0 && kd[k] != d) || (v.key_group[k] >= 0 && v.key_group[k] != g))
                throw InvalidArgument("a shared edge gain needs one owning group and one dimension");
            kd[k] = d;
            v.key_group[k] = g;
        }
    }
    for (int g = 0; g < ng; ++g) {
        if (gx[g] < 0) throw InvalidArgument("empty sharing group");
        v.X.push_back(p.add_sym(gx[g]));
        p.add_lmi("lyapunov", v.X.back().expr, eps);
        v.W.push_back(p.add_mat(gu[g], gx[g]));
    }
    for (int k = 0; k < nk; ++k) {
        if (kd[k] < 0) throw InvalidArgument("unused edge-gain key");
        v.Z.push_back(p.add_mat(kd[k], gx[v.key_group[k]]));
    }
    return v;
}

NominalTerms sf_nominal_terms_at(const SfTemplate& t, int i, const AffExpr& X, const AffExpr& W,
                                 const std::vector<AffExpr>& Z) {
    const ClosedLoopBlock& b = t.adj.subs[i];
    if (Z.size() != t.gain_slots[i].size()) throw InvalidArgument("one edge-gain variable per gain slot required");
    const AffExpr Wt = W.transpose();
    NominalTerms nt;
    nt.XA = X * b.A + Wt * Mat(t.Bu[i].transpose());
    nt.XB1 = X * b.B1 + Wt * Mat(t.Dzu[i].transpose());
    nt.XB2 = X * b.B2;
    for (std::size_t s = 0; s < t.gain_slots[i].size(); ++s) {
        const auto& gs = t.gain_slots[i][s];
        Mat place = Mat::Zero(gs.dim, b.np());
        place.block(0, gs.col, gs.dim, gs.dim).setIdentity();
        nt.XB2 += Z[s].transpose() * place;
    }
    nt.C1 = b.C1;
    nt.D11 = b.D11;
    nt.D12 = b.D12;
    nt.C2 = b.C2;
    nt.D21 = b.D21;
    nt.D22 = b.D22;
    return nt;
}

std::vector<NominalTerms> sf_nominal_terms(const SfTemplate& t, const SfSharing& sh, const SfVariables& v) {
    std::vector<NominalTerms> out;
    for (int i = 0; i < t.adj.n(); ++i) {
        std::vector<AffExpr> z;
        for (int k : sh.key[i]) z.push_back(v.Z[k].expr);
        out.push_back(sf_nominal_terms_at(t, i, v.X[sh.group[i]].expr, v.W[sh.group[i]].expr, z));
    }
    return out;
}

SfProgram build_sf_program(const SfTemplate& t, const SfSharing& sh, MultiplierStructure s, bool decomposed,
                           double eps, bool tau_form) {
    SfProgram sp;
    sp.templ = t;
    sp.sharing = sh;
    sp.tau_form = tau_form;
    sp.level = sp.prog.add_scalar();
    sp.prog.add_objective(sp.level, tau_form ? -1.0 : 1.0);
    sp.vars = create_sf_variables(sp.prog, t, sh, eps);
    const auto nom = sf_nominal_terms(t, sh, sp.vars);
    sp.mult = create_multipliers(sp.prog, t.adj.layout(), s);
    add_fbsp_conditions(sp.prog, nom, sp.mult, t.adj.P, tau_form ? tau_scaling(sp.level) : gamma_scaling(sp.level),
                        decomposed, eps);
    return sp;
}

SfGains extract_sf_gains(const SfVariables& v, const Vec& y) {
    SfGains k;
    std::vector<Eigen::LDLT<Mat>> xf;
    for (std::size_t g = 0; g < v.X.size(); ++g) {
        xf.emplace_back(ConicProgram::get_value(v.X[g], y));
        const Mat W = ConicProgram::get_value(v.W[g], y);
        k.K.push_back(xf[g].solve(Mat(W.transpose())).transpose());
    }
    for (std::size_t j = 0; j < v.Z.size(); ++j) {
        const Mat Z = ConicProgram::get_value(v.Z[j], y);
        k.F.push_back(xf[v.key_group[j]].solve(Mat(Z.transpose())).transpose());
    }
    return k;
}

StaticGains edge_form_gains(const SfTemplate& t, const SfSharing& sh, const SfGains& k) {
    StaticGains out;
    for (int i = 0; i < t.adj.n(); ++i) {
        out.local.push_back(k.K[sh.group[i]]);
        for (std::size_t s = 0; s < t.gain_slots[i].size(); ++s)
            out.edge[{t.gain_slots[i][s].label, i + 1}] = k.F[sh.key[i][s]];
    }
    return out;
}

ClosedLoopSS close_with_gains(const InterconnectedSystem& g, const Topology& topo_k, const StaticGains& k) {
    std::vector<int> ny, nu;
    for (const auto& s : g.subs) {
        ny.push_back(s.ny());
        nu.push_back(s.nu());
    }
    return close_loop(g, static_controller_sender_side(topo_k, k, ny, nu));
}

// ==== Certification ====

void certify(SynthesisResult& r, const ClosedLoopSS& clp, MultiplierStructure s, bool decomposed,
             const Certificate& c, double eps, const SolverOptions& solver) {
    const ClosedLoopSS adj = adjoint(clp);
    if (static_cast<int>(c.X.size()) != adj.n()) throw InvalidArgument("certificate needs one X per subsystem");
    // Decomposed certificates are also checked on the undecomposed assembly they imply.
    r.worst_violation = 0.0;
    for (bool dec : {decomposed, false}) {
        AnalysisProgram ap = build_analysis_program(adj, s, dec, eps, c.tau_form);
        Vec point = Vec::Zero(ap.prog.n_vars());
        point(ap.level) = c.level;
        for (int i = 0; i < adj.n(); ++i) ConicProgram::set_value(ap.X[i], c.X[i], point);
        assign_multipliers(ap.mult, c.multipliers, point);
        // Gains come from W X^{-1}, so the re-check is relative to the certificate's magnitude.
        const double scale = std::max(1.0, point.cwiseAbs().maxCoeff());
        const FeasibilityReport rep = check_feasible(ap.prog, point, 10.0 * solver.tol * scale);
        r.worst_violation = std::max(r.worst_violation, rep.worst_violation);
        if (!rep.feasible)
            throw ConsistencyError(fmt::format("{}: synthesized certificate violates '{}'{} by {:.3e}", r.method,
                                               rep.worst_label, dec ? " (decomposed)" : "", rep.worst_violation));
        if (!dec) break;
    }

    // gamma scaling of the certificate
    const double gamma = c.tau_form ? 1.0 / c.level : c.level;
    const double to_gamma = c.tau_form ? gamma : 1.0;
    r.gamma = gamma;
    r.X.clear();
    for (const auto& x : c.X) r.X.push_back(to_gamma * x);
    r.multipliers = c.multipliers;
    for (auto& m : r.multipliers.values) m *= to_gamma;

    r.hinf = hinf_norm(flatten(clp));
    if (!(r.hinf <= gamma * (1.0 + 1e-6)))
        throw ConsistencyError(
            fmt::format("{}: closed-loop H-infinity norm {:.9g} exceeds the bound {:.9g}", r.method, r.hinf, gamma));

    AnalysisOptions ao;
    ao.structure = s;
    ao.decomposed = decomposed;
    ao.eps = eps;
    ao.solver = solver;
    try {
        r.certified_gamma = fbsp_analysis(adj, ao).gamma;
    } catch (const NumericalFailure& e) {
        // the synthesized certificate already passed; keep its level
        r.certified_gamma = gamma;
        r.diagnostic = fmt::format("re-analysis did not converge ({}); synthesized certificate kept", e.what());
        spdlog::warn("{}: {}", r.method, r.diagnostic);
    }
}

// ==== Central synthesis ====

void require_optimal(const ConicSolution& sol, const std::string& method) {
    if (sol.status == SolveStatus::Infeasible) throw Infeasible(method + ": " + sol.diagnostic);
    if (sol.status != SolveStatus::Optimal) throw NumericalFailure(method + ": " + sol.diagnostic);
}

SynthesisResult synthesize_edge_form(const InterconnectedSystem& g, const Topology& topo_k,
                                     const SynthesisOptions& opt, const std::string& method) {
    const auto t0 = std::chrono::steady_clock::now();
    const SfTemplate t = make_sf_template(g, topo_k);
    const SfSharing sh = independent_sharing(t);
    SfProgram sp = build_sf_program(t, sh, opt.structure, opt.decomposed, opt.eps);
    const ConicSolution sol = solve(sp.prog, opt.solver);
    require_optimal(sol, method);

    SynthesisResult r;
    r.method = method;
    r.topo_k = topo_k;
    r.stats = program_stats(sp.prog);
    r.stats.iterations = sol.iterations;
    r.gains = edge_form_gains(t, sh, extract_sf_gains(sp.vars, sol.y));

    Certificate c;
    c.level = sol.y(sp.level);
    for (int i = 0; i < g.n(); ++i) c.X.push_back(ConicProgram::get_value(sp.vars.X[sh.group[i]], sol.y));
    c.multipliers = extract_multipliers(sp.mult, sol.y);
    certify(r, close_with_gains(g, topo_k, r.gains), opt.structure, opt.decomposed, c, opt.eps, opt.solver);
    if (!sol.diagnostic.empty()) r.diagnostic = sol.diagnostic;
    r.stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

SynthesisResult hinf_state_feedback_central(const InterconnectedSystem& g, const Topology& topo_k,
                                            const SynthesisOptions& opt) {
    if (opt.decomposed) throw InvalidArgument("central synthesis assembles the undecomposed conditions");
    return synthesize_edge_form(g, topo_k, opt, "central");
}

}  // namespace netsyn
