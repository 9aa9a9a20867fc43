#include "netsyn/admm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <thread>

#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "netsyn/analysis.hpp"
#include "netsyn/errors.hpp"
#include "netsyn/kernels.hpp"

namespace netsyn {

namespace {

EdgeMultiplierHandles new_edge_multiplier(ConicProgram& p, int dp, int dq) {
    EdgeMultiplierHandles h;
    h.Q = p.add_sym(dp);
    if (dp > 0 && dq > 0) {
        h.S = p.add_mat(dp, dq);
    } else {
        h.S.rows = dp;
        h.S.cols = dq;
        h.S.expr = AffExpr(dp, dq);
    }
    h.R = p.add_sym(dq);
    return h;
}

MultiplierBlock block_of(const EdgeMultiplierHandles& h) { return {h.Q.expr, h.S.expr, h.R.expr}; }

void append_indices(const EdgeMultiplierHandles& h, std::vector<int>& out) {
    for (const VarHandle* v : {&h.Q, &h.S, &h.R}) out.insert(out.end(), v->idx.begin(), v->idx.end());
}

double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

std::size_t len(const Vec& v) { return static_cast<std::size_t>(v.size()); }

Vec mean(const Vec& a, const Vec& b) {
    Vec out(a.size());
    kernels::average(a.data(), b.data(), out.data(), len(a));
    return out;
}

double dist(const Vec& a, const Vec& b) { return std::sqrt(kernels::sqnorm_diff(a.data(), b.data(), len(a))); }

}  // namespace

// ==== Local variables ====

LocalProblem build_local_problem(const SfTemplate& t, int i, double eps) {
    const int n = t.adj.n();
    if (i < 0 || i >= n) throw InvalidArgument(fmt::format("agent {} out of range", i + 1));
    const ChannelLayout l = t.adj.layout();
    const ClosedLoopBlock& b = t.adj.subs[i];
    LocalProblem lp;
    ConicProgram& p = lp.prog;
    LocalVariableVector& v = lp.vars;
    v.agent = i;
    v.tau = p.add_scalar();
    v.X = p.add_sym(b.nx());
    p.add_lmi("lyapunov", v.X.expr, eps);
    v.W = p.add_mat(static_cast<int>(t.Bu[i].cols()), b.nx());
    std::vector<AffExpr> z;
    for (const auto& gs : t.gain_slots[i]) {
        v.Z.push_back(p.add_mat(gs.dim, b.nx()));
        z.push_back(v.Z.back().expr);
    }
    for (const Slot& s : l.slots[i]) {
        const int k = s.label;
        const int m = l.find(k - 1, i + 1);
        if (m < 0) throw InvalidArgument(fmt::format("slot ({},{}) has no mirror slot", i + 1, k));
        const Slot& ms = l.slots[k - 1][m];
        v.neighbors.push_back(k);
        v.own.push_back(new_edge_multiplier(p, s.dim_p, s.dim_q));
        v.copy.push_back(new_edge_multiplier(p, ms.dim_p, ms.dim_q));
    }
    v.dim = p.n_vars();

    std::vector<AffExpr> qs, ss, rs;
    for (const auto& h : v.own) {
        qs.push_back(h.Q.expr);
        ss.push_back(h.S.expr);
        rs.push_back(h.R.expr);
    }
    const MultiplierBlock mi{blkdiag_expr(qs), blkdiag_expr(ss), blkdiag_expr(rs)};
    const NominalTerms nt = sf_nominal_terms_at(t, i, v.X.expr, v.W.expr, z);
    p.add_lmi("nominal", -nominal_matrix(nt, mi, tau_scaling(v.tau)), eps);
    for (std::size_t s = 0; s < v.neighbors.size(); ++s) {
        const Mat ph = edge_interconnection(l, t.adj.P, i, v.neighbors[s]);
        const MultiplierBlock a = block_of(v.own[s]), c = block_of(v.copy[s]);
        const MultiplierBlock hat{blkdiag_expr({a.Q, c.Q}), blkdiag_expr({a.S, c.S}), blkdiag_expr({a.R, c.R})};
        p.add_lmi("multiplier", multiplier_matrix(SpMat(ph.sparseView()), hat), eps);
    }
    return lp;
}

// ==== Consensus selections ====

int ConsensusSelections::slot_of(int i, int k) const {
    const auto& nb = neighbors[i];
    auto it = std::find(nb.begin(), nb.end(), k);
    return it == nb.end() ? -1 : static_cast<int>(it - nb.begin());
}

int ConsensusSelections::consensus_dim() const {
    int d = 0;
    for (const auto& a : sel)
        for (const auto& s : a) d += static_cast<int>(s.size());
    return d;
}

Vec ConsensusSelections::select(int i, int n, const Vec& y) const {
    const auto& s = sel[i][n];
    Vec out(s.size());
    for (std::size_t j = 0; j < s.size(); ++j) out(j) = y(s[j]);
    return out;
}

void ConsensusSelections::place_add(int i, int n, const Vec& z, Vec& out) const {
    const auto& s = sel[i][n];
    if (z.size() != static_cast<Eigen::Index>(s.size())) throw InvalidArgument("consensus payload has the wrong size");
    for (std::size_t j = 0; j < s.size(); ++j) out(s[j]) += z(j);
}

ConsensusSelections make_selections(const std::vector<LocalVariableVector>& vars) {
    ConsensusSelections cs;
    const int n = static_cast<int>(vars.size());
    for (int i = 0; i < n; ++i) {
        const auto& v = vars[i];
        if (v.agent != i) throw InvalidArgument("local variables must be listed by agent");
        cs.neighbors.push_back(v.neighbors);
        cs.sel.emplace_back();
        for (std::size_t s = 0; s < v.neighbors.size(); ++s) {
            std::vector<int> idx{v.tau};
            const bool lower = i + 1 < v.neighbors[s];
            append_indices(lower ? v.own[s] : v.copy[s], idx);
            append_indices(lower ? v.copy[s] : v.own[s], idx);
            cs.sel[i].push_back(std::move(idx));
        }
    }
    for (int i = 0; i < n; ++i)
        for (std::size_t s = 0; s < cs.neighbors[i].size(); ++s) {
            const int k = cs.neighbors[i][s];
            const int m = k >= 1 && k <= n ? cs.slot_of(k - 1, i + 1) : -1;
            if (m < 0) throw InvalidArgument(fmt::format("agent {} lists {} but not vice versa", i + 1, k));
            if (cs.sel[i][s].size() != cs.sel[k - 1][m].size())
                throw InvalidArgument(fmt::format("shared sets of ({},{}) differ in size", i + 1, k));
        }
    return cs;
}

// ==== Message bus ====

MessageBus::MessageBus(int n_agents) : inbox_(n_agents) {}

void MessageBus::post(Message m) {
    m.round = round_;
    pending_.push_back(std::move(m));
    ++sent_;
}

void MessageBus::deliver(const ConsensusSelections& cs) {
    const int n = cs.n_agents();
    std::vector<std::vector<Vec>> in(n);
    std::vector<std::vector<bool>> got(n);
    for (int i = 0; i < n; ++i) {
        in[i].resize(cs.neighbors[i].size());
        got[i].assign(cs.neighbors[i].size(), false);
    }
    for (auto& m : pending_) {
        if (m.to < 0 || m.to >= n) throw InvalidArgument(fmt::format("message to unknown agent {}", m.to + 1));
        const int s = cs.slot_of(m.to, m.from + 1);
        if (s < 0) throw InvalidArgument(fmt::format("agent {} is not a neighbor of {}", m.from + 1, m.to + 1));
        if (got[m.to][s]) throw InvalidArgument(fmt::format("duplicate message {} -> {}", m.from + 1, m.to + 1));
        got[m.to][s] = true;
        in[m.to][s] = std::move(m.payload);
    }
    for (int i = 0; i < n; ++i)
        for (std::size_t s = 0; s < got[i].size(); ++s)
            if (!got[i][s])
                throw InvalidArgument(
                    fmt::format("round {}: no message from {} to {}", round_, cs.neighbors[i][s], i + 1));
    pending_.clear();
    inbox_ = std::move(in);
    ++round_;
}

// ==== Agent steps ====

namespace {

void check_messages(const AgentState& a, const std::vector<Vec>& msgs, const ConsensusSelections& cs) {
    if (msgs.size() != cs.sel[a.id].size()) throw InvalidArgument(fmt::format("agent {}: missing neighbor messages", a.id + 1));
    for (std::size_t s = 0; s < msgs.size(); ++s)
        if (msgs[s].size() != static_cast<Eigen::Index>(cs.sel[a.id][s].size()))
            throw InvalidArgument(fmt::format("agent {}: message from {} missing or malformed", a.id + 1,
                                              cs.neighbors[a.id][s]));
}

}  // namespace

Vec dual_update(const AgentState& a, const std::vector<Vec>& msgs, const ConsensusSelections& cs, double rho) {
    check_messages(a, msgs, cs);
    Vec lam = a.lambda;
    for (std::size_t s = 0; s < msgs.size(); ++s) {
        const int n = static_cast<int>(s);
        const Vec ey = cs.select(a.id, n, a.y);
        Vec inc = Vec::Zero(ey.size());
        kernels::acc_scaled_diff(rho, ey.data(), msgs[s].data(), inc.data(), len(ey));
        cs.place_add(a.id, n, inc, lam);
    }
    return lam;
}

Vec local_step(AgentState& a, const LocalProblem& lp, const std::vector<Vec>& msgs, const ConsensusSelections& cs,
               double rho, int n_agents, const SolverOptions& solver) {
    check_messages(a, msgs, cs);
    const auto t0 = std::chrono::steady_clock::now();
    ConicProgram p = lp.prog;
    p.add_objective(lp.vars.tau, -1.0 / n_agents);
    for (Eigen::Index j = 0; j < a.lambda.size(); ++j)
        if (a.lambda(j) != 0.0) p.add_objective(static_cast<int>(j), a.lambda(j));
    for (std::size_t s = 0; s < msgs.size(); ++s) {
        const int n = static_cast<int>(s);
        const Vec center = mean(cs.select(a.id, n, a.y), msgs[s]);
        const auto& idx = cs.sel[a.id][s];
        for (std::size_t j = 0; j < idx.size(); ++j) p.add_prox(idx[j], rho, center(j));
    }
    a.nominal_assembled += p.count("nominal");
    a.multiplier_assembled += p.count("multiplier");
    const ConicSolution sol = solve(p, solver);
    a.last_solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    require_optimal(sol, fmt::format("admm agent {} round {}", a.id + 1, a.kappa));
    return sol.y;
}

// ==== Residuals ====

Residuals residuals(const std::vector<AgentState>& agents, const ConsensusSelections& cs) {
    Residuals out;
    const int n = cs.n_agents();
    out.r_agent.assign(n, 0.0);
    out.d_agent.assign(n, 0.0);
    double r2 = 0.0, d2 = 0.0;
    for (int i = 0; i < n; ++i)
        for (std::size_t s = 0; s < cs.neighbors[i].size(); ++s) {
            const int k = cs.neighbors[i][s] - 1;
            const int m = cs.slot_of(k, i + 1);
            const Vec yi = cs.select(i, static_cast<int>(s), agents[i].y);
            const Vec yk = cs.select(k, m, agents[k].y);
            const Vec pi = cs.select(i, static_cast<int>(s), agents[i].y_prev);
            const Vec pk = cs.select(k, m, agents[k].y_prev);
            // d_ik = (yi + yk) - (pi + pk), compared as the two averages
            const double r = 0.5 * dist(yi, yk);
            const double d = dist(mean(yi, yk), mean(pi, pk));
            out.edges.push_back({{i + 1, k + 1}, r, d});
            out.r_agent[i] += r * r;
            out.d_agent[i] += d * d;
            r2 += r * r;
            d2 += d * d;
        }
    for (int i = 0; i < n; ++i) {
        out.r_agent[i] = std::sqrt(out.r_agent[i]);
        out.d_agent[i] = std::sqrt(out.d_agent[i]);
    }
    out.r = std::sqrt(r2);
    out.d = std::sqrt(d2);
    return out;
}

// ==== Convergence detection ====

ConvergenceProtocol::ConvergenceProtocol(const Topology& comm, int diameter_bound) : d_(diameter_bound) {
    if (diameter_bound < 0) throw InvalidArgument("diameter bound must be non-negative");
    for (int i = 1; i <= comm.n_nodes(); ++i) nbrs_.push_back(comm.neighbors(i));
    s_.assign(comm.n_nodes(), 0);
}

bool ConvergenceProtocol::step(const std::vector<bool>& flags) {
    if (flags.size() != s_.size()) throw InvalidArgument("one convergence flag per agent required");
    std::vector<int> next(s_.size(), 0);
    bool all = true;
    for (std::size_t i = 0; i < s_.size(); ++i) {
        if (flags[i]) {
            int m = s_[i];
            for (int k : nbrs_[i]) m = std::min(m, s_[k - 1]);
            next[i] = 1 + m;
        }
        all = all && next[i] > d_;
    }
    s_ = std::move(next);
    ++round_;
    return all;
}

// ==== Run ====

StaticGains admm_gains(const SfTemplate& t, const std::vector<LocalProblem>& lps, const std::vector<AgentState>& agents) {
    SfGains k;
    for (std::size_t i = 0; i < lps.size(); ++i) {
        const auto& v = lps[i].vars;
        const Vec& y = agents[i].y;
        Eigen::LDLT<Mat> xf(ConicProgram::get_value(v.X, y));
        k.K.push_back(xf.solve(Mat(ConicProgram::get_value(v.W, y).transpose())).transpose());
        for (const auto& z : v.Z) k.F.push_back(xf.solve(Mat(ConicProgram::get_value(z, y).transpose())).transpose());
    }
    return edge_form_gains(t, independent_sharing(t), k);
}

namespace {

struct Candidate {
    double gamma = kInf;
    StaticGains gains;
    Certificate cert;
    int kappa = -1;
};

// Gains fixed, multipliers and X free: the certificate of the loop with the same structure.
bool analyze_candidate(const InterconnectedSystem& g, const Topology& topo_k, const StaticGains& gains,
                       const AdmmConfig& cfg, Candidate& out) {
    try {
        const ClosedLoopSS clp = close_with_gains(g, topo_k, gains);
        if (!std::isfinite(hinf_norm(flatten(clp)))) return false;
        AnalysisOptions ao;
        ao.structure = MultiplierStructure::FullPerEdge;
        ao.decomposed = true;
        ao.eps = cfg.eps;
        ao.solver = cfg.solver;
        const AnalysisResult a = fbsp_analysis(adjoint(clp), ao);
        out.gamma = a.gamma;
        out.gains = gains;
        out.cert = Certificate{a.gamma, false, a.X, a.multipliers};
        return true;
    } catch (const Infeasible&) {
    } catch (const NumericalFailure&) {
    } catch (const ConsistencyError&) {
    }
    return false;
}

struct DebugEdge {
    Vec u, v, t;
};

}  // namespace

AdmmResult admm_synthesis(const InterconnectedSystem& g, const Topology& topo_k, const AdmmConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    if (!(cfg.rho > 0.0)) throw InvalidArgument("rho must be positive");
    if (cfg.max_iter < 1) throw InvalidArgument("max_iter must be positive");
    const SfTemplate t = make_sf_template(g, topo_k);
    const int n = t.adj.n();

    std::vector<LocalProblem> lps;
    std::vector<LocalVariableVector> vars;
    for (int i = 0; i < n; ++i) {
        lps.push_back(build_local_problem(t, i, cfg.eps));
        vars.push_back(lps.back().vars);
    }
    const ConsensusSelections cs = make_selections(vars);
    std::vector<Edge> ce;
    for (int i = 0; i < n; ++i)
        for (int k : cs.neighbors[i]) ce.emplace_back(i + 1, k);
    const Topology comm = Topology::from_edges(n, ce);
    const int diam = cfg.diameter_bound < 0 ? comm.diameter() : cfg.diameter_bound;
    const double cdim = std::sqrt(static_cast<double>(std::max(1, cs.consensus_dim())));
    const double eps_pri = cfg.eps_pri < 0.0 ? 1e-4 * cdim : cfg.eps_pri;
    const double eps_dual = cfg.eps_dual < 0.0 ? 1e-4 * cdim : cfg.eps_dual;
    const double local_scale = 1.0 / std::sqrt(static_cast<double>(n));

    std::vector<AgentState> agents(n);
    std::vector<std::vector<DebugEdge>> dbg(n);
    for (int i = 0; i < n; ++i) {
        agents[i].id = i;
        agents[i].y = Vec::Zero(vars[i].dim);
        agents[i].y_prev = agents[i].y;
        agents[i].lambda = Vec::Zero(vars[i].dim);
        for (const auto& s : cs.sel[i]) {
            const Vec z = Vec::Zero(static_cast<Eigen::Index>(s.size()));
            dbg[i].push_back({z, z, z});
        }
    }

    MessageBus bus(n);
    ConvergenceProtocol proto(comm, diam);
    AdmmResult res;
    Candidate best;
    const int threads = std::max(1, std::min(cfg.threads, n));

    for (int kappa = 0; kappa < cfg.max_iter; ++kappa) {
        // communicate E_ik y_i
        for (int i = 0; i < n; ++i)
            for (std::size_t s = 0; s < cs.neighbors[i].size(); ++s)
                bus.post({i, cs.neighbors[i][s] - 1, kappa, cs.select(i, static_cast<int>(s), agents[i].y)});
        bus.deliver(cs);
        for (int i = 0; i < n; ++i) agents[i].msgs = bus.inbox(i);

        for (int i = 0; i < n; ++i) agents[i].lambda = dual_update(agents[i], agents[i].msgs, cs, cfg.rho);

        double drift = 0.0;
        if (cfg.debug_identities) {
            // explicit u, v, t of the four-variable scheme
            for (int i = 0; i < n; ++i)
                for (std::size_t s = 0; s < cs.sel[i].size(); ++s) {
                    DebugEdge& e = dbg[i][s];
                    const Vec ey = cs.select(i, static_cast<int>(s), agents[i].y);
                    const Vec& ek = agents[i].msgs[s];
                    e.t = 0.5 * (ey + ek) + (e.u + e.v) / (2.0 * cfg.rho);
                    e.u += cfg.rho * (ey - e.t);
                    e.v += cfg.rho * (ek - e.t);
                }
            for (int i = 0; i < n; ++i) {
                Vec lam = Vec::Zero(vars[i].dim);
                for (std::size_t s = 0; s < cs.sel[i].size(); ++s) {
                    const DebugEdge& e = dbg[i][s];
                    const int k = cs.neighbors[i][s] - 1, m = cs.slot_of(k, i + 1);
                    const Vec avg = 0.5 * (cs.select(i, static_cast<int>(s), agents[i].y) + agents[i].msgs[s]);
                    drift = std::max({drift, inf_norm(e.u + e.v), inf_norm(e.t - avg), inf_norm(e.u + dbg[k][m].u)});
                    cs.place_add(i, static_cast<int>(s), 2.0 * e.u, lam);
                }
                drift = std::max(drift, inf_norm(agents[i].lambda - lam));
            }
            res.max_identity_drift = std::max(res.max_identity_drift, drift);
        }

        // local steps, one worker per chunk of agents
        std::vector<Vec> ynew(n);
        std::vector<std::exception_ptr> err(n);
        auto work = [&](int w) {
            for (int i = w; i < n; i += threads) {
                try {
                    agents[i].kappa = kappa;
                    ynew[i] = local_step(agents[i], lps[i], agents[i].msgs, cs, cfg.rho, n, cfg.solver);
                } catch (...) {
                    err[i] = std::current_exception();
                }
            }
        };
        if (threads == 1) {
            work(0);
        } else {
            std::vector<std::thread> pool;
            for (int w = 0; w < threads; ++w) pool.emplace_back(work, w);
            for (auto& th : pool) th.join();
        }
        for (int i = 0; i < n; ++i)
            if (err[i]) std::rethrow_exception(err[i]);
        for (int i = 0; i < n; ++i) {
            agents[i].y_prev = std::move(agents[i].y);
            agents[i].y = std::move(ynew[i]);
            agents[i].kappa = kappa + 1;
        }

        const Residuals rr = residuals(agents, cs);
        AdmmTraceRow row;
        row.kappa = kappa + 1;
        row.r = rr.r;
        row.d = rr.d;
        row.identity_drift = drift;
        std::vector<bool> flags(n);
        for (int i = 0; i < n; ++i) {
            row.gamma_tilde.push_back(std::sqrt(std::max(0.0, agents[i].y(vars[i].tau))));
            row.solve_seconds.push_back(agents[i].last_solve_seconds);
            agents[i].r_local = rr.r_agent[i];
            agents[i].d_local = rr.d_agent[i];
            agents[i].flag = rr.r_agent[i] <= eps_pri * local_scale && rr.d_agent[i] <= eps_dual * local_scale;
            flags[i] = agents[i].flag;
        }
        res.trace.push_back(std::move(row));
        res.iterations = kappa + 1;

        if (cfg.certify_every > 0 && (kappa + 1) % cfg.certify_every == 0) {
            Candidate c;
            if (analyze_candidate(g, topo_k, admm_gains(t, lps, agents), cfg, c) && c.gamma < best.gamma) {
                c.kappa = kappa + 1;
                best = std::move(c);
            }
        }
        if (proto.step(flags)) {
            res.converged = true;
            break;
        }
    }

    double tau_sum = 0.0;
    for (int i = 0; i < n; ++i) tau_sum += agents[i].y(vars[i].tau);
    res.gamma_consensus = tau_sum > 0.0 ? n / tau_sum : kInf;
    res.messages = bus.messages_sent();
    for (const auto& a : agents) {
        res.nominal_assembled.push_back(a.nominal_assembled);
        res.multiplier_assembled.push_back(a.multiplier_assembled);
    }

    Candidate fin;
    const bool fin_ok = analyze_candidate(g, topo_k, admm_gains(t, lps, agents), cfg, fin);
    if (fin_ok) fin.kappa = res.iterations;
    Candidate* pick = nullptr;
    if (res.converged && fin_ok) {
        pick = &fin;
    } else {
        if (fin_ok && fin.gamma < best.gamma) best = std::move(fin);
        if (best.kappa >= 0) pick = &best;
        res.used_fallback = pick != nullptr;
    }
    if (!pick) throw NumericalFailure(fmt::format("admm: no iterate passed certification after {} rounds", res.iterations));

    SynthesisResult& r = res.synthesis;
    r.method = "admm";
    r.topo_k = topo_k;
    r.gains = pick->gains;
    certify(r, close_with_gains(g, topo_k, pick->gains), MultiplierStructure::FullPerEdge, true, pick->cert, cfg.eps,
            cfg.solver);
    r.stats.nominal_lmis = n;
    r.stats.multiplier_lmis = 0;
    for (const auto& nb : cs.neighbors) r.stats.multiplier_lmis += static_cast<int>(nb.size());
    for (const auto& lp : lps) {
        for (int s : lp.prog.sizes("nominal")) r.stats.nominal_sizes.push_back(s);
        for (int s : lp.prog.sizes("multiplier")) r.stats.multiplier_sizes.push_back(s);
        r.stats.n_vars += lp.prog.n_vars();
    }
    r.stats.iterations = res.iterations;
    if (!res.converged) {
        r.diagnostic = fmt::format("no convergence after {} rounds; best certified iterate from round {} returned",
                                   res.iterations, pick->kappa);
        spdlog::warn("admm: {}", r.diagnostic);
    } else if (res.used_fallback) {
        r.diagnostic = fmt::format("final iterate failed certification; iterate of round {} returned", pick->kappa);
        spdlog::warn("admm: {}", r.diagnostic);
    }
    r.stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace netsyn
