#include "netsyn/bench.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <sstream>

#include <fmt/core.h>

#include "netsyn/admm.hpp"
#include "netsyn/errors.hpp"
#include "netsyn/rng.hpp"
#include "netsyn/synthesis.hpp"

namespace netsyn {

// ==== Mass-spring-damper generator ====

MsdParameters draw_msd_parameters(const MsdConfig& cfg) {
    const int n = cfg.topo.n_nodes();
    if (n < 1) throw InvalidArgument("generator needs at least one subsystem");
    std::vector<int> source(n);
    std::iota(source.begin(), source.end(), 1);
    if (!cfg.groups.empty()) {
        std::vector<bool> seen(n, false);
        for (const auto& gr : cfg.groups) {
            if (gr.empty()) throw InvalidArgument("empty parameter group");
            for (int i : gr) {
                if (i < 1 || i > n || seen[i - 1])
                    throw InvalidArgument(fmt::format("parameter groups do not partition the nodes (node {})", i));
                seen[i - 1] = true;
                source[i - 1] = gr[0];
            }
        }
        if (std::find(seen.begin(), seen.end(), false) != seen.end())
            throw InvalidArgument("parameter groups do not cover every node");
    }
    MsdParameters p;
    for (int i = 1; i <= n; ++i) {
        Rng r(cfg.seed, subsystem_stream(source[i - 1]));
        p.m.push_back(r.uniform(cfg.m.first, cfg.m.second));
        p.k.push_back(r.uniform(cfg.k.first, cfg.k.second));
        p.d.push_back(r.uniform(cfg.d.first, cfg.d.second));
        p.bu.push_back(r.uniform(cfg.bu.first, cfg.bu.second));
        p.dzu.push_back(r.uniform(cfg.dzu.first, cfg.dzu.second));
        p.bw.push_back(r.uniform(cfg.bw.first, cfg.bw.second));
    }
    for (const auto& [i, k] : cfg.topo.edges()) {
        Rng r(cfg.seed, cfg.shared_coupling ? edge_stream(0, 0) : edge_stream(i, k));
        const double ke = r.uniform(cfg.k_edge.first, cfg.k_edge.second);
        const double de = r.uniform(cfg.d_edge.first, cfg.d_edge.second);
        p.coupling[{i, k}] = {ke, de};
    }
    return p;
}

InterconnectedSystem generate_msd(const MsdConfig& cfg) {
    const MsdParameters p = draw_msd_parameters(cfg);
    const Topology& t = cfg.topo;
    const int n = t.n_nodes();

    std::vector<LocalBlocks> locals;
    for (int i = 1; i <= n; ++i) {
        double ks = 0.0, ds = 0.0;
        for (int k : t.in_neighbors(i)) {
            ks += p.coupling.at({i, k}).first;
            ds += p.coupling.at({i, k}).second;
        }
        const double m = p.m[i - 1];
        LocalBlocks L;
        L.A = Mat{{0.0, 1.0}, {-ks / m, -ds / m}};
        L.Bu = Mat{{0.0}, {p.bu[i - 1]}};
        L.Bw = Mat{{0.0}, {p.bw[i - 1]}};
        L.Cy = Mat::Identity(2, 2);
        L.Cz = Mat::Zero(3, 2);
        L.Cz.topRows(2).setIdentity();
        L.Dzu = Mat{{0.0}, {0.0}, {p.dzu[i - 1]}};
        L.Dyw = Mat::Zero(2, 1);
        L.Dzw = Mat::Zero(3, 1);
        locals.push_back(L);
    }
    // coupling row of A_ik: [k_ik, d_ik] / m_k
    auto row = [&](int i, int k) {
        const auto [ke, de] = p.coupling.at({i, k});
        return Mat{{ke / p.m[k - 1], de / p.m[k - 1]}};
    };

    if (cfg.channels == MsdChannels::Full) {
        std::map<Edge, CouplingBlocks> c;
        for (const auto& [i, k] : t.edges()) {
            CouplingBlocks b;
            b.A = Mat::Zero(2, 2);
            b.A.row(1) = row(i, k);
            c[{i, k}] = b;
        }
        return realize_edge_form(t, locals, c);
    }

    const Topology sym = symmetrize(t);
    InterconnectedSystem sys;
    sys.topo = t;
    sys.edge_form = true;
    for (int i = 1; i <= n; ++i) {
        const LocalBlocks& L = locals[i - 1];
        SubsystemSS s;
        s.A = L.A;
        s.Bu = L.Bu;
        s.Bw = L.Bw;
        s.Cy = L.Cy;
        s.Cz = L.Cz;
        s.Dyw = L.Dyw;
        s.Dzu = L.Dzu;
        s.Dzw = L.Dzw;
        std::vector<Mat> bp, cq;
        for (int k : sym.neighbors(i)) {
            Slot sl{k, 0, 0};
            if (t.has_edge(i, k)) {
                bp.push_back(Mat{{0.0}, {1.0}});
                sl.dim_p = 1;
            }
            if (t.has_edge(k, i)) {
                // q_ik feeds p_ki = A_ki x_i
                cq.push_back(row(k, i));
                sl.dim_q = 1;
            }
            s.slots.push_back(sl);
        }
        const int np = static_cast<int>(bp.size()), nq = static_cast<int>(cq.size());
        s.Bp = hcat(bp, 2);
        s.Cq = vcat(cq, 2);
        s.Dzp = Mat::Zero(3, np);
        s.Dyp = Mat::Zero(2, np);
        s.Dqw = Mat::Zero(nq, 1);
        s.validate();
        sys.subs.push_back(std::move(s));
    }
    std::map<Edge, Mat> blocks;
    for (const auto& e : t.edges()) blocks[e] = Mat::Identity(1, 1);
    sys.P = assemble_interconnection(sys.layout(), blocks);
    return sys;
}

// ==== Benchmark fixture ====

Topology fig4_topology() {
    return Topology::from_edges(8, {{1, 5}, {2, 1}, {3, 4}, {4, 2}, {4, 7}, {5, 6}, {6, 3}, {7, 8}, {8, 5}});
}

Fixture fig4_fixture(std::uint64_t seed) {
    MsdConfig cfg;
    cfg.topo = fig4_topology();
    cfg.seed = seed;
    return {generate_msd(cfg), cfg.topo};
}

// ==== Scaling report ====

int decomposed_var_formula(int n, int n_slots, int n_gain_slots, int nx, int nu, int ds) {
    return 1 + n * (nx * (nx + 1) / 2 + nu * nx) + n_gain_slots * nu * nx + n_slots * (ds * (ds + 1) + ds * ds);
}

int homogeneous_var_formula(int nx, int nu, int ds) {
    return 1 + nx * (nx + 1) / 2 + 2 * nu * nx + ds * (ds + 1) + ds * ds;
}

namespace {

int block_size(const ClosedLoopBlock& b) { return b.nx() + b.nw() + b.np() + b.nz(); }

// Uniform slot dimension of a layout, or -1.
int uniform_slot_dim(const ChannelLayout& l) {
    int d = -1;
    for (const auto& sl : l.slots)
        for (const auto& s : sl) {
            if (s.dim_p != s.dim_q || (d >= 0 && s.dim_p != d)) return -1;
            d = s.dim_p;
        }
    return d;
}

// Pair-condition size of slot (i, label k): the q dimensions of both directions.
int pair_size(const ChannelLayout& l, int i, int k) {
    const int s = l.find(i, k), t = l.find(k - 1, i + 1);
    return l.slots[i][s].dim_q + l.slots[k - 1][t].dim_q;
}

double timed_solve(const ConicProgram& p) {
    const auto t0 = std::chrono::steady_clock::now();
    const ConicSolution sol = solve(p);
    (void)sol;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void fill_counts(ScalingReport& r, const ConicProgram& p) {
    r.nominal = p.count("nominal");
    r.multiplier = p.count("multiplier");
    r.nominal_sizes = p.sizes("nominal");
    r.multiplier_sizes = p.sizes("multiplier");
    r.n_vars = p.n_vars();
}

void check(const ScalingReport& r) {
    if (r.nominal != r.expected_nominal || r.multiplier != r.expected_multiplier)
        throw ConsistencyError(fmt::format("{}: assembled {} nominal / {} multiplier LMIs, formulas give {} / {}",
                                           r.method, r.nominal, r.multiplier, r.expected_nominal,
                                           r.expected_multiplier));
    if (r.nominal_sizes != r.expected_nominal_sizes || r.multiplier_sizes != r.expected_multiplier_sizes)
        throw ConsistencyError(fmt::format("{}: LMI sizes differ from the formulas", r.method));
    if (r.expected_vars >= 0 && r.n_vars != r.expected_vars)
        throw ConsistencyError(
            fmt::format("{}: {} variables assembled, formula gives {}", r.method, r.n_vars, r.expected_vars));
}

}  // namespace

ScalingReport scaling_report(const std::string& method, const InterconnectedSystem& g, const Topology& topo_k,
                             const ScalingOptions& opt) {
    ScalingReport r;
    r.method = method;
    r.n = g.n();
    const SfTemplate t = make_sf_template(g, topo_k);
    const ChannelLayout l = t.adj.layout();
    int n_slots = 0, n_gain = 0;
    for (int i = 0; i < r.n; ++i) {
        n_slots += static_cast<int>(l.slots[i].size());
        n_gain += static_cast<int>(t.gain_slots[i].size());
    }
    r.n_edges = n_slots;
    const int nx = g.subs[0].nx(), nu = g.subs[0].nu();
    const int ds = uniform_slot_dim(l);
    bool uniform = ds >= 0;
    for (const auto& s : g.subs) uniform = uniform && s.nx() == nx && s.nu() == nu;

    if (method == "central" || method == "decomposed") {
        const bool dec = method == "decomposed";
        const SfProgram sp = build_sf_program(t, independent_sharing(t),
                                              dec ? MultiplierStructure::FullPerEdge : MultiplierStructure::PerSubsystem,
                                              dec, opt.eps);
        fill_counts(r, sp.prog);
        if (dec) {
            r.expected_nominal = r.n;
            r.expected_multiplier = n_slots;
            for (int i = 0; i < r.n; ++i) r.expected_nominal_sizes.push_back(block_size(t.adj.subs[i]));
            for (int i = 0; i < r.n; ++i)
                for (const auto& s : l.slots[i]) r.expected_multiplier_sizes.push_back(pair_size(l, i, s.label));
            if (uniform) r.expected_vars = decomposed_var_formula(r.n, n_slots, n_gain, nx, nu, ds);
        } else {
            r.expected_nominal = 1;
            r.expected_multiplier = 1;
            int total = 0;
            for (const auto& b : t.adj.subs) total += block_size(b);
            r.expected_nominal_sizes = {total};
            r.expected_multiplier_sizes = {l.n_q()};
        }
        if (opt.solve) r.seconds = timed_solve(sp.prog);
    } else if (method == "homogeneous" || method == "alphabeta") {
        const bool homo = method == "homogeneous";
        const ClassDescriptor cls = homo ? homogeneous_classes(g.topo) : opt.classes;
        const CompressedSystem c = compress_alphabeta(g, cls);
        ClassSynthesisOptions co;
        co.base.eps = opt.eps;
        const ClassProgram cp = build_class_program(c, homo, co);
        fill_counts(r, cp.sf.prog);
        r.alpha = cls.alpha();
        r.beta = cls.beta();
        r.expected_nominal = r.alpha;
        const ClosedLoopSS cl0 = adjoint(close_loop(c.sys, class_controller(c, zero_class_gains(c))));
        for (const auto& gr : cls.groups) r.expected_nominal_sizes.push_back(block_size(cl0.subs[gr[0] - 1]));
        for (int j = 0; j < r.beta; ++j) {
            const Spectrum sp = spectrum(c.Lambda[j]);
            const int dj = c.ns[j] + nu;
            if (!sp.normal) {
                r.expected_multiplier += 1;
                r.expected_multiplier_sizes.push_back(r.n * dj);
                continue;
            }
            if (sp.real) {
                double lo = 1e300, hi = -1e300;
                for (const auto& e : sp.eigenvalues) {
                    lo = std::min(lo, e.real());
                    hi = std::max(hi, e.real());
                }
                const int cnt = hi - lo > 1e-8 ? 2 : 1;
                r.expected_multiplier += cnt;
                for (int q = 0; q < cnt; ++q) r.expected_multiplier_sizes.push_back(dj);
            } else {
                const auto reps = eigenvalue_clusters(c.Lambda[j].transpose(), co.cluster_tol);
                r.expected_multiplier += static_cast<int>(reps.size());
                for (const auto& e : reps) r.expected_multiplier_sizes.push_back(e.imag() == 0.0 ? dj : 2 * dj);
            }
        }
        if (homo && uniform_slot_dim(cl0.layout()) >= 0)
            r.expected_vars = homogeneous_var_formula(nx, nu, uniform_slot_dim(cl0.layout()));
        if (opt.solve) r.seconds = timed_solve(cp.sf.prog);
    } else if (method == "distributed") {
        if (opt.agent < 0 || opt.agent >= r.n) throw InvalidArgument("agent out of range");
        const LocalProblem lp = build_local_problem(t, opt.agent, opt.eps);
        fill_counts(r, lp.prog);
        r.agent = opt.agent;
        const int i = opt.agent;
        r.expected_nominal = 1;
        r.expected_multiplier = static_cast<int>(l.slots[i].size());
        r.expected_nominal_sizes = {block_size(t.adj.subs[i])};
        for (const auto& s : l.slots[i]) r.expected_multiplier_sizes.push_back(pair_size(l, i, s.label));
        if (uniform) {
            const int nb = static_cast<int>(l.slots[i].size());
            r.expected_vars = 1 + nx * (nx + 1) / 2 + nu * nx + static_cast<int>(t.gain_slots[i].size()) * nu * nx +
                              2 * nb * (ds * (ds + 1) + ds * ds);
        }
        if (opt.solve) {
            ConicProgram p = lp.prog;
            p.add_objective(lp.vars.tau, -1.0);
            for (int j = 0; j < p.n_vars(); ++j) p.add_prox(j, 1.0, 0.0);
            r.seconds = timed_solve(p);
        }
    } else {
        throw InvalidArgument(fmt::format("unknown method '{}'", method));
    }
    check(r);
    return r;
}

// ==== Sweeps ====

SweepKind sweep_kind_from_string(const std::string& s) {
    if (s == "N" || s == "n") return SweepKind::N;
    if (s == "alpha") return SweepKind::Alpha;
    if (s == "neighbors") return SweepKind::Neighbors;
    throw InvalidArgument(fmt::format("unknown sweep '{}' (N, alpha, neighbors)", s));
}

namespace {

Topology sweep_topology(const std::string& name, int n) {
    if (name == "complete") return complete_topology(n);
    if (name == "ring") return ring_topology(n);
    throw InvalidArgument(fmt::format("unknown sweep topology '{}' (complete, ring)", name));
}

}  // namespace

std::vector<ScalingReport> run_sweep(const SweepOptions& opt) {
    std::vector<ScalingReport> rows;
    ScalingOptions so;
    so.solve = opt.solve;
    if (opt.kind == SweepKind::N) {
        for (int n = 2; n <= opt.max; ++n) {
            MsdConfig cfg;
            cfg.topo = sweep_topology(opt.topology, n);
            cfg.seed = opt.seed;
            const InterconnectedSystem het = generate_msd(cfg);
            rows.push_back(scaling_report("central", het, cfg.topo, so));
            rows.push_back(scaling_report("decomposed", het, cfg.topo, so));
            cfg.groups = {std::vector<int>(n)};
            std::iota(cfg.groups[0].begin(), cfg.groups[0].end(), 1);
            cfg.shared_coupling = true;
            rows.push_back(scaling_report("homogeneous", generate_msd(cfg), cfg.topo, so));
        }
    } else if (opt.kind == SweepKind::Alpha) {
        // alpha groups of two nodes on the complete graph, one coupling class
        for (int a = 1; a <= opt.max; ++a) {
            MsdConfig cfg;
            const int n = 2 * a;
            cfg.topo = complete_topology(n);
            cfg.seed = opt.seed;
            cfg.shared_coupling = true;
            for (int g = 0; g < a; ++g) cfg.groups.push_back({2 * g + 1, 2 * g + 2});
            so.classes.groups = cfg.groups;
            so.classes.classes = {cfg.topo.edges()};
            rows.push_back(scaling_report("alphabeta", generate_msd(cfg), cfg.topo, so));
        }
    } else {
        // one agent with a growing neighborhood
        for (int nb = 1; nb <= opt.max; ++nb) {
            MsdConfig cfg;
            cfg.topo = complete_topology(nb + 1);
            cfg.seed = opt.seed;
            so.agent = 0;
            rows.push_back(scaling_report("distributed", generate_msd(cfg), cfg.topo, so));
        }
    }
    return rows;
}

std::string sweep_csv(const std::vector<ScalingReport>& rows) {
    std::ostringstream os;
    os << "method,N,edges,alpha,beta,agent,nominal,nominal_size_max,multiplier,multiplier_size_max,n_vars,seconds\n";
    for (const auto& r : rows) {
        const int ns = r.nominal_sizes.empty() ? 0 : *std::max_element(r.nominal_sizes.begin(), r.nominal_sizes.end());
        const int ms =
            r.multiplier_sizes.empty() ? 0 : *std::max_element(r.multiplier_sizes.begin(), r.multiplier_sizes.end());
        os << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{:.6f}\n", r.method, r.n, r.n_edges, r.alpha, r.beta,
                          r.agent + 1, r.nominal, ns, r.multiplier, ms, r.n_vars, r.seconds);
    }
    return os.str();
}

}  // namespace netsyn
