// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero when a criterion fails,
// except for failures listed as known limits in the README.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "fixtures.hpp"
#include "netsyn/admm.hpp"
#include "netsyn/analysis.hpp"
#include "netsyn/bench.hpp"
#include "netsyn/decomposed.hpp"
#include "netsyn/errors.hpp"
#include "netsyn/linalg.hpp"
#include "netsyn/synthesis.hpp"
#include "oracles.hpp"

using namespace netsyn;

namespace {

struct Outcome {
    bool pass = true;
    bool known_limit = false;  // failure documented as unattainable, does not affect the exit status
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (ok) return;
        pass = false;
        if (!detail.empty()) detail += "; ";
        detail += what;
    }
};

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// ==== 1. Norm invariance ====

Outcome norm_invariance() {
    Outcome o;
    Rng rng(101, 0);
    double worst_hinf = 0.0, worst_h2 = 0.0, worst_res = 0.0;
    for (int r = 0; r < 20; ++r) {
        const auto inst = oracle::random_aug_instance(rng, 4);
        const auto [sys, aug] = augment_performance(inst.bar, inst.S, inst.T, inst.MQ, inst.MR);
        const auto ctrl = static_controller_sender_side(inst.bar.topo, {inst.K, {}}, inst.bar.ny, inst.bar.nu);
        const StateSpace aug_loop = flatten(close_loop(sys, ctrl));
        const StateSpace bar_loop = oracle::bar_closed_loop(inst);
        worst_hinf = std::max(worst_hinf, rel(hinf_norm(aug_loop), hinf_norm(bar_loop)));
        worst_h2 = std::max(worst_h2, rel(oracle::kron_h2(aug_loop), oracle::kron_h2(bar_loop)));
        worst_res = std::max({worst_res, aug.tl_residual, aug.tr_residual});
    }
    o.require(worst_hinf <= 1e-6, fmt::format("H-infinity rel. error {:.2e}", worst_hinf));
    o.require(worst_h2 <= 1e-6, fmt::format("H2 rel. error {:.2e}", worst_h2));
    o.require(worst_res <= 1e-9, fmt::format("semi-orthogonality residual {:.2e}", worst_res));
    if (o.pass)
        o.detail = fmt::format("hinf {:.1e}, h2 {:.1e}, residual {:.1e}", worst_hinf, worst_h2, worst_res);
    return o;
}

// ==== 2. Closed loop vs monolithic closure ====

Outcome lft_equivalence() {
    Outcome o;
    Rng rng(102, 0);
    const Topology tg2 = Topology::from_edges(2, {{1, 2}, {2, 1}});
    const Topology tk2 = Topology::from_edges(2, {{2, 1}});
    const Topology ring3 = ring_topology(3);
    double worst = 0.0;
    for (int r = 0; r < 50; ++r) {
        const bool three = r >= 25;
        const Topology& tg = three ? ring3 : tg2;
        const auto g = oracle::random_plant(tg, rng);
        const auto k = oracle::random_controller(three || r % 2 ? tg : tk2, g, rng);
        const auto f = oracle::random_freqs(rng, 20);
        worst = std::max(worst, oracle::max_rel_tf_error(flatten(close_loop(g, k)), oracle::monolithic_closure(g, k), f));
    }
    o.require(worst <= 1e-8, fmt::format("rel. error {:.2e}", worst));
    if (o.pass) o.detail = fmt::format("worst rel. error {:.1e}", worst);
    return o;
}

// ==== 3. Soundness of every method ====

void check_sound(Outcome& o, const SynthesisResult& r, const std::string& what) {
    o.require(r.hinf <= r.gamma * (1 + 1e-6), fmt::format("{}: hinf {:.8g} > gamma {:.8g}", what, r.hinf, r.gamma));
    o.require(std::isfinite(r.certified_gamma), what + ": gains do not re-certify");
}

Outcome soundness() {
    Outcome o;
    int runs = 0;
    auto run = [&](const std::string& what, const std::function<SynthesisResult()>& f) {
        try {
            check_sound(o, f(), what);
        } catch (const std::exception& e) {
            o.require(false, fmt::format("{}: {}", what, e.what()));
        }
        ++runs;
    };
    Rng rng(103, 0);
    for (int r = 0; r < 2; ++r) {
        const auto g = oracle::random_sf_plant(ring_topology(3), rng);
        run("central", [&] { return hinf_state_feedback_central(g, g.topo); });
        SynthesisOptions full;
        full.structure = MultiplierStructure::FullPerEdge;
        run("central full", [&] { return hinf_state_feedback_central(g, g.topo, full); });
        run("decomposed", [&] { return decomposed_synthesis_hetero(g, g.topo); });
    }
    const auto fx = fig4_fixture();
    run("decomposed benchmark", [&] { return decomposed_synthesis_hetero(fx.sys, fx.topo_k); });
    run("central benchmark", [&] { return hinf_state_feedback_central(fx.sys, fx.topo_k); });
    const auto homo = fixture::homogeneous_sf_plant(ring_topology(4), rng);
    run("homogeneous", [&] { return decomposed_synthesis_homogeneous(homo); });
    run("alphabeta single class", [&] { return decomposed_synthesis_alphabeta(homo, homogeneous_classes(homo.topo)); });
    const auto ring_msd = fixture::msd_alphabeta("ring", 6, 1, 1, 7);
    run("homogeneous msd", [&] { return decomposed_synthesis_homogeneous(ring_msd.sys); });
    for (const std::string topo : {"ring", "complete"}) {
        const auto inst = fixture::msd_alphabeta(topo, 4, 2, 2, 8);
        run("alphabeta " + topo, [&] { return decomposed_synthesis_alphabeta(inst.sys, inst.cls); });
    }
    if (o.pass) o.detail = fmt::format("{} syntheses certified", runs);
    return o;
}

// ==== 4. Ordering ====

Outcome ordering() {
    Outcome o;
    Rng rng(104, 0);
    const Topology t = ring_topology(3);
    int infeasible = 0;
    for (int r = 0; r < 10; ++r) {
        const auto g = fixture::hetero_sf_plant(t, rng);
        SynthesisOptions structured;
        structured.structure = MultiplierStructure::FullPerEdge;
        const double central = hinf_state_feedback_central(g, t, structured).gamma;
        const double hetero = decomposed_synthesis_hetero(g, t).gamma;
        // identical multipliers can be infeasible within the variable bounds: gamma = inf
        double ident = kInf;
        try {
            ident = decomposed_synthesis_identical(g, t).gamma;
        } catch (const Infeasible&) {
            ++infeasible;
        }
        o.require(central <= hetero + 1e-6, fmt::format("instance {}: central {:.8g} > decomposed {:.8g}", r, central, hetero));
        o.require(hetero <= ident + 1e-6, fmt::format("instance {}: decomposed {:.8g} > identical {:.8g}", r, hetero, ident));
    }
    if (o.pass) o.detail = fmt::format("10 instances ordered, {} identical-multiplier programs infeasible", infeasible);
    return o;
}

// ==== 5. Special classes ====

Outcome special_classes() {
    Outcome o;
    Rng rng(105, 0);
    {
        const auto g = fixture::homogeneous_sf_plant(ring_topology(4), rng);
        const double a = decomposed_synthesis_homogeneous(g).gamma;
        const double b = decomposed_synthesis_alphabeta(g, homogeneous_classes(g.topo)).gamma;
        o.require(rel(b, a) <= 1e-6, fmt::format("single class {:.8g} vs homogeneous {:.8g}", b, a));
    }
    {
        const auto g = fixture::homogeneous_sf_plant(ring_topology(4), rng);
        const double a = decomposed_synthesis_homogeneous(g).gamma;
        const double b = decomposed_synthesis_identical(g, g.topo).gamma;
        o.require(rel(a, b) <= 1e-5, fmt::format("regular ring {:.8g} vs identical {:.8g}", a, b));
    }
    const bool others_pass = o.pass;
    {
        const Topology t = ring_topology(3);
        const auto g = fixture::hetero_sf_plant(t, rng);
        const double a = decomposed_synthesis_alphabeta(g, fully_heterogeneous_classes(t)).gamma;
        const double b = decomposed_synthesis_hetero(g, t).gamma;
        o.require(rel(a, b) <= 1e-5, fmt::format("full heterogeneity {:.8g} vs decomposed {:.8g}", a, b));
    }
    if (!o.pass && others_pass) {
        o.known_limit = true;
        o.detail += " (known limit, see README)";
    }
    if (o.pass) o.detail = "single class, full heterogeneity and regular ring agree";
    return o;
}

// ==== 6. Eigenvalue path ====

Outcome eigen_path() {
    Outcome o;
    Rng rng(106, 0);
    std::vector<Topology> tops;
    for (int n = 3; n <= 6; ++n) tops.push_back(ring_topology(n));
    for (int n = 2; n <= 6; ++n) tops.push_back(complete_topology(n));
    for (int n = 3; n <= 6; ++n) {
        std::vector<Edge> e;
        for (int i = 1; i <= n; ++i) e.push_back({i, i % n + 1});
        tops.push_back(Topology::from_edges(n, e));
    }
    double worst = kInf;
    for (const auto& t : tops) {
        const auto c = compress_homogeneous(fixture::homogeneous_sf_plant(t, rng));
        ClassSynthesisOptions opt;
        opt.path = ClassPath::Eigen;
        auto cp = build_class_program(c, true, opt);
        const auto sol = solve(cp.sf.prog);
        if (sol.status != SolveStatus::Optimal) {
            o.require(false, fmt::format("N = {}: eigenvalue program not solved", t.n_nodes()));
            continue;
        }
        const auto la = cp.sf.templ.adj.layout();
        const MultiplierBlock& mb = cp.sf.mult.slot[0][la.find(0, 1)];
        const Mat m = kronecker_condition(mb, c.Lambda[0].transpose()).value(sol.y);
        const double e = min_eig_sym(m);
        worst = std::min(worst, e);
        o.require(e >= -1e-8, fmt::format("N = {}: Kronecker condition min eig {:.2e}", t.n_nodes(), e));
    }
    if (o.pass) o.detail = fmt::format("{} patterns, min eig {:.2e}", tops.size(), worst);
    return o;
}

// ==== 7. Reduction identities ====

Outcome identities() {
    Outcome o;
    const auto fx = fig4_fixture();
    AdmmConfig cfg;
    cfg.max_iter = 200;
    cfg.debug_identities = true;
    cfg.certify_every = 0;
    cfg.eps_pri = cfg.eps_dual = 1e-12;
    const auto r = admm_synthesis(fx.sys, fx.topo_k, cfg);
    double worst = 0.0;
    for (const auto& row : r.trace) worst = std::max(worst, row.identity_drift);
    o.require(r.trace.size() == 200u, fmt::format("{} rounds run", r.trace.size()));
    o.require(worst <= 1e-9, fmt::format("drift {:.2e}", worst));
    if (o.pass) o.detail = fmt::format("200 rounds, max drift {:.1e}", worst);
    return o;
}

// ==== 8. ADMM end to end ====

Outcome admm_end_to_end() {
    Outcome o;
    const auto fx = fig4_fixture();
    AdmmConfig cfg;
    cfg.rho = 1.0;
    cfg.max_iter = 3000;
    cfg.eps_pri = cfg.eps_dual = 1e-4;
    const auto a = admm_synthesis(fx.sys, fx.topo_k, cfg);
    const auto b = admm_synthesis(fx.sys, fx.topo_k, cfg);
    o.require(a.converged, fmt::format("not converged in {} rounds", a.iterations));
    const auto& last = a.trace.back();
    const auto [lo, hi] = std::minmax_element(last.gamma_tilde.begin(), last.gamma_tilde.end());
    const double spread = (*hi - *lo) / *hi;
    o.require(spread <= 1e-4, fmt::format("gamma~ spread {:.2e}", spread));
    o.require(last.r <= 1e-4 && last.d <= 1e-4, fmt::format("residuals r {:.2e}, d {:.2e}", last.r, last.d));
    check_sound(o, a.synthesis, "admm");
    bool same = a.trace.size() == b.trace.size() && a.synthesis.gamma == b.synthesis.gamma;
    for (std::size_t k = 0; same && k < a.trace.size(); ++k)
        same = a.trace[k].gamma_tilde == b.trace[k].gamma_tilde && a.trace[k].r == b.trace[k].r &&
               a.trace[k].d == b.trace[k].d;
    o.require(same, "two runs differ");
    if (o.pass)
        o.detail = fmt::format("{} rounds, spread {:.1e}, gamma {:.6g}, hinf {:.6g}", a.iterations, spread,
                               a.synthesis.gamma, a.synthesis.hinf);
    return o;
}

// ==== 9. Two-subsystem fixed point ====

Outcome kkt_cross_check() {
    Outcome o;
    MsdConfig c;
    c.topo = path_topology(2);
    c.seed = kFig4Seed;
    const auto g = generate_msd(c);
    AdmmConfig cfg;
    cfg.eps_pri = cfg.eps_dual = 1e-5;
    const auto r = admm_synthesis(g, g.topo, cfg);
    const double ref = decomposed_synthesis_hetero(g, g.topo).gamma;
    o.require(r.converged, "not converged");
    o.require(rel(r.gamma_consensus, ref) <= 1e-4,
              fmt::format("consensus gamma {:.8g} vs centralized {:.8g}", r.gamma_consensus, ref));
    if (o.pass) o.detail = fmt::format("rel. gap {:.1e}", rel(r.gamma_consensus, ref));
    return o;
}

// ==== 10. Program counts ====

Outcome program_counts() {
    Outcome o;
    int rows = 0;
    auto expect = [&](bool ok, const std::string& what) {
        o.require(ok, what);
        ++rows;
    };
    for (const std::string topo : {"complete", "ring"})
        for (int n : {2, 4, 8}) {
            const auto het = fixture::msd_alphabeta(topo, n, n, 1, 10).sys;
            const int ne = static_cast<int>(het.topo.n_edges());
            const Topology comm = symmetrize(het.topo);
            const std::string at = fmt::format("{} N={}", topo, n);
            // state 2, input 1, disturbance 1, performance 3, one closed-loop slot of size 2 per neighbor
            auto slot_total = [&](int i) { return 6 + 2 * static_cast<int>(comm.neighbors(i).size()); };

            const auto c = scaling_report("central", het, het.topo);
            int central_size = 0;
            for (int i = 1; i <= n; ++i) central_size += slot_total(i);
            expect(c.nominal == 1 && c.multiplier == 1 && c.nominal_sizes == std::vector<int>{central_size},
                   "central " + at);

            const auto d = scaling_report("decomposed", het, het.topo);
            bool sizes = static_cast<int>(d.nominal_sizes.size()) == n;
            for (int i = 0; sizes && i < n; ++i) sizes = d.nominal_sizes[i] == slot_total(i + 1);
            expect(d.nominal == n && d.multiplier == ne && sizes && d.n_vars == 1 + 5 * n + 12 * ne,
                   "decomposed " + at);

            for (int i = 0; i < n; ++i) {
                const auto a = scaling_report("distributed", het, het.topo, {.agent = i});
                expect(a.nominal == 1 && a.multiplier == static_cast<int>(comm.neighbors(i + 1).size()),
                       fmt::format("distributed agent {} {}", i + 1, at));
            }

            for (int alpha : {1, 2, 3}) {
                if (alpha > n) continue;
                for (int beta : {1, 2}) {
                    if (beta == 2 && n < 4) continue;
                    const auto inst = fixture::msd_alphabeta(topo, n, alpha, beta, 10);
                    ScalingOptions so;
                    so.classes = inst.cls;
                    const auto r = scaling_report("alphabeta", inst.sys, inst.sys.topo, so);
                    // two extreme eigenvalues per class of a real symmetric pattern
                    expect(r.nominal == alpha && r.multiplier == 2 * beta,
                           fmt::format("alphabeta alpha={} beta={} {}", alpha, beta, at));
                }
            }
            const auto homo = fixture::msd_alphabeta(topo, n, 1, 1, 10).sys;
            const auto h = scaling_report("homogeneous", homo, homo.topo);
            expect(h.nominal == 1 && h.multiplier == 2 && h.n_vars == 18, "homogeneous " + at);
        }
    if (o.pass) o.detail = fmt::format("{} rows exact", rows);
    return o;
}

// ==== 11. Residual formulas ====

Outcome residual_formulas() {
    Outcome o;
    ConsensusSelections cs;
    cs.sel = {{{0, 1}}, {{0, 1}}};
    cs.neighbors = {{2}, {1}};
    std::vector<AgentState> ag(2);
    const Vec y1{{1.5, -0.25, 7.0}}, y2{{0.5, 0.75, -3.0}}, p1{{1.0, 0.0, 2.0}}, p2{{0.25, 0.5, 1.0}};
    ag[0].y = y1;
    ag[0].y_prev = p1;
    ag[1].id = 1;
    ag[1].y = y2;
    ag[1].y_prev = p2;
    const Residuals r = residuals(ag, cs);
    // r_12 = y1 - y2 = -r_21 and d_12 = d_21 = (y1 - p1) + (y2 - p2) on the shared entries, each halved
    double rr = 0.0, dd = 0.0;
    for (int j = 0; j < 2; ++j) {
        const double h = 0.5 * (y1(j) - y2(j));
        const double g = 0.5 * ((y1(j) - p1(j)) + (y2(j) - p2(j)));
        rr += 2 * h * h;
        dd += 2 * g * g;
    }
    o.require(r.r == std::sqrt(rr), fmt::format("r {} vs {}", r.r, std::sqrt(rr)));
    o.require(r.d == std::sqrt(dd), fmt::format("d {} vs {}", r.d, std::sqrt(dd)));
    o.require(r.edges.size() == 2u && r.edges[0].r == std::sqrt(rr / 2) && r.edges[1].d == std::sqrt(dd / 2),
              "per-edge values");
    if (o.pass) o.detail = "exact";
    return o;
}

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::err);
    const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
        {1, norm_invariance}, {2, lft_equivalence}, {3, soundness},       {4, ordering},
        {5, special_classes}, {6, eigen_path},      {7, identities},      {8, admm_end_to_end},
        {9, kkt_cross_check}, {10, program_counts}, {11, residual_formulas},
    };
    int failures = 0;
    for (const auto& [id, run] : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = fmt::format("exception: {}", e.what());
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        fmt::print("{} criterion {:2d} ({:.1f} s): {}\n", o.pass ? "PASS" : "FAIL", id, s, o.detail);
        std::fflush(stdout);
        if (!o.pass && !o.known_limit) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
