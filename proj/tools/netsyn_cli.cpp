#include <iostream>
#include <numeric>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "netsyn/admm.hpp"
#include "netsyn/analysis.hpp"
#include "netsyn/bench.hpp"
#include "netsyn/decomposed.hpp"
#include "netsyn/errors.hpp"
#include "netsyn/io.hpp"
#include "netsyn/synthesis.hpp"

using namespace netsyn;

namespace {

enum Exit { kOk = 0, kInfeasible = 1, kUsage = 2, kNumerical = 3 };

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") std::cout << text;
    else write_text_file(path, text);
}

// ==== generate ====

struct GenerateArgs {
    int n = 8;
    std::uint64_t seed = 1;
    std::string topology = "fig4";
    std::string channels = "compact";
    bool homogeneous = false;
    std::string out;
};

int run_generate(const GenerateArgs& a, bool n_given) {
    MsdConfig c;
    c.seed = a.seed;
    if (a.topology == "fig4") {
        if (n_given && a.n != 8) throw InvalidArgument("the fig4 topology has 8 subsystems");
        c.topo = fig4_topology();
    } else if (a.topology == "ring") {
        c.topo = ring_topology(a.n);
    } else if (a.topology == "complete") {
        c.topo = complete_topology(a.n);
    } else if (a.topology == "path") {
        c.topo = path_topology(a.n);
    } else {
        throw InvalidArgument(fmt::format("unknown topology '{}'", a.topology));
    }
    if (a.n < 1) throw InvalidArgument("--n must be positive");
    if (a.channels == "full") c.channels = MsdChannels::Full;
    else if (a.channels != "compact") throw InvalidArgument(fmt::format("unknown channel realization '{}'", a.channels));
    SystemFile f;
    if (a.homogeneous) {
        c.groups = {std::vector<int>(c.topo.n_nodes())};
        std::iota(c.groups[0].begin(), c.groups[0].end(), 1);
        c.shared_coupling = true;
        f.classes = homogeneous_classes(c.topo);
    }
    f.sys = generate_msd(c);
    f.topo_k = c.topo;
    f.generator = {{"kind", "msd"},
                   {"n", c.topo.n_nodes()},
                   {"seed", a.seed},
                   {"topology", a.topology},
                   {"channels", a.channels},
                   {"homogeneous", a.homogeneous}};
    emit(a.out, system_to_json(f).dump(1) + "\n");
    return kOk;
}

// ==== synthesize ====

struct SynthesizeArgs {
    std::string system;
    std::string method = "decomposed";
    std::string structure = "per-subsystem";
    std::string out;
    std::string trace;
    double rho = 1.0;
    int max_iter = 3000;
    double eps_pri = -1.0, eps_dual = -1.0;
    int threads = 1;
};

int run_synthesize(const SynthesizeArgs& a) {
    const SystemFile f = system_from_json(read_json_file(a.system));
    const Topology& tk = f.controller_topology();
    SynthesisResult r;
    json admm;
    if (a.method == "central") {
        SynthesisOptions o;
        o.structure = multiplier_structure_from_string(a.structure);
        r = hinf_state_feedback_central(f.sys, tk, o);
    } else if (a.method == "decomposed") {
        r = decomposed_synthesis_hetero(f.sys, tk);
    } else if (a.method == "homogeneous") {
        r = decomposed_synthesis_homogeneous(f.sys);
    } else if (a.method == "alphabeta") {
        if (!f.classes) throw InvalidArgument("the alphabeta method needs 'groups' and 'classes' in the system file");
        r = decomposed_synthesis_alphabeta(f.sys, *f.classes);
    } else if (a.method == "admm") {
        AdmmConfig cfg;
        cfg.rho = a.rho;
        cfg.max_iter = a.max_iter;
        cfg.eps_pri = a.eps_pri;
        cfg.eps_dual = a.eps_dual;
        cfg.threads = a.threads;
        const AdmmResult res = admm_synthesis(f.sys, tk, cfg);
        std::string trace = a.trace;
        if (trace.empty() && !a.out.empty() && a.out != "-") trace = a.out + ".trace.json";
        if (!trace.empty()) write_text_file(trace, trace_to_json(res.trace).dump() + "\n");
        admm = admm_summary_to_json(res, trace);
        if (trace.empty()) admm["trace"] = trace_to_json(res.trace);
        r = res.synthesis;
    } else {
        throw InvalidArgument(fmt::format("unknown method '{}'", a.method));
    }
    json j = result_to_json(r);
    if (!admm.is_null()) j["admm"] = admm;
    emit(a.out, j.dump(1) + "\n");
    spdlog::info("{}: gamma = {:.6g}, closed-loop H-infinity norm = {:.6g}", r.method, r.gamma, r.hinf);
    return kOk;
}

// ==== analyze ====

struct AnalyzeArgs {
    std::string system, gains, out;
    bool certificate = false;
};

int run_analyze(const AnalyzeArgs& a) {
    const SystemFile f = system_from_json(read_json_file(a.system));
    const json gj = read_json_file(a.gains);
    // a result file carries its gains and controller graph
    const StaticGains k = gains_from_json(gj.contains("gains") ? gj.at("gains") : gj);
    const Topology tk = gj.contains("controller_topology") ? topology_from_json(gj.at("controller_topology"))
                                                           : f.controller_topology();
    const ClosedLoopSS clp = close_with_gains(f.sys, tk, k);
    const StateSpace flat = flatten(clp);
    const double h = hinf_norm(flat);
    json j = {{"hinf", std::isfinite(h) ? json(h) : json(nullptr)},
              {"stable", is_hurwitz(flat.A)},
              {"spectral_abscissa", spectral_abscissa(flat.A)}};
    if (a.certificate && std::isfinite(h)) {
        AnalysisOptions o;
        o.structure = MultiplierStructure::FullPerEdge;
        o.decomposed = true;
        const AnalysisResult r = fbsp_analysis(adjoint(clp), o);
        j["certified_gamma"] = r.gamma;
    }
    emit(a.out, j.dump(1) + "\n");
    return kOk;
}

// ==== bench ====

struct BenchArgs {
    std::string sweep = "N";
    int max = 6;
    std::uint64_t seed = 1;
    std::string topology = "complete";
    bool no_solve = false;
    std::string out;
};

int run_bench(const BenchArgs& a) {
    SweepOptions o;
    o.kind = sweep_kind_from_string(a.sweep);
    o.max = a.max;
    o.seed = a.seed;
    o.topology = a.topology;
    o.solve = !a.no_solve;
    emit(a.out, sweep_csv(run_sweep(o)));
    return kOk;
}

// ==== export-plot ====

int run_export(const std::string& in, const std::string& out) {
    const json j = read_json_file(in);
    // accepts a trace file or a result file with an embedded or referenced trace
    json t = j;
    if (j.value("format", "") == "netsyn-result") {
        if (!j.contains("admm")) throw InvalidArgument("result file holds no ADMM run");
        const json& s = j.at("admm");
        if (s.contains("trace")) t = s.at("trace");
        else t = read_json_file(s.at("trace_file").get<std::string>());
    }
    emit(out, trace_csv(trace_from_json(t)));
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributed H-infinity synthesis for interconnected systems"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Log progress");

    GenerateArgs ga;
    auto* gen = app.add_subcommand("generate", "Write a seeded mass-spring-damper network as system JSON");
    auto* n_opt = gen->add_option("--n", ga.n, "Number of subsystems");
    gen->add_option("--seed", ga.seed, "RNG seed");
    gen->add_option("--topology", ga.topology, "fig4 | ring | complete | path");
    gen->add_option("--channels", ga.channels, "compact | full");
    gen->add_flag("--homogeneous", ga.homogeneous, "One parameter set for all subsystems and edges");
    gen->add_option("-o,--out", ga.out, "Output file (default stdout)");

    SynthesizeArgs sa;
    auto* syn = app.add_subcommand("synthesize", "Synthesize a distributed state-feedback controller");
    syn->add_option("--system", sa.system, "System JSON")->required();
    syn->add_option("--method", sa.method, "central | decomposed | homogeneous | alphabeta | admm");
    syn->add_option("--structure", sa.structure, "Multiplier structure of the central method");
    syn->add_option("-o,--out", sa.out, "Result JSON (default stdout)");
    syn->add_option("--trace", sa.trace, "ADMM trace JSON (default <out>.trace.json)");
    syn->add_option("--rho", sa.rho, "ADMM penalty");
    syn->add_option("--max-iter", sa.max_iter, "ADMM iteration budget");
    syn->add_option("--eps-pri", sa.eps_pri, "ADMM primal tolerance (default 1e-4 sqrt(consensus dimension))");
    syn->add_option("--eps-dual", sa.eps_dual, "ADMM dual tolerance (default 1e-4 sqrt(consensus dimension))");
    syn->add_option("--threads", sa.threads, "ADMM worker threads");

    AnalyzeArgs aa;
    auto* ana = app.add_subcommand("analyze", "H-infinity norm of a system closed with given gains");
    ana->add_option("--system", aa.system, "System JSON")->required();
    ana->add_option("--gains", aa.gains, "Result JSON or gains JSON")->required();
    ana->add_flag("--certificate", aa.certificate, "Also run the decomposed multiplier analysis");
    ana->add_option("-o,--out", aa.out, "Output JSON (default stdout)");

    BenchArgs ba;
    auto* ben = app.add_subcommand("bench", "Scaling sweep as CSV");
    ben->add_option("--sweep", ba.sweep, "N | alpha | neighbors");
    ben->add_option("--max", ba.max, "Largest N, alpha or neighbor count");
    ben->add_option("--seed", ba.seed, "RNG seed");
    ben->add_option("--topology", ba.topology, "complete | ring (N sweep)");
    ben->add_flag("--no-solve", ba.no_solve, "Count only, skip the solves");
    ben->add_option("-o,--out", ba.out, "Output CSV (default stdout)");

    std::string trace_in, csv_out;
    auto* exp = app.add_subcommand("export-plot", "Convert an ADMM trace to CSV");
    exp->add_option("--trace", trace_in, "Trace JSON or ADMM result JSON")->required();
    exp->add_option("-o,--out", csv_out, "Output CSV (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }
    spdlog::set_default_logger(spdlog::stderr_color_mt("netsyn"));
    spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);

    try {
        if (gen->parsed()) return run_generate(ga, n_opt->count() > 0);
        if (syn->parsed()) return run_synthesize(sa);
        if (ana->parsed()) return run_analyze(aa);
        if (ben->parsed()) return run_bench(ba);
        if (exp->parsed()) return run_export(trace_in, csv_out);
    } catch (const Infeasible& e) {
        fmt::print(stderr, "infeasible: {}\n", e.what());
        return kInfeasible;
    } catch (const InvalidArgument& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kUsage;
    } catch (const NumericalFailure& e) {
        fmt::print(stderr, "numerical failure: {}\n", e.what());
        return kNumerical;
    } catch (const ConsistencyError& e) {
        fmt::print(stderr, "internal consistency check failed: {}\n", e.what());
        return kNumerical;
    }
    return kUsage;
}
