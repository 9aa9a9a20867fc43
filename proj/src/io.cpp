#include "netsyn/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/core.h>

#include "netsyn/errors.hpp"

namespace netsyn {

namespace {

constexpr int kVersion = 1;

const json& field(const json& j, const char* name) {
    if (!j.is_object() || !j.contains(name)) throw InvalidArgument(fmt::format("missing field '{}'", name));
    return j.at(name);
}

template <class T>
T get_as(const json& j, const char* name) {
    try {
        return field(j, name).get<T>();
    } catch (const json::exception& e) {
        throw InvalidArgument(fmt::format("field '{}': {}", name, e.what()));
    }
}

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

double number_from(const json& j) { return j.is_null() ? kInf : j.get<double>(); }

void check_format(const json& j, const char* format) {
    if (get_as<std::string>(j, "format") != format)
        throw InvalidArgument(fmt::format("expected format '{}'", format));
    const int v = get_as<int>(j, "version");
    if (v != kVersion) throw InvalidArgument(fmt::format("unsupported {} version {}", format, v));
}

Edge edge_from(const json& e) {
    if (!e.is_array() || e.size() != 2) throw InvalidArgument("an edge is a pair [i, k]");
    return {e[0].get<int>(), e[1].get<int>()};
}

json edges_to_json(const std::vector<Edge>& es) {
    json a = json::array();
    for (const auto& [i, k] : es) a.push_back({i, k});
    return a;
}

std::vector<Edge> edges_from(const json& a) {
    if (!a.is_array()) throw InvalidArgument("edge list must be an array");
    std::vector<Edge> out;
    for (const auto& e : a) out.push_back(edge_from(e));
    return out;
}

struct NamedBlock {
    const char* name;
    Mat SubsystemSS::*m;
};

const NamedBlock kBlocks[] = {
    {"A", &SubsystemSS::A},     {"Bu", &SubsystemSS::Bu},   {"Bw", &SubsystemSS::Bw},
    {"Bp", &SubsystemSS::Bp},   {"Cy", &SubsystemSS::Cy},   {"Cz", &SubsystemSS::Cz},
    {"Cq", &SubsystemSS::Cq},   {"Dyw", &SubsystemSS::Dyw}, {"Dyp", &SubsystemSS::Dyp},
    {"Dzu", &SubsystemSS::Dzu}, {"Dzw", &SubsystemSS::Dzw}, {"Dzp", &SubsystemSS::Dzp},
    {"Dqw", &SubsystemSS::Dqw},
};

}  // namespace

// ==== Building blocks ====

json matrix_to_json(const Mat& m) {
    json d = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) d.push_back(m(r, c));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", d}};
}

Mat matrix_from_json(const json& j) {
    const int r = get_as<int>(j, "rows"), c = get_as<int>(j, "cols");
    const json& d = field(j, "data");
    if (r < 0 || c < 0) throw InvalidArgument("negative matrix dimension");
    if (!d.is_array() || d.size() != static_cast<std::size_t>(r) * c)
        throw InvalidArgument(fmt::format("matrix data must hold {}x{} values", r, c));
    Mat m(r, c);
    for (int a = 0; a < r; ++a)
        for (int b = 0; b < c; ++b) {
            const json& v = d[static_cast<std::size_t>(a) * c + b];
            if (!v.is_number()) throw InvalidArgument("matrix entries must be numbers");
            m(a, b) = v.get<double>();
        }
    return m;
}

json topology_to_json(const Topology& t) { return {{"n", t.n_nodes()}, {"edges", edges_to_json(t.edges())}}; }

Topology topology_from_json(const json& j) {
    return Topology::from_edges(get_as<int>(j, "n"), edges_from(field(j, "edges")));
}

// ==== System file ====

json system_to_json(const SystemFile& f) {
    const auto& g = f.sys;
    json subs = json::array();
    for (const auto& s : g.subs) {
        json js;
        for (const auto& b : kBlocks) js[b.name] = matrix_to_json(s.*(b.m));
        json slots = json::array();
        for (const auto& sl : s.slots) slots.push_back({sl.label, sl.dim_p, sl.dim_q});
        js["slots"] = slots;
        subs.push_back(js);
    }
    json p = json::array();
    for (int c = 0; c < g.P.outerSize(); ++c)
        for (SpMat::InnerIterator it(g.P, c); it; ++it) p.push_back({it.row(), it.col(), it.value()});
    json j = {{"format", "netsyn-system"},
              {"version", kVersion},
              {"topology", topology_to_json(g.topo)},
              {"edge_form", g.edge_form},
              {"subsystems", subs},
              {"P", {{"rows", g.P.rows()}, {"cols", g.P.cols()}, {"entries", p}}}};
    if (f.topo_k) j["controller_topology"] = topology_to_json(*f.topo_k);
    if (f.classes) {
        j["groups"] = f.classes->groups;
        std::vector<Mat> lam;
        try {
            lam = compress_alphabeta(g, *f.classes).Lambda;
        } catch (const InvalidArgument&) {
        }
        json cl = json::array();
        for (std::size_t c = 0; c < f.classes->classes.size(); ++c) {
            json e = {{"edges", edges_to_json(f.classes->classes[c])}};
            if (c < lam.size()) {
                json rows = json::array();
                for (Eigen::Index r = 0; r < lam[c].rows(); ++r) {
                    json row = json::array();
                    for (Eigen::Index k = 0; k < lam[c].cols(); ++k) row.push_back(lam[c](r, k));
                    rows.push_back(row);
                }
                e["pattern"] = rows;
            }
            cl.push_back(e);
        }
        j["classes"] = cl;
    }
    if (f.augmentation) {
        const auto& a = *f.augmentation;
        j["augmentation"] = {{"S", matrix_to_json(a.S)},
                             {"T", matrix_to_json(a.T)},
                             {"MQ", matrix_to_json(a.MQ)},
                             {"MR", matrix_to_json(a.MR)}};
    }
    if (!f.generator.is_null()) j["generator"] = f.generator;
    return j;
}

SystemFile system_from_json(const json& j) {
    try {
        check_format(j, "netsyn-system");
        SystemFile f;
        auto& g = f.sys;
        g.topo = topology_from_json(field(j, "topology"));
        g.edge_form = j.value("edge_form", true);
        const json& subs = field(j, "subsystems");
        if (!subs.is_array() || static_cast<int>(subs.size()) != g.topo.n_nodes())
            throw InvalidArgument("'subsystems' must list one entry per node");
        for (std::size_t i = 0; i < subs.size(); ++i) {
            SubsystemSS s;
            try {
                for (const auto& b : kBlocks) s.*(b.m) = matrix_from_json(field(subs[i], b.name));
                for (const auto& sl : field(subs[i], "slots")) {
                    if (!sl.is_array() || sl.size() != 3) throw InvalidArgument("a slot is [label, dim_p, dim_q]");
                    s.slots.push_back({sl[0].get<int>(), sl[1].get<int>(), sl[2].get<int>()});
                }
                s.validate();
            } catch (const InvalidArgument& e) {
                throw InvalidArgument(fmt::format("subsystem {}: {}", i + 1, e.what()));
            }
            g.subs.push_back(std::move(s));
        }
        const json& p = field(j, "P");
        const int pr = get_as<int>(p, "rows"), pc = get_as<int>(p, "cols");
        const ChannelLayout l = g.layout();
        if (pr != l.n_p() || pc != l.n_q())
            throw InvalidArgument(fmt::format("P is {}x{}, the channels need {}x{}", pr, pc, l.n_p(), l.n_q()));
        std::vector<Eigen::Triplet<double>> trip;
        for (const auto& e : field(p, "entries")) {
            if (!e.is_array() || e.size() != 3) throw InvalidArgument("a P entry is [row, col, value]");
            const int r = e[0].get<int>(), c = e[1].get<int>();
            if (r < 0 || r >= pr || c < 0 || c >= pc) throw InvalidArgument("P entry out of range");
            trip.emplace_back(r, c, e[2].get<double>());
        }
        g.P = SpMat(pr, pc);
        g.P.setFromTriplets(trip.begin(), trip.end());
        g.validate();
        if (j.contains("controller_topology")) {
            f.topo_k = topology_from_json(j.at("controller_topology"));
            if (f.topo_k->n_nodes() != g.n()) throw InvalidArgument("controller topology node count differs");
        }
        if (j.contains("classes") || j.contains("groups")) {
            ClassDescriptor c;
            c.groups = get_as<std::vector<std::vector<int>>>(j, "groups");
            for (const auto& cl : field(j, "classes")) c.classes.push_back(edges_from(field(cl, "edges")));
            c.validate(g.topo);
            f.classes = std::move(c);
        }
        if (j.contains("augmentation")) {
            const json& a = j.at("augmentation");
            f.augmentation = make_augmentation(matrix_from_json(field(a, "S")), matrix_from_json(field(a, "T")),
                                               matrix_from_json(field(a, "MQ")), matrix_from_json(field(a, "MR")));
        }
        if (j.contains("generator")) f.generator = j.at("generator");
        return f;
    } catch (const json::exception& e) {
        throw InvalidArgument(fmt::format("malformed system file: {}", e.what()));
    }
}

// ==== Gains ====

json gains_to_json(const StaticGains& g) {
    json local = json::array();
    for (const auto& k : g.local) local.push_back(matrix_to_json(k));
    json edge = json::array();
    for (const auto& [e, f] : g.edge) edge.push_back({{"edge", {e.first, e.second}}, {"F", matrix_to_json(f)}});
    return {{"local", local}, {"edge", edge}};
}

StaticGains gains_from_json(const json& j) {
    try {
        StaticGains g;
        for (const auto& k : field(j, "local")) g.local.push_back(matrix_from_json(k));
        for (const auto& e : field(j, "edge")) g.edge[edge_from(field(e, "edge"))] = matrix_from_json(field(e, "F"));
        return g;
    } catch (const json::exception& e) {
        throw InvalidArgument(fmt::format("malformed gains: {}", e.what()));
    }
}

// ==== Results ====

json result_to_json(const SynthesisResult& r) {
    json xs = json::array();
    for (const auto& x : r.X) xs.push_back(matrix_to_json(x));
    json ms = json::array();
    for (const auto& m : r.multipliers.values) ms.push_back(matrix_to_json(m));
    const auto& s = r.stats;
    return {{"format", "netsyn-result"},
            {"version", kVersion},
            {"method", r.method},
            {"gamma", number(r.gamma)},
            {"certified_gamma", number(r.certified_gamma)},
            {"hinf", number(r.hinf)},
            {"worst_violation", number(r.worst_violation)},
            {"diagnostic", r.diagnostic},
            {"controller_topology", topology_to_json(r.topo_k)},
            {"gains", gains_to_json(r.gains)},
            {"certificate",
             {{"X", xs}, {"multipliers", {{"structure", to_string(r.multipliers.structure)}, {"values", ms}}}}},
            {"stats",
             {{"nominal_lmis", s.nominal_lmis},
              {"multiplier_lmis", s.multiplier_lmis},
              {"nominal_sizes", s.nominal_sizes},
              {"multiplier_sizes", s.multiplier_sizes},
              {"n_vars", s.n_vars},
              {"iterations", s.iterations},
              {"seconds", s.seconds}}}};
}

json admm_summary_to_json(const AdmmResult& r, const std::string& trace_file) {
    return {{"converged", r.converged},
            {"iterations", r.iterations},
            {"gamma_consensus", number(r.gamma_consensus)},
            {"messages", r.messages},
            {"used_fallback", r.used_fallback},
            {"max_identity_drift", r.max_identity_drift},
            {"nominal_assembled", r.nominal_assembled},
            {"multiplier_assembled", r.multiplier_assembled},
            {"trace_file", trace_file}};
}

// ==== ADMM trace ====

json trace_to_json(const std::vector<AdmmTraceRow>& rows) {
    json a = json::array();
    for (const auto& r : rows)
        a.push_back({{"kappa", r.kappa},
                     {"gamma_tilde", r.gamma_tilde},
                     {"r", r.r},
                     {"d", r.d},
                     {"solve_seconds", r.solve_seconds}});
    const int n = rows.empty() ? 0 : static_cast<int>(rows.front().gamma_tilde.size());
    return {{"format", "netsyn-trace"}, {"version", kVersion}, {"agents", n}, {"rows", a}};
}

std::vector<AdmmTraceRow> trace_from_json(const json& j) {
    try {
        check_format(j, "netsyn-trace");
        const int n = get_as<int>(j, "agents");
        std::vector<AdmmTraceRow> out;
        for (const auto& r : field(j, "rows")) {
            AdmmTraceRow row;
            row.kappa = get_as<int>(r, "kappa");
            row.gamma_tilde = get_as<std::vector<double>>(r, "gamma_tilde");
            row.r = get_as<double>(r, "r");
            row.d = get_as<double>(r, "d");
            row.solve_seconds = get_as<std::vector<double>>(r, "solve_seconds");
            if (static_cast<int>(row.gamma_tilde.size()) != n || static_cast<int>(row.solve_seconds.size()) != n)
                throw InvalidArgument(fmt::format("trace row {} does not hold {} agents", row.kappa, n));
            out.push_back(std::move(row));
        }
        return out;
    } catch (const json::exception& e) {
        throw InvalidArgument(fmt::format("malformed trace: {}", e.what()));
    }
}

std::string trace_csv(const std::vector<AdmmTraceRow>& rows) {
    const std::size_t n = rows.empty() ? 0 : rows.front().gamma_tilde.size();
    std::ostringstream os;
    os << "kappa";
    for (std::size_t i = 1; i <= n; ++i) os << ",gamma_tilde_" << i;
    os << ",r,d";
    for (std::size_t i = 1; i <= n; ++i) os << ",solve_seconds_" << i;
    os << '\n';
    for (const auto& r : rows) {
        os << r.kappa;
        for (double g : r.gamma_tilde) os << fmt::format(",{:.17g}", g);
        os << fmt::format(",{:.17g},{:.17g}", r.r, r.d);
        for (double s : r.solve_seconds) os << fmt::format(",{:.6f}", s);
        os << '\n';
    }
    return os.str();
}

// ==== Files ====

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument(fmt::format("cannot read '{}'", path));
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InvalidArgument(fmt::format("'{}' is not valid JSON: {}", path, e.what()));
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument(fmt::format("cannot write '{}'", path));
    out << text;
    if (!out) throw InvalidArgument(fmt::format("write to '{}' failed", path));
}

}  // namespace netsyn
