#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "netsyn/admm.hpp"
#include "netsyn/decomposed.hpp"
#include "netsyn/synthesis.hpp"
#include "netsyn/sysmodel.hpp"

namespace netsyn {

using json = nlohmann::json;

// ==== System file ====
// {"format": "netsyn-system", "version": 1,
//  "topology": {"n": N, "edges": [[i,k], ...]},          plant graph
//  "controller_topology": {...},                          optional, defaults to the plant graph
//  "edge_form": true,
//  "subsystems": [{"A": M, "Bu": M, ..., "slots": [[label, dim_p, dim_q], ...]}, ...],
//  "P": {"rows": r, "cols": c, "entries": [[row, col, value], ...]},
//  "groups": [[1,2], ...], "classes": [{"pattern": [[...]], "edges": [[i,k], ...]}, ...],   optional
//  "augmentation": {"S": M, "T": M, "MQ": M, "MR": M},    optional
//  "generator": {...}}                                    optional, informational
// A matrix M is {"rows": r, "cols": c, "data": [row-major values]}. "pattern" is written for
// reference and ignored on input.
struct SystemFile {
    InterconnectedSystem sys;
    std::optional<Topology> topo_k;
    std::optional<ClassDescriptor> classes;
    std::optional<PerformanceAugmentation> augmentation;
    json generator;  // null when absent

    const Topology& controller_topology() const { return topo_k ? *topo_k : sys.topo; }
};

json matrix_to_json(const Mat& m);
Mat matrix_from_json(const json& j);
json topology_to_json(const Topology& t);
Topology topology_from_json(const json& j);

json system_to_json(const SystemFile& f);
// Malformed input is an InvalidArgument naming the offending field.
SystemFile system_from_json(const json& j);

json gains_to_json(const StaticGains& g);
StaticGains gains_from_json(const json& j);

// ==== Results ====
// {"format": "netsyn-result", "version": 1, "method", "gamma", "certified_gamma", "hinf",
//  "worst_violation", "diagnostic", "controller_topology", "gains": {"local": [M...],
//  "edge": [{"edge": [i,k], "F": M}]}, "certificate": {"X": [M...], "multipliers":
//  {"structure": s, "values": [M...]}}, "stats": {...}, "admm": {...}}
// Non-finite numbers are written as null.
json result_to_json(const SynthesisResult& r);
json admm_summary_to_json(const AdmmResult& r, const std::string& trace_file);

// ==== ADMM trace ====
// JSON: {"format": "netsyn-trace", "version": 1, "agents": N, "rows": [{"kappa", "gamma_tilde": [...],
// "r", "d", "solve_seconds": [...]}, ...]}
json trace_to_json(const std::vector<AdmmTraceRow>& rows);
std::vector<AdmmTraceRow> trace_from_json(const json& j);
// CSV columns: kappa, gamma_tilde_1..N, r, d, solve_seconds_1..N.
std::string trace_csv(const std::vector<AdmmTraceRow>& rows);

// ==== Files ====
// Parse errors and unreadable files are InvalidArgument.
json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace netsyn
