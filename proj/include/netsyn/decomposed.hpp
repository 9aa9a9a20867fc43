#pragma once

#include <string>
#include <vector>

#include "netsyn/graph.hpp"
#include "netsyn/lmi.hpp"
#include "netsyn/synthesis.hpp"
#include "netsyn/sysmodel.hpp"

namespace netsyn {

// ==== Edge pairing ====
// Slot order of an edge-form layout is (i, k) for i = 1..N and k in neighbors(i). The pairing order
// walks that order and, on the first unseen pair, places (i,k) followed by (k,i).
struct EdgePairing {
    std::vector<Edge> order;  // directed edges in paired order
    std::vector<int> perm;    // perm[r] = canonical slot index placed at position r
    SpMat Tp, Tq;             // block permutations acting on the stacked p and q
};

// Errors: a slot without its mirror slot (asymmetric edge set).
EdgePairing edge_pairing_permutation(const ChannelLayout& l);

// Rows pick whole blocks: block r of the result is block perm[r] of the input.
SpMat block_permutation(const std::vector<int>& perm, const std::vector<int>& dims);

// ==== Edge conditions ====
// Blocks of the pair (i,k), (k,i): p = [p_ik; p_ki], q = [q_ik; q_ki], P-hat = [[0, P_ik],[P_ki, 0]].
struct EdgeCondition {
    Edge edge;
    Mat Qik, Sik, Rik, Qki, Ski, Rki;
    Mat Pik, Pki;

    Mat p_hat() const;
    // [P-hat; I]' [Q-hat S-hat; S-hat' R-hat] [P-hat; I]
    Mat matrix() const;
};

// [[Q_ik + R_ki, S_ik + S_ki'],[S_ki + S_ik', Q_ki + R_ik]]. Errors unless P_ik and P_ki are identities.
Mat ideal_edge_condition(const EdgeCondition& e);
// lambda_min(F) >= eps.
bool edge_condition_holds(const Mat& f, double eps);

// Numeric pair condition of slot (i, k) (i 0-based, k a label) from multiplier values.
EdgeCondition edge_condition_values(const MultiplierVars& m, const SpMat& P, const Vec& y, int i, int k);

// ==== Heterogeneous synthesis ====
// N per-subsystem nominal LMIs and one multiplier LMI per directed edge, solved as one program.
SynthesisResult decomposed_synthesis_hetero(const InterconnectedSystem& g, const Topology& topo_k,
                                            const SynthesisOptions& opt = {});
// Same with one (Q, S, R) shared by every edge.
SynthesisResult decomposed_synthesis_identical(const InterconnectedSystem& g, const Topology& topo_k,
                                               const SynthesisOptions& opt = {});

// ==== Classes ====
// Groups of identical subsystems and classes of identical interconnections. Classes list directed
// plant edges; every plant edge belongs to exactly one class.
struct ClassDescriptor {
    std::vector<std::vector<int>> groups;  // 1-based nodes
    std::vector<std::vector<Edge>> classes;

    int alpha() const { return static_cast<int>(groups.size()); }
    int beta() const { return static_cast<int>(classes.size()); }
    int n_nodes() const;
    std::vector<int> group_of() const;  // per node, 0-based group
    // Group offsets when groups are contiguous ranges; empty otherwise.
    std::vector<int> theta() const;
    // Validates the partition of nodes over n nodes and of the edges of topo.
    void validate(const Topology& topo) const;
};

// One group and one class holding every edge.
ClassDescriptor homogeneous_classes(const Topology& topo);
// One group per node and one class per directed edge.
ClassDescriptor fully_heterogeneous_classes(const Topology& topo);

struct CompressedSystem {
    InterconnectedSystem sys;    // slots labelled 1..beta on every node, P = sum_j Lambda_j ⊗ I
    ClassDescriptor cls;
    Topology topo_g;             // edge-form plant graph
    std::vector<Mat> Lambda;     // per class, N x N, entry (i,k) = weight of P_ik
    std::vector<int> ns;         // per class channel dimension
    // Edge level: rows of Zp are the p slots (i,k) of plant edges in slot order, rows of Zq the q
    // slots (k,i) feeding them, Pe(p slot (i,k), q slot (k,i)) = lambda_ik. Columns of Zp and Zq are
    // ordered (class, node); the one of a row is (class of the edge, receiver) resp. (class, sender).
    Mat Zp, Zq, Pe;

    // Zp' Pe Zq with Pe the edge-level pattern: diag(Lambda_1, ..., Lambda_beta).
    Mat class_major_pattern() const;
};

// Checks, within 1e-10: identical local matrices per group, P_ik = lambda_ik I, one channel dim per
// class, identical receiver blocks (Bp, Dzp, Dyp) per (group, class) and identical sender blocks
// (Cq, Dqw) per (group, class). Errors name the first violation.
CompressedSystem compress_alphabeta(const InterconnectedSystem& g, const ClassDescriptor& cls);
CompressedSystem compress_homogeneous(const InterconnectedSystem& g);

// ==== Class controller ====
// Static sender-side controller on the compressed form: u_i = K_g(i) x_i + sum_j pK_ij with
// qK_kj = F_g(k),j x_k and pK = sum_j Lambda_j ⊗ I qK. F is indexed [group][class]; a class that
// group g never sends on takes a zero gain.
struct ClassGains {
    std::vector<Mat> K;               // per group
    std::vector<std::vector<Mat>> F;  // per group and class
};
DistributedController class_controller(const CompressedSystem& c, const ClassGains& k);
ClassGains zero_class_gains(const CompressedSystem& c);
// Equivalent edge-form gains over topo_g: edge (i,k) carries Lambda_j(i,k) F_g(k),j.
StaticGains class_to_edge_gains(const CompressedSystem& c, const ClassGains& k);

// ==== Class synthesis ====
enum class ClassPath {
    Auto,       // eigenvalues for normal patterns, direct Kronecker assembly otherwise (alpha-beta only)
    Eigen,      // eigenvalue conditions; non-normal patterns are an error
    Kronecker,  // direct assembly of every class condition
};

struct ClassSynthesisOptions {
    SynthesisOptions base;
    ClassPath path = ClassPath::Auto;
    bool extremes_only = true;  // real spectra: only lambda_min and lambda_max, plus concavity
    double cluster_tol = 1e-8;
};

// Eigenvalues of a normal pattern, one representative per cluster, real ones first ascending.
std::vector<std::complex<double>> eigenvalue_clusters(const Mat& lambda, double tol);

// Hermitian condition |l|^2 Q + l' S + l S' + R as the real embedding [[Fr, -Fi],[Fi, Fr]];
// real l returns Fr alone.
AffExpr eigenvalue_condition(const MultiplierBlock& m, std::complex<double> l);

// Kronecker condition (L' L) ⊗ Q + L' ⊗ S + L ⊗ S' + I ⊗ R on one class channel.
AffExpr kronecker_condition(const MultiplierBlock& m, const Mat& L);

struct ClassProgram {
    SfProgram sf;
    std::vector<int> class_lmis;      // multiplier LMIs per class
    std::vector<bool> eigen_path;     // per class
};

// One nominal LMI per group, class multipliers on the adjoint template, per-class conditions.
ClassProgram build_class_program(const CompressedSystem& c, bool homogeneous, const ClassSynthesisOptions& opt);

SynthesisResult decomposed_synthesis_homogeneous(const InterconnectedSystem& g,
                                                 const ClassSynthesisOptions& opt = {});
SynthesisResult decomposed_synthesis_alphabeta(const InterconnectedSystem& g, const ClassDescriptor& cls,
                                               const ClassSynthesisOptions& opt = {});

}  // namespace netsyn
