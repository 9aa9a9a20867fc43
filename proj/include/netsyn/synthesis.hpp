#pragma once

#include <map>
#include <string>
#include <vector>

#include "netsyn/analysis.hpp"
#include "netsyn/lmi.hpp"
#include "netsyn/sdp.hpp"
#include "netsyn/sysmodel.hpp"

namespace netsyn {

// ==== Results ====
struct ProgramStats {
    int nominal_lmis = 0;
    int multiplier_lmis = 0;
    std::vector<int> nominal_sizes, multiplier_sizes;
    int n_vars = 0;
    int iterations = 0;
    double seconds = 0.0;
};

ProgramStats program_stats(const ConicProgram& p);

struct SynthesisResult {
    std::string method;
    double gamma = kInf;            // bound certified by the synthesis program
    double certified_gamma = kInf;  // FBSP analysis of the final loop with the gains fixed
    double hinf = kInf;             // H-infinity norm of the final loop
    StaticGains gains;              // sender-side realization over topo_k
    Topology topo_k;
    std::vector<Mat> X;             // Lyapunov blocks of the adjoint loop, per subsystem, gamma scaling
    MultiplierValues multipliers;   // gamma scaling
    double worst_violation = 0.0;   // re-check of the synthesis certificate on the analysis program
    ProgramStats stats;
    std::string diagnostic;
};

// ==== State-feedback scope ====
// C_y,i = I, D_yw,i = 0 and D_yp,i = 0 for every subsystem, else InvalidArgument.
void check_state_feedback_scope(const InterconnectedSystem& g);

// ==== Program assembly ====
// The loop closed with a zero static sender-side controller, transposed. Its constant blocks are the
// constant blocks of every adjoint closed loop; the gain-dependent terms are added by the program.
struct SfTemplate {
    struct GainSlot {
        int slot = 0;   // closed-loop slot index
        int label = 0;  // slot label (receiver in edge form, class in compressed form)
        int col = 0;    // first column inside the subsystem's adjoint p channel
        int dim = 0;    // rows of the transmitted control signal
    };
    ClosedLoopSS adj;
    std::vector<std::vector<GainSlot>> gain_slots;
    std::vector<Mat> Bu, Dzu;
};

SfTemplate make_sf_template(const InterconnectedSystem& g, const DistributedController& zero_controller);
// Edge form with the zero sender-side controller over topo_k.
SfTemplate make_sf_template(const InterconnectedSystem& g, const Topology& topo_k);

// Variable sharing: subsystems in one group share X and W; gain slots with one key share Z.
struct SfSharing {
    std::vector<int> group;             // per subsystem, 0-based group index
    std::vector<std::vector<int>> key;  // per subsystem and gain slot
};

// One group per subsystem and one key per gain slot.
SfSharing independent_sharing(const SfTemplate& t);

struct SfVariables {
    std::vector<VarHandle> X, W;  // per group
    std::vector<VarHandle> Z;     // per key
    std::vector<int> key_group;   // owning group per key
};

// Adds X ⪰ eps I ("lyapunov") per group.
SfVariables create_sf_variables(ConicProgram& p, const SfTemplate& t, const SfSharing& sh, double eps);

// X A~, X B~1, X B~2 with the substitutions W = K X and Z = F X.
NominalTerms sf_nominal_terms_at(const SfTemplate& t, int i, const AffExpr& X, const AffExpr& W,
                                 const std::vector<AffExpr>& Z);
std::vector<NominalTerms> sf_nominal_terms(const SfTemplate& t, const SfSharing& sh, const SfVariables& v);

struct SfProgram {
    ConicProgram prog;
    int level = -1;
    bool tau_form = false;
    SfTemplate templ;
    SfSharing sharing;
    SfVariables vars;
    MultiplierVars mult;
};

SfProgram build_sf_program(const SfTemplate& t, const SfSharing& sh, MultiplierStructure s, bool decomposed,
                           double eps, bool tau_form = false);

// K_g = W_g X_g^{-1} per group and F = Z X^{-1} per key, from a solution vector.
struct SfGains {
    std::vector<Mat> K;  // per group
    std::vector<Mat> F;  // per key
};
SfGains extract_sf_gains(const SfVariables& v, const Vec& y);

// Edge form with independent sharing: local gains and edge gains (receiver, sender) over the template.
StaticGains edge_form_gains(const SfTemplate& t, const SfSharing& sh, const SfGains& k);

// ==== Certification ====
// A certificate for the adjoint of a closed loop, in the handle order of build_analysis_program.
struct Certificate {
    double level = 0.0;
    bool tau_form = false;
    std::vector<Mat> X;  // per subsystem
    MultiplierValues multipliers;
};

// Re-checks the certificate on the analysis program of adjoint(clp), and on its undecomposed
// assembly when decomposed, at 10 tol times the largest certificate entry. Compares the H-infinity
// norm of flatten(clp) with the bound, and re-solves the analysis with the loop fixed. Fills gamma,
// certified_gamma, hinf, worst_violation, X and multipliers of r. Throws ConsistencyError.
void certify(SynthesisResult& r, const ClosedLoopSS& clp, MultiplierStructure s, bool decomposed,
             const Certificate& c, double eps, const SolverOptions& solver);

// Infeasible or NumericalFailure unless the solve ended Optimal.
void require_optimal(const ConicSolution& sol, const std::string& method);

// ==== Central synthesis ====
struct SynthesisOptions {
    MultiplierStructure structure = MultiplierStructure::PerSubsystem;
    bool decomposed = false;
    double eps = 1e-7;
    SolverOptions solver;
};

// Static state feedback u_i = K_i x_i + sum_k F_ik x_k over topo_k from the dualized nominal condition.
SynthesisResult hinf_state_feedback_central(const InterconnectedSystem& g, const Topology& topo_k,
                                            const SynthesisOptions& opt = {});

// Shared driver for edge-form programs: solve, extract, certify. Throws Infeasible or NumericalFailure.
SynthesisResult synthesize_edge_form(const InterconnectedSystem& g, const Topology& topo_k,
                                     const SynthesisOptions& opt, const std::string& method);

// Closes g with the sender-side static controller over topo_k.
ClosedLoopSS close_with_gains(const InterconnectedSystem& g, const Topology& topo_k, const StaticGains& k);

}  // namespace netsyn
