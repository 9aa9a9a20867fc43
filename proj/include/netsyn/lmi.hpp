#pragma once

#include <string>
#include <vector>

#include "netsyn/sdp.hpp"
#include "netsyn/sysmodel.hpp"

namespace netsyn {

// ==== Multiplier structures ====
enum class MultiplierStructure {
    FullPerEdge,           // independent Q_ik, S_ik, R_ik per channel slot
    IdenticalAcrossEdges,  // one (Q, S, R) shared by every slot
    PerClass,              // one (Q, S, R) per slot label, shared across subsystems
    PerSubsystem,          // full Q_i, S_i, R_i over all slots of subsystem i
    Full,                  // unstructured Q, S, R over the stacked channel
    Diagonal,              // diagonal Q_ik, R_ik per slot and S_ik = 0
};

const char* to_string(MultiplierStructure s);
MultiplierStructure multiplier_structure_from_string(const std::string& s);

// Q acts on p, R on q, S couples them: [p; q]' [Q S; S' R] [p; q].
struct MultiplierBlock {
    AffExpr Q, S, R;
};

struct MultiplierVars {
    MultiplierStructure structure = MultiplierStructure::FullPerEdge;
    ChannelLayout layout;
    std::vector<VarHandle> handles;                  // creation order
    std::vector<std::vector<MultiplierBlock>> slot;  // per subsystem and slot, per-slot structures only
    std::vector<MultiplierBlock> subsystem;          // Q~_i, S~_i, R~_i; empty for Full
    MultiplierBlock global;                          // over the stacked channel

    bool per_slot() const;
};

bool is_per_slot(MultiplierStructure s);

// Nonzero slot dimensions sharing a variable must agree, else InvalidArgument.
MultiplierVars create_multipliers(ConicProgram& p, const ChannelLayout& layout, MultiplierStructure s);

// Handle values in creation order; transferable between programs built on equal layouts.
struct MultiplierValues {
    MultiplierStructure structure = MultiplierStructure::FullPerEdge;
    std::vector<Mat> values;
};
MultiplierValues extract_multipliers(const MultiplierVars& m, const Vec& y);
void assign_multipliers(const MultiplierVars& m, const MultiplierValues& v, Vec& point);

// ==== Condition matrices ====
// Per-subsystem data of the nominal condition. XA, XB1, XB2 carry the Lyapunov variable.
struct NominalTerms {
    AffExpr XA, XB1, XB2;
    Mat C1, D11, D12;
    Mat C2, D21, D22;
};

// g multiplies -I in the disturbance and Schur blocks; s scales the performance row.
// gamma form: g = gamma, s = 1. tau form (tau = 1/gamma): g = 1, s = tau.
struct PerfScaling {
    AffExpr g, s;
};
PerfScaling gamma_scaling(int gamma_var);
PerfScaling tau_scaling(int tau_var);

// Matrix M of the nominal condition over (x, w, p, z); the condition reads M ⪯ -eps I.
AffExpr nominal_matrix(const NominalTerms& t, const MultiplierBlock& m, const PerfScaling& sc);

// [P; I]' [Q S; S' R] [P; I]; the condition reads F ⪰ eps I.
AffExpr multiplier_matrix(const SpMat& P, const MultiplierBlock& m);

// P-hat for the pair (i,k) ordered as p = [p_ik; p_ki], q = [q_ik; q_ki]; i is 0-based, k a label.
Mat edge_interconnection(const ChannelLayout& l, const SpMat& P, int i, int k);

// The pair condition of slot (i, k) with Q-hat = diag(Q_ik, Q_ki) and likewise S, R.
AffExpr edge_multiplier_matrix(const MultiplierVars& m, const SpMat& P, int i, int k);

AffExpr blkdiag_expr(const std::vector<AffExpr>& blocks);

// Adds the nominal and multiplier conditions. decomposed: one "nominal" LMI per subsystem and one
// "multiplier" LMI per slot (directed edge); otherwise one block-diagonal "nominal" LMI and one
// global "multiplier" LMI.
void add_fbsp_conditions(ConicProgram& p, const std::vector<NominalTerms>& nominal, const MultiplierVars& m,
                         const SpMat& P, const PerfScaling& sc, bool decomposed, double eps);

}  // namespace netsyn
