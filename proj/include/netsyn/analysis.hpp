#pragma once

#include <limits>
#include <vector>

#include "netsyn/lmi.hpp"
#include "netsyn/sdp.hpp"
#include "netsyn/sysmodel.hpp"

namespace netsyn {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ==== Norm oracles ====
// H-infinity norm by the Hamiltonian level-set iteration; +inf when A is not Hurwitz.
// The returned value is attained at some frequency and is within rel_tol of the supremum.
double hinf_norm(const StateSpace& s, double rel_tol = 1e-9);

// H2 norm from the controllability Gramian; +inf when A is not Hurwitz or D != 0.
double h2_norm(const StateSpace& s);

// ==== Full-block S-procedure analysis ====
struct AnalysisOptions {
    MultiplierStructure structure = MultiplierStructure::FullPerEdge;
    bool decomposed = false;  // per-subsystem / per-edge LMIs instead of one nominal and one multiplier LMI
    double eps = 1e-7;        // margin of the strict inequalities
    SolverOptions solver;
    bool verify = true;       // a-posteriori check_feasible and H-infinity comparison
};

// The program: minimize gamma s.t. X_i ⪰ eps I, nominal ⪯ -eps I, multiplier ⪰ eps I.
// In tau form the level variable is tau = 1/gamma (maximized) and the nominal condition is the one
// divided by gamma, with X and the multipliers scaled accordingly.
struct AnalysisProgram {
    ConicProgram prog;
    int level = -1;  // gamma, or tau in tau form
    bool tau_form = false;
    std::vector<VarHandle> X;
    MultiplierVars mult;
};

AnalysisProgram build_analysis_program(const ClosedLoopSS& clp, MultiplierStructure s, bool decomposed,
                                       double eps, bool tau_form = false);

struct AnalysisResult {
    double gamma = kInf;
    std::vector<Mat> X;
    MultiplierValues multipliers;
    double hinf = kInf;           // norm of the flattened loop
    double worst_violation = 0.0; // check_feasible at ten times the solver tolerance
    int iterations = 0;
    int n_vars = 0;
};

// Throws Infeasible, NumericalFailure, or ConsistencyError when the certificate fails its re-check.
AnalysisResult fbsp_analysis(const ClosedLoopSS& clp, const AnalysisOptions& opt = {});

}  // namespace netsyn
