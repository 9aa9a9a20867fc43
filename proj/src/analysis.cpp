#include "netsyn/analysis.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <fmt/core.h>

#include "netsyn/errors.hpp"

namespace netsyn {

// ==== Norm oracles ====

namespace {

double sigma_max(const CMat& m) {
    if (m.size() == 0) return 0.0;
    return Eigen::JacobiSVD<CMat>(m).singularValues()(0);
}

double sigma_at(const StateSpace& s, double w) { return sigma_max(s.eval(std::complex<double>(0.0, w))); }

// Frequencies w >= 0 where some singular value of G(jw) equals g.
std::vector<double> level_crossings(const StateSpace& s, double g) {
    const int n = s.n_states();
    const Mat& A = s.A;
    const Mat& B = s.B;
    const Mat& C = s.C;
    const Mat& D = s.D;
    Mat R = g * g * Mat::Identity(D.cols(), D.cols()) - D.transpose() * D;
    Eigen::LDLT<Mat> rl(R);
    Mat Ar = A + B * rl.solve(D.transpose() * C);
    Mat H(2 * n, 2 * n);
    H.topLeftCorner(n, n) = Ar;
    H.topRightCorner(n, n) = B * rl.solve(B.transpose());
    H.bottomLeftCorner(n, n) =
        -C.transpose() * (Mat::Identity(D.rows(), D.rows()) + D * rl.solve(D.transpose())) * C;
    H.bottomRightCorner(n, n) = -Ar.transpose();
    Eigen::EigenSolver<Mat> es(H, false);
    std::vector<double> out;
    const double scale = std::max(1.0, H.norm());
    for (int j = 0; j < 2 * n; ++j) {
        auto l = es.eigenvalues()(j);
        if (std::abs(l.real()) <= 1e-8 * std::max(scale, std::abs(l)) && l.imag() >= 0.0) out.push_back(l.imag());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

double hinf_norm(const StateSpace& s, double rel_tol) {
    const double dnorm = s.D.size() ? Eigen::JacobiSVD<Mat>(s.D).singularValues()(0) : 0.0;
    if (s.n_states() == 0 || s.B.cols() == 0 || s.C.rows() == 0) return dnorm;
    if (!is_hurwitz(s.A)) return kInf;
    double lb = std::max(dnorm, sigma_at(s, 0.0));
    Eigen::VectorXcd poles = s.A.eigenvalues();
    for (int j = 0; j < poles.size(); ++j) lb = std::max(lb, sigma_at(s, std::abs(poles(j))));
    for (int j = 0; j < poles.size(); ++j) lb = std::max(lb, sigma_at(s, std::abs(poles(j).imag())));
    if (lb == 0.0) return 0.0;
    for (int it = 0; it < 100; ++it) {
        const double g = (1.0 + 2.0 * rel_tol) * lb;
        std::vector<double> w = level_crossings(s, g);
        if (w.empty()) return lb;
        // mirrored crossings so intervals that straddle zero are covered
        std::vector<double> all;
        for (double x : w) {
            all.push_back(-x);
            all.push_back(x);
        }
        std::sort(all.begin(), all.end());
        double best = lb;
        for (std::size_t k = 0; k + 1 < all.size(); ++k)
            best = std::max(best, sigma_at(s, std::abs(0.5 * (all[k] + all[k + 1]))));
        for (double x : w) best = std::max(best, sigma_at(s, x));
        if (best <= lb) return lb;  // crossings are numerical artefacts at this level
        lb = best;
    }
    return lb;
}

double h2_norm(const StateSpace& s) {
    if (s.D.size() && s.D.cwiseAbs().maxCoeff() > 0.0) return kInf;
    if (s.n_states() == 0) return 0.0;
    if (!is_hurwitz(s.A)) return kInf;
    Mat P = lyap(s.A, s.B * s.B.transpose());
    return std::sqrt(std::max(0.0, (s.C * P * s.C.transpose()).trace()));
}

// ==== FBSP analysis ====

AnalysisProgram build_analysis_program(const ClosedLoopSS& clp, MultiplierStructure s, bool decomposed,
                                       double eps, bool tau_form) {
    AnalysisProgram ap;
    ap.tau_form = tau_form;
    ap.level = ap.prog.add_scalar();
    ap.prog.add_objective(ap.level, tau_form ? -1.0 : 1.0);
    std::vector<NominalTerms> nom;
    for (const auto& b : clp.subs) {
        VarHandle X = ap.prog.add_sym(b.nx());
        ap.prog.add_lmi("lyapunov", X.expr, eps);
        nom.push_back({X.expr * b.A, X.expr * b.B1, X.expr * b.B2, b.C1, b.D11, b.D12, b.C2, b.D21, b.D22});
        ap.X.push_back(X);
    }
    ap.mult = create_multipliers(ap.prog, clp.layout(), s);
    add_fbsp_conditions(ap.prog, nom, ap.mult, clp.P, tau_form ? tau_scaling(ap.level) : gamma_scaling(ap.level),
                        decomposed, eps);
    return ap;
}

AnalysisResult fbsp_analysis(const ClosedLoopSS& clp, const AnalysisOptions& opt) {
    AnalysisProgram ap = build_analysis_program(clp, opt.structure, opt.decomposed, opt.eps);
    ConicSolution sol = solve(ap.prog, opt.solver);
    if (sol.status == SolveStatus::Infeasible) throw Infeasible("FBSP analysis: " + sol.diagnostic);
    if (sol.status != SolveStatus::Optimal) throw NumericalFailure("FBSP analysis: " + sol.diagnostic);

    AnalysisResult r;
    r.gamma = sol.y(ap.level);
    for (const auto& h : ap.X) r.X.push_back(ConicProgram::get_value(h, sol.y));
    r.multipliers = extract_multipliers(ap.mult, sol.y);
    r.iterations = sol.iterations;
    r.n_vars = ap.prog.n_vars();
    r.hinf = hinf_norm(flatten(clp));
    FeasibilityReport rep = check_feasible(ap.prog, sol.y, 10.0 * opt.solver.tol);
    r.worst_violation = rep.worst_violation;
    if (opt.verify) {
        if (!rep.feasible)
            throw ConsistencyError(fmt::format("analysis certificate violates '{}' by {:.3e}", rep.worst_label,
                                               rep.worst_violation));
        if (!(r.hinf <= r.gamma * (1.0 + 1e-6)))
            throw ConsistencyError(fmt::format("H-infinity norm {:.9g} exceeds certified bound {:.9g}", r.hinf, r.gamma));
    }
    return r;
}

}  // namespace netsyn
