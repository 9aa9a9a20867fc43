// Dense primal-dual interior-point method for
//   min c'y + 1/2 y'Hy   s.t.   Z_b = C_b - sum_j y_j A_bj ⪰ 0,   z_l = c_l - s_l y_{v(l)} >= 0
// with H diagonal. HKM search direction, Mehrotra predictor-corrector, infeasible start.
// A phase-1 problem separates infeasibility from numerical trouble.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "netsyn/errors.hpp"
#include "netsyn/kernels.hpp"
#include "netsyn/sdp.hpp"

namespace netsyn {

namespace {

struct Blk {
    int n = 0;
    Mat C;
    std::vector<int> vars;
    std::vector<SpMat> A;                  // column-major, symmetric
    std::vector<std::vector<int>> rowsup;  // nonzero rows of A
    int con = 0, sub = 0;
};

struct LpRow {
    int var;
    double sign;
    double c;
};

struct Problem {
    int m = 0;
    Vec c, h;
    std::vector<Blk> blks;
    std::vector<LpRow> lp;
};

struct Iterate {
    Vec y;
    std::vector<Mat> X, Z;
    Vec x, z;
};

struct Direction {
    Vec dy;
    std::vector<Mat> dX, dZ;
    Vec dx, dz;
};

double inner(const Mat& a, const Mat& b) {
    return kernels::dot(a.data(), b.data(), static_cast<std::size_t>(a.size()));
}

// <A, W> for sparse symmetric A.
double inner_sp(const SpMat& a, const Mat& w) {
    double s = 0.0;
    for (int k = 0; k < a.outerSize(); ++k)
        for (SpMat::InnerIterator it(a, k); it; ++it) s += it.value() * w(it.row(), it.col());
    return s;
}

// Largest alpha with M + alpha dM ⪰ 0 (M ≻ 0); +inf if unbounded.
double max_step(const Mat& m, const Mat& dm) {
    if (m.rows() == 0) return std::numeric_limits<double>::infinity();
    Eigen::LLT<Mat> llt(m);
    if (llt.info() != Eigen::Success) return 0.0;
    Mat t = llt.matrixL().solve(dm);
    t = llt.matrixL().solve(t.transpose()).transpose();
    double lmin = min_eig_sym(t);
    return lmin < 0.0 ? -1.0 / lmin : std::numeric_limits<double>::infinity();
}

double max_step_lp(const Vec& v, const Vec& dv) {
    double a = std::numeric_limits<double>::infinity();
    for (int i = 0; i < v.size(); ++i)
        if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
    return a;
}

Problem convert(const ConicProgram& p) {
    Problem pr;
    pr.m = p.n_vars();
    pr.c = p.linear_objective();
    pr.h = p.quad_diag();
    for (int ci = 0; ci < static_cast<int>(p.constraints().size()); ++ci) {
        const auto& con = p.constraints()[ci];
        for (int bi = 0; bi < static_cast<int>(con.blocks.size()); ++bi) {
            const auto& b = con.blocks[bi];
            Blk k;
            k.n = b.n;
            k.C = Mat(b.f0);
            k.C.diagonal().array() -= con.margin;
            k.con = ci;
            k.sub = bi;
            for (const auto& [v, m] : b.f) {
                if (m.nonZeros() == 0) continue;
                k.vars.push_back(v);
                k.A.push_back(-m);
                std::vector<int> rows;
                for (int col = 0; col < m.outerSize(); ++col)
                    for (SpMat::InnerIterator it(m, col); it; ++it) rows.push_back(static_cast<int>(it.row()));
                std::sort(rows.begin(), rows.end());
                rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
                k.rowsup.push_back(std::move(rows));
            }
            pr.blks.push_back(std::move(k));
        }
    }
    for (int j = 0; j < pr.m; ++j) {
        double bd = p.bounds()[j];
        if (!std::isfinite(bd)) continue;
        pr.lp.push_back({j, 1.0, bd});
        pr.lp.push_back({j, -1.0, bd});
    }
    return pr;
}

struct RunResult {
    bool converged = false;
    int iterations = 0;
    Iterate it;
    std::string diag;
    // best iterate by max(pinf, dinf, gap) when the run ends without convergence
    Iterate best;
    double best_merit = std::numeric_limits<double>::infinity();
    // best iterate whose y satisfies the LMIs to tol, by max(pinf, gap)
    Iterate best_feasible;
    double best_feasible_merit = std::numeric_limits<double>::infinity();
};

class Ipm {
public:
    Ipm(const Problem& p, const SolverOptions& o) : p_(p), o_(o) {}

    RunResult run() {
        RunResult rr;
        Iterate& s = rr.it;
        init(s);
        const double cnorm = 1.0 + p_.c.norm();
        double Cn2 = 0.0;
        for (const auto& b : p_.blks) Cn2 += b.C.squaredNorm();
        for (const auto& l : p_.lp) Cn2 += l.c * l.c;
        const double Cnorm = 1.0 + std::sqrt(Cn2);
        int ntot = static_cast<int>(p_.lp.size());
        for (const auto& b : p_.blks) ntot += b.n;
        ntot = std::max(ntot, 1);
        const bool separate_steps = p_.h.size() == 0 || p_.h.cwiseAbs().maxCoeff() == 0.0;
        int stall = 0;

        for (int iter = 0; iter < o_.max_iter; ++iter) {
            rr.iterations = iter;
            // residuals
            Vec rp = p_.c + p_.h.cwiseProduct(s.y);
            std::vector<Mat> rd(p_.blks.size());
            double gap = 0.0, rdn2 = 0.0;
            for (std::size_t b = 0; b < p_.blks.size(); ++b) {
                const Blk& k = p_.blks[b];
                rd[b] = k.C - s.Z[b];
                for (std::size_t t = 0; t < k.vars.size(); ++t) {
                    rp(k.vars[t]) += inner_sp(k.A[t], s.X[b]);
                    rd[b] -= s.y(k.vars[t]) * Mat(k.A[t]);
                }
                gap += inner(s.X[b], s.Z[b]);
                rdn2 += rd[b].squaredNorm();
            }
            Vec rdl(p_.lp.size());
            for (std::size_t l = 0; l < p_.lp.size(); ++l) {
                const auto& r = p_.lp[l];
                rp(r.var) += r.sign * s.x(l);
                rdl(l) = r.c - r.sign * s.y(r.var) - s.z(l);
                gap += s.x(l) * s.z(l);
                rdn2 += rdl(l) * rdl(l);
            }
            const double mu = gap / ntot;
            const double pobj = p_.c.dot(s.y) + 0.5 * s.y.dot(p_.h.cwiseProduct(s.y));
            const double pinf = rp.norm() / cnorm;
            const double dinf = std::sqrt(rdn2) / Cnorm;
            const double rgap = gap / (1.0 + std::abs(pobj));
            if (o_.verbose)
                spdlog::info("ipm {:3d} pobj {: .9e} pinf {:.2e} dinf {:.2e} gap {:.2e}", iter, pobj, pinf, dinf, rgap);
            if (pinf <= o_.tol && dinf <= o_.tol && rgap <= o_.tol) {
                rr.converged = true;
                return rr;
            }
            const double merit = std::max({pinf, dinf, rgap});
            if (merit < rr.best_merit) {
                rr.best_merit = merit;
                rr.best = s;
            }
            if (dinf <= o_.tol && std::max(pinf, rgap) < rr.best_feasible_merit) {
                rr.best_feasible_merit = std::max(pinf, rgap);
                rr.best_feasible = s;
            }
            double xmax = 0.0;
            for (const auto& X : s.X) xmax = std::max(xmax, X.cwiseAbs().maxCoeff());
            if (s.x.size()) xmax = std::max(xmax, s.x.cwiseAbs().maxCoeff());
            if (!std::isfinite(xmax) || xmax > 1e13) {
                rr.diag = "dual iterate diverged";
                return rr;
            }

            // Schur complement
            std::vector<Mat> Zinv(p_.blks.size());
            Mat M = Mat::Zero(p_.m, p_.m);
            M.diagonal() += p_.h;
            for (std::size_t b = 0; b < p_.blks.size(); ++b) {
                Eigen::LLT<Mat> llt(s.Z[b]);
                if (llt.info() != Eigen::Success) {
                    rr.diag = "slack lost definiteness";
                    return rr;
                }
                Zinv[b] = llt.solve(Mat::Identity(s.Z[b].rows(), s.Z[b].cols()));
                Zinv[b] = sym(Zinv[b]);
                assemble_schur(p_.blks[b], s.X[b], Zinv[b], M);
            }
            for (std::size_t l = 0; l < p_.lp.size(); ++l) M(p_.lp[l].var, p_.lp[l].var) += s.x(l) / s.z(l);

            Eigen::LLT<Mat> fac;
            double reg = 0.0;
            for (int attempt = 0; attempt < 6; ++attempt) {
                Mat Mr = M;
                if (reg > 0.0) Mr.diagonal().array() += reg;
                fac.compute(Mr);
                if (fac.info() == Eigen::Success) break;
                reg = reg == 0.0 ? 1e-14 * (1.0 + M.diagonal().cwiseAbs().maxCoeff()) : reg * 100.0;
            }
            if (fac.info() != Eigen::Success) {
                rr.diag = "Schur complement not positive definite";
                return rr;
            }

            // predictor
            std::vector<Mat> Rc(p_.blks.size());
            for (std::size_t b = 0; b < p_.blks.size(); ++b) Rc[b] = -s.X[b] * s.Z[b];
            Vec rc = -s.x.cwiseProduct(s.z);
            Direction da = direction(s, fac, Zinv, rp, rd, rdl, Rc, rc);
            double ap = 0.0, ad = 0.0;
            steps(s, da, ap, ad, separate_steps);
            double gap_a = 0.0;
            for (std::size_t b = 0; b < p_.blks.size(); ++b)
                gap_a += inner(s.X[b] + ap * da.dX[b], s.Z[b] + ad * da.dZ[b]);
            gap_a += (s.x + ap * da.dx).dot(s.z + ad * da.dz);
            double sigma = std::pow(std::clamp(gap_a / std::max(gap, 1e-300), 0.0, 1.0), 3.0);

            // corrector
            for (std::size_t b = 0; b < p_.blks.size(); ++b) {
                Rc[b] = -s.X[b] * s.Z[b] - da.dX[b] * da.dZ[b];
                Rc[b].diagonal().array() += sigma * mu;
            }
            rc = -s.x.cwiseProduct(s.z) - da.dx.cwiseProduct(da.dz);
            rc.array() += sigma * mu;
            Direction d = direction(s, fac, Zinv, rp, rd, rdl, Rc, rc);
            steps(s, d, ap, ad, separate_steps);

            s.y += ad * d.dy;
            for (std::size_t b = 0; b < p_.blks.size(); ++b) {
                s.X[b] = sym(s.X[b] + ap * d.dX[b]);
                s.Z[b] = sym(s.Z[b] + ad * d.dZ[b]);
            }
            s.x += ap * d.dx;
            s.z += ad * d.dz;

            if (std::max(ap, ad) < 1e-9) {
                if (++stall >= 5) {
                    rr.diag = "step length stalled";
                    return rr;
                }
            } else {
                stall = 0;
            }
        }
        rr.iterations = o_.max_iter;
        rr.diag = "iteration limit reached";
        return rr;
    }

private:
    void init(Iterate& s) const {
        s.y = Vec::Zero(p_.m);
        s.X.clear();
        s.Z.clear();
        for (const auto& b : p_.blks) {
            double amax = 0.0, ratio = 0.0;
            for (std::size_t t = 0; t < b.vars.size(); ++t) {
                double an = b.A[t].norm();
                amax = std::max(amax, an);
                ratio = std::max(ratio, (1.0 + std::abs(p_.c(b.vars[t]))) / (1.0 + an));
            }
            double sq = std::sqrt(static_cast<double>(b.n));
            double xi = std::max({10.0, sq, b.n * ratio});
            double eta = std::max({10.0, sq, amax, b.C.norm()});
            s.X.push_back(xi * Mat::Identity(b.n, b.n));
            s.Z.push_back(eta * Mat::Identity(b.n, b.n));
        }
        const std::size_t nl = p_.lp.size();
        s.x = Vec::Constant(nl, 10.0);
        s.z = Vec::Zero(nl);
        for (std::size_t l = 0; l < nl; ++l) s.z(l) = std::max(10.0, p_.lp[l].c);
    }

    // M_ij += <A_i, X A_j Zinv> over the variables of one block.
    static void assemble_schur(const Blk& k, const Mat& X, const Mat& Zinv, Mat& M) {
        const int nv = static_cast<int>(k.vars.size());
        const int n = k.n;
        Mat T(n, n), G(n, n);
        for (int j = 0; j < nv; ++j) {
            const SpMat& Aj = k.A[j];
            const auto& rows = k.rowsup[j];
            // T = Aj * Zinv, nonzero only on rows in the support.
            T.setZero();
            for (int col = 0; col < Aj.outerSize(); ++col)
                for (SpMat::InnerIterator it(Aj, col); it; ++it) T.row(it.row()) += it.value() * Zinv.row(col);
            if (static_cast<int>(rows.size()) * 2 >= n) {
                G.noalias() = X * T;
            } else {
                G.setZero();
                for (int r : rows) G.noalias() += X.col(r) * T.row(r);
            }
            for (int i = j; i < nv; ++i) {
                double v = inner_sp(k.A[i], G);
                M(k.vars[i], k.vars[j]) += v;
                if (i != j) M(k.vars[j], k.vars[i]) += v;
            }
        }
    }

    Direction direction(const Iterate& s, const Eigen::LLT<Mat>& fac, const std::vector<Mat>& Zinv, const Vec& rp,
                        const std::vector<Mat>& rd, const Vec& rdl, const std::vector<Mat>& Rc, const Vec& rc) const {
        Direction d;
        Vec rhs = -rp;
        std::vector<Mat> W(p_.blks.size());
        for (std::size_t b = 0; b < p_.blks.size(); ++b) {
            const Blk& k = p_.blks[b];
            W[b] = (Rc[b] - s.X[b] * rd[b]) * Zinv[b];
            for (std::size_t t = 0; t < k.vars.size(); ++t) rhs(k.vars[t]) -= inner_sp(k.A[t], W[b]);
        }
        for (std::size_t l = 0; l < p_.lp.size(); ++l) {
            const auto& r = p_.lp[l];
            rhs(r.var) -= r.sign * (rc(l) - s.x(l) * rdl(l)) / s.z(l);
        }
        d.dy = fac.solve(rhs);
        d.dX.resize(p_.blks.size());
        d.dZ.resize(p_.blks.size());
        for (std::size_t b = 0; b < p_.blks.size(); ++b) {
            const Blk& k = p_.blks[b];
            Mat dZ = rd[b];
            for (std::size_t t = 0; t < k.vars.size(); ++t) {
                double w = d.dy(k.vars[t]);
                if (w == 0.0) continue;
                for (int col = 0; col < k.A[t].outerSize(); ++col)
                    for (SpMat::InnerIterator it(k.A[t], col); it; ++it) dZ(it.row(), it.col()) -= w * it.value();
            }
            d.dX[b] = sym((Rc[b] - s.X[b] * dZ) * Zinv[b]);
            d.dZ[b] = std::move(dZ);
        }
        const std::size_t nl = p_.lp.size();
        d.dz.resize(nl);
        d.dx.resize(nl);
        for (std::size_t l = 0; l < nl; ++l) {
            const auto& r = p_.lp[l];
            d.dz(l) = rdl(l) - r.sign * d.dy(r.var);
            d.dx(l) = (rc(l) - s.x(l) * d.dz(l)) / s.z(l);
        }
        return d;
    }

    void steps(const Iterate& s, const Direction& d, double& ap, double& ad, bool separate) const {
        double aX = max_step_lp(s.x, d.dx);
        double aZ = max_step_lp(s.z, d.dz);
        for (std::size_t b = 0; b < p_.blks.size(); ++b) {
            aX = std::min(aX, max_step(s.X[b], d.dX[b]));
            aZ = std::min(aZ, max_step(s.Z[b], d.dZ[b]));
        }
        ap = std::min(1.0, 0.98 * aX);
        ad = std::min(1.0, 0.98 * aZ);
        if (!separate) ap = ad = std::min(ap, ad);
    }

    const Problem& p_;
    const SolverOptions& o_;
};

// min s  s.t.  C_b - A(y) + s I ⪰ 0, bounds, -1 <= s.
Problem phase_one(const Problem& p) {
    Problem q;
    q.m = p.m + 1;
    q.c = Vec::Zero(q.m);
    q.c(p.m) = 1.0;
    q.h = Vec::Zero(q.m);
    q.blks = p.blks;
    for (auto& b : q.blks) {
        SpMat eye(b.n, b.n);
        eye.setIdentity();
        b.vars.push_back(p.m);
        b.A.push_back(-eye);
        std::vector<int> rows(b.n);
        for (int i = 0; i < b.n; ++i) rows[i] = i;
        b.rowsup.push_back(std::move(rows));
    }
    q.lp = p.lp;
    q.lp.push_back({p.m, -1.0, 1.0});
    q.lp.push_back({p.m, 1.0, 1e6});
    return q;
}

}  // namespace

ConicSolution solve(const ConicProgram& prog, const SolverOptions& opt) {
    ConicSolution sol;
    Problem pr = convert(prog);
    if (pr.m == 0) {
        sol.y = Vec::Zero(0);
        auto rep = check_feasible(prog, sol.y, opt.tol);
        sol.status = rep.feasible ? SolveStatus::Optimal : SolveStatus::Infeasible;
        sol.max_violation = rep.worst_violation;
        sol.objective = prog.objective_constant();
        return sol;
    }
    Ipm ipm(pr, opt);
    RunResult rr = ipm.run();
    sol.iterations = rr.iterations;
    // Stalls near the floating-point floor are accepted at reduced accuracy.
    // Programs whose optimum is approached only as variables grow (high-gain synthesis) stall with
    // an exactly feasible y and a small gap; the best such iterate is accepted as well.
    bool reduced = false;
    if (!rr.converged && rr.best_merit <= 1e3 * opt.tol) {
        reduced = true;
        sol.diagnostic = fmt::format("{}; accepted at reduced accuracy {:.2e}", rr.diag, rr.best_merit);
        rr.it = rr.best;
    } else if (!rr.converged && rr.best_feasible_merit <= opt.stall_gap) {
        reduced = true;
        sol.diagnostic =
            fmt::format("{}; accepted feasible iterate with gap {:.2e}", rr.diag, rr.best_feasible_merit);
        rr.it = rr.best_feasible;
    }
    if (rr.converged || reduced) {
        sol.y = rr.it.y;
        sol.objective = prog.objective(sol.y);
        auto rep = check_feasible(prog, sol.y, std::numeric_limits<double>::infinity());
        sol.max_violation = rep.worst_violation;
        sol.status = SolveStatus::Optimal;
        sol.duals.resize(prog.constraints().size());
        for (std::size_t c = 0; c < prog.constraints().size(); ++c)
            sol.duals[c].resize(prog.constraints()[c].blocks.size());
        for (std::size_t b = 0; b < pr.blks.size(); ++b) sol.duals[pr.blks[b].con][pr.blks[b].sub] = rr.it.X[b];
        return sol;
    }

    Problem p1 = phase_one(pr);
    SolverOptions o1 = opt;
    o1.tol = std::max(opt.tol, 1e-9);
    Ipm ipm1(p1, o1);
    RunResult r1 = ipm1.run();
    // Same reduced-accuracy rule as the main run.
    if (!r1.converged && r1.best_merit <= 1e3 * o1.tol) {
        r1.converged = true;
        r1.it = r1.best;
    }
    if (r1.converged && r1.it.y(pr.m) > std::max(1e-8, 100.0 * opt.tol)) {
        sol.status = SolveStatus::Infeasible;
        sol.diagnostic = fmt::format("phase-1 optimum s = {:.3e} > 0", r1.it.y(pr.m));
        sol.y = r1.it.y.head(pr.m);
        return sol;
    }
    sol.status = SolveStatus::NumericalFailure;
    sol.diagnostic = rr.diag + (r1.converged ? fmt::format(" (phase-1 s = {:.3e})", r1.it.y(pr.m))
                                              : " (phase-1 failed: " + r1.diag + ")");
    sol.y = rr.it.y;
    return sol;
}

}  // namespace netsyn
