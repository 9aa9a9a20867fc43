#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "netsyn/linalg.hpp"

namespace netsyn {

// ==== Affine matrix expressions ====
// F(y) = F0 + sum_j y_j F_j with sparse coefficients, terms sorted by variable index.
class AffExpr {
public:
    AffExpr() = default;
    AffExpr(Eigen::Index rows, Eigen::Index cols);

    static AffExpr constant(const Mat& m);
    static AffExpr constant(const SpMat& m);
    static AffExpr variable_term(Eigen::Index rows, Eigen::Index cols, int var, const SpMat& coeff);

    Eigen::Index rows() const { return rows_; }
    Eigen::Index cols() const { return cols_; }
    const SpMat& constant_part() const { return c0_; }
    const std::vector<std::pair<int, SpMat>>& terms() const { return terms_; }
    bool is_constant() const { return terms_.empty(); }

    void add_term(int var, const SpMat& coeff);
    AffExpr& operator+=(const AffExpr& o);
    AffExpr& operator-=(const AffExpr& o);
    AffExpr& operator*=(double s);

    AffExpr transpose() const;
    AffExpr block(Eigen::Index r, Eigen::Index c, Eigen::Index nr, Eigen::Index nc) const;
    Mat value(const Vec& y) const;

private:
    Eigen::Index rows_ = 0, cols_ = 0;
    SpMat c0_;
    std::vector<std::pair<int, SpMat>> terms_;
};

AffExpr operator+(AffExpr a, const AffExpr& b);
AffExpr operator-(AffExpr a, const AffExpr& b);
AffExpr operator-(AffExpr a);
AffExpr operator*(double s, AffExpr a);
AffExpr operator*(const Mat& l, const AffExpr& e);
AffExpr operator*(const AffExpr& e, const Mat& r);
AffExpr operator*(const SpMat& l, const AffExpr& e);
AffExpr operator*(const AffExpr& e, const SpMat& r);
// 1x1 expression times a constant matrix.
AffExpr scalar_times(const AffExpr& s, const Mat& m);
// e + e^T
AffExpr herm(const AffExpr& e);

// Places sub-expressions into a block grid; unset blocks are zero.
class BlockExpr {
public:
    BlockExpr(std::vector<Eigen::Index> row_dims, std::vector<Eigen::Index> col_dims);
    // Adds e at block (i,j).
    void add(int i, int j, const AffExpr& e);
    // Adds e at (i,j) and e^T at (j,i); for i == j adds e + e^T.
    void add_sym(int i, int j, const AffExpr& e);
    AffExpr build() const;
    Eigen::Index rows() const { return row_off_.back(); }
    Eigen::Index cols() const { return col_off_.back(); }

private:
    std::vector<Eigen::Index> row_off_, col_off_;
    std::vector<std::tuple<int, int, AffExpr>> parts_;
};

// ==== Conic program ====
struct VarHandle {
    int rows = 0, cols = 0;
    bool symmetric = false;
    std::vector<int> idx;  // symmetric: upper triangle row-major; otherwise row-major
    AffExpr expr;
};

struct LmiBlock {
    int n = 0;
    SpMat f0;
    std::vector<std::pair<int, SpMat>> f;
};

// One logical LMI, possibly stored as several diagonal blocks.
struct LmiConstraint {
    std::string label;
    std::vector<LmiBlock> blocks;
    double margin = 0.0;
    int size() const;
};

class ConicProgram {
public:
    explicit ConicProgram(double default_bound = 1e4) : default_bound_(default_bound) {}

    int add_scalar(double bound = -1.0);
    VarHandle add_sym(int n, double bound = -1.0);
    VarHandle add_mat(int rows, int cols, double bound = -1.0);
    int n_vars() const { return static_cast<int>(bounds_.size()); }

    void add_objective(int var, double coeff);
    // weight * (y_var - center)^2
    void add_prox(int var, double weight, double center);

    // F ⪰ margin * I. F must be square and symmetric.
    void add_lmi(const std::string& label, const AffExpr& f, double margin);
    // Block-diagonal LMI given by its diagonal blocks, counted once.
    void add_lmi_blocks(const std::string& label, const std::vector<AffExpr>& blocks, double margin);

    const std::vector<LmiConstraint>& constraints() const { return lmis_; }
    const Vec& linear_objective() const { return c_; }
    const Vec& quad_diag() const { return h_; }
    double objective_constant() const { return obj_const_; }
    const std::vector<double>& bounds() const { return bounds_; }

    int count(const std::string& label) const;
    std::vector<int> sizes(const std::string& label) const;

    double objective(const Vec& y) const;

    // Coordinate lookups used when mapping certificates to points.
    static void set_value(const VarHandle& h, const Mat& value, Vec& point);
    static Mat get_value(const VarHandle& h, const Vec& point);

private:
    int new_var(double bound);

    double default_bound_;
    std::vector<double> bounds_;
    Vec c_, h_;
    double obj_const_ = 0.0;
    std::vector<LmiConstraint> lmis_;
};

// ==== Solver facade ====
enum class SolveStatus { Optimal, Infeasible, NumericalFailure };

const char* to_string(SolveStatus s);

struct SolverOptions {
    double tol = 1e-9;
    int max_iter = 120;
    // A stalled run still returns Optimal when its best LMI-feasible iterate has relative gap and
    // dual residual below this value.
    double stall_gap = 1e-5;
    bool verbose = false;
};

struct ConicSolution {
    SolveStatus status = SolveStatus::NumericalFailure;
    Vec y;
    double objective = 0.0;
    double max_violation = 0.0;
    int iterations = 0;
    std::string diagnostic;
    // Dual matrices per constraint and block (same layout as ConicProgram::constraints()).
    std::vector<std::vector<Mat>> duals;
};

ConicSolution solve(const ConicProgram& p, const SolverOptions& opt = {});
inline ConicSolution solve(const ConicProgram& p, double tol) {
    SolverOptions o;
    o.tol = tol;
    return solve(p, o);
}

struct FeasibilityReport {
    bool feasible = false;
    double worst_violation = 0.0;
    std::string worst_label;
};

// lambda_min(F(y) - margin I) >= -tol for all LMIs, and box bounds respected within tol.
FeasibilityReport check_feasible(const ConicProgram& p, const Vec& point, double tol);

// Writes the program in SDPA sparse format (bounds included as a diagonal block).
std::string to_sdpa(const ConicProgram& p);

}  // namespace netsyn
