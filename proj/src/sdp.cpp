#include "netsyn/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <fmt/core.h>

#include "netsyn/errors.hpp"

namespace netsyn {

namespace {

SpMat to_sparse(const Mat& m) { return m.sparseView(); }

bool same_shape(const AffExpr& a, const AffExpr& b) { return a.rows() == b.rows() && a.cols() == b.cols(); }

// Merge sorted term lists: out = a + s*b.
std::vector<std::pair<int, SpMat>> merge_terms(const std::vector<std::pair<int, SpMat>>& a,
                                               const std::vector<std::pair<int, SpMat>>& b, double s) {
    std::vector<std::pair<int, SpMat>> out;
    out.reserve(a.size() + b.size());
    std::size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
        if (j == b.size() || (i < a.size() && a[i].first < b[j].first)) {
            out.push_back(a[i++]);
        } else if (i == a.size() || b[j].first < a[i].first) {
            out.emplace_back(b[j].first, s * b[j].second);
            ++j;
        } else {
            SpMat sum = a[i].second + s * b[j].second;
            out.emplace_back(a[i].first, std::move(sum));
            ++i;
            ++j;
        }
    }
    return out;
}

}  // namespace

// ==== AffExpr ====

AffExpr::AffExpr(Eigen::Index rows, Eigen::Index cols) : rows_(rows), cols_(cols), c0_(rows, cols) {}

AffExpr AffExpr::constant(const Mat& m) {
    AffExpr e(m.rows(), m.cols());
    e.c0_ = to_sparse(m);
    return e;
}

AffExpr AffExpr::constant(const SpMat& m) {
    AffExpr e(m.rows(), m.cols());
    e.c0_ = m;
    return e;
}

AffExpr AffExpr::variable_term(Eigen::Index rows, Eigen::Index cols, int var, const SpMat& coeff) {
    AffExpr e(rows, cols);
    e.add_term(var, coeff);
    return e;
}

void AffExpr::add_term(int var, const SpMat& coeff) {
    if (coeff.rows() != rows_ || coeff.cols() != cols_) throw InvalidArgument("term shape mismatch");
    auto it = std::lower_bound(terms_.begin(), terms_.end(), var,
                               [](const auto& t, int v) { return t.first < v; });
    if (it != terms_.end() && it->first == var)
        it->second += coeff;
    else
        terms_.insert(it, {var, coeff});
}

AffExpr& AffExpr::operator+=(const AffExpr& o) {
    if (!same_shape(*this, o))
        throw InvalidArgument(fmt::format("shape mismatch {}x{} + {}x{}", rows_, cols_, o.rows_, o.cols_));
    c0_ += o.c0_;
    terms_ = merge_terms(terms_, o.terms_, 1.0);
    return *this;
}

AffExpr& AffExpr::operator-=(const AffExpr& o) {
    if (!same_shape(*this, o))
        throw InvalidArgument(fmt::format("shape mismatch {}x{} - {}x{}", rows_, cols_, o.rows_, o.cols_));
    c0_ -= o.c0_;
    terms_ = merge_terms(terms_, o.terms_, -1.0);
    return *this;
}

AffExpr& AffExpr::operator*=(double s) {
    c0_ *= s;
    for (auto& t : terms_) t.second *= s;
    return *this;
}

AffExpr AffExpr::transpose() const {
    AffExpr e(cols_, rows_);
    e.c0_ = c0_.transpose();
    e.terms_.reserve(terms_.size());
    for (const auto& [v, c] : terms_) e.terms_.emplace_back(v, SpMat(c.transpose()));
    return e;
}

AffExpr AffExpr::block(Eigen::Index r, Eigen::Index c, Eigen::Index nr, Eigen::Index nc) const {
    AffExpr e(nr, nc);
    e.c0_ = c0_.block(r, c, nr, nc);
    for (const auto& [v, m] : terms_) {
        SpMat b = m.block(r, c, nr, nc);
        if (b.nonZeros() > 0) e.terms_.emplace_back(v, std::move(b));
    }
    return e;
}

Mat AffExpr::value(const Vec& y) const {
    Mat out = Mat(c0_);
    for (const auto& [v, m] : terms_) out += y(v) * Mat(m);
    return out;
}

AffExpr operator+(AffExpr a, const AffExpr& b) { return a += b; }
AffExpr operator-(AffExpr a, const AffExpr& b) { return a -= b; }
AffExpr operator-(AffExpr a) { return a *= -1.0; }
AffExpr operator*(double s, AffExpr a) { return a *= s; }

AffExpr operator*(const Mat& l, const AffExpr& e) {
    if (l.cols() != e.rows()) throw InvalidArgument("left product shape mismatch");
    AffExpr out = AffExpr::constant(Mat(l * e.constant_part()));
    for (const auto& [v, m] : e.terms()) {
        SpMat p = to_sparse(l * m);
        if (p.nonZeros() > 0) out.add_term(v, p);
    }
    return out;
}

AffExpr operator*(const AffExpr& e, const Mat& r) {
    if (e.cols() != r.rows()) throw InvalidArgument("right product shape mismatch");
    AffExpr out = AffExpr::constant(Mat(e.constant_part() * r));
    for (const auto& [v, m] : e.terms()) {
        SpMat p = to_sparse(m * r);
        if (p.nonZeros() > 0) out.add_term(v, p);
    }
    return out;
}

AffExpr operator*(const SpMat& l, const AffExpr& e) {
    if (l.cols() != e.rows()) throw InvalidArgument("left product shape mismatch");
    AffExpr out = AffExpr::constant(SpMat((l * e.constant_part()).pruned()));
    for (const auto& [v, m] : e.terms()) {
        SpMat p = (l * m).pruned();
        if (p.nonZeros() > 0) out.add_term(v, p);
    }
    return out;
}

AffExpr operator*(const AffExpr& e, const SpMat& r) {
    if (e.cols() != r.rows()) throw InvalidArgument("right product shape mismatch");
    AffExpr out = AffExpr::constant(SpMat((e.constant_part() * r).pruned()));
    for (const auto& [v, m] : e.terms()) {
        SpMat p = (m * r).pruned();
        if (p.nonZeros() > 0) out.add_term(v, p);
    }
    return out;
}

AffExpr scalar_times(const AffExpr& s, const Mat& m) {
    if (s.rows() != 1 || s.cols() != 1) throw InvalidArgument("scalar_times needs a 1x1 expression");
    SpMat sm = to_sparse(m);
    AffExpr out = AffExpr::constant(SpMat(s.constant_part().coeff(0, 0) * sm));
    for (const auto& [v, c] : s.terms()) {
        double w = c.coeff(0, 0);
        if (w != 0.0) out.add_term(v, SpMat(w * sm));
    }
    return out;
}

AffExpr herm(const AffExpr& e) { return e + e.transpose(); }

// ==== BlockExpr ====

BlockExpr::BlockExpr(std::vector<Eigen::Index> row_dims, std::vector<Eigen::Index> col_dims) {
    row_off_.assign(1, 0);
    for (auto d : row_dims) row_off_.push_back(row_off_.back() + d);
    col_off_.assign(1, 0);
    for (auto d : col_dims) col_off_.push_back(col_off_.back() + d);
}

void BlockExpr::add(int i, int j, const AffExpr& e) {
    Eigen::Index nr = row_off_[i + 1] - row_off_[i];
    Eigen::Index nc = col_off_[j + 1] - col_off_[j];
    if (e.rows() != nr || e.cols() != nc)
        throw InvalidArgument(fmt::format("block ({},{}) expects {}x{}, got {}x{}", i, j, nr, nc, e.rows(), e.cols()));
    if (nr == 0 || nc == 0) return;
    parts_.emplace_back(i, j, e);
}

void BlockExpr::add_sym(int i, int j, const AffExpr& e) {
    if (i == j) {
        add(i, i, herm(e));
    } else {
        add(i, j, e);
        add(j, i, e.transpose());
    }
}

AffExpr BlockExpr::build() const {
    using Trip = Eigen::Triplet<double>;
    std::vector<Trip> c0;
    std::map<int, std::vector<Trip>> vars;
    for (const auto& [bi, bj, e] : parts_) {
        Eigen::Index r0 = row_off_[bi], q0 = col_off_[bj];
        const SpMat& c = e.constant_part();
        for (int k = 0; k < c.outerSize(); ++k)
            for (SpMat::InnerIterator it(c, k); it; ++it) c0.emplace_back(r0 + it.row(), q0 + it.col(), it.value());
        for (const auto& [v, m] : e.terms()) {
            auto& dst = vars[v];
            for (int k = 0; k < m.outerSize(); ++k)
                for (SpMat::InnerIterator it(m, k); it; ++it) dst.emplace_back(r0 + it.row(), q0 + it.col(), it.value());
        }
    }
    SpMat m0(rows(), cols());
    m0.setFromTriplets(c0.begin(), c0.end());
    AffExpr out = AffExpr::constant(m0);
    for (auto& [v, trips] : vars) {
        SpMat m(rows(), cols());
        m.setFromTriplets(trips.begin(), trips.end());
        m.prune(0.0);
        if (m.nonZeros() > 0) out.add_term(v, m);
    }
    return out;
}

// ==== ConicProgram ====

int LmiConstraint::size() const {
    int s = 0;
    for (const auto& b : blocks) s += b.n;
    return s;
}

int ConicProgram::new_var(double bound) {
    bounds_.push_back(bound < 0.0 ? default_bound_ : bound);
    c_.conservativeResize(bounds_.size());
    h_.conservativeResize(bounds_.size());
    c_(c_.size() - 1) = 0.0;
    h_(h_.size() - 1) = 0.0;
    return static_cast<int>(bounds_.size()) - 1;
}

int ConicProgram::add_scalar(double bound) { return new_var(bound); }

VarHandle ConicProgram::add_sym(int n, double bound) {
    VarHandle h;
    h.rows = h.cols = n;
    h.symmetric = true;
    h.expr = AffExpr(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            int v = new_var(bound);
            h.idx.push_back(v);
            SpMat c(n, n);
            c.insert(i, j) = 1.0;
            if (i != j) c.insert(j, i) = 1.0;
            h.expr.add_term(v, c);
        }
    }
    return h;
}

VarHandle ConicProgram::add_mat(int rows, int cols, double bound) {
    VarHandle h;
    h.rows = rows;
    h.cols = cols;
    h.expr = AffExpr(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            int v = new_var(bound);
            h.idx.push_back(v);
            SpMat c(rows, cols);
            c.insert(i, j) = 1.0;
            h.expr.add_term(v, c);
        }
    }
    return h;
}

void ConicProgram::add_objective(int var, double coeff) { c_(var) += coeff; }

void ConicProgram::add_prox(int var, double weight, double center) {
    h_(var) += 2.0 * weight;
    c_(var) -= 2.0 * weight * center;
    obj_const_ += weight * center * center;
}

void ConicProgram::add_lmi(const std::string& label, const AffExpr& f, double margin) {
    add_lmi_blocks(label, {f}, margin);
}

void ConicProgram::add_lmi_blocks(const std::string& label, const std::vector<AffExpr>& blocks, double margin) {
    LmiConstraint con;
    con.label = label;
    con.margin = margin;
    for (const auto& f : blocks) {
        if (f.rows() != f.cols()) throw InvalidArgument(fmt::format("LMI '{}' is not square", label));
        if (f.rows() == 0) continue;
        double scale = 1.0 + f.constant_part().norm();
        if (SpMat(f.constant_part() - SpMat(f.constant_part().transpose())).norm() > 1e-10 * scale)
            throw InvalidArgument(fmt::format("LMI '{}' constant part is not symmetric", label));
        LmiBlock b;
        b.n = static_cast<int>(f.rows());
        b.f0 = f.constant_part();
        for (const auto& [v, m] : f.terms()) {
            if (v < 0 || v >= n_vars()) throw InvalidArgument(fmt::format("LMI '{}' references unknown variable", label));
            if (SpMat(m - SpMat(m.transpose())).norm() > 1e-10 * (1.0 + m.norm()))
                throw InvalidArgument(fmt::format("LMI '{}' coefficient is not symmetric", label));
            b.f.emplace_back(v, m);
        }
        con.blocks.push_back(std::move(b));
    }
    lmis_.push_back(std::move(con));
}

int ConicProgram::count(const std::string& label) const {
    return static_cast<int>(std::count_if(lmis_.begin(), lmis_.end(), [&](const auto& c) { return c.label == label; }));
}

std::vector<int> ConicProgram::sizes(const std::string& label) const {
    std::vector<int> out;
    for (const auto& c : lmis_)
        if (c.label == label) out.push_back(c.size());
    return out;
}

double ConicProgram::objective(const Vec& y) const {
    return c_.dot(y) + 0.5 * y.dot(h_.cwiseProduct(y)) + obj_const_;
}

void ConicProgram::set_value(const VarHandle& h, const Mat& value, Vec& point) {
    if (value.rows() != h.rows || value.cols() != h.cols) throw InvalidArgument("value shape mismatch");
    std::size_t k = 0;
    for (int i = 0; i < h.rows; ++i)
        for (int j = h.symmetric ? i : 0; j < h.cols; ++j)
            point(h.idx[k++]) = h.symmetric && i != j ? 0.5 * (value(i, j) + value(j, i)) : value(i, j);
}

Mat ConicProgram::get_value(const VarHandle& h, const Vec& point) {
    Mat out(h.rows, h.cols);
    std::size_t k = 0;
    for (int i = 0; i < h.rows; ++i) {
        for (int j = h.symmetric ? i : 0; j < h.cols; ++j) {
            out(i, j) = point(h.idx[k++]);
            if (h.symmetric) out(j, i) = out(i, j);
        }
    }
    return out;
}

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::NumericalFailure: return "numerical-failure";
    }
    return "?";
}

FeasibilityReport check_feasible(const ConicProgram& p, const Vec& point, double tol) {
    if (point.size() != p.n_vars()) throw InvalidArgument("point dimension mismatch");
    FeasibilityReport rep;
    rep.worst_violation = 0.0;
    for (const auto& con : p.constraints()) {
        for (const auto& b : con.blocks) {
            Mat f = Mat(b.f0);
            for (const auto& [v, m] : b.f) f += point(v) * Mat(m);
            f.diagonal().array() -= con.margin;
            double viol = -min_eig_sym(f);
            if (viol > rep.worst_violation) {
                rep.worst_violation = viol;
                rep.worst_label = con.label;
            }
        }
    }
    for (int j = 0; j < p.n_vars(); ++j) {
        double viol = std::abs(point(j)) - p.bounds()[j];
        if (viol > rep.worst_violation) {
            rep.worst_violation = viol;
            rep.worst_label = "bound";
        }
    }
    rep.feasible = rep.worst_violation <= tol;
    return rep;
}

std::string to_sdpa(const ConicProgram& p) {
    // SDPA: min c^T y  s.t.  sum_j y_j F_j - F_0 ⪰ 0. Quadratic terms are not representable.
    std::ostringstream os;
    std::vector<int> sizes;
    for (const auto& con : p.constraints())
        for (const auto& b : con.blocks) sizes.push_back(b.n);
    int nb = 0;
    for (double bd : p.bounds())
        if (std::isfinite(bd)) nb += 2;
    os << "* netsyn program, quadratic part dropped\n";
    os << p.n_vars() << "\n" << sizes.size() + (nb ? 1 : 0) << "\n";
    for (int s : sizes) os << s << " ";
    if (nb) os << -nb;
    os << "\n";
    for (int j = 0; j < p.n_vars(); ++j) os << p.linear_objective()(j) << " ";
    os << "\n";
    auto emit = [&](int mat, int blk, const SpMat& m, double sign) {
        for (int k = 0; k < m.outerSize(); ++k)
            for (SpMat::InnerIterator it(m, k); it; ++it)
                if (it.row() <= it.col())
                    os << mat << " " << blk << " " << it.row() + 1 << " " << it.col() + 1 << " " << sign * it.value()
                       << "\n";
    };
    int blk = 0;
    for (const auto& con : p.constraints()) {
        for (const auto& b : con.blocks) {
            ++blk;
            SpMat f0 = b.f0;
            SpMat eye(b.n, b.n);
            eye.setIdentity();
            f0 -= con.margin * eye;
            emit(0, blk, f0, -1.0);
            for (const auto& [v, m] : b.f) emit(v + 1, blk, m, 1.0);
        }
    }
    if (nb) {
        ++blk;
        int r = 0;
        for (int j = 0; j < p.n_vars(); ++j) {
            double bd = p.bounds()[j];
            if (!std::isfinite(bd)) continue;
            os << 0 << " " << blk << " " << r + 1 << " " << r + 1 << " " << -bd << "\n";
            os << j + 1 << " " << blk << " " << r + 1 << " " << r + 1 << " " << -1 << "\n";
            ++r;
            os << 0 << " " << blk << " " << r + 1 << " " << r + 1 << " " << -bd << "\n";
            os << j + 1 << " " << blk << " " << r + 1 << " " << r + 1 << " " << 1 << "\n";
            ++r;
        }
    }
    return os.str();
}

}  // namespace netsyn
