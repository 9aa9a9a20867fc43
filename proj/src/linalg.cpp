#include "netsyn/linalg.hpp"

#include <algorithm>
#include <limits>

#include "netsyn/errors.hpp"

namespace netsyn {

CMat StateSpace::eval(std::complex<double> s) const {
    const int n = n_states();
    CMat res = D.cast<std::complex<double>>();
    if (n == 0) return res;
    CMat m = s * CMat::Identity(n, n) - A.cast<std::complex<double>>();
    CMat x = m.partialPivLu().solve(B.cast<std::complex<double>>());
    res += C.cast<std::complex<double>>() * x;
    return res;
}

Mat blkdiag(const std::vector<Mat>& blocks) {
    Eigen::Index r = 0, c = 0;
    for (const auto& b : blocks) {
        r += b.rows();
        c += b.cols();
    }
    Mat out = Mat::Zero(r, c);
    r = c = 0;
    for (const auto& b : blocks) {
        out.block(r, c, b.rows(), b.cols()) = b;
        r += b.rows();
        c += b.cols();
    }
    return out;
}

Mat sym(const Mat& m) { return 0.5 * (m + m.transpose()); }

double min_eig_sym(const Mat& m) {
    if (m.size() == 0) return std::numeric_limits<double>::infinity();
    Eigen::SelfAdjointEigenSolver<Mat> es(sym(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

double max_eig_sym(const Mat& m) {
    if (m.size() == 0) return -std::numeric_limits<double>::infinity();
    Eigen::SelfAdjointEigenSolver<Mat> es(sym(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(es.eigenvalues().size() - 1);
}

Mat sqrtm_psd(const Mat& m, double floor) {
    Eigen::SelfAdjointEigenSolver<Mat> es(sym(m));
    Vec d = es.eigenvalues().cwiseMax(floor).cwiseSqrt();
    return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

Mat inv_sqrtm_pd(const Mat& m, double floor) {
    Eigen::SelfAdjointEigenSolver<Mat> es(sym(m));
    if (es.eigenvalues().size() > 0 && es.eigenvalues()(0) <= 0.0)
        throw InvalidArgument("matrix is not positive definite");
    Vec d = es.eigenvalues().cwiseMax(floor).cwiseSqrt().cwiseInverse();
    return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

Mat pinv(const Mat& m, double rel_cut) {
    if (m.size() == 0) return Mat::Zero(m.cols(), m.rows());
    Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& s = svd.singularValues();
    double cut = rel_cut * (s.size() ? s(0) : 0.0);
    Vec inv = Vec::Zero(s.size());
    for (int i = 0; i < s.size(); ++i)
        if (s(i) > cut) inv(i) = 1.0 / s(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

int numerical_rank(const Mat& m, double rel_cut) {
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<Mat> svd(m);
    const Vec& s = svd.singularValues();
    int r = 0;
    for (int i = 0; i < s.size(); ++i)
        if (s(i) > rel_cut * s(0)) ++r;
    return r;
}

double spectral_abscissa(const Mat& a) {
    if (a.size() == 0) return -std::numeric_limits<double>::infinity();
    Eigen::EigenSolver<Mat> es(a, false);
    return es.eigenvalues().real().maxCoeff();
}

bool is_hurwitz(const Mat& a, double margin) { return spectral_abscissa(a) < -margin; }

Mat lyap(const Mat& a, const Mat& q) {
    const int n = static_cast<int>(a.rows());
    if (n == 0) return Mat::Zero(0, 0);
    using C = std::complex<double>;
    Eigen::ComplexSchur<CMat> cs(a.cast<C>());
    const CMat& t = cs.matrixT();
    const CMat& u = cs.matrixU();
    // T Y + Y T^H = F with F = -U^H Q U
    CMat f = -(u.adjoint() * q.cast<C>() * u);
    CMat y = CMat::Zero(n, n);
    for (int j = n - 1; j >= 0; --j) {
        Eigen::VectorXcd rhs = f.col(j);
        for (int k = j + 1; k < n; ++k) rhs -= std::conj(t(j, k)) * y.col(k);
        CMat m = t;
        m.diagonal().array() += std::conj(t(j, j));
        y.col(j) = m.triangularView<Eigen::Upper>().solve(rhs);
    }
    return sym((u * y * u.adjoint()).real());
}

Mat hcat(const std::vector<Mat>& parts, Eigen::Index rows) {
    Eigen::Index c = 0;
    for (const auto& p : parts) c += p.cols();
    Mat out(rows, c);
    c = 0;
    for (const auto& p : parts) {
        out.middleCols(c, p.cols()) = p;
        c += p.cols();
    }
    return out;
}

Mat vcat(const std::vector<Mat>& parts, Eigen::Index cols) {
    Eigen::Index r = 0;
    for (const auto& p : parts) r += p.rows();
    Mat out(r, cols);
    r = 0;
    for (const auto& p : parts) {
        out.middleRows(r, p.rows()) = p;
        r += p.rows();
    }
    return out;
}

}  // namespace netsyn
