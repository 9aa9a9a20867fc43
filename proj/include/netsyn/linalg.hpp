#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace netsyn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using SpMat = Eigen::SparseMatrix<double>;

// Monolithic continuous-time system x' = Ax + Bw, z = Cx + Dw.
struct StateSpace {
    Mat A, B, C, D;
    int n_states() const { return static_cast<int>(A.rows()); }
    int n_in() const { return static_cast<int>(B.cols()); }
    int n_out() const { return static_cast<int>(C.rows()); }
    // C (sI - A)^{-1} B + D
    CMat eval(std::complex<double> s) const;
    StateSpace transpose() const { return {A.transpose(), C.transpose(), B.transpose(), D.transpose()}; }
};

Mat blkdiag(const std::vector<Mat>& blocks);
// Concatenation with an explicit shared dimension, so empty part lists keep their shape.
Mat hcat(const std::vector<Mat>& parts, Eigen::Index rows);
Mat vcat(const std::vector<Mat>& parts, Eigen::Index cols);
// Zero matrix with explicit (possibly zero) dimensions.
inline Mat zeros(Eigen::Index r, Eigen::Index c) { return Mat::Zero(r, c); }

double min_eig_sym(const Mat& m);
double max_eig_sym(const Mat& m);

// Symmetric square roots via eigendecomposition, eigenvalues floored at `floor`.
Mat sqrtm_psd(const Mat& m, double floor = 1e-12);
Mat inv_sqrtm_pd(const Mat& m, double floor = 1e-12);

// SVD pseudo-inverse with cutoff rel_cut * sigma_max.
Mat pinv(const Mat& m, double rel_cut = 1e-12);
int numerical_rank(const Mat& m, double rel_cut = 1e-12);

double spectral_abscissa(const Mat& a);
bool is_hurwitz(const Mat& a, double margin = 0.0);

// Solves A P + P A^T + Q = 0 (A Hurwitz) by a complex Schur back-substitution.
Mat lyap(const Mat& a, const Mat& q);

Mat sym(const Mat& m);

}  // namespace netsyn
