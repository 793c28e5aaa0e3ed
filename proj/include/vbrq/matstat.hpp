#pragma once

#include <Eigen/Dense>

#include "vbrq/error.hpp"

namespace vbrq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Returns (X + X^T) / 2.
Matrix symmetrize(const Matrix& x);

/**
 * Symmetric positive semi-definite matrix.
 *
 * Construction symmetrizes the input and rejects relative asymmetry above
 * 1e-12 or an eigenvalue below -1e-10 times the largest eigenvalue.
 */
class PsdMatrix {
public:
    static constexpr double kSymmetryTol = 1e-12;
    static constexpr double kEigenTol = 1e-10;

    explicit PsdMatrix(const Matrix& m);

    static PsdMatrix identity(Eigen::Index dim);

    Eigen::Index dim() const { return m_.rows(); }
    const Matrix& matrix() const { return m_; }
    double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

    /// True when a Cholesky factor exists.
    bool is_positive_definite() const;

    /// Throws NumericalError unless strictly positive definite.
    Eigen::LLT<Matrix> cholesky() const;

    double log_det() const;
    Matrix inverse() const;

    PsdMatrix scaled(double c) const;

private:
    struct Trusted {};
    PsdMatrix(Matrix m, Trusted) : m_(std::move(m)) {}

    Matrix m_;
};

struct GaussianParams {
    GaussianParams(Vector mean, PsdMatrix cov);

    Vector mean;
    PsdMatrix cov;
};

/**
 * Inverse-Wishart IW(Sigma; nu, Psi) in the parameterization where
 * Sigma^-1 ~ W(nu - d - 1, Psi^-1), so that
 * E[Sigma] = Psi / (nu - 2d - 2) and E[Sigma^-1] = (nu - d - 1) Psi^-1.
 * Requires nu > 2d and Psi positive definite.
 */
class InverseWishartParams {
public:
    InverseWishartParams(double dof, PsdMatrix scale);

    double dof() const { return dof_; }
    const PsdMatrix& scale() const { return scale_; }
    Eigen::Index dim() const { return scale_.dim(); }

private:
    double dof_;
    PsdMatrix scale_;
};

/// log Gamma_d(a) = d(d-1)/4 log(pi) + sum_{j=1..d} lgamma(a + (1-j)/2).
double log_multivariate_gamma(int d, double a);

double iw_log_pdf(const InverseWishartParams& p, const PsdMatrix& sigma);

/// E[Sigma] = Psi / (nu - 2d - 2).
PsdMatrix iw_mean(const InverseWishartParams& p);

/// (E[Sigma^-1])^-1 = Psi / (nu - d - 1); the covariance plug-in of the state update.
PsdMatrix iw_mean_inverse_inv(const InverseWishartParams& p);

/// Mode Psi / nu.
PsdMatrix iw_mode(const InverseWishartParams& p);

}  // namespace vbrq
