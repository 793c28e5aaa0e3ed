#include "vbrq/matstat.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace vbrq {

Matrix symmetrize(const Matrix& x) { return 0.5 * (x + x.transpose()); }

PsdMatrix::PsdMatrix(const Matrix& m) {
    if (m.rows() != m.cols() || m.rows() == 0) {
        throw InvalidArgument("PsdMatrix: expected a non-empty square matrix, got " +
                              std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
    if (!m.allFinite()) throw InvalidArgument("PsdMatrix: non-finite entry");

    const double scale = m.cwiseAbs().maxCoeff();
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > kSymmetryTol * scale) {
        throw InvalidArgument("PsdMatrix: asymmetry " + std::to_string(asym) +
                              " exceeds tolerance");
    }
    m_ = symmetrize(m);

    if (Eigen::LLT<Matrix>(m_).info() == Eigen::Success) return;

    Eigen::SelfAdjointEigenSolver<Matrix> eig(m_, Eigen::EigenvaluesOnly);
    const double lmin = eig.eigenvalues().minCoeff();
    const double lmax = eig.eigenvalues().maxCoeff();
    if (lmin < -kEigenTol * std::abs(lmax)) {
        throw InvalidArgument("PsdMatrix: eigenvalue " + std::to_string(lmin) +
                              " below tolerance (largest " + std::to_string(lmax) + ")");
    }
}

PsdMatrix PsdMatrix::identity(Eigen::Index dim) {
    return PsdMatrix(Matrix::Identity(dim, dim), Trusted{});
}

bool PsdMatrix::is_positive_definite() const {
    return Eigen::LLT<Matrix>(m_).info() == Eigen::Success;
}

Eigen::LLT<Matrix> PsdMatrix::cholesky() const {
    Eigen::LLT<Matrix> llt(m_);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("Cholesky factorization failed: matrix is not positive definite");
    }
    return llt;
}

double PsdMatrix::log_det() const {
    const auto llt = cholesky();
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Matrix PsdMatrix::inverse() const {
    return symmetrize(cholesky().solve(Matrix::Identity(dim(), dim())));
}

PsdMatrix PsdMatrix::scaled(double c) const {
    if (!(c >= 0.0) || !std::isfinite(c)) {
        throw InvalidArgument("PsdMatrix::scaled: factor must be finite and non-negative");
    }
    return PsdMatrix(m_ * c, Trusted{});
}

GaussianParams::GaussianParams(Vector mean_, PsdMatrix cov_)
    : mean(std::move(mean_)), cov(std::move(cov_)) {
    if (mean.size() != cov.dim()) {
        throw InvalidArgument("GaussianParams: mean length " + std::to_string(mean.size()) +
                              " does not match covariance dimension " +
                              std::to_string(cov.dim()));
    }
}

InverseWishartParams::InverseWishartParams(double dof, PsdMatrix scale)
    : dof_(dof), scale_(std::move(scale)) {
    const auto d = static_cast<double>(scale_.dim());
    if (!std::isfinite(dof_) || dof_ <= 2.0 * d) {
        throw InvalidArgument("InverseWishartParams: degrees of freedom " + std::to_string(dof_) +
                              " must exceed 2d = " + std::to_string(2.0 * d));
    }
    if (!scale_.is_positive_definite()) {
        throw InvalidArgument("InverseWishartParams: scale matrix is not positive definite");
    }
}

double log_multivariate_gamma(int d, double a) {
    double out = 0.25 * d * (d - 1) * std::log(std::numbers::pi);
    for (int j = 1; j <= d; ++j) out += std::lgamma(a + 0.5 * (1 - j));
    return out;
}

double iw_log_pdf(const InverseWishartParams& p, const PsdMatrix& sigma) {
    const auto d = p.dim();
    if (sigma.dim() != d) {
        throw InvalidArgument("iw_log_pdf: dimension mismatch");
    }
    if (!sigma.is_positive_definite()) {
        throw InvalidArgument("iw_log_pdf: sigma is not positive definite");
    }
    const double nu = p.dof();
    const double shape = 0.5 * (nu - d - 1);
    const auto sigma_llt = sigma.cholesky();
    const double trace_term = sigma_llt.solve(p.scale().matrix()).trace();
    return shape * p.scale().log_det() - 0.5 * trace_term -
           shape * d * std::numbers::ln2 - log_multivariate_gamma(static_cast<int>(d), shape) -
           0.5 * nu * sigma.log_det();
}

PsdMatrix iw_mean(const InverseWishartParams& p) {
    const double denom = p.dof() - 2.0 * p.dim() - 2.0;
    if (denom <= 0.0) {
        throw InvalidArgument("iw_mean: undefined for nu <= 2d + 2 (nu = " +
                              std::to_string(p.dof()) + ")");
    }
    return p.scale().scaled(1.0 / denom);
}

PsdMatrix iw_mean_inverse_inv(const InverseWishartParams& p) {
    const double denom = p.dof() - p.dim() - 1.0;
    if (denom <= 0.0) {
        throw InvalidArgument("iw_mean_inverse_inv: undefined for nu <= d + 1");
    }
    return p.scale().scaled(1.0 / denom);
}

PsdMatrix iw_mode(const InverseWishartParams& p) { return p.scale().scaled(1.0 / p.dof()); }

}  // namespace vbrq
