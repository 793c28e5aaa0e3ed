#include "vbrq/covdyn.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <string>

namespace vbrq {

DiscountFactor::DiscountFactor(double value) : value_(value) {
    if (!std::isfinite(value) || value <= 0.0 || value > 1.0) {
        throw InvalidArgument("discount factor must lie in (0, 1], got " + std::to_string(value));
    }
    if (value < 0.5) {
        spdlog::warn("discount factor {} is below 0.5; covariance memory is very short", value);
    }
}

InverseWishartParams bb_predict(const InverseWishartParams& p, DiscountFactor lambda,
                                DofPredictionMode mode) {
    const double l = lambda.value();
    const double floor_dof = 2.0 * p.dim() + 2.0;
    const double dof = mode == DofPredictionMode::MeanPreserving
                           ? l * p.dof() + (1.0 - l) * floor_dof
                           : p.dof() + (1.0 - l) * floor_dof;
    if (dof <= 2.0 * p.dim()) {
        throw InvalidArgument("bb_predict: predicted degrees of freedom " + std::to_string(dof) +
                              " is invalid");
    }
    if (l == 1.0) return InverseWishartParams(dof, p.scale());
    return InverseWishartParams(dof, p.scale().scaled(l));
}

InverseWishartParams bb_smooth(const InverseWishartParams& filtered,
                               const InverseWishartParams& next_smoothed, DiscountFactor lambda) {
    if (filtered.dim() != next_smoothed.dim()) {
        throw InvalidArgument("bb_smooth: dimension mismatch");
    }
    const double l = lambda.value();
    if (l == 1.0) return next_smoothed;

    const auto n = filtered.dim();
    const Matrix eye = Matrix::Identity(n, n);
    const Matrix precision = (1.0 - l) * filtered.scale().cholesky().solve(eye) +
                             l * next_smoothed.scale().cholesky().solve(eye);
    Eigen::LLT<Matrix> llt(symmetrize(precision));
    if (llt.info() != Eigen::Success) {
        throw NumericalError("bb_smooth: combined precision is singular");
    }
    const double dof = (1.0 - l) * filtered.dof() + l * next_smoothed.dof();
    return InverseWishartParams(dof, PsdMatrix(symmetrize(llt.solve(eye))));
}

}  // namespace vbrq
