#pragma once

#include "vbrq/matstat.hpp"

namespace vbrq {

/// Covariance discount factor in (0, 1]; 1 means a static covariance.
class DiscountFactor {
public:
    explicit DiscountFactor(double value);

    double value() const { return value_; }

private:
    double value_;
};

enum class DofPredictionMode {
    /// nu' = lambda * nu + (1 - lambda)(2d + 2); keeps E[Sigma] unchanged.
    MeanPreserving,
    /// nu' = nu + (1 - lambda)(2d + 2); the pseudocode variant, kept for comparison runs.
    Table1Verbatim,
};

/// Forward Beta-Bartlett step: Psi' = lambda * Psi, DOF per `mode`.
InverseWishartParams bb_predict(const InverseWishartParams& p, DiscountFactor lambda,
                                DofPredictionMode mode = DofPredictionMode::MeanPreserving);

/// Backward Beta-Bartlett step combining a filtered factor with the smoothed factor of
/// the next step: precisions and DOFs mix with weights (1 - lambda, lambda).
InverseWishartParams bb_smooth(const InverseWishartParams& filtered,
                               const InverseWishartParams& next_smoothed, DiscountFactor lambda);

}  // namespace vbrq
