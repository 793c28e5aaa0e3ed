#pragma once

#include <vector>

#include "vbrq/covdyn.hpp"
#include "vbrq/lgss.hpp"

namespace vbrq {

struct VbConfig {
    DiscountFactor lambda_q{1.0};
    DiscountFactor lambda_r{1.0};
    int max_iterations = 50;
    /// Relative-change threshold of convergence_check.
    double convergence_tol = 1e-6;
    DofPredictionMode dof_mode = DofPredictionMode::MeanPreserving;
    /// Zero every off-diagonal scale entry (independent inverse-gamma variances).
    bool diagonal_restriction = false;
    bool estimate_q = true;
    bool estimate_r = true;
    /// Plug-in covariances used when the matching estimate_* flag is false. An empty
    /// sequence means the prior mean at every step; otherwise K (Q) or K+1 (R) entries.
    std::vector<PsdMatrix> frozen_q;
    std::vector<PsdMatrix> frozen_r;
    /// Step whose estimates are recorded per iteration; -1 selects K/2.
    int trace_step = -1;

    void validate() const;
};

/// Initial inverse-Wishart priors of Q_0 (dimension n_x) and R_0 (dimension n_y).
struct VbPriors {
    VbPriors(InverseWishartParams q, InverseWishartParams r);

    /// nu_0 = 2 n_x + dof_offset, V_0 = (nu_0 - 2 n_x - 2) Q_0 and likewise for R,
    /// so the prior means equal the nominal covariances.
    static VbPriors from_nominal(const PsdMatrix& q0, const PsdMatrix& r0, double dof_offset = 3.0);

    InverseWishartParams q_prior;
    InverseWishartParams r_prior;
};

/// q_Q parameters (K entries) and q_R parameters (K+1 entries).
struct NoiseFactors {
    std::vector<InverseWishartParams> q;
    std::vector<InverseWishartParams> r;
};

/// Quantities compared between successive iterations.
struct VbIterate {
    std::vector<Matrix> q_hat;
    std::vector<Matrix> r_hat;
    std::vector<Vector> means;
};

struct IterationSnapshot {
    Matrix q_hat;
    Matrix r_hat;
};

struct VbPosterior {
    GaussianTrajectoryFactor state;
    /// Empty when Q (resp. R) was not estimated.
    std::vector<InverseWishartParams> q_factors;
    std::vector<InverseWishartParams> r_factors;
    /// Posterior means; the frozen plug-ins when not estimated.
    std::vector<PsdMatrix> q_hat;
    std::vector<PsdMatrix> r_hat;
    int iterations_used = 0;
    bool converged = false;
    int trace_step = 0;
    /// One entry per iteration: estimates at `trace_step`.
    std::vector<IterationSnapshot> trace;

    std::vector<PsdMatrix> q_mode() const;
    std::vector<PsdMatrix> r_mode() const;
};

/// Every factor set to the prior, for all steps.
NoiseFactors initial_noise_factors(const LgssModel& model, const VbPriors& priors);

/// Kalman filter and RTS smoother run with Q~_k = V/(nu - n_x - 1), R~_k = M/(mu - n_y - 1).
GaussianTrajectoryFactor update_state_factor(const LgssModel& model, const MeasurementSequence& ys,
                                             const std::vector<InverseWishartParams>& q_factors,
                                             const std::vector<InverseWishartParams>& r_factors);

/**
 * Forward accumulation of the expected residual outer products into the
 * inverse-Wishart scales, interleaved with Beta-Bartlett prediction, then the
 * backward Beta-Bartlett smoothing pass. R is smoothed over k = K-1..0; Q over
 * k = K-2..0, so the last Q factor keeps its forward value.
 *
 * Factors whose estimate_* flag is off are returned empty.
 */
NoiseFactors update_noise_factors(const LgssModel& model, const GaussianTrajectoryFactor& state,
                                  const MeasurementSequence& ys, const VbPriors& priors,
                                  const VbConfig& cfg);

/// True iff the largest relative change in Q^_k, R^_k (Frobenius) and m_{k|K} (2-norm)
/// is below `tol`.
bool convergence_check(const VbIterate& prev, const VbIterate& curr, double tol);

VbPosterior vb_smooth(const LgssModel& model, const MeasurementSequence& ys,
                      const VbPriors& priors, const VbConfig& cfg);

/// Same fixed-point iteration started from `start` instead of the priors.
VbPosterior vb_smooth(const LgssModel& model, const MeasurementSequence& ys,
                      const VbPriors& priors, const VbConfig& cfg, NoiseFactors start);

}  // namespace vbrq
