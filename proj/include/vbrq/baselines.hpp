#pragma once

#include <vector>

#include "vbrq/vbsmoother.hpp"

namespace vbrq {

/// RTS smoother with a known noise schedule (nominal or oracle).
GaussianTrajectoryFactor rts_with_fixed_noise(const LgssModel& model, const NoiseSchedule& noise,
                                              const MeasurementSequence& ys);

GaussianTrajectoryFactor rts_with_fixed_noise(const LgssModel& model, const PsdMatrix& q,
                                              const PsdMatrix& r, const MeasurementSequence& ys);

struct EmConfig {
    int max_iterations = 50;
    double convergence_tol = 1e-6;
    bool estimate_q = true;
    bool estimate_r = true;

    void validate() const;
};

struct EmResult {
    PsdMatrix q_hat;
    PsdMatrix r_hat;
    /// Smoother output under the final estimates.
    GaussianTrajectoryFactor state;
    int iterations = 0;
    bool converged = false;
    /// log p(y_{0:K}) under the parameters entering each E-step, including the final one.
    std::vector<double> log_likelihoods;
    std::vector<IterationSnapshot> trace;
};

/// M-step for a time-invariant Q: the average expected outer product of w_k.
Matrix em_process_update(const LgssModel& model, const GaussianTrajectoryFactor& state);

/// M-step for a time-invariant R: the average expected outer product of v_k.
Matrix em_measurement_update(const LgssModel& model, const GaussianTrajectoryFactor& state,
                             const MeasurementSequence& ys);

/// Expectation-maximization of constant Q and R around the RTS smoother.
EmResult em_smooth(const LgssModel& model, const MeasurementSequence& ys, const PsdMatrix& q_init,
                   const PsdMatrix& r_init, const EmConfig& cfg);

/// Variational smoother estimating only R; Q stays at `q_nominal`.
VbPosterior vbs_r(const LgssModel& model, const MeasurementSequence& ys,
                  const InverseWishartParams& r_prior, const PsdMatrix& q_nominal, VbConfig cfg);

/// Variational smoother with diagonal Q and R.
VbPosterior vbs_rq_diagonal(const LgssModel& model, const MeasurementSequence& ys,
                            const VbPriors& priors, VbConfig cfg);

}  // namespace vbrq
