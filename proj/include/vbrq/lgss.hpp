#pragma once

#include <vector>

#include "vbrq/matstat.hpp"

namespace vbrq {

/**
 * Known part of the linear-Gaussian state-space model
 *
 *   x_{k+1} = A_k x_k + w_k,  w_k ~ N(0, Q_k),   0 <= k < K
 *   y_k     = C_k x_k + v_k,  v_k ~ N(0, R_k),   0 <= k <= K
 *   x_0 ~ N(m_0, P_0)
 *
 * Holds K transition matrices and K+1 measurement matrices.
 */
class LgssModel {
public:
    LgssModel(std::vector<Matrix> transitions, std::vector<Matrix> observations,
              GaussianParams prior);

    static LgssModel time_invariant(const Matrix& transition, const Matrix& observation,
                                    GaussianParams prior, int horizon);

    int horizon() const { return static_cast<int>(transitions_.size()); }
    int state_dim() const { return static_cast<int>(prior_.mean.size()); }
    int measurement_dim() const { return static_cast<int>(observations_.front().rows()); }

    const Matrix& transition(int k) const { return transitions_[static_cast<std::size_t>(k)]; }
    const Matrix& observation(int k) const { return observations_[static_cast<std::size_t>(k)]; }
    const GaussianParams& prior() const { return prior_; }

    /// The same model restricted to steps 0..horizon.
    LgssModel truncated(int horizon) const;

private:
    std::vector<Matrix> transitions_;
    std::vector<Matrix> observations_;
    GaussianParams prior_;
};

/// Q_k for 0 <= k < K and R_k for 0 <= k <= K.
struct NoiseSchedule {
    std::vector<PsdMatrix> process;
    std::vector<PsdMatrix> measurement;

    static NoiseSchedule constant(const PsdMatrix& q, const PsdMatrix& r, int horizon);

    /// Throws InvalidArgument when lengths or dimensions disagree with `model`.
    void check_against(const LgssModel& model) const;
};

using MeasurementSequence = std::vector<Vector>;

enum class CovarianceUpdate { Standard, Joseph };

struct FilterOptions {
    CovarianceUpdate update = CovarianceUpdate::Standard;
};

/// Index k holds m_{k|k-1}, P_{k|k-1}, m_{k|k}, P_{k|k} and the gain K_k.
struct FilterResult {
    std::vector<Vector> predicted_means;
    std::vector<Matrix> predicted_covs;
    std::vector<Vector> filtered_means;
    std::vector<Matrix> filtered_covs;
    std::vector<Matrix> gains;
    /// log p(y_{0:K}) from the innovation decomposition.
    double log_likelihood = 0.0;
};

/**
 * Smoothed marginals m_{k|K}, P_{k|K} for 0 <= k <= K, together with the
 * smoother gains G_k and lag-one cross-covariances P_{k,k+1|K} = G_k P_{k+1|K}
 * for 0 <= k < K. P_{k+1,k|K} is the transpose.
 */
struct GaussianTrajectoryFactor {
    std::vector<Vector> means;
    std::vector<Matrix> covs;
    std::vector<Matrix> gains;
    std::vector<Matrix> cross_covs;
};

FilterResult kalman_filter(const LgssModel& model, const NoiseSchedule& noise,
                           const MeasurementSequence& ys, FilterOptions options = {});

GaussianTrajectoryFactor rts_smoother(const LgssModel& model, const FilterResult& filtered);

/// Filter followed by smoother.
GaussianTrajectoryFactor smooth(const LgssModel& model, const NoiseSchedule& noise,
                                const MeasurementSequence& ys);

/// Exact posterior of the stacked trajectory x_{0:K}, by dense conditioning.
struct BatchPosterior {
    int state_dim = 0;
    Vector joint_mean;
    Matrix joint_cov;

    int horizon() const { return static_cast<int>(joint_mean.size()) / state_dim - 1; }
    Vector mean(int k) const;
    Matrix cov(int k) const;
    /// Cov(x_k, x_{k+1} | y_{0:K}).
    Matrix cross_cov(int k) const;
};

/// Limited to K * n_x <= kBatchOracleLimit.
inline constexpr int kBatchOracleLimit = 64;

BatchPosterior batch_posterior_oracle(const LgssModel& model, const NoiseSchedule& noise,
                                      const MeasurementSequence& ys);

}  // namespace vbrq
