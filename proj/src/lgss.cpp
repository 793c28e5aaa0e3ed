#include "vbrq/lgss.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace vbrq {

namespace {

std::string step_str(int k) { return " at step " + std::to_string(k); }

void check_measurements(const LgssModel& model, const MeasurementSequence& ys) {
    if (static_cast<int>(ys.size()) != model.horizon() + 1) {
        throw InvalidArgument("expected " + std::to_string(model.horizon() + 1) +
                              " measurements, got " + std::to_string(ys.size()));
    }
    for (int k = 0; k <= model.horizon(); ++k) {
        if (ys[static_cast<std::size_t>(k)].size() != model.measurement_dim()) {
            throw InvalidArgument("measurement dimension mismatch" + step_str(k));
        }
    }
}

}  // namespace

LgssModel::LgssModel(std::vector<Matrix> transitions, std::vector<Matrix> observations,
                     GaussianParams prior)
    : transitions_(std::move(transitions)),
      observations_(std::move(observations)),
      prior_(std::move(prior)) {
    if (observations_.size() != transitions_.size() + 1) {
        throw InvalidArgument("LgssModel: need K transition and K+1 observation matrices");
    }
    const auto nx = prior_.mean.size();
    const auto ny = observations_.front().rows();
    if (ny == 0) throw InvalidArgument("LgssModel: empty observation matrix");
    for (const auto& a : transitions_) {
        if (a.rows() != nx || a.cols() != nx) {
            throw InvalidArgument("LgssModel: transition matrix must be n_x x n_x");
        }
    }
    for (const auto& c : observations_) {
        if (c.rows() != ny || c.cols() != nx) {
            throw InvalidArgument("LgssModel: observation matrix must be n_y x n_x");
        }
    }
}

LgssModel LgssModel::time_invariant(const Matrix& transition, const Matrix& observation,
                                    GaussianParams prior, int horizon) {
    if (horizon < 0) throw InvalidArgument("LgssModel: negative horizon");
    return LgssModel(std::vector<Matrix>(static_cast<std::size_t>(horizon), transition),
                     std::vector<Matrix>(static_cast<std::size_t>(horizon) + 1, observation),
                     std::move(prior));
}

LgssModel LgssModel::truncated(int horizon) const {
    if (horizon < 0 || horizon > this->horizon()) {
        throw InvalidArgument("LgssModel::truncated: horizon out of range");
    }
    const auto h = static_cast<std::ptrdiff_t>(horizon);
    return LgssModel(std::vector<Matrix>(transitions_.begin(), transitions_.begin() + h),
                     std::vector<Matrix>(observations_.begin(), observations_.begin() + h + 1),
                     prior_);
}

NoiseSchedule NoiseSchedule::constant(const PsdMatrix& q, const PsdMatrix& r, int horizon) {
    return NoiseSchedule{std::vector<PsdMatrix>(static_cast<std::size_t>(horizon), q),
                         std::vector<PsdMatrix>(static_cast<std::size_t>(horizon) + 1, r)};
}

void NoiseSchedule::check_against(const LgssModel& model) const {
    if (static_cast<int>(process.size()) != model.horizon() ||
        static_cast<int>(measurement.size()) != model.horizon() + 1) {
        throw InvalidArgument("NoiseSchedule: expected " + std::to_string(model.horizon()) +
                              " process and " + std::to_string(model.horizon() + 1) +
                              " measurement covariances");
    }
    for (const auto& q : process) {
        if (q.dim() != model.state_dim()) throw InvalidArgument("NoiseSchedule: Q dimension");
    }
    for (const auto& r : measurement) {
        if (r.dim() != model.measurement_dim()) {
            throw InvalidArgument("NoiseSchedule: R dimension");
        }
    }
}

FilterResult kalman_filter(const LgssModel& model, const NoiseSchedule& noise,
                           const MeasurementSequence& ys, FilterOptions options) {
    noise.check_against(model);
    check_measurements(model, ys);

    const int horizon = model.horizon();
    const auto n = static_cast<std::size_t>(horizon) + 1;
    const auto nx = model.state_dim();
    const auto ny = model.measurement_dim();
    const Matrix eye = Matrix::Identity(nx, nx);
    const double log_2pi = std::log(2.0 * std::numbers::pi);

    FilterResult out;
    out.predicted_means.reserve(n);
    out.predicted_covs.reserve(n);
    out.filtered_means.reserve(n);
    out.filtered_covs.reserve(n);
    out.gains.reserve(n);

    Vector m_pred = model.prior().mean;
    Matrix p_pred = model.prior().cov.matrix();
    for (int k = 0; k <= horizon; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        const Matrix& c = model.observation(k);
        const Matrix& r = noise.measurement[uk].matrix();

        const Matrix pct = p_pred * c.transpose();
        const Matrix s = symmetrize(c * pct + r);
        Eigen::LLT<Matrix> llt(s);
        if (llt.info() != Eigen::Success) {
            throw NumericalError("kalman_filter: singular innovation covariance" + step_str(k));
        }
        const Vector innovation = ys[uk] - c * m_pred;
        const Matrix gain = llt.solve(pct.transpose()).transpose();

        Vector m = m_pred + gain * innovation;
        Matrix p;
        if (options.update == CovarianceUpdate::Joseph) {
            const Matrix ikc = eye - gain * c;
            p = symmetrize(ikc * p_pred * ikc.transpose() + gain * r * gain.transpose());
        } else {
            p = symmetrize((eye - gain * c) * p_pred);
        }

        const double log_det_s = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
        out.log_likelihood -=
            0.5 * (innovation.dot(llt.solve(innovation)) + log_det_s + ny * log_2pi);

        out.predicted_means.push_back(m_pred);
        out.predicted_covs.push_back(p_pred);
        if (k < horizon) {
            const Matrix& a = model.transition(k);
            m_pred = a * m;
            p_pred = symmetrize(a * p * a.transpose() + noise.process[uk].matrix());
        }
        out.filtered_means.push_back(std::move(m));
        out.filtered_covs.push_back(std::move(p));
        out.gains.push_back(gain);
    }
    return out;
}

GaussianTrajectoryFactor rts_smoother(const LgssModel& model, const FilterResult& fr) {
    const int horizon = model.horizon();
    if (static_cast<int>(fr.filtered_means.size()) != horizon + 1) {
        throw InvalidArgument("rts_smoother: filter result length does not match model horizon");
    }
    const auto n = static_cast<std::size_t>(horizon) + 1;

    GaussianTrajectoryFactor out;
    out.means.resize(n);
    out.covs.resize(n);
    out.gains.resize(n - 1);
    out.cross_covs.resize(n - 1);
    out.means[n - 1] = fr.filtered_means[n - 1];
    out.covs[n - 1] = fr.filtered_covs[n - 1];

    for (int k = horizon - 1; k >= 0; --k) {
        const auto uk = static_cast<std::size_t>(k);
        const Matrix& a = model.transition(k);
        const Matrix& p_filt = fr.filtered_covs[uk];
        const Matrix& p_next_pred = fr.predicted_covs[uk + 1];

        Eigen::LLT<Matrix> llt(p_next_pred);
        if (llt.info() != Eigen::Success) {
            throw NumericalError("rts_smoother: singular predicted covariance" + step_str(k + 1));
        }
        // G_k = P_{k|k} A^T P_{k+1|k}^{-1}
        Matrix gain = llt.solve(a * p_filt).transpose();

        out.means[uk] =
            fr.filtered_means[uk] + gain * (out.means[uk + 1] - fr.predicted_means[uk + 1]);
        out.covs[uk] =
            symmetrize(p_filt + gain * (out.covs[uk + 1] - p_next_pred) * gain.transpose());
        out.cross_covs[uk] = gain * out.covs[uk + 1];
        out.gains[uk] = std::move(gain);
    }
    return out;
}

GaussianTrajectoryFactor smooth(const LgssModel& model, const NoiseSchedule& noise,
                                const MeasurementSequence& ys) {
    return rts_smoother(model, kalman_filter(model, noise, ys));
}

Vector BatchPosterior::mean(int k) const { return joint_mean.segment(k * state_dim, state_dim); }

Matrix BatchPosterior::cov(int k) const {
    return joint_cov.block(k * state_dim, k * state_dim, state_dim, state_dim);
}

Matrix BatchPosterior::cross_cov(int k) const {
    return joint_cov.block(k * state_dim, (k + 1) * state_dim, state_dim, state_dim);
}

BatchPosterior batch_posterior_oracle(const LgssModel& model, const NoiseSchedule& noise,
                                      const MeasurementSequence& ys) {
    noise.check_against(model);
    check_measurements(model, ys);
    const int horizon = model.horizon();
    const int nx = model.state_dim();
    const int ny = model.measurement_dim();
    if (horizon * nx > kBatchOracleLimit) {
        throw InvalidArgument("batch_posterior_oracle: K * n_x exceeds " +
                              std::to_string(kBatchOracleLimit));
    }
    const int n = (horizon + 1) * nx;
    const int m = (horizon + 1) * ny;

    // Prior moments of the stacked trajectory.
    Vector mu(n);
    Matrix sigma = Matrix::Zero(n, n);
    mu.head(nx) = model.prior().mean;
    sigma.topLeftCorner(nx, nx) = model.prior().cov.matrix();
    for (int k = 0; k < horizon; ++k) {
        const Matrix& a = model.transition(k);
        const int cur = k * nx;
        const int nxt = (k + 1) * nx;
        mu.segment(nxt, nx) = a * mu.segment(cur, nx);
        // Cov(x_{k+1}, x_j) = A_k Cov(x_k, x_j) for j <= k.
        sigma.block(nxt, 0, nx, nxt) = a * sigma.block(cur, 0, nx, nxt);
        sigma.block(0, nxt, nxt, nx) = sigma.block(nxt, 0, nx, nxt).transpose();
        sigma.block(nxt, nxt, nx, nx) =
            a * sigma.block(cur, cur, nx, nx) * a.transpose() +
            noise.process[static_cast<std::size_t>(k)].matrix();
    }

    Matrix h = Matrix::Zero(m, n);
    Matrix r = Matrix::Zero(m, m);
    Vector y(m);
    for (int k = 0; k <= horizon; ++k) {
        h.block(k * ny, k * nx, ny, nx) = model.observation(k);
        r.block(k * ny, k * ny, ny, ny) = noise.measurement[static_cast<std::size_t>(k)].matrix();
        y.segment(k * ny, ny) = ys[static_cast<std::size_t>(k)];
    }

    const Matrix sht = sigma * h.transpose();
    Eigen::LLT<Matrix> llt(symmetrize(h * sht + r));
    if (llt.info() != Eigen::Success) {
        throw NumericalError("batch_posterior_oracle: singular joint measurement covariance");
    }
    const Matrix gain = llt.solve(sht.transpose()).transpose();

    BatchPosterior out;
    out.state_dim = nx;
    out.joint_mean = mu + gain * (y - h * mu);
    out.joint_cov = symmetrize(sigma - gain * sht.transpose());
    return out;
}

}  // namespace vbrq
