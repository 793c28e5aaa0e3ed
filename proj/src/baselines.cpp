#include "vbrq/baselines.hpp"

#include <algorithm>
#include <string>

namespace vbrq {

GaussianTrajectoryFactor rts_with_fixed_noise(const LgssModel& model, const NoiseSchedule& noise,
                                              const MeasurementSequence& ys) {
    return smooth(model, noise, ys);
}

GaussianTrajectoryFactor rts_with_fixed_noise(const LgssModel& model, const PsdMatrix& q,
                                              const PsdMatrix& r, const MeasurementSequence& ys) {
    return smooth(model, NoiseSchedule::constant(q, r, model.horizon()), ys);
}

void EmConfig::validate() const {
    if (max_iterations < 1) throw InvalidArgument("EmConfig: max_iterations must be >= 1");
    if (!(convergence_tol > 0.0)) throw InvalidArgument("EmConfig: convergence_tol must be > 0");
}

Matrix em_process_update(const LgssModel& model, const GaussianTrajectoryFactor& state) {
    const int horizon = model.horizon();
    if (horizon < 1) throw InvalidArgument("em_process_update: needs K >= 1");
    const auto nx = model.state_dim();
    Matrix acc = Matrix::Zero(nx, nx);
    for (int k = 0; k < horizon; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        const Matrix& a = model.transition(k);
        const Matrix a_cross = a * state.cross_covs[uk];
        const Vector resid = state.means[uk + 1] - a * state.means[uk];
        acc += state.covs[uk + 1] + a * state.covs[uk] * a.transpose() - a_cross.transpose() -
               a_cross + resid * resid.transpose();
    }
    return symmetrize(acc / horizon);
}

Matrix em_measurement_update(const LgssModel& model, const GaussianTrajectoryFactor& state,
                             const MeasurementSequence& ys) {
    const int horizon = model.horizon();
    const auto ny = model.measurement_dim();
    Matrix acc = Matrix::Zero(ny, ny);
    for (int k = 0; k <= horizon; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        const Matrix& c = model.observation(k);
        const Vector resid = ys[uk] - c * state.means[uk];
        acc += c * state.covs[uk] * c.transpose() + resid * resid.transpose();
    }
    return symmetrize(acc / (horizon + 1));
}

namespace {

PsdMatrix checked_estimate(const Matrix& m, const char* what, int iteration) {
    if (Eigen::LLT<Matrix>(m).info() != Eigen::Success) {
        throw NumericalError(std::string("em_smooth: M-step ") + what +
                             " is not positive definite at iteration " + std::to_string(iteration));
    }
    return PsdMatrix(m);
}

double relative_change(const Matrix& prev, const Matrix& curr) {
    const double ref = prev.norm();
    return ref > 0.0 ? (curr - prev).norm() / ref : (curr - prev).norm();
}

}  // namespace

EmResult em_smooth(const LgssModel& model, const MeasurementSequence& ys, const PsdMatrix& q_init,
                   const PsdMatrix& r_init, const EmConfig& cfg) {
    cfg.validate();
    if (model.horizon() < 1) throw InvalidArgument("em_smooth: needs K >= 1");

    EmResult out{q_init, r_init, {}, 0, false, {}, {}};
    for (int it = 1; it <= cfg.max_iterations; ++it) {
        const auto noise = NoiseSchedule::constant(out.q_hat, out.r_hat, model.horizon());
        const FilterResult fr = kalman_filter(model, noise, ys);
        out.log_likelihoods.push_back(fr.log_likelihood);
        const GaussianTrajectoryFactor state = rts_smoother(model, fr);

        PsdMatrix q_next = out.q_hat;
        PsdMatrix r_next = out.r_hat;
        if (cfg.estimate_q) q_next = checked_estimate(em_process_update(model, state), "Q", it);
        if (cfg.estimate_r) {
            r_next = checked_estimate(em_measurement_update(model, state, ys), "R", it);
        }
        const double change = std::max(relative_change(out.q_hat.matrix(), q_next.matrix()),
                                       relative_change(out.r_hat.matrix(), r_next.matrix()));
        out.q_hat = std::move(q_next);
        out.r_hat = std::move(r_next);
        out.iterations = it;
        out.trace.push_back(IterationSnapshot{out.q_hat.matrix(), out.r_hat.matrix()});
        if (change < cfg.convergence_tol) {
            out.converged = true;
            break;
        }
    }

    const FilterResult fr =
        kalman_filter(model, NoiseSchedule::constant(out.q_hat, out.r_hat, model.horizon()), ys);
    out.log_likelihoods.push_back(fr.log_likelihood);
    out.state = rts_smoother(model, fr);
    return out;
}

VbPosterior vbs_r(const LgssModel& model, const MeasurementSequence& ys,
                  const InverseWishartParams& r_prior, const PsdMatrix& q_nominal, VbConfig cfg) {
    cfg.estimate_q = false;
    cfg.frozen_q.assign(static_cast<std::size_t>(model.horizon()), q_nominal);
    const double nu0 = 2.0 * q_nominal.dim() + 3.0;
    VbPriors priors(InverseWishartParams(nu0, q_nominal), r_prior);
    return vb_smooth(model, ys, priors, cfg);
}

VbPosterior vbs_rq_diagonal(const LgssModel& model, const MeasurementSequence& ys,
                            const VbPriors& priors, VbConfig cfg) {
    cfg.diagonal_restriction = true;
    return vb_smooth(model, ys, priors, cfg);
}

}  // namespace vbrq
