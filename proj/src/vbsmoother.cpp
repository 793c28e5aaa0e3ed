#include "vbrq/vbsmoother.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <string>

namespace vbrq {

namespace {

constexpr double kJitterScale = 1e-10;

Matrix zero_off_diagonal(const Matrix& m) { return m.diagonal().asDiagonal(); }

InverseWishartParams diagonal_part(const InverseWishartParams& p) {
    return InverseWishartParams(p.dof(), PsdMatrix(zero_off_diagonal(p.scale().matrix())));
}

// Accepts a scale matrix, adding trace-proportional jitter only when its Cholesky fails.
PsdMatrix guarded_scale(const Matrix& m, const char* what, int k) {
    Matrix s = symmetrize(m);
    if (Eigen::LLT<Matrix>(s).info() == Eigen::Success) return PsdMatrix(s);

    const double jitter = kJitterScale * s.trace() / static_cast<double>(s.rows());
    if (!(jitter > 0.0)) {
        throw NumericalError(std::string("accumulated ") + what + " scale is not positive definite at step " +
                             std::to_string(k));
    }
    spdlog::warn("{} scale at step {} failed Cholesky; adding jitter {}", what, k, jitter);
    s.diagonal().array() += jitter;
    if (Eigen::LLT<Matrix>(s).info() != Eigen::Success) {
        throw NumericalError(std::string("accumulated ") + what +
                             " scale is not positive definite after jitter at step " +
                             std::to_string(k));
    }
    return PsdMatrix(s);
}

double relative_change(double diff_norm, double ref_norm) {
    return ref_norm > 0.0 ? diff_norm / ref_norm : diff_norm;
}

std::vector<PsdMatrix> plugins_or_frozen(bool estimated,
                                         const std::vector<InverseWishartParams>& factors,
                                         const std::vector<PsdMatrix>& frozen,
                                         const InverseWishartParams& prior, std::size_t count) {
    if (estimated) {
        std::vector<PsdMatrix> out;
        out.reserve(factors.size());
        for (const auto& f : factors) out.push_back(iw_mean_inverse_inv(f));
        return out;
    }
    if (!frozen.empty()) return frozen;
    return std::vector<PsdMatrix>(count, iw_mean(prior));
}

std::vector<PsdMatrix> means_of(const std::vector<InverseWishartParams>& factors) {
    std::vector<PsdMatrix> out;
    out.reserve(factors.size());
    for (const auto& f : factors) out.push_back(iw_mean(f));
    return out;
}

std::vector<Matrix> raw(const std::vector<PsdMatrix>& v) {
    std::vector<Matrix> out;
    out.reserve(v.size());
    for (const auto& m : v) out.push_back(m.matrix());
    return out;
}

}  // namespace

void VbConfig::validate() const {
    if (max_iterations < 1) throw InvalidArgument("VbConfig: max_iterations must be >= 1");
    if (!(convergence_tol > 0.0)) throw InvalidArgument("VbConfig: convergence_tol must be > 0");
}

VbPriors::VbPriors(InverseWishartParams q, InverseWishartParams r)
    : q_prior(std::move(q)), r_prior(std::move(r)) {
    if (q_prior.dof() <= 2.0 * q_prior.dim() + 2.0) {
        throw InvalidArgument("VbPriors: nu_0 must exceed 2 n_x + 2 for the prior mean of Q to exist");
    }
    if (r_prior.dof() <= 2.0 * r_prior.dim() + 2.0) {
        throw InvalidArgument("VbPriors: mu_0 must exceed 2 n_y + 2 for the prior mean of R to exist");
    }
}

VbPriors VbPriors::from_nominal(const PsdMatrix& q0, const PsdMatrix& r0, double dof_offset) {
    if (!(dof_offset > 2.0)) {
        throw InvalidArgument("VbPriors::from_nominal: dof offset must exceed 2");
    }
    const double nu0 = 2.0 * q0.dim() + dof_offset;
    const double mu0 = 2.0 * r0.dim() + dof_offset;
    return VbPriors(InverseWishartParams(nu0, q0.scaled(nu0 - 2.0 * q0.dim() - 2.0)),
                    InverseWishartParams(mu0, r0.scaled(mu0 - 2.0 * r0.dim() - 2.0)));
}

std::vector<PsdMatrix> VbPosterior::q_mode() const {
    std::vector<PsdMatrix> out;
    for (const auto& f : q_factors) out.push_back(iw_mode(f));
    return out;
}

std::vector<PsdMatrix> VbPosterior::r_mode() const {
    std::vector<PsdMatrix> out;
    for (const auto& f : r_factors) out.push_back(iw_mode(f));
    return out;
}

NoiseFactors initial_noise_factors(const LgssModel& model, const VbPriors& priors) {
    if (priors.q_prior.dim() != model.state_dim() ||
        priors.r_prior.dim() != model.measurement_dim()) {
        throw InvalidArgument("VbPriors dimensions do not match the model");
    }
    const auto k = static_cast<std::size_t>(model.horizon());
    return NoiseFactors{std::vector<InverseWishartParams>(k, priors.q_prior),
                        std::vector<InverseWishartParams>(k + 1, priors.r_prior)};
}

GaussianTrajectoryFactor update_state_factor(const LgssModel& model, const MeasurementSequence& ys,
                                             const std::vector<InverseWishartParams>& q_factors,
                                             const std::vector<InverseWishartParams>& r_factors) {
    NoiseSchedule plugins;
    plugins.process.reserve(q_factors.size());
    plugins.measurement.reserve(r_factors.size());
    for (const auto& f : q_factors) plugins.process.push_back(iw_mean_inverse_inv(f));
    for (const auto& f : r_factors) plugins.measurement.push_back(iw_mean_inverse_inv(f));
    return smooth(model, plugins, ys);
}

NoiseFactors update_noise_factors(const LgssModel& model, const GaussianTrajectoryFactor& state,
                                  const MeasurementSequence& ys, const VbPriors& priors,
                                  const VbConfig& cfg) {
    const int horizon = model.horizon();
    const auto n = static_cast<std::size_t>(horizon) + 1;
    if (state.means.size() != n || state.cross_covs.size() + 1 != n) {
        throw InvalidArgument("update_noise_factors: state factor does not span the horizon");
    }
    if (ys.size() != n) throw InvalidArgument("update_noise_factors: measurement count");

    NoiseFactors out;

    if (cfg.estimate_r) {
        std::vector<InverseWishartParams> filtered;
        filtered.reserve(n);
        InverseWishartParams pred =
            cfg.diagonal_restriction ? diagonal_part(priors.r_prior) : priors.r_prior;
        for (int k = 0; k <= horizon; ++k) {
            const auto uk = static_cast<std::size_t>(k);
            const Matrix& c = model.observation(k);
            const Vector resid = ys[uk] - c * state.means[uk];
            Matrix scale = pred.scale().matrix() + c * state.covs[uk] * c.transpose() +
                           resid * resid.transpose();
            if (cfg.diagonal_restriction) scale = zero_off_diagonal(scale);
            filtered.emplace_back(pred.dof() + 1.0, guarded_scale(scale, "R", k));
            if (k < horizon) pred = bb_predict(filtered.back(), cfg.lambda_r, cfg.dof_mode);
        }
        out.r = filtered;
        for (int k = horizon - 1; k >= 0; --k) {
            const auto uk = static_cast<std::size_t>(k);
            out.r[uk] = bb_smooth(filtered[uk], out.r[uk + 1], cfg.lambda_r);
        }
    }

    if (cfg.estimate_q && horizon > 0) {
        std::vector<InverseWishartParams> filtered;
        filtered.reserve(n - 1);
        InverseWishartParams pred =
            cfg.diagonal_restriction ? diagonal_part(priors.q_prior) : priors.q_prior;
        for (int k = 0; k < horizon; ++k) {
            const auto uk = static_cast<std::size_t>(k);
            const Matrix& a = model.transition(k);
            const Matrix a_cross = a * state.cross_covs[uk];  // A_k P_{k,k+1|K}
            const Vector resid = state.means[uk + 1] - a * state.means[uk];
            Matrix scale = pred.scale().matrix() + state.covs[uk + 1] +
                           a * state.covs[uk] * a.transpose() - a_cross.transpose() - a_cross +
                           resid * resid.transpose();
            if (cfg.diagonal_restriction) scale = zero_off_diagonal(scale);
            filtered.emplace_back(pred.dof() + 1.0, guarded_scale(scale, "Q", k));
            if (k + 1 < horizon) pred = bb_predict(filtered.back(), cfg.lambda_q, cfg.dof_mode);
        }
        out.q = filtered;
        // The last factor (k = K-1) keeps its forward value.
        for (int k = horizon - 2; k >= 0; --k) {
            const auto uk = static_cast<std::size_t>(k);
            out.q[uk] = bb_smooth(filtered[uk], out.q[uk + 1], cfg.lambda_q);
        }
    }
    return out;
}

bool convergence_check(const VbIterate& prev, const VbIterate& curr, double tol) {
    if (prev.q_hat.size() != curr.q_hat.size() || prev.r_hat.size() != curr.r_hat.size() ||
        prev.means.size() != curr.means.size()) {
        throw InvalidArgument("convergence_check: iterate shapes differ");
    }
    double worst = 0.0;
    for (std::size_t k = 0; k < prev.q_hat.size(); ++k) {
        worst = std::max(worst, relative_change((curr.q_hat[k] - prev.q_hat[k]).norm(),
                                                prev.q_hat[k].norm()));
    }
    for (std::size_t k = 0; k < prev.r_hat.size(); ++k) {
        worst = std::max(worst, relative_change((curr.r_hat[k] - prev.r_hat[k]).norm(),
                                                prev.r_hat[k].norm()));
    }
    for (std::size_t k = 0; k < prev.means.size(); ++k) {
        worst = std::max(worst, relative_change((curr.means[k] - prev.means[k]).norm(),
                                                prev.means[k].norm()));
    }
    return worst < tol;
}

VbPosterior vb_smooth(const LgssModel& model, const MeasurementSequence& ys,
                      const VbPriors& priors, const VbConfig& cfg) {
    NoiseFactors start = initial_noise_factors(model, priors);
    if (cfg.diagonal_restriction) {
        for (auto& f : start.q) f = diagonal_part(f);
        for (auto& f : start.r) f = diagonal_part(f);
    }
    return vb_smooth(model, ys, priors, cfg, std::move(start));
}

VbPosterior vb_smooth(const LgssModel& model, const MeasurementSequence& ys,
                      const VbPriors& priors, const VbConfig& cfg, NoiseFactors factors) {
    cfg.validate();
    const int horizon = model.horizon();
    const auto n = static_cast<std::size_t>(horizon) + 1;
    if (priors.q_prior.dim() != model.state_dim() ||
        priors.r_prior.dim() != model.measurement_dim()) {
        throw InvalidArgument("VbPriors dimensions do not match the model");
    }
    if ((cfg.estimate_q && factors.q.size() != n - 1) || (cfg.estimate_r && factors.r.size() != n)) {
        throw InvalidArgument("vb_smooth: starting factors do not span the horizon");
    }
    if (!cfg.estimate_q && !cfg.frozen_q.empty() && cfg.frozen_q.size() != n - 1) {
        throw InvalidArgument("vb_smooth: frozen_q needs K entries");
    }
    if (!cfg.estimate_r && !cfg.frozen_r.empty() && cfg.frozen_r.size() != n) {
        throw InvalidArgument("vb_smooth: frozen_r needs K+1 entries");
    }
    if (!cfg.estimate_q) factors.q.clear();
    if (!cfg.estimate_r) factors.r.clear();

    VbPosterior post;
    post.trace_step = cfg.trace_step >= 0 ? std::min(cfg.trace_step, horizon) : horizon / 2;
    const auto trace_r = static_cast<std::size_t>(post.trace_step);
    const auto trace_q = std::min(trace_r, n - 1 == 0 ? 0 : n - 2);

    const int max_iterations = (cfg.estimate_q || cfg.estimate_r) ? cfg.max_iterations : 1;
    VbIterate previous;
    for (int it = 1; it <= max_iterations; ++it) {
        NoiseSchedule plugins{
            plugins_or_frozen(cfg.estimate_q, factors.q, cfg.frozen_q, priors.q_prior, n - 1),
            plugins_or_frozen(cfg.estimate_r, factors.r, cfg.frozen_r, priors.r_prior, n)};
        post.state = smooth(model, plugins, ys);

        NoiseFactors updated = update_noise_factors(model, post.state, ys, priors, cfg);
        if (cfg.estimate_q) factors.q = std::move(updated.q);
        if (cfg.estimate_r) factors.r = std::move(updated.r);

        post.q_hat = cfg.estimate_q ? means_of(factors.q) : std::move(plugins.process);
        post.r_hat = cfg.estimate_r ? means_of(factors.r) : std::move(plugins.measurement);
        post.iterations_used = it;
        post.trace.push_back(IterationSnapshot{
            post.q_hat.empty() ? Matrix() : post.q_hat[trace_q].matrix(),
            post.r_hat[trace_r].matrix()});

        VbIterate current{raw(post.q_hat), raw(post.r_hat), post.state.means};
        if (it > 1 && convergence_check(previous, current, cfg.convergence_tol)) {
            post.converged = true;
            break;
        }
        previous = std::move(current);
    }
    if (max_iterations == 1 && !cfg.estimate_q && !cfg.estimate_r) post.converged = true;

    post.q_factors = std::move(factors.q);
    post.r_factors = std::move(factors.r);
    return post;
}

}  // namespace vbrq
