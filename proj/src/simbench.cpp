#include "vbrq/simbench.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <numbers>
#include <thread>

namespace vbrq {

void CwnaScenario::validate() const {
    if (!(tau > 0.0)) throw InvalidArgument("scenario: tau must be > 0");
    if (horizon < 1) throw InvalidArgument("scenario: K must be >= 1");
    if (!(sigma_e2 > 0.0)) throw InvalidArgument("scenario: sigma_e2 must be > 0");
    if (!(sigma_v2 > 0.0)) throw InvalidArgument("scenario: sigma_v2 must be > 0");
    if (!(r_scale > 0.0) || !(q_scale > 0.0)) {
        throw InvalidArgument("scenario: r_scale and q_scale must be > 0");
    }
    if (mc_runs < 1) throw InvalidArgument("scenario: mc_runs must be >= 1");
}

CwnaScenario CwnaScenario::time_varying_desk() { return CwnaScenario{}; }

CwnaScenario CwnaScenario::time_invariant_desk() {
    CwnaScenario s;
    s.horizon = 1000;
    s.schedule_kind = ScheduleKind::TimeInvariantScaled;
    s.mc_runs = 100;
    return s;
}

CwnaScenario CwnaScenario::time_varying_full() {
    CwnaScenario s = time_varying_desk();
    s.mc_runs = 5000;
    return s;
}

CwnaScenario CwnaScenario::time_invariant_full() {
    CwnaScenario s = time_invariant_desk();
    s.mc_runs = 5000;
    return s;
}

CwnaSetup build_cwna_model(const CwnaScenario& s) {
    s.validate();
    const double t = s.tau;

    Matrix a = Matrix::Zero(4, 4);
    a << 1, t, 0, 0,
         0, 1, 0, 0,
         0, 0, 1, t,
         0, 0, 0, 1;
    Matrix c = Matrix::Zero(2, 4);
    c(0, 0) = 1.0;
    c(1, 2) = 1.0;

    Matrix q_block(2, 2);
    q_block << t * t * t / 3.0, t * t / 2.0,
               t * t / 2.0,     t;
    Matrix q0 = Matrix::Zero(4, 4);
    q0.topLeftCorner(2, 2) = s.sigma_v2 * q_block;
    q0.bottomRightCorner(2, 2) = s.sigma_v2 * q_block;

    Matrix r0(2, 2);
    r0 << 5, 1,
          1, 5;
    r0 *= s.sigma_e2;

    Vector m0(4);
    m0 << 0.0, 5.0, 0.0, 5.0;
    const Matrix p0 = Vector::Constant(4, 30.0 * 30.0).asDiagonal();

    return CwnaSetup{LgssModel::time_invariant(a, c, GaussianParams(m0, PsdMatrix(p0)), s.horizon),
                     PsdMatrix(q0), PsdMatrix(r0)};
}

NoiseSchedule covariance_schedule(const CwnaScenario& s, const PsdMatrix& q0, const PsdMatrix& r0) {
    if (s.schedule_kind == ScheduleKind::TimeInvariantScaled) {
        return NoiseSchedule::constant(q0.scaled(s.q_scale), r0.scaled(s.r_scale), s.horizon);
    }
    NoiseSchedule out;
    out.process.reserve(static_cast<std::size_t>(s.horizon));
    out.measurement.reserve(static_cast<std::size_t>(s.horizon) + 1);
    for (int k = 0; k <= s.horizon; ++k) {
        const double phase = std::cos(4.0 * std::numbers::pi * k / s.horizon);
        out.measurement.push_back(r0.scaled(2.0 - phase));
        if (k < s.horizon) out.process.push_back(q0.scaled(2.0 / 3.0 + phase / 3.0));
    }
    return out;
}

std::mt19937_64 run_engine(std::uint64_t seed, std::uint64_t run) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(run), static_cast<std::uint32_t>(run >> 32)};
    return std::mt19937_64(seq);
}

Matrix covariance_factor(const PsdMatrix& cov) {
    Eigen::LLT<Matrix> llt(cov.matrix());
    if (llt.info() == Eigen::Success) return llt.matrixL();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov.matrix());
    const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal();
}

namespace {

// Reuses the previous factor while the covariance is unchanged.
class FactorCache {
public:
    const Matrix& operator()(const PsdMatrix& cov) {
        if (!valid_ || cov.matrix() != last_) {
            last_ = cov.matrix();
            factor_ = covariance_factor(cov);
            valid_ = true;
        }
        return factor_;
    }

private:
    bool valid_ = false;
    Matrix last_;
    Matrix factor_;
};

Vector standard_normal(std::mt19937_64& engine, std::normal_distribution<double>& dist,
                       Eigen::Index n) {
    Vector z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = dist(engine);
    return z;
}

}  // namespace

SimulatedData simulate(const LgssModel& model, const NoiseSchedule& schedule, std::uint64_t seed,
                       std::uint64_t run, SimulateOptions options) {
    schedule.check_against(model);
    const int horizon = model.horizon();
    const auto nx = model.state_dim();
    const auto ny = model.measurement_dim();

    auto engine = run_engine(seed, run);
    std::normal_distribution<double> dist(0.0, 1.0);
    FactorCache q_factor;
    FactorCache r_factor;

    SimulatedData out;
    out.states.reserve(static_cast<std::size_t>(horizon) + 1);
    out.measurements.reserve(static_cast<std::size_t>(horizon) + 1);

    Vector x = model.prior().mean;
    if (!options.zero_noise) {
        x += covariance_factor(model.prior().cov) * standard_normal(engine, dist, nx);
    }
    for (int k = 0; k <= horizon; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        Vector y = model.observation(k) * x;
        if (!options.zero_noise) {
            y += r_factor(schedule.measurement[uk]) * standard_normal(engine, dist, ny);
        }
        out.states.push_back(x);
        out.measurements.push_back(std::move(y));
        if (k < horizon) {
            Vector next = model.transition(k) * x;
            if (!options.zero_noise) {
                next += q_factor(schedule.process[uk]) * standard_normal(engine, dist, nx);
            }
            x = std::move(next);
        }
    }
    return out;
}

double rmse(const std::vector<Vector>& estimates, const std::vector<Vector>& truth,
            const Matrix& c) {
    if (estimates.size() != truth.size() || estimates.empty()) {
        throw InvalidArgument("rmse: sequences must be non-empty and of equal length");
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        acc += (c * (estimates[k] - truth[k])).squaredNorm();
    }
    return std::sqrt(acc / static_cast<double>(truth.size()));
}

double matrix_error(const std::vector<PsdMatrix>& estimates, const std::vector<PsdMatrix>& truth) {
    if (estimates.size() != truth.size() || estimates.empty()) {
        throw InvalidArgument("matrix_error: sequences must be non-empty and of equal length");
    }
    const auto n = static_cast<double>(truth.front().dim());
    double acc = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        if (estimates[k].dim() != truth[k].dim()) {
            throw InvalidArgument("matrix_error: dimension mismatch");
        }
        const Matrix diff = estimates[k].matrix() - truth[k].matrix();
        acc += (diff * diff).trace();
    }
    return std::pow(acc / (n * n * static_cast<double>(truth.size())), 0.25);
}

std::string_view algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::OracleRts: return "Oracle-RTS";
        case Algorithm::Rts: return "RTS";
        case Algorithm::VbsR: return "VBS-R";
        case Algorithm::VbsRq: return "VBS-RQ";
        case Algorithm::EmsRq: return "EMS-RQ";
        case Algorithm::VbsRqD: return "VBS-RQ-D";
    }
    return "?";
}

std::string_view algorithm_key(Algorithm a) {
    switch (a) {
        case Algorithm::OracleRts: return "oracle_rts";
        case Algorithm::Rts: return "rts";
        case Algorithm::VbsR: return "vbs_r";
        case Algorithm::VbsRq: return "vbs_rq";
        case Algorithm::EmsRq: return "ems_rq";
        case Algorithm::VbsRqD: return "vbs_rq_d";
    }
    return "?";
}

Algorithm parse_algorithm(std::string_view s) {
    for (Algorithm a : kAllAlgorithms) {
        if (s == algorithm_name(a) || s == algorithm_key(a)) return a;
    }
    throw InvalidArgument("unknown algorithm '" + std::string(s) +
                          "' (expected one of oracle_rts, rts, vbs_r, vbs_rq, ems_rq, vbs_rq_d)");
}

bool estimates_r(Algorithm a) {
    return a == Algorithm::VbsR || a == Algorithm::VbsRq || a == Algorithm::EmsRq ||
           a == Algorithm::VbsRqD;
}

bool estimates_q(Algorithm a) {
    return a == Algorithm::VbsRq || a == Algorithm::EmsRq || a == Algorithm::VbsRqD;
}

BenchmarkConfig BenchmarkConfig::defaults_for(const CwnaScenario& s) {
    BenchmarkConfig cfg;
    const DiscountFactor lambda(s.schedule_kind == ScheduleKind::TimeVaryingSinusoid ? 0.98 : 1.0);
    for (VbConfig* vb : {&cfg.vbs_r, &cfg.vbs_rq, &cfg.vbs_rq_d}) {
        vb->lambda_q = lambda;
        vb->lambda_r = lambda;
    }
    return cfg;
}

SmootherOutput run_algorithm(Algorithm a, const CwnaSetup& setup, const NoiseSchedule& truth,
                             const MeasurementSequence& ys, const BenchmarkConfig& cfg) {
    const LgssModel& model = setup.model;
    const auto from_vb = [](VbPosterior post, bool with_q) {
        SmootherOutput out;
        out.state = std::move(post.state);
        if (with_q) out.q_hat = std::move(post.q_hat);
        out.r_hat = std::move(post.r_hat);
        out.trace = std::move(post.trace);
        out.iterations = post.iterations_used;
        out.converged = post.converged;
        return out;
    };
    const auto priors = [&] {
        return VbPriors::from_nominal(setup.q0, setup.r0, cfg.prior_dof_offset);
    };

    switch (a) {
        case Algorithm::OracleRts: {
            SmootherOutput out;
            out.state = rts_with_fixed_noise(model, truth, ys);
            return out;
        }
        case Algorithm::Rts: {
            SmootherOutput out;
            out.state = rts_with_fixed_noise(model, setup.q0, setup.r0, ys);
            return out;
        }
        case Algorithm::VbsR:
            return from_vb(vbs_r(model, ys, priors().r_prior, setup.q0, cfg.vbs_r), false);
        case Algorithm::VbsRq:
            return from_vb(vb_smooth(model, ys, priors(), cfg.vbs_rq), true);
        case Algorithm::VbsRqD:
            return from_vb(vbs_rq_diagonal(model, ys, priors(), cfg.vbs_rq_d), true);
        case Algorithm::EmsRq: {
            EmResult em = em_smooth(model, ys, setup.q0, setup.r0, cfg.em);
            SmootherOutput out;
            out.state = std::move(em.state);
            out.q_hat.assign(static_cast<std::size_t>(model.horizon()), em.q_hat);
            out.r_hat.assign(static_cast<std::size_t>(model.horizon()) + 1, em.r_hat);
            out.trace = std::move(em.trace);
            out.iterations = em.iterations;
            out.converged = em.converged;
            return out;
        }
    }
    throw InvalidArgument("run_algorithm: unknown algorithm");
}

Stat summarize(const std::vector<double>& values) {
    Stat s;
    s.count = static_cast<int>(values.size());
    if (values.empty()) {
        s.mean = std::nan("");
        s.std = std::nan("");
        return s;
    }
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / s.count;
    if (s.count < 2) {
        s.std = std::nan("");
        return s;
    }
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (s.count - 1));
    return s;
}

std::vector<AlgorithmSummary> summarize_runs(const std::vector<McRunResult>& runs,
                                             const std::vector<Algorithm>& algorithms) {
    std::vector<AlgorithmSummary> out;
    for (Algorithm a : algorithms) {
        AlgorithmSummary sum;
        sum.algorithm = a;
        std::vector<double> rmse_v;
        std::vector<double> er_v;
        std::vector<double> eq_v;
        for (const auto& r : runs) {
            if (r.algorithm != a) continue;
            if (!r.ok) {
                ++sum.failed;
                continue;
            }
            rmse_v.push_back(r.rmse);
            if (r.e_r) er_v.push_back(*r.e_r);
            if (r.e_q) eq_v.push_back(*r.e_q);
        }
        sum.rmse = summarize(rmse_v);
        if (estimates_r(a)) sum.e_r = summarize(er_v);
        if (estimates_q(a)) sum.e_q = summarize(eq_v);
        out.push_back(sum);
    }
    return out;
}

const AlgorithmSummary& MonteCarloResult::summary_for(Algorithm a) const {
    for (const auto& s : summary) {
        if (s.algorithm == a) return s;
    }
    throw InvalidArgument("no summary for algorithm " + std::string(algorithm_name(a)));
}

MonteCarloResult monte_carlo(const CwnaScenario& s, const BenchmarkConfig& cfg) {
    s.validate();
    if (cfg.algorithms.empty()) throw InvalidArgument("monte_carlo: no algorithms selected");
    const CwnaSetup setup = build_cwna_model(s);
    const NoiseSchedule truth = covariance_schedule(s, setup.q0, setup.r0);
    const Matrix& c = setup.model.observation(0);
    const std::size_t n_alg = cfg.algorithms.size();

    std::vector<McRunResult> results(static_cast<std::size_t>(s.mc_runs) * n_alg);
    std::atomic<int> next_run{0};

    auto worker = [&] {
        for (int run = next_run++; run < s.mc_runs; run = next_run++) {
            const SimulatedData data =
                simulate(setup.model, truth, s.seed, static_cast<std::uint64_t>(run));
            for (std::size_t ai = 0; ai < n_alg; ++ai) {
                const Algorithm a = cfg.algorithms[ai];
                McRunResult& res = results[static_cast<std::size_t>(run) * n_alg + ai];
                res.run = run;
                res.algorithm = a;
                const auto t0 = std::chrono::steady_clock::now();
                try {
                    const SmootherOutput out = run_algorithm(a, setup, truth, data.measurements, cfg);
                    res.rmse = rmse(out.state.means, data.states, c);
                    if (estimates_r(a)) {
                        res.e_r = matrix_error(out.r_hat, truth.measurement);
                        double rel = 0.0;
                        for (std::size_t k = 0; k < out.r_hat.size(); ++k) {
                            const double t = truth.measurement[k](0, 0);
                            rel += std::abs(out.r_hat[k](0, 0) - t) / t;
                        }
                        res.r11_rel_error = rel / static_cast<double>(out.r_hat.size());
                    }
                    if (estimates_q(a)) res.e_q = matrix_error(out.q_hat, truth.process);
                } catch (const std::exception& e) {
                    res.ok = false;
                    res.error = e.what();
                    res.e_r.reset();
                    res.e_q.reset();
                    res.r11_rel_error.reset();
                }
                res.wall_time =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            }
        }
    };

    const int workers = std::max(1, std::min(cfg.workers, s.mc_runs));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    }

    MonteCarloResult out;
    out.summary = summarize_runs(results, cfg.algorithms);
    out.runs = std::move(results);
    return out;
}

}  // namespace vbrq
