#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "vbrq/baselines.hpp"

namespace vbrq {

enum class ScheduleKind {
    /// R_k = (2 - cos(4 pi k / K)) R_0, Q_k = (2/3 + cos(4 pi k / K) / 3) Q_0.
    TimeVaryingSinusoid,
    /// R = r_scale * R_0, Q = q_scale * Q_0.
    TimeInvariantScaled,
};

/// Two-dimensional continuous white-noise acceleration tracking scenario.
/// State ordering is (p_x, v_x, p_y, v_y); positions are measured.
struct CwnaScenario {
    double tau = 1.0;         // s
    int horizon = 4000;       // K
    double sigma_e2 = 2.0;    // m^2
    double sigma_v2 = 3.0;    // m^2/s^3
    ScheduleKind schedule_kind = ScheduleKind::TimeVaryingSinusoid;
    double r_scale = 2.0;
    double q_scale = 0.2;
    int mc_runs = 25;
    std::uint64_t seed = 1;

    void validate() const;

    /// Time-varying study: K=4000, 25 runs.
    static CwnaScenario time_varying_desk();
    /// Time-invariant study: K=1000, 100 runs, true (R, Q) = (2 R_0, 0.2 Q_0).
    static CwnaScenario time_invariant_desk();
    static CwnaScenario time_varying_full();
    static CwnaScenario time_invariant_full();
};

struct CwnaSetup {
    LgssModel model;
    PsdMatrix q0;  ///< nominal process noise covariance
    PsdMatrix r0;  ///< nominal measurement noise covariance
};

CwnaSetup build_cwna_model(const CwnaScenario& s);

NoiseSchedule covariance_schedule(const CwnaScenario& s, const PsdMatrix& q0, const PsdMatrix& r0);

struct SimulatedData {
    std::vector<Vector> states;
    MeasurementSequence measurements;
};

struct SimulateOptions {
    /// Start at m_0 and draw no noise at all.
    bool zero_noise = false;
};

/// Independent engine for Monte Carlo run `run` under master seed `seed`.
std::mt19937_64 run_engine(std::uint64_t seed, std::uint64_t run);

/// A matrix L with L L^T = cov; Cholesky when definite, symmetric square root otherwise.
Matrix covariance_factor(const PsdMatrix& cov);

SimulatedData simulate(const LgssModel& model, const NoiseSchedule& schedule, std::uint64_t seed,
                       std::uint64_t run = 0, SimulateOptions options = {});

/// sqrt(mean_k |C (m_k - x_k)|^2).
double rmse(const std::vector<Vector>& estimates, const std::vector<Vector>& truth,
            const Matrix& c);

/// (sum_k Tr((X^_k - X_k)^2) / (n^2 N))^(1/4) over N matrices of dimension n.
double matrix_error(const std::vector<PsdMatrix>& estimates, const std::vector<PsdMatrix>& truth);

enum class Algorithm { OracleRts, Rts, VbsR, VbsRq, EmsRq, VbsRqD };

inline constexpr Algorithm kAllAlgorithms[] = {Algorithm::OracleRts, Algorithm::Rts,
                                               Algorithm::VbsR,      Algorithm::VbsRq,
                                               Algorithm::EmsRq,     Algorithm::VbsRqD};

/// Display name, e.g. "VBS-RQ".
std::string_view algorithm_name(Algorithm a);
/// Identifier used in configs and file names, e.g. "vbs_rq".
std::string_view algorithm_key(Algorithm a);
/// Accepts either form; throws InvalidArgument otherwise.
Algorithm parse_algorithm(std::string_view s);

bool estimates_r(Algorithm a);
bool estimates_q(Algorithm a);

struct BenchmarkConfig {
    std::vector<Algorithm> algorithms{std::begin(kAllAlgorithms), std::end(kAllAlgorithms)};
    VbConfig vbs_r;
    VbConfig vbs_rq;
    VbConfig vbs_rq_d;
    EmConfig em;
    /// nu_0 = 2 n_x + offset, mu_0 = 2 n_y + offset.
    double prior_dof_offset = 3.0;
    int workers = 1;

    /// Discount factors 0.98 for the time-varying study and 1 otherwise.
    static BenchmarkConfig defaults_for(const CwnaScenario& s);
};

struct SmootherOutput {
    GaussianTrajectoryFactor state;
    /// Per-step estimates; empty when the algorithm does not estimate them.
    std::vector<PsdMatrix> q_hat;
    std::vector<PsdMatrix> r_hat;
    std::vector<IterationSnapshot> trace;
    int iterations = 1;
    bool converged = true;
};

SmootherOutput run_algorithm(Algorithm a, const CwnaSetup& setup, const NoiseSchedule& truth,
                             const MeasurementSequence& ys, const BenchmarkConfig& cfg);

struct McRunResult {
    int run = 0;
    Algorithm algorithm = Algorithm::Rts;
    bool ok = true;
    std::string error;
    double rmse = 0.0;
    std::optional<double> e_r;
    std::optional<double> e_q;
    /// Time-averaged |R^_k(0,0) - R_k(0,0)| / R_k(0,0).
    std::optional<double> r11_rel_error;
    double wall_time = 0.0;  // s
};

struct Stat {
    int count = 0;
    double mean = 0.0;
    /// Sample standard deviation; NaN when count < 2.
    double std = 0.0;
};

Stat summarize(const std::vector<double>& values);

struct AlgorithmSummary {
    Algorithm algorithm = Algorithm::Rts;
    int failed = 0;
    Stat rmse;
    std::optional<Stat> e_r;
    std::optional<Stat> e_q;
};

struct MonteCarloResult {
    /// Run-major, algorithm-minor order.
    std::vector<McRunResult> runs;
    std::vector<AlgorithmSummary> summary;

    const AlgorithmSummary& summary_for(Algorithm a) const;
};

std::vector<AlgorithmSummary> summarize_runs(const std::vector<McRunResult>& runs,
                                             const std::vector<Algorithm>& algorithms);

MonteCarloResult monte_carlo(const CwnaScenario& s, const BenchmarkConfig& cfg);

}  // namespace vbrq
