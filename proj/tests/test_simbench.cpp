#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "support/random_models.hpp"
#include "vbrq/simbench.hpp"

using namespace vbrq;

namespace {

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

CwnaScenario small_invariant(int horizon, int runs) {
    CwnaScenario s = CwnaScenario::time_invariant_desk();
    s.horizon = horizon;
    s.mc_runs = runs;
    return s;
}

}  // namespace

TEST_CASE("scenario presets and validation") {
    const auto tv = CwnaScenario::time_varying_desk();
    CHECK(tv.horizon == 4000);
    CHECK(tv.mc_runs == 25);
    CHECK(tv.schedule_kind == ScheduleKind::TimeVaryingSinusoid);
    const auto ti = CwnaScenario::time_invariant_desk();
    CHECK(ti.horizon == 1000);
    CHECK(ti.mc_runs == 100);
    CHECK(CwnaScenario::time_varying_full().mc_runs == 5000);
    CHECK(CwnaScenario::time_invariant_full().mc_runs == 5000);

    CwnaScenario bad;
    bad.sigma_e2 = 0.0;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = CwnaScenario{};
    bad.horizon = 0;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = CwnaScenario{};
    bad.mc_runs = 0;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("CWNA model matrices") {
    const auto setup = build_cwna_model(CwnaScenario{});
    const Matrix& a = setup.model.transition(0);
    CHECK(a(0, 1) == 1.0);
    CHECK(a(2, 3) == 1.0);
    CHECK(a(0, 2) == 0.0);
    const Matrix& c = setup.model.observation(0);
    CHECK(c.rows() == 2);
    CHECK(c(0, 0) == 1.0);
    CHECK(c(1, 2) == 1.0);
    CHECK(c.sum() == 2.0);
    CHECK(setup.q0(0, 0) == doctest::Approx(1.0));  // 3 * tau^3 / 3
    CHECK(setup.q0(0, 1) == doctest::Approx(1.5));
    CHECK(setup.q0(1, 1) == doctest::Approx(3.0));
    CHECK(setup.q0(0, 2) == 0.0);
    CHECK(setup.r0(0, 0) == 10.0);
    CHECK(setup.r0(0, 1) == 2.0);
    CHECK(setup.model.prior().mean(1) == 5.0);
    CHECK(setup.model.prior().cov(3, 3) == 900.0);
}

TEST_CASE("covariance schedules") {
    CwnaScenario s;
    s.horizon = 400;
    const auto setup = build_cwna_model(s);
    const auto tv = covariance_schedule(s, setup.q0, setup.r0);
    CHECK(tv.process.size() == 400);
    CHECK(tv.measurement.size() == 401);
    CHECK(max_abs(tv.measurement[0].matrix() - setup.r0.matrix()) < 1e-12);
    CHECK(max_abs(tv.process[0].matrix() - setup.q0.matrix()) < 1e-12);
    // k = K/4: cos(pi) = -1
    CHECK(max_abs(tv.measurement[100].matrix() - 3.0 * setup.r0.matrix()) < 1e-12);
    CHECK(max_abs(tv.process[100].matrix() - setup.q0.matrix() / 3.0) < 1e-12);

    s.schedule_kind = ScheduleKind::TimeInvariantScaled;
    const auto ti = covariance_schedule(s, setup.q0, setup.r0);
    for (const auto& r : ti.measurement) CHECK(max_abs(r.matrix() - 2.0 * setup.r0.matrix()) == 0.0);
    for (const auto& q : ti.process) CHECK(max_abs(q.matrix() - 0.2 * setup.q0.matrix()) < 1e-15);
}

TEST_CASE("simulation") {
    CwnaScenario s = small_invariant(50, 1);
    const auto setup = build_cwna_model(s);
    const auto truth = covariance_schedule(s, setup.q0, setup.r0);

    SUBCASE("zero noise follows the linear dynamics from the prior mean") {
        const auto data = simulate(setup.model, truth, 1, 0, {true});
        CHECK(data.states[0] == setup.model.prior().mean);
        for (int k = 0; k < 50; ++k) {
            const auto uk = static_cast<std::size_t>(k);
            CHECK(max_abs(data.states[uk + 1] - setup.model.transition(k) * data.states[uk]) == 0.0);
            CHECK(max_abs(data.measurements[uk] - setup.model.observation(k) * data.states[uk]) == 0.0);
        }
        CHECK(data.states[50](0) == doctest::Approx(250.0));
    }
    SUBCASE("seeded runs are reproducible and independent") {
        const auto a = simulate(setup.model, truth, 7, 3);
        const auto b = simulate(setup.model, truth, 7, 3);
        const auto c = simulate(setup.model, truth, 7, 4);
        const auto d = simulate(setup.model, truth, 8, 3);
        for (std::size_t k = 0; k < a.measurements.size(); ++k) CHECK(a.measurements[k] == b.measurements[k]);
        CHECK(a.measurements[5] != c.measurements[5]);
        CHECK(a.measurements[5] != d.measurements[5]);
    }
    SUBCASE("mismatched schedule is rejected") {
        const auto short_truth = covariance_schedule(small_invariant(40, 1), setup.q0, setup.r0);
        CHECK_THROWS_AS(simulate(setup.model, short_truth, 1), InvalidArgument);
    }
}

TEST_CASE("process noise draws have the requested covariance") {
    CwnaScenario s = small_invariant(100000, 1);
    const auto setup = build_cwna_model(s);
    const auto truth = covariance_schedule(s, setup.q0, setup.r0);
    const auto data = simulate(setup.model, truth, 99, 0);
    const Matrix& a = setup.model.transition(0);
    Matrix acc = Matrix::Zero(4, 4);
    for (int k = 0; k < s.horizon; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        const Vector w = data.states[uk + 1] - a * data.states[uk];
        acc += w * w.transpose();
    }
    const Matrix emp = acc / s.horizon;
    const Matrix& q = truth.process[0].matrix();
    for (int i = 0; i < 4; ++i) CHECK(emp(i, i) == doctest::Approx(q(i, i)).epsilon(0.02));
    CHECK(emp(0, 1) == doctest::Approx(q(0, 1)).epsilon(0.02));
    CHECK(std::abs(emp(0, 2)) < 0.02 * q(0, 0));
}

TEST_CASE("covariance_factor handles singular input") {
    Matrix m(2, 2);
    m << 1, 1, 1, 1;
    const Matrix l = covariance_factor(PsdMatrix(m));
    CHECK(max_abs(l * l.transpose() - m) < 1e-12);
}

TEST_CASE("rmse") {
    const Matrix c = Matrix::Identity(2, 2);
    const std::vector<Vector> truth{Vector::Zero(2), Vector::Zero(2)};
    CHECK(rmse(truth, truth, c) == 0.0);
    const std::vector<Vector> constant{(Vector(2) << 3, 4).finished(), (Vector(2) << -4, 3).finished()};
    CHECK(rmse(constant, truth, c) == doctest::Approx(5.0));
    const std::vector<Vector> hand{(Vector(2) << 3, 0).finished(), (Vector(2) << 0, 4).finished()};
    CHECK(rmse(hand, truth, c) == doctest::Approx(std::sqrt(12.5)));
    // Only measured components count.
    Matrix pos(1, 2);
    pos << 1, 0;
    CHECK(rmse(hand, truth, pos) == doctest::Approx(std::sqrt(4.5)));
    CHECK_THROWS_AS(rmse(hand, {truth[0]}, c), InvalidArgument);
}

TEST_CASE("matrix_error anchors") {
    CHECK(matrix_error({PsdMatrix::identity(2)}, {PsdMatrix::identity(2)}) == 0.0);

    CwnaScenario tv;
    const auto setup = build_cwna_model(tv);
    const auto tv_truth = covariance_schedule(tv, setup.q0, setup.r0);
    const std::vector<PsdMatrix> nominal_tv(tv_truth.measurement.size(), setup.r0);
    CHECK(std::abs(matrix_error(nominal_tv, tv_truth.measurement) - 2.972) <= 0.001);
    CHECK(matrix_error(nominal_tv, tv_truth.measurement) == doctest::Approx(std::pow(78.0, 0.25)).epsilon(1e-3));

    const auto ti = CwnaScenario::time_invariant_desk();
    const auto ti_truth = covariance_schedule(ti, setup.q0, setup.r0);
    const std::vector<PsdMatrix> nominal_ti(ti_truth.measurement.size(), setup.r0);
    CHECK(std::abs(matrix_error(nominal_ti, ti_truth.measurement) - 2.685) <= 0.001);
    CHECK(matrix_error(nominal_ti, ti_truth.measurement) == doctest::Approx(std::pow(52.0, 0.25)).epsilon(1e-12));

    CHECK_THROWS_AS(matrix_error(nominal_ti, tv_truth.measurement), InvalidArgument);
}

TEST_CASE("priors built from the nominal covariances") {
    const auto setup = build_cwna_model(CwnaScenario{});
    const auto priors = VbPriors::from_nominal(setup.q0, setup.r0);
    CHECK(priors.q_prior.dof() == 11.0);
    CHECK(priors.r_prior.dof() == 7.0);
    CHECK(iw_mean(priors.q_prior).matrix() == setup.q0.matrix());
    CHECK(iw_mean(priors.r_prior).matrix() == setup.r0.matrix());
}

TEST_CASE("algorithm names") {
    for (Algorithm a : kAllAlgorithms) {
        CHECK(parse_algorithm(algorithm_name(a)) == a);
        CHECK(parse_algorithm(algorithm_key(a)) == a);
    }
    CHECK(algorithm_name(Algorithm::VbsRqD) == "VBS-RQ-D");
    CHECK_THROWS_AS(parse_algorithm("kalman"), InvalidArgument);
    CHECK_FALSE(estimates_r(Algorithm::Rts));
    CHECK(estimates_r(Algorithm::VbsR));
    CHECK_FALSE(estimates_q(Algorithm::VbsR));
    CHECK(estimates_q(Algorithm::EmsRq));
}

TEST_CASE("benchmark defaults") {
    const auto tv = BenchmarkConfig::defaults_for(CwnaScenario::time_varying_desk());
    CHECK(tv.vbs_rq.lambda_r.value() == 0.98);
    CHECK(tv.vbs_r.lambda_q.value() == 0.98);
    const auto ti = BenchmarkConfig::defaults_for(CwnaScenario::time_invariant_desk());
    CHECK(ti.vbs_rq_d.lambda_r.value() == 1.0);
}

TEST_CASE("all estimators coincide when the nominal covariances are exact and the priors concentrated") {
    CwnaScenario s = small_invariant(60, 1);
    s.r_scale = 1.0;
    s.q_scale = 1.0;
    auto cfg = BenchmarkConfig::defaults_for(s);
    cfg.algorithms = {Algorithm::OracleRts, Algorithm::Rts, Algorithm::VbsR, Algorithm::VbsRq, Algorithm::EmsRq};
    cfg.prior_dof_offset = 1e12;
    cfg.em.estimate_q = false;
    cfg.em.estimate_r = false;
    const auto mc = monte_carlo(s, cfg);
    REQUIRE(mc.runs.size() == 5);
    for (const auto& r : mc.runs) {
        CHECK(r.ok);
        CHECK(r.rmse == doctest::Approx(mc.runs[0].rmse).epsilon(1e-8));
    }
}

TEST_CASE("monte_carlo") {
    CwnaScenario s = small_invariant(80, 4);
    auto cfg = BenchmarkConfig::defaults_for(s);
    cfg.vbs_rq.max_iterations = 5;
    cfg.vbs_r.max_iterations = 5;
    cfg.vbs_rq_d.max_iterations = 5;
    cfg.em.max_iterations = 5;
    const auto serial = monte_carlo(s, cfg);
    REQUIRE(serial.runs.size() == 24);
    CHECK(serial.summary.size() == 6);

    SUBCASE("results do not depend on the worker count") {
        cfg.workers = 3;
        const auto parallel = monte_carlo(s, cfg);
        for (std::size_t i = 0; i < serial.runs.size(); ++i) {
            CHECK(serial.runs[i].run == parallel.runs[i].run);
            CHECK(serial.runs[i].rmse == parallel.runs[i].rmse);
            CHECK(serial.runs[i].e_r == parallel.runs[i].e_r);
            CHECK(serial.runs[i].e_q == parallel.runs[i].e_q);
        }
    }
    SUBCASE("layout is run-major") {
        CHECK(serial.runs[7].run == 1);
        CHECK(serial.runs[7].algorithm == Algorithm::Rts);
        CHECK_FALSE(serial.runs[7].e_r.has_value());
        CHECK(serial.runs[8].e_r.has_value());
        CHECK_FALSE(serial.runs[8].e_q.has_value());
    }
    SUBCASE("summary equals the per-run mean") {
        double sum = 0;
        for (const auto& r : serial.runs) {
            if (r.algorithm == Algorithm::VbsRq) sum += *r.e_q;
        }
        const auto& vb = serial.summary_for(Algorithm::VbsRq);
        CHECK(vb.e_q->mean == doctest::Approx(sum / 4));
        CHECK(vb.rmse.count == 4);
        CHECK_FALSE(serial.summary_for(Algorithm::Rts).e_r.has_value());
    }
}

TEST_CASE("summarize") {
    const auto one = summarize({2.5});
    CHECK(one.count == 1);
    CHECK(one.mean == 2.5);
    CHECK(std::isnan(one.std));
    const auto two = summarize({1.0, 3.0});
    CHECK(two.mean == 2.0);
    CHECK(two.std == doctest::Approx(std::sqrt(2.0)));
    CHECK(std::isnan(summarize({}).mean));

    std::vector<McRunResult> runs(3);
    runs[0].rmse = 1.0;
    runs[1].rmse = 3.0;
    runs[2].ok = false;
    const auto sum = summarize_runs(runs, {Algorithm::Rts});
    CHECK(sum[0].failed == 1);
    CHECK(sum[0].rmse.count == 2);
    CHECK(sum[0].rmse.mean == 2.0);
}
