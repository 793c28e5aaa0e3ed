#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>

#include "vbrq/cli.hpp"
#include "vbrq/csv.hpp"

namespace vbrq::cli {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text)) throw IoError("cannot write " + path.string());
}

std::vector<std::string> indexed(std::string_view prefix, Eigen::Index n) {
    std::vector<std::string> out;
    for (Eigen::Index i = 1; i <= n; ++i) out.push_back(std::string(prefix) + "_" + std::to_string(i));
    return out;
}

template <typename... Parts>
std::vector<std::string> concat(std::vector<std::string> first, const Parts&... rest) {
    (first.insert(first.end(), rest.begin(), rest.end()), ...);
    return first;
}

csv::Table vector_table(std::string_view prefix, const std::vector<Vector>& xs) {
    csv::Table t;
    t.header = concat({"k"}, indexed(prefix, xs.front().size()));
    for (std::size_t k = 0; k < xs.size(); ++k) {
        std::vector<std::string> row{std::to_string(k)};
        for (Eigen::Index i = 0; i < xs[k].size(); ++i) row.push_back(csv::format_double(xs[k][i]));
        t.rows.push_back(std::move(row));
    }
    return t;
}

csv::Table matrix_table(std::string_view prefix, const std::vector<PsdMatrix>& ms) {
    csv::Table t;
    t.header = concat({"k"}, csv::matrix_columns(prefix, ms.front().dim()));
    for (std::size_t k = 0; k < ms.size(); ++k) {
        t.rows.push_back(concat({std::to_string(k)}, csv::flatten(ms[k].matrix())));
    }
    return t;
}

std::string opt_cell(const std::optional<double>& v) {
    return v ? csv::format_double(*v) : std::string();
}

std::string sanitize(std::string s) {
    for (char& c : s) {
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    }
    return s;
}

MeasurementSequence read_measurements(const fs::path& path, const LgssModel& model) {
    const csv::Table t = csv::read(path);
    const int ny = model.measurement_dim();
    std::vector<std::size_t> cols;
    for (const auto& name : indexed("y", ny)) cols.push_back(t.column(name));
    if (static_cast<int>(t.rows.size()) != model.horizon() + 1) {
        throw IoError(path.string() + ": expected " + std::to_string(model.horizon() + 1) +
                      " measurement rows, found " + std::to_string(t.rows.size()));
    }
    MeasurementSequence ys;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        Vector y(ny);
        for (int i = 0; i < ny; ++i) {
            y[i] = csv::parse_double(t.rows[r][cols[static_cast<std::size_t>(i)]],
                                     path.filename().string() + " line " + std::to_string(r + 2));
        }
        ys.push_back(std::move(y));
    }
    return ys;
}

std::vector<Vector> read_states(const fs::path& path, int nx) {
    const csv::Table t = csv::read(path);
    std::vector<std::size_t> cols;
    for (const auto& name : indexed("x", nx)) cols.push_back(t.column(name));
    std::vector<Vector> xs;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        Vector x(nx);
        for (int i = 0; i < nx; ++i) {
            x[i] = csv::parse_double(t.rows[r][cols[static_cast<std::size_t>(i)]],
                                     path.filename().string() + " line " + std::to_string(r + 2));
        }
        xs.push_back(std::move(x));
    }
    return xs;
}

}  // namespace

void cmd_simulate(const ExperimentConfig& cfg) {
    const CwnaSetup setup = build_cwna_model(cfg.scenario);
    const NoiseSchedule schedule = covariance_schedule(cfg.scenario, setup.q0, setup.r0);
    const SimulatedData data = simulate(setup.model, schedule, cfg.scenario.seed,
                                        static_cast<std::uint64_t>(cfg.run));

    ensure_dir(cfg.out_dir);
    csv::write(cfg.out_dir / "truth.csv", vector_table("x", data.states));
    csv::write(cfg.out_dir / "measurements.csv", vector_table("y", data.measurements));

    csv::Table noise;
    noise.header = concat({"k"}, csv::matrix_columns("R", setup.r0.dim()),
                          csv::matrix_columns("Q", setup.q0.dim()));
    for (int k = 0; k <= cfg.scenario.horizon; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        auto row = concat({std::to_string(k)}, csv::flatten(schedule.measurement[uk].matrix()));
        if (k < cfg.scenario.horizon) {
            row = concat(row, csv::flatten(schedule.process[uk].matrix()));
        } else {
            row.resize(noise.header.size());
        }
        noise.rows.push_back(std::move(row));
    }
    csv::write(cfg.out_dir / "noise.csv", noise);
    write_text(cfg.out_dir / "manifest.ini", to_ini(cfg));
}

void cmd_smooth(Algorithm algorithm, const fs::path& dataset, const ExperimentConfig& cfg,
                std::ostream& log) {
    const CwnaSetup setup = build_cwna_model(cfg.scenario);
    const NoiseSchedule truth = covariance_schedule(cfg.scenario, setup.q0, setup.r0);
    const MeasurementSequence ys = read_measurements(dataset / "measurements.csv", setup.model);

    SmootherOutput out;
    try {
        out = run_algorithm(algorithm, setup, truth, ys, cfg.bench);
    } catch (const NumericalError& e) {
        throw NumericalError(std::string(algorithm_name(algorithm)) + " on " + dataset.string() +
                             ": " + e.what());
    }

    ensure_dir(cfg.out_dir);
    const std::string key(algorithm_key(algorithm));

    csv::Table states;
    const int nx = setup.model.state_dim();
    states.header = concat({"k"}, indexed("m", nx));
    for (int i = 1; i <= nx; ++i) {
        states.header.push_back("P_" + std::to_string(i) + std::to_string(i));
    }
    for (std::size_t k = 0; k < out.state.means.size(); ++k) {
        std::vector<std::string> row{std::to_string(k)};
        for (int i = 0; i < nx; ++i) row.push_back(csv::format_double(out.state.means[k][i]));
        for (int i = 0; i < nx; ++i) row.push_back(csv::format_double(out.state.covs[k](i, i)));
        states.rows.push_back(std::move(row));
    }
    csv::write(cfg.out_dir / (key + "_states.csv"), states);

    if (!out.r_hat.empty()) csv::write(cfg.out_dir / (key + "_r_hat.csv"), matrix_table("R", out.r_hat));
    if (!out.q_hat.empty()) csv::write(cfg.out_dir / (key + "_q_hat.csv"), matrix_table("Q", out.q_hat));

    if (!out.trace.empty()) {
        csv::Table trace;
        trace.header = concat({"iteration"}, csv::matrix_columns("R", setup.r0.dim()));
        const bool with_q = !out.q_hat.empty();
        if (with_q) trace.header = concat(trace.header, csv::matrix_columns("Q", setup.q0.dim()));
        for (std::size_t i = 0; i < out.trace.size(); ++i) {
            auto row = concat({std::to_string(i + 1)}, csv::flatten(out.trace[i].r_hat));
            if (with_q) row = concat(row, csv::flatten(out.trace[i].q_hat));
            trace.rows.push_back(std::move(row));
        }
        csv::write(cfg.out_dir / (key + "_trace.csv"), trace);
    }

    log << algorithm_name(algorithm) << ": " << out.iterations << " iteration(s)"
        << (out.converged ? "" : " (not converged)") << "\n";
    if (fs::exists(dataset / "truth.csv")) {
        const auto xs = read_states(dataset / "truth.csv", nx);
        if (xs.size() == out.state.means.size()) {
            log << "  RMSE " << rmse(out.state.means, xs, setup.model.observation(0)) << "\n";
        }
    }
    if (!out.r_hat.empty()) log << "  E_R  " << matrix_error(out.r_hat, truth.measurement) << "\n";
    if (!out.q_hat.empty()) log << "  E_Q  " << matrix_error(out.q_hat, truth.process) << "\n";
}

MonteCarloResult cmd_benchmark(const ExperimentConfig& cfg, std::ostream& log) {
    MonteCarloResult res = monte_carlo(cfg.scenario, cfg.bench);
    ensure_dir(cfg.out_dir);

    csv::Table runs;
    runs.header = {"run", "algorithm", "status", "rmse", "e_r", "e_q", "r11_rel_error", "error"};
    csv::Table timing;
    timing.header = {"run", "algorithm", "wall_time_s"};
    for (const auto& r : res.runs) {
        const std::string name(algorithm_name(r.algorithm));
        runs.rows.push_back({std::to_string(r.run), name, r.ok ? "ok" : "failed",
                             r.ok ? csv::format_double(r.rmse) : std::string(), opt_cell(r.e_r),
                             opt_cell(r.e_q), opt_cell(r.r11_rel_error), sanitize(r.error)});
        timing.rows.push_back({std::to_string(r.run), name, csv::format_double(r.wall_time)});
    }

    csv::Table summary;
    summary.header = {"algorithm", "runs_ok", "runs_failed", "rmse_mean", "rmse_std",
                      "e_r_mean",  "e_r_std", "e_q_mean",    "e_q_std"};
    for (const auto& s : res.summary) {
        const auto stat_cells = [](const std::optional<Stat>& st) -> std::vector<std::string> {
            if (!st) return {"", ""};
            return {csv::format_double(st->mean), csv::format_double(st->std)};
        };
        summary.rows.push_back(concat(
            {std::string(algorithm_name(s.algorithm)), std::to_string(s.rmse.count),
             std::to_string(s.failed)},
            stat_cells(s.rmse), stat_cells(s.e_r), stat_cells(s.e_q)));
    }

    csv::write(cfg.out_dir / "runs.csv", runs);
    csv::write(cfg.out_dir / "summary.csv", summary);
    csv::write(cfg.out_dir / "timing.csv", timing);
    write_text(cfg.out_dir / "manifest.ini", to_ini(cfg));

    for (const auto& s : res.summary) {
        log << algorithm_name(s.algorithm) << "  RMSE " << s.rmse.mean << " +- " << s.rmse.std;
        if (s.e_r) log << "  E_R " << s.e_r->mean << " +- " << s.e_r->std;
        if (s.e_q) log << "  E_Q " << s.e_q->mean << " +- " << s.e_q->std;
        if (s.failed) log << "  (" << s.failed << " failed)";
        log << "\n";
    }
    return res;
}

bool cmd_compare(const fs::path& a, const fs::path& b, double rtol, double atol, std::ostream& log) {
    const csv::Table ta = csv::read(a);
    const csv::Table tb = csv::read(b);
    if (ta.header != tb.header) {
        log << "headers differ\n";
        return false;
    }
    std::map<std::string, const std::vector<std::string>*> rows_b;
    for (const auto& row : tb.rows) rows_b[row.front()] = &row;

    bool same = ta.rows.size() == tb.rows.size();
    if (!same) log << "row counts differ: " << ta.rows.size() << " vs " << tb.rows.size() << "\n";
    for (const auto& row : ta.rows) {
        const auto it = rows_b.find(row.front());
        if (it == rows_b.end()) {
            log << row.front() << ": missing in " << b.string() << "\n";
            same = false;
            continue;
        }
        const auto& other = *it->second;
        for (std::size_t c = 1; c < row.size(); ++c) {
            const std::string& x = row[c];
            const std::string& y = other[c];
            if (x == y) continue;
            bool ok = false;
            try {
                const double dx = csv::parse_double(x);
                const double dy = csv::parse_double(y);
                ok = (std::isnan(dx) && std::isnan(dy)) ||
                     std::abs(dx - dy) <= atol + rtol * std::abs(dy);
            } catch (const IoError&) {
                ok = false;
            }
            if (!ok) {
                log << row.front() << "." << ta.header[c] << ": " << (x.empty() ? "<empty>" : x)
                    << " vs " << (y.empty() ? "<empty>" : y) << "\n";
                same = false;
            }
        }
    }
    log << (same ? "summaries agree\n" : "summaries differ\n");
    return same;
}

int run(int argc, char** argv) {
    CLI::App app{"Variational-Bayes adaptive smoothing with unknown noise covariances"};
    app.require_subcommand(1);

    std::optional<std::string> config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<std::string> out;
    std::optional<std::string> profile;
    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "INI experiment config");
        sub->add_option("--seed", seed, "Master seed");
        sub->add_option("--workers", workers, "Monte Carlo worker threads");
        sub->add_option("--out", out, "Output directory");
        sub->add_option("--profile", profile, "Scale profile: desk or full");
    };

    auto* sim = app.add_subcommand("simulate", "Simulate one tracking dataset");
    add_common(sim);

    auto* smooth_cmd = app.add_subcommand("smooth", "Run one smoother on a dataset");
    add_common(smooth_cmd);
    std::string algorithm_arg;
    std::string dataset_arg;
    smooth_cmd->add_option("--algorithm", algorithm_arg,
                           "oracle_rts | rts | vbs_r | vbs_rq | ems_rq | vbs_rq_d")
        ->required();
    smooth_cmd->add_option("--dataset", dataset_arg, "Directory written by simulate")->required();

    auto* bench = app.add_subcommand("benchmark", "Monte Carlo comparison of smoothers");
    add_common(bench);

    auto* compare = app.add_subcommand("compare", "Compare two summary.csv files");
    std::string file_a;
    std::string file_b;
    double rtol = 0.0;
    double atol = 0.0;
    compare->add_option("a", file_a, "First summary file")->required();
    compare->add_option("b", file_b, "Second summary file")->required();
    compare->add_option("--rtol", rtol, "Relative tolerance");
    compare->add_option("--atol", atol, "Absolute tolerance");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    try {
        Overrides ov;
        ov.seed = seed;
        ov.workers = workers;
        if (out) ov.out = fs::path(*out);
        if (profile) ov.profile = parse_profile(*profile);

        if (sim->parsed()) {
            cmd_simulate(load_config(config_path, ov));
        } else if (smooth_cmd->parsed()) {
            const fs::path dataset(dataset_arg);
            const Algorithm alg = parse_algorithm(algorithm_arg);
            std::optional<fs::path> source;
            if (config_path) {
                source = fs::path(*config_path);
            } else if (fs::exists(dataset / "manifest.ini")) {
                source = dataset / "manifest.ini";
            }
            cmd_smooth(alg, dataset, load_config(source, ov), std::cout);
        } else if (bench->parsed()) {
            cmd_benchmark(load_config(config_path, ov), std::cout);
        } else if (compare->parsed()) {
            if (rtol < 0.0 || atol < 0.0) throw ConfigError("tolerances must be non-negative");
            return cmd_compare(file_a, file_b, rtol, atol, std::cout) ? kOk : kRuntime;
        }
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return kRuntime;
    }
    return kOk;
}

}  // namespace vbrq::cli
