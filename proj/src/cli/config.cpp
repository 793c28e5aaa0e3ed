#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "vbrq/cli.hpp"
#include "vbrq/csv.hpp"

namespace vbrq::cli {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
    static const std::set<std::string> vb_keys{"lambda_q",   "lambda_r",  "max_iterations",
                                               "tol",        "dof_mode",  "diagonal_restriction",
                                               "trace_step"};
    static const std::map<std::string, std::set<std::string>> keys{
        {"scenario",
         {"kind", "tau", "horizon", "sigma_e2", "sigma_v2", "r_scale", "q_scale", "mc_runs",
          "seed", "run"}},
        {"algorithms", {"list"}},
        {"vb", vb_keys},
        {"vbs_r", vb_keys},
        {"vbs_rq", vb_keys},
        {"vbs_rq_d", vb_keys},
        {"em", {"max_iterations", "tol"}},
        {"priors", {"dof_offset"}},
        {"run", {"workers", "out", "profile"}},
    };
    return keys;
}

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

class Reader {
public:
    explicit Reader(const pt::ptree& tree) : tree_(tree) {}

    std::optional<std::string> text(const std::string& section, const std::string& key) const {
        const auto sec = tree_.get_child_optional(section);
        if (!sec) return std::nullopt;
        const auto val = sec->get_optional<std::string>(key);
        if (!val) return std::nullopt;
        return trim(*val);
    }

    std::optional<double> number(const std::string& section, const std::string& key) const {
        const auto t = text(section, key);
        if (!t) return std::nullopt;
        try {
            return csv::parse_double(*t);
        } catch (const IoError&) {
            throw ConfigError(section + "." + key + ": expected a number, got '" + *t + "'");
        }
    }

    std::optional<long long> integer(const std::string& section, const std::string& key) const {
        const auto v = number(section, key);
        if (!v) return std::nullopt;
        if (!(std::abs(*v) < 9.0e15) || *v != std::trunc(*v)) {
            throw ConfigError(section + "." + key + ": expected an integer");
        }
        return static_cast<long long>(*v);
    }

    std::optional<bool> boolean(const std::string& section, const std::string& key) const {
        const auto t = text(section, key);
        if (!t) return std::nullopt;
        if (*t == "true" || *t == "1" || *t == "yes") return true;
        if (*t == "false" || *t == "0" || *t == "no") return false;
        throw ConfigError(section + "." + key + ": expected true or false, got '" + *t + "'");
    }

private:
    const pt::ptree& tree_;
};

DiscountFactor discount(double v, const std::string& where) {
    if (!(v > 0.0 && v <= 1.0)) {
        throw ConfigError(where + ": discount factor must lie in (0, 1], got " +
                          csv::format_double(v));
    }
    return DiscountFactor(v);
}

DofPredictionMode parse_dof_mode(const std::string& s, const std::string& where) {
    if (s == "mean_preserving") return DofPredictionMode::MeanPreserving;
    if (s == "table1_verbatim") return DofPredictionMode::Table1Verbatim;
    throw ConfigError(where + ": expected mean_preserving or table1_verbatim, got '" + s + "'");
}

std::string_view dof_mode_name(DofPredictionMode m) {
    return m == DofPredictionMode::MeanPreserving ? "mean_preserving" : "table1_verbatim";
}

void apply_vb_section(const Reader& r, const std::string& section, VbConfig& vb) {
    if (auto v = r.number(section, "lambda_q")) vb.lambda_q = discount(*v, section + ".lambda_q");
    if (auto v = r.number(section, "lambda_r")) vb.lambda_r = discount(*v, section + ".lambda_r");
    if (auto v = r.integer(section, "max_iterations")) {
        if (*v < 1) throw ConfigError(section + ".max_iterations must be >= 1");
        vb.max_iterations = static_cast<int>(*v);
    }
    if (auto v = r.number(section, "tol")) {
        if (!(*v > 0.0)) throw ConfigError(section + ".tol must be > 0");
        vb.convergence_tol = *v;
    }
    if (auto v = r.text(section, "dof_mode")) vb.dof_mode = parse_dof_mode(*v, section + ".dof_mode");
    if (auto v = r.boolean(section, "diagonal_restriction")) vb.diagonal_restriction = *v;
    if (auto v = r.integer(section, "trace_step")) vb.trace_step = static_cast<int>(*v);
}

void write_vb_section(std::ostream& os, const std::string& name, const VbConfig& vb) {
    os << "[" << name << "]\n"
       << "lambda_q = " << csv::format_double(vb.lambda_q.value()) << "\n"
       << "lambda_r = " << csv::format_double(vb.lambda_r.value()) << "\n"
       << "max_iterations = " << vb.max_iterations << "\n"
       << "tol = " << csv::format_double(vb.convergence_tol) << "\n"
       << "dof_mode = " << dof_mode_name(vb.dof_mode) << "\n"
       << "diagonal_restriction = " << (vb.diagonal_restriction ? "true" : "false") << "\n"
       << "trace_step = " << vb.trace_step << "\n\n";
}

std::vector<Algorithm> default_roster(ScheduleKind kind) {
    if (kind == ScheduleKind::TimeVaryingSinusoid) {
        return {Algorithm::OracleRts, Algorithm::Rts, Algorithm::VbsR, Algorithm::VbsRq};
    }
    return {std::begin(kAllAlgorithms), std::end(kAllAlgorithms)};
}

}  // namespace

Profile parse_profile(std::string_view s) {
    if (s == "desk") return Profile::Desk;
    if (s == "full") return Profile::Full;
    throw ConfigError("profile must be 'desk' or 'full', got '" + std::string(s) + "'");
}

ExperimentConfig parse_config(const std::string& ini_text, const Overrides& overrides) {
    pt::ptree tree;
    try {
        std::istringstream in(ini_text);
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
    }
    for (const auto& [section, body] : tree) {
        const auto it = known_keys().find(section);
        if (it == known_keys().end()) throw ConfigError("unknown config section [" + section + "]");
        for (const auto& [key, value] : body) {
            if (!it->second.contains(key)) {
                throw ConfigError("unknown key '" + key + "' in section [" + section + "]");
            }
        }
    }
    const Reader r(tree);

    ExperimentConfig cfg;
    if (auto v = r.text("run", "profile")) cfg.profile = parse_profile(*v);
    if (overrides.profile) cfg.profile = *overrides.profile;

    ScheduleKind kind = ScheduleKind::TimeVaryingSinusoid;
    if (auto v = r.text("scenario", "kind")) {
        if (*v == "time_varying") {
            kind = ScheduleKind::TimeVaryingSinusoid;
        } else if (*v == "time_invariant") {
            kind = ScheduleKind::TimeInvariantScaled;
        } else {
            throw ConfigError("scenario.kind must be time_varying or time_invariant, got '" + *v + "'");
        }
    }
    const bool full = cfg.profile == Profile::Full;
    if (kind == ScheduleKind::TimeVaryingSinusoid) {
        cfg.scenario = full ? CwnaScenario::time_varying_full() : CwnaScenario::time_varying_desk();
    } else {
        cfg.scenario = full ? CwnaScenario::time_invariant_full() : CwnaScenario::time_invariant_desk();
    }

    auto& s = cfg.scenario;
    if (auto v = r.number("scenario", "tau")) s.tau = *v;
    if (auto v = r.integer("scenario", "horizon")) s.horizon = static_cast<int>(*v);
    if (auto v = r.number("scenario", "sigma_e2")) s.sigma_e2 = *v;
    if (auto v = r.number("scenario", "sigma_v2")) s.sigma_v2 = *v;
    if (auto v = r.number("scenario", "r_scale")) s.r_scale = *v;
    if (auto v = r.number("scenario", "q_scale")) s.q_scale = *v;
    if (auto v = r.integer("scenario", "mc_runs")) s.mc_runs = static_cast<int>(*v);
    if (auto v = r.text("scenario", "seed")) {
        std::uint64_t seed = 0;
        const auto res = std::from_chars(v->data(), v->data() + v->size(), seed);
        if (res.ec != std::errc() || res.ptr != v->data() + v->size() || v->empty()) {
            throw ConfigError("scenario.seed must be a non-negative integer, got '" + *v + "'");
        }
        s.seed = seed;
    }
    if (auto v = r.integer("scenario", "run")) cfg.run = static_cast<int>(*v);
    if (overrides.seed) s.seed = *overrides.seed;

    if (!(s.tau > 0.0)) throw ConfigError("scenario.tau must be > 0");
    if (s.horizon < 1) throw ConfigError("scenario.horizon must be >= 1");
    if (!(s.sigma_e2 > 0.0)) throw ConfigError("scenario.sigma_e2 must be a positive variance");
    if (!(s.sigma_v2 > 0.0)) throw ConfigError("scenario.sigma_v2 must be a positive variance");
    if (!(s.r_scale > 0.0)) throw ConfigError("scenario.r_scale must be > 0");
    if (!(s.q_scale > 0.0)) throw ConfigError("scenario.q_scale must be > 0");
    if (s.mc_runs < 1) throw ConfigError("scenario.mc_runs must be >= 1");
    if (cfg.run < 0) throw ConfigError("scenario.run must be non-negative");

    cfg.bench = BenchmarkConfig::defaults_for(s);
    cfg.bench.algorithms = default_roster(kind);
    if (auto v = r.text("algorithms", "list")) {
        cfg.bench.algorithms.clear();
        std::istringstream ss(*v);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            try {
                cfg.bench.algorithms.push_back(parse_algorithm(item));
            } catch (const InvalidArgument& e) {
                throw ConfigError(std::string("algorithms.list: ") + e.what());
            }
        }
        if (cfg.bench.algorithms.empty()) throw ConfigError("algorithms.list is empty");
    }

    for (VbConfig* vb : {&cfg.bench.vbs_r, &cfg.bench.vbs_rq, &cfg.bench.vbs_rq_d}) {
        apply_vb_section(r, "vb", *vb);
    }
    apply_vb_section(r, "vbs_r", cfg.bench.vbs_r);
    apply_vb_section(r, "vbs_rq", cfg.bench.vbs_rq);
    apply_vb_section(r, "vbs_rq_d", cfg.bench.vbs_rq_d);

    if (auto v = r.integer("em", "max_iterations")) {
        if (*v < 1) throw ConfigError("em.max_iterations must be >= 1");
        cfg.bench.em.max_iterations = static_cast<int>(*v);
    }
    if (auto v = r.number("em", "tol")) {
        if (!(*v > 0.0)) throw ConfigError("em.tol must be > 0");
        cfg.bench.em.convergence_tol = *v;
    }

    if (auto v = r.number("priors", "dof_offset")) {
        if (!(*v > 2.0)) {
            throw ConfigError("priors.dof_offset must exceed 2 so that nu_0 = 2 n_x + offset > 2 n_x + 2, got " +
                              csv::format_double(*v));
        }
        cfg.bench.prior_dof_offset = *v;
    }

    if (auto v = r.integer("run", "workers")) cfg.bench.workers = static_cast<int>(*v);
    if (overrides.workers) cfg.bench.workers = *overrides.workers;
    if (cfg.bench.workers < 1) throw ConfigError("run.workers must be >= 1");
    if (auto v = r.text("run", "out")) cfg.out_dir = *v;
    if (overrides.out) cfg.out_dir = *overrides.out;
    return cfg;
}

ExperimentConfig load_config(const std::optional<std::filesystem::path>& path,
                             const Overrides& overrides) {
    if (!path) return parse_config("", overrides);
    std::ifstream in(*path);
    if (!in) throw IoError("cannot open config " + path->string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), overrides);
}

std::string to_ini(const ExperimentConfig& cfg) {
    const auto& s = cfg.scenario;
    std::ostringstream os;
    os << "[scenario]\n"
       << "kind = "
       << (s.schedule_kind == ScheduleKind::TimeVaryingSinusoid ? "time_varying" : "time_invariant")
       << "\n"
       << "tau = " << csv::format_double(s.tau) << "\n"
       << "horizon = " << s.horizon << "\n"
       << "sigma_e2 = " << csv::format_double(s.sigma_e2) << "\n"
       << "sigma_v2 = " << csv::format_double(s.sigma_v2) << "\n"
       << "r_scale = " << csv::format_double(s.r_scale) << "\n"
       << "q_scale = " << csv::format_double(s.q_scale) << "\n"
       << "mc_runs = " << s.mc_runs << "\n"
       << "seed = " << s.seed << "\n"
       << "run = " << cfg.run << "\n\n";

    os << "[algorithms]\nlist = ";
    for (std::size_t i = 0; i < cfg.bench.algorithms.size(); ++i) {
        os << (i ? ", " : "") << algorithm_key(cfg.bench.algorithms[i]);
    }
    os << "\n\n";

    write_vb_section(os, "vbs_r", cfg.bench.vbs_r);
    write_vb_section(os, "vbs_rq", cfg.bench.vbs_rq);
    write_vb_section(os, "vbs_rq_d", cfg.bench.vbs_rq_d);
    os << "[em]\n"
       << "max_iterations = " << cfg.bench.em.max_iterations << "\n"
       << "tol = " << csv::format_double(cfg.bench.em.convergence_tol) << "\n\n"
       << "[priors]\n"
       << "dof_offset = " << csv::format_double(cfg.bench.prior_dof_offset) << "\n";
    return os.str();
}

}  // namespace vbrq::cli
