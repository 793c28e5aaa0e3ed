#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include "vbrq/simbench.hpp"

namespace vbrq::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2, kIo = 3 };

class ConfigError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

enum class Profile { Desk, Full };

struct ExperimentConfig {
    Profile profile = Profile::Desk;
    CwnaScenario scenario;
    /// Run index used by `simulate`.
    int run = 0;
    BenchmarkConfig bench;
    std::filesystem::path out_dir = "out";
};

/// Command-line values that take precedence over the config file.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<std::filesystem::path> out;
    std::optional<Profile> profile;
};

Profile parse_profile(std::string_view s);

/// Parses INI text with sections [scenario], [algorithms], [vb], [vbs_r], [vbs_rq],
/// [vbs_rq_d], [em], [priors], [run]. Unset keys take profile defaults.
ExperimentConfig parse_config(const std::string& ini_text, const Overrides& overrides = {});

ExperimentConfig load_config(const std::optional<std::filesystem::path>& path,
                             const Overrides& overrides = {});

/// Fully explicit INI for every result-affecting setting; parse_config round-trips it.
std::string to_ini(const ExperimentConfig& cfg);

/// Writes truth.csv, measurements.csv, noise.csv and manifest.ini into cfg.out_dir.
void cmd_simulate(const ExperimentConfig& cfg);

/// Runs one algorithm on a dataset directory written by cmd_simulate.
void cmd_smooth(Algorithm algorithm, const std::filesystem::path& dataset,
                const ExperimentConfig& cfg, std::ostream& log);

/// Writes runs.csv, summary.csv, timing.csv and manifest.ini into cfg.out_dir.
MonteCarloResult cmd_benchmark(const ExperimentConfig& cfg, std::ostream& log);

/// Compares two summary files cell by cell; true when all numeric cells agree within
/// |a - b| <= atol + rtol * |b|.
bool cmd_compare(const std::filesystem::path& a, const std::filesystem::path& b, double rtol,
                 double atol, std::ostream& log);

/// Entry point of the `vbrq` tool; returns an ExitCode.
int run(int argc, char** argv);

}  // namespace vbrq::cli
