#pragma once

#include "fredholm/crossval.hpp"
#include "fredholm/csv_io.hpp"
#include "fredholm/errors.hpp"
#include "fredholm/particle_solver.hpp"
#include "fredholm/problems.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fredholm {

/// Configuration error located in the source file (line 0 when unknown).
class ConfigError : public InputError {
public:
    ConfigError(const std::string& file, std::size_t line, const std::string& message)
        : InputError(file + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + message),
          line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct ReferenceOverride {
    enum class Kind { preset, gaussian, flat };
    Kind kind = Kind::preset;
    std::vector<double> mean;
    std::vector<double> variance;
};

struct BaselineConfig {
    /// "toy", "oslem" or "richardson_lucy".
    std::string name;
    std::vector<double> alphas{0.0, 0.5, 1.0};
    double sigma_pi2 = 0.43 * 0.43;
    double sigma_k2 = 0.45 * 0.45;
    double sigma_0_2 = 1.0;
    double alpha = 0.1;
    std::size_t bins = 100;
    std::size_t iterations = 500;
    double lo = 0.0;
    double hi = 1.0;
    /// Inline grid problem (kernel rows, mu, pi0); empty means "discretise the preset".
    std::vector<std::vector<double>> kernel;
    std::vector<double> mu;
    std::vector<double> pi0;
};

/// Parsed and validated JSON experiment configuration.
struct RunConfig {
    std::string experiment = "gaussian_mixture_1d";
    std::size_t dim = 2;
    bool misspecified = false;
    std::size_t n_observations = 0;
    std::optional<std::filesystem::path> observations_file;
    SolverConfig solver;
    InitSpec init;
    ReferenceOverride reference;
    std::size_t replicates = 1;
    std::uint64_t seed_base = 0;
    std::vector<std::string> metrics;
    std::optional<CvPlan> cv;
    std::optional<BaselineConfig> baseline;
    std::vector<std::filesystem::path> clouds;
    std::filesystem::path output_dir = "out";

    /// Everything that determines the artifacts; excludes thread counts and
    /// the output directory.
    nlohmann::json resolved() const;
};

/// Reads and validates a config; ConfigError carries the offending line.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text, const std::string& source_name = "<config>");

struct CommandOptions {
    std::filesystem::path config;
    std::optional<std::filesystem::path> out;
    std::size_t workers = 1;
    std::optional<std::uint64_t> seed;
};

/// Metric names accepted in the config.
std::vector<std::string> metric_names();

/// Metric rows for one fitted cloud. `observations` may be empty (g_hat is skipped).
std::vector<MetricRow> compute_metrics(const ExperimentPreset& preset, const ParticleCloud& cloud,
                                       const ObservationSample* observations, const ReferenceMeasure* ref,
                                       const RunConfig& config, std::uint64_t seed, std::size_t workers);

void cmd_run(const CommandOptions& options, std::ostream& log);
void cmd_cv(const CommandOptions& options, std::ostream& log);
void cmd_baseline(const CommandOptions& options, std::ostream& log);
void cmd_metrics(const CommandOptions& options, std::ostream& log);

/// Runs a subcommand and maps failures to exit codes: 0 ok, 2 invalid input
/// or config, 3 numerical failure, 1 anything else.
int run_command(const std::string& command, const CommandOptions& options, std::ostream& log,
                std::ostream& err);

}  // namespace fredholm
