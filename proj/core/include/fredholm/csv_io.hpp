#pragma once

#include "fredholm/crossval.hpp"
#include "fredholm/density_estimation.hpp"
#include "fredholm/particle_solver.hpp"
#include "fredholm/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fredholm {

/// Shortest text with 17 significant digits; parses back to the same double.
std::string format_double(double value);
/// Strict parse of a whole field; throws InputError naming the field otherwise.
double parse_double(std::string_view text);

/// Header plus rows of raw fields.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// One row per point, header x_1..x_d.
void write_points_csv(const std::filesystem::path& path, const Matrix& points, std::string_view prefix = "x");
/// Reads a numeric matrix; a non-numeric first row is taken as a header.
Matrix read_points_csv(const std::filesystem::path& path);

void write_cloud_csv(const std::filesystem::path& path, const ParticleCloud& cloud);
ParticleCloud read_cloud_csv(const std::filesystem::path& path);
ObservationSample read_observations_csv(const std::filesystem::path& path);

/// step, g_hat, data_term, kl_term, drift_mean, drift_max, mean_1..d, var_1..d.
/// Unmonitored steps leave the three functional fields empty.
void write_trace_csv(const std::filesystem::path& path, const SolverTrace& trace, std::size_t dim);
SolverTrace read_trace_csv(const std::filesystem::path& path);

/// x_1..x_d, density; one row per grid node in grid order.
void write_density_csv(const std::filesystem::path& path, const DensityOnGrid& density);
DensityOnGrid read_density_csv(const std::filesystem::path& path);

struct MetricRow {
    std::string experiment;
    std::string method;
    std::size_t n_particles = 0;
    std::size_t n_observations = 0;
    std::uint64_t seed = 0;
    std::string metric;
    double value = 0.0;

    bool operator==(const MetricRow&) const = default;
};

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_metrics_csv(const std::filesystem::path& path);

/// alpha, fold, g_hat, status; then one row per alpha with fold "mean" and
/// status "ok_folds=K".
void write_cv_csv(const std::filesystem::path& path, const CvResult& result);
CvResult read_cv_csv(const std::filesystem::path& path);

/// Bin centre coordinates c_1..c_d and the state value.
void write_grid_state_csv(const std::filesystem::path& path, const Matrix& centers,
                          const std::vector<double>& values);

}  // namespace fredholm
