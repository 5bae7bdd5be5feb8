#include "fredholm/csv_io.hpp"

#include "fredholm/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace fredholm {

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
    return {buf, res.ptr};
}

double parse_double(std::string_view text) {
    if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (text == "inf") return std::numeric_limits<double>::infinity();
    if (text == "-inf") return -std::numeric_limits<double>::infinity();
    double value = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (first != last && *first == '+') ++first;
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc() || res.ptr != last || text.empty()) {
        throw InputError("not a number: '" + std::string(text) + "'");
    }
    return value;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    return out;
}

std::string join(const std::vector<std::string>& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) line += ',';
        line += fields[i];
    }
    return line;
}

bool is_numeric_row(const std::vector<std::string>& fields) {
    for (const auto& f : fields) {
        try {
            parse_double(f);
        } catch (const InputError&) {
            return false;
        }
    }
    return !fields.empty();
}

std::vector<std::string> numbered(std::string_view prefix, std::size_t count) {
    std::vector<std::string> out;
    for (std::size_t i = 1; i <= count; ++i) out.push_back(std::string(prefix) + "_" + std::to_string(i));
    return out;
}

std::size_t column(const CsvTable& t, const std::string& name) {
    for (std::size_t i = 0; i < t.header.size(); ++i) {
        if (t.header[i] == name) return i;
    }
    throw InputError("missing column '" + name + "'");
}

std::uint64_t parse_unsigned(const std::string& text) {
    std::uint64_t value = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size() || text.empty()) {
        throw InputError("not an unsigned integer: '" + text + "'");
    }
    return value;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path.string());
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_line(line);
        if (first) {
            table.header = std::move(fields);
            first = false;
        } else {
            table.rows.push_back(std::move(fields));
        }
    }
    if (first) throw InputError(path.string() + " is empty");
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        if (table.rows[r].size() != table.header.size()) {
            throw InputError(path.string() + ": row " + std::to_string(r + 2) + " has " +
                             std::to_string(table.rows[r].size()) + " fields, expected " +
                             std::to_string(table.header.size()));
        }
    }
    return table;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    auto out = open_out(path);
    out << join(table.header) << '\n';
    for (const auto& row : table.rows) out << join(row) << '\n';
    if (!out) throw InputError("write failed for " + path.string());
}

void write_points_csv(const std::filesystem::path& path, const Matrix& points, std::string_view prefix) {
    auto out = open_out(path);
    out << join(numbered(prefix, static_cast<std::size_t>(points.cols()))) << '\n';
    for (Eigen::Index r = 0; r < points.rows(); ++r) {
        for (Eigen::Index c = 0; c < points.cols(); ++c) {
            if (c > 0) out << ',';
            out << format_double(points(r, c));
        }
        out << '\n';
    }
    if (!out) throw InputError("write failed for " + path.string());
}

Matrix read_points_csv(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    if (is_numeric_row(t.header)) t.rows.insert(t.rows.begin(), t.header);
    if (t.rows.empty()) throw InputError(path.string() + " has no data rows");
    const std::size_t cols = t.rows.front().size();
    Matrix out(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        if (t.rows[r].size() != cols) throw InputError(path.string() + ": ragged row " + std::to_string(r + 1));
        for (std::size_t c = 0; c < cols; ++c) {
            try {
                out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = parse_double(t.rows[r][c]);
            } catch (const InputError& e) {
                throw InputError(path.string() + ": row " + std::to_string(r + 1) + ": " + e.what());
            }
        }
    }
    return out;
}

void write_cloud_csv(const std::filesystem::path& path, const ParticleCloud& cloud) {
    write_points_csv(path, cloud.points, "x");
}

ParticleCloud read_cloud_csv(const std::filesystem::path& path) {
    return ParticleCloud{read_points_csv(path), 0};
}

ObservationSample read_observations_csv(const std::filesystem::path& path) {
    ObservationSample out{read_points_csv(path)};
    validate(out);
    return out;
}

void write_trace_csv(const std::filesystem::path& path, const SolverTrace& trace, std::size_t dim) {
    CsvTable t;
    t.header = {"step", "g_hat", "data_term", "kl_term", "drift_mean", "drift_max"};
    for (const auto& h : numbered("mean", dim)) t.header.push_back(h);
    for (const auto& h : numbered("var", dim)) t.header.push_back(h);
    for (const auto& r : trace.records) {
        std::vector<std::string> row{std::to_string(r.step)};
        if (r.estimate) {
            row.push_back(format_double(r.estimate->total));
            row.push_back(format_double(r.estimate->data_term));
            row.push_back(format_double(r.estimate->kl_term));
        } else {
            row.insert(row.end(), 3, "");
        }
        row.push_back(format_double(r.drift_mean));
        row.push_back(format_double(r.drift_max));
        for (std::size_t i = 0; i < dim; ++i) row.push_back(format_double(r.mean.at(i)));
        for (std::size_t i = 0; i < dim; ++i) row.push_back(format_double(r.variance.at(i)));
        t.rows.push_back(std::move(row));
    }
    write_csv(path, t);
}

SolverTrace read_trace_csv(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    if (t.header.size() < 6 || (t.header.size() - 6) % 2 != 0) throw InputError(path.string() + ": not a trace");
    const std::size_t dim = (t.header.size() - 6) / 2;
    SolverTrace trace;
    for (const auto& row : t.rows) {
        StepRecord r;
        r.step = parse_unsigned(row[0]);
        if (!row[1].empty()) {
            r.estimate = FunctionalEstimate{parse_double(row[2]), parse_double(row[3]), parse_double(row[1]), false};
        }
        r.drift_mean = parse_double(row[4]);
        r.drift_max = parse_double(row[5]);
        for (std::size_t i = 0; i < dim; ++i) r.mean.push_back(parse_double(row[6 + i]));
        for (std::size_t i = 0; i < dim; ++i) r.variance.push_back(parse_double(row[6 + dim + i]));
        trace.records.push_back(std::move(r));
    }
    return trace;
}

void write_density_csv(const std::filesystem::path& path, const DensityOnGrid& density) {
    const std::size_t d = density.grid.dim();
    if (density.values.size() != density.grid.size()) throw InputError("density values do not match the grid");
    auto out = open_out(path);
    auto header = numbered("x", d);
    header.emplace_back("density");
    out << join(header) << '\n';
    std::vector<double> node(d);
    for (std::size_t i = 0; i < density.grid.size(); ++i) {
        density.grid.node(i, node);
        for (std::size_t k = 0; k < d; ++k) out << format_double(node[k]) << ',';
        out << format_double(density.values[i]) << '\n';
    }
    if (!out) throw InputError("write failed for " + path.string());
}

DensityOnGrid read_density_csv(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    if (t.header.size() < 2 || t.rows.empty()) throw InputError(path.string() + ": not a density grid");
    const std::size_t d = t.header.size() - 1;
    // Row-major order: axis k repeats with period prod_{i>k} n_i.
    std::vector<EvaluationGrid::Axis> axes;
    std::size_t stride = t.rows.size();
    for (std::size_t k = 0; k < d; ++k) {
        std::size_t n = 1;
        const double lo = parse_double(t.rows[0][k]);
        // Count distinct values in the first period of this axis.
        std::size_t inner = 1;
        while (inner < stride && parse_double(t.rows[inner][k]) == lo) ++inner;
        n = stride / inner;
        const double hi = parse_double(t.rows[(n - 1) * inner][k]);
        axes.push_back({lo, hi, n});
        stride = inner;
    }
    DensityOnGrid out{EvaluationGrid(axes), {}};
    if (out.grid.size() != t.rows.size()) throw InputError(path.string() + ": rows do not form a grid");
    for (const auto& row : t.rows) out.values.push_back(parse_double(row[d]));
    return out;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows) {
    CsvTable t;
    t.header = {"experiment", "method", "N", "M", "seed", "metric", "value"};
    for (const auto& r : rows) {
        t.rows.push_back({r.experiment, r.method, std::to_string(r.n_particles), std::to_string(r.n_observations),
                          std::to_string(r.seed), r.metric, format_double(r.value)});
    }
    write_csv(path, t);
}

std::vector<MetricRow> read_metrics_csv(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    const std::size_t ce = column(t, "experiment"), cm = column(t, "method"), cn = column(t, "N"),
                      cM = column(t, "M"), cs = column(t, "seed"), cmet = column(t, "metric"),
                      cv = column(t, "value");
    std::vector<MetricRow> out;
    for (const auto& row : t.rows) {
        out.push_back({row[ce], row[cm], parse_unsigned(row[cn]), parse_unsigned(row[cM]), parse_unsigned(row[cs]),
                       row[cmet], parse_double(row[cv])});
    }
    return out;
}

void write_cv_csv(const std::filesystem::path& path, const CvResult& result) {
    CsvTable t;
    t.header = {"alpha", "fold", "g_hat", "status"};
    for (const auto& c : result.cells) {
        t.rows.push_back({format_double(c.alpha), std::to_string(c.fold), c.g_hat ? format_double(*c.g_hat) : "",
                          c.status});
    }
    for (const auto& s : result.summary) {
        t.rows.push_back({format_double(s.alpha), "mean", s.mean_g_hat ? format_double(*s.mean_g_hat) : "",
                          "ok_folds=" + std::to_string(s.folds_ok)});
    }
    write_csv(path, t);
}

CvResult read_cv_csv(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    CvResult out;
    double best = 0.0;
    for (const auto& row : t.rows) {
        if (row.size() != 4) throw InputError(path.string() + ": not a CV table");
        const double alpha = parse_double(row[0]);
        std::optional<double> value;
        if (!row[2].empty()) value = parse_double(row[2]);
        if (row[1] == "mean") {
            constexpr std::string_view key = "ok_folds=";
            if (row[3].rfind(key, 0) != 0) throw InputError(path.string() + ": bad summary status");
            out.summary.push_back({alpha, value, parse_unsigned(row[3].substr(key.size()))});
            if (value && (!out.best_alpha || *value < best)) {
                best = *value;
                out.best_alpha = alpha;
            }
        } else {
            out.cells.push_back({alpha, parse_unsigned(row[1]), value, row[3]});
        }
    }
    return out;
}

void write_grid_state_csv(const std::filesystem::path& path, const Matrix& centers,
                          const std::vector<double>& values) {
    if (static_cast<std::size_t>(centers.rows()) != values.size()) throw InputError("grid state size mismatch");
    auto out = open_out(path);
    auto header = numbered("c", static_cast<std::size_t>(centers.cols()));
    header.emplace_back("value");
    out << join(header) << '\n';
    for (Eigen::Index r = 0; r < centers.rows(); ++r) {
        for (Eigen::Index c = 0; c < centers.cols(); ++c) out << format_double(centers(r, c)) << ',';
        out << format_double(values[static_cast<std::size_t>(r)]) << '\n';
    }
    if (!out) throw InputError("write failed for " + path.string());
}

}  // namespace fredholm
