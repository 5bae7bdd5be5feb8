#include "fredholm/experiment.hpp"

#include "fredholm/baselines.hpp"
#include "fredholm/density_estimation.hpp"
#include "fredholm/functional.hpp"
#include "fredholm/metrics.hpp"
#include "fredholm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>

namespace fredholm {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------- parsing

/// Line of the key named by a JSON pointer, found by scanning the source for
/// each key in turn. Falls back to the deepest key that was found.
std::size_t locate_line(const std::string& text, const std::vector<std::string>& path) {
    std::size_t pos = 0;
    std::size_t found = std::string::npos;
    for (const auto& token : path) {
        if (!token.empty() && std::all_of(token.begin(), token.end(), ::isdigit)) continue;
        const auto next = text.find('"' + token + '"', pos);
        if (next == std::string::npos) break;
        pos = next;
        found = next;
    }
    if (found == std::string::npos) return 0;
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(found), '\n'));
}

struct Source {
    std::string text;
    std::string name;

    [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& message) const {
        std::string where;
        for (const auto& p : path) where += (where.empty() ? "" : ".") + p;
        throw ConfigError(name, locate_line(text, path), (where.empty() ? "" : where + ": ") + message);
    }
};

/// Typed access to one JSON object with unknown-key detection.
class Section {
public:
    Section(const Source& src, const json& node, std::vector<std::string> path)
        : src_(src), node_(node), path_(std::move(path)) {
        if (!node_.is_object()) src_.fail(path_, "expected an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return node_.contains(key);
    }

    std::vector<std::string> path(const std::string& key) const {
        auto p = path_;
        p.push_back(key);
        return p;
    }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return node_.at(key);
    }

    double number(const std::string& key, double fallback) {
        if (!has(key)) return fallback;
        const json& v = node_.at(key);
        if (!v.is_number()) src_.fail(path(key), "expected a number");
        return v.get<double>();
    }

    std::uint64_t count(const std::string& key, std::uint64_t fallback) {
        if (!has(key)) return fallback;
        const json& v = node_.at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
            src_.fail(path(key), "expected a nonnegative integer");
        }
        return v.get<std::uint64_t>();
    }

    bool flag(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const json& v = node_.at(key);
        if (!v.is_boolean()) src_.fail(path(key), "expected true or false");
        return v.get<bool>();
    }

    std::string text(const std::string& key, const std::string& fallback) {
        if (!has(key)) return fallback;
        const json& v = node_.at(key);
        if (!v.is_string()) src_.fail(path(key), "expected a string");
        return v.get<std::string>();
    }

    std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
        if (!has(key)) return fallback;
        const json& v = node_.at(key);
        if (!v.is_array()) src_.fail(path(key), "expected an array of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) src_.fail(path(key), "expected an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    std::vector<std::string> texts(const std::string& key) {
        if (!has(key)) return {};
        const json& v = node_.at(key);
        if (!v.is_array()) src_.fail(path(key), "expected an array of strings");
        std::vector<std::string> out;
        for (const auto& e : v) {
            if (!e.is_string()) src_.fail(path(key), "expected an array of strings");
            out.push_back(e.get<std::string>());
        }
        return out;
    }

    Section child(const std::string& key) {
        seen_.insert(key);
        return Section(src_, node_.at(key), path(key));
    }

    void finish() const {
        for (const auto& [key, _] : node_.items()) {
            if (!seen_.count(key)) src_.fail(path(key), "unknown key");
        }
    }

private:
    const Source& src_;
    const json& node_;
    std::vector<std::string> path_;
    std::set<std::string> seen_;
};

const char* policy_name(ResamplePolicy p) {
    return p == ResamplePolicy::iid ? "iid" : "without_replacement";
}

const char* init_kind_name(InitSpec::Kind k) {
    switch (k) {
        case InitSpec::Kind::observations: return "observations";
        case InitSpec::Kind::reference: return "reference";
        case InitSpec::Kind::point: return "point";
        case InitSpec::Kind::uniform_box: return "uniform_box";
    }
    return "observations";
}

const char* reference_kind_name(ReferenceOverride::Kind k) {
    switch (k) {
        case ReferenceOverride::Kind::preset: return "preset";
        case ReferenceOverride::Kind::gaussian: return "gaussian";
        case ReferenceOverride::Kind::flat: return "flat";
    }
    return "preset";
}

ExperimentPreset preset_for(const RunConfig& c) {
    return preset_by_name(c.experiment, c.dim, c.misspecified);
}

}  // namespace

std::vector<std::string> metric_names() {
    return {"ise", "w1_marginal", "reconvolution_ise", "g_hat", "moments", "pointwise_mse"};
}

RunConfig parse_config(const std::string& text, const std::string& source_name) {
    const Source src{text, source_name};
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto byte = std::min<std::size_t>(e.byte, text.size());
        const std::size_t line =
            1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte > 0 ? byte - 1 : 0), '\n'));
        throw ConfigError(source_name, line, "malformed JSON");
    }

    RunConfig c;
    Section top(src, root, {});
    c.experiment = top.text("experiment", c.experiment);
    c.dim = top.count("dim", c.dim);
    c.misspecified = top.flag("misspecified", false);

    ExperimentPreset preset;
    try {
        preset = preset_by_name(c.experiment, c.dim, c.misspecified);
    } catch (const InputError& e) {
        src.fail({"experiment"}, e.what());
    }
    c.solver = preset.solver;
    c.init = preset.init;
    c.n_observations = preset.default_observations;

    if (top.has("observations")) {
        Section s = top.child("observations");
        c.n_observations = s.count("count", c.n_observations);
        if (s.has("file")) c.observations_file = s.text("file", "");
        s.finish();
    }
    if (c.n_observations < 1) src.fail({"observations", "count"}, "must be at least 1");

    bool minibatch_given = false;
    if (top.has("solver")) {
        Section s = top.child("solver");
        SolverConfig& v = c.solver;
        v.alpha = s.number("alpha", v.alpha);
        v.eta = s.number("eta", v.eta);
        v.gamma = s.number("gamma", v.gamma);
        v.n_particles = s.count("n_particles", v.n_particles);
        minibatch_given = s.has("minibatch");
        v.minibatch = s.count("minibatch", v.minibatch);
        v.max_steps = s.count("max_steps", v.max_steps);
        v.resample_each_step = s.flag("resample_each_step", v.resample_each_step);
        const std::string policy = s.text("resample_policy", policy_name(v.resample_policy));
        if (policy == "iid") {
            v.resample_policy = ResamplePolicy::iid;
        } else if (policy == "without_replacement") {
            v.resample_policy = ResamplePolicy::without_replacement;
        } else {
            src.fail(s.path("resample_policy"), "expected \"without_replacement\" or \"iid\"");
        }
        v.early_stop = s.flag("early_stop", v.early_stop);
        v.stop_tol = s.number("stop_tol", v.stop_tol);
        v.stop_window = s.count("stop_window", v.stop_window);
        v.denom_floor = s.number("denom_floor", v.denom_floor);
        v.monitor_every = s.count("monitor_every", v.monitor_every);
        v.threads = s.count("threads", v.threads);
        s.finish();
        try {
            v.validate(c.n_observations);
        } catch (const InputError& e) {
            src.fail({"solver"}, e.what());
        }
    }
    // m = N unless set: the batch size follows the particle count.
    if (!minibatch_given) c.solver.minibatch = c.solver.n_particles;

    const std::size_t dx = preset.kernel->dim_x();
    if (top.has("init")) {
        Section s = top.child("init");
        const std::string kind = s.text("kind", init_kind_name(c.init.kind));
        if (kind == "observations") {
            c.init.kind = InitSpec::Kind::observations;
        } else if (kind == "reference") {
            c.init.kind = InitSpec::Kind::reference;
        } else if (kind == "point") {
            c.init.kind = InitSpec::Kind::point;
        } else if (kind == "uniform_box") {
            c.init.kind = InitSpec::Kind::uniform_box;
        } else {
            src.fail(s.path("kind"), "unknown init kind '" + kind + "'");
        }
        c.init.shift = s.numbers("shift", c.init.shift);
        c.init.point = s.numbers("point", c.init.point);
        c.init.lo = s.numbers("lo", c.init.lo);
        c.init.hi = s.numbers("hi", c.init.hi);
        s.finish();
        auto check_len = [&](const std::vector<double>& v, const char* key, bool required) {
            if ((required || !v.empty()) && v.size() != dx) {
                src.fail({"init", key}, "needs " + std::to_string(dx) + " entries");
            }
        };
        check_len(c.init.shift, "shift", false);
        check_len(c.init.point, "point", c.init.kind == InitSpec::Kind::point);
        check_len(c.init.lo, "lo", c.init.kind == InitSpec::Kind::uniform_box);
        check_len(c.init.hi, "hi", c.init.kind == InitSpec::Kind::uniform_box);
        if (c.init.kind == InitSpec::Kind::observations && !preset.kernel->same_space()) {
            src.fail({"init", "kind"}, "observation initialisation needs observations in the same space as x");
        }
        if (c.init.kind == InitSpec::Kind::uniform_box) {
            for (std::size_t i = 0; i < dx; ++i) {
                if (!(c.init.lo[i] < c.init.hi[i])) src.fail({"init", "hi"}, "box must satisfy lo < hi");
            }
        }
    }

    if (top.has("reference")) {
        Section s = top.child("reference");
        const std::string kind = s.text("kind", "preset");
        if (kind == "preset") {
            c.reference.kind = ReferenceOverride::Kind::preset;
        } else if (kind == "gaussian") {
            c.reference.kind = ReferenceOverride::Kind::gaussian;
        } else if (kind == "flat") {
            c.reference.kind = ReferenceOverride::Kind::flat;
        } else {
            src.fail(s.path("kind"), "unknown reference kind '" + kind + "'");
        }
        c.reference.mean = s.numbers("mean", {});
        c.reference.variance = s.numbers("variance", {});
        s.finish();
        if (c.reference.kind == ReferenceOverride::Kind::gaussian) {
            if (c.reference.mean.size() != dx) src.fail({"reference", "mean"}, "needs " + std::to_string(dx) + " entries");
            if (c.reference.variance.size() != dx) {
                src.fail({"reference", "variance"}, "needs " + std::to_string(dx) + " entries");
            }
            for (double v : c.reference.variance) {
                if (!(v > 0.0)) src.fail({"reference", "variance"}, "variances must be positive");
            }
        }
    }
    if (c.reference.kind == ReferenceOverride::Kind::flat && c.solver.alpha > 0.0) {
        src.fail({"reference", "kind"}, "a flat reference requires alpha = 0");
    }
    if (c.reference.kind == ReferenceOverride::Kind::flat && c.init.kind == InitSpec::Kind::reference) {
        src.fail({"reference", "kind"}, "cannot draw the initial cloud from a flat reference");
    }

    c.replicates = top.count("replicates", c.replicates);
    if (c.replicates < 1) src.fail({"replicates"}, "must be at least 1");
    c.seed_base = top.count("seed_base", c.seed_base);
    if (top.has("metrics")) {
        c.metrics = top.texts("metrics");
        const auto known = metric_names();
        for (const auto& m : c.metrics) {
            if (std::find(known.begin(), known.end(), m) == known.end()) {
                src.fail({"metrics"}, "unknown metric '" + m + "'");
            }
        }
    } else {
        c.metrics = metric_names();
    }
    c.output_dir = top.text("output_dir", c.output_dir.string());

    if (top.has("cv")) {
        Section s = top.child("cv");
        CvPlan plan;
        plan.folds = s.count("folds", plan.folds);
        plan.alpha_grid = s.numbers("alpha_grid", {});
        plan.seed = s.count("seed", plan.seed);
        plan.data_term_only = s.flag("data_term_only", false);
        s.finish();
        try {
            plan.validate(c.n_observations);
        } catch (const InputError& e) {
            src.fail({"cv"}, e.what());
        }
        c.cv = plan;
    }

    if (top.has("baseline")) {
        Section s = top.child("baseline");
        BaselineConfig b;
        b.name = s.text("name", "");
        if (b.name != "toy" && b.name != "oslem" && b.name != "richardson_lucy") {
            src.fail(s.path("name"), "unknown baseline '" + b.name + "'");
        }
        b.alphas = s.numbers("alphas", b.alphas);
        b.sigma_pi2 = s.number("sigma_pi2", b.sigma_pi2);
        b.sigma_k2 = s.number("sigma_k2", b.sigma_k2);
        b.sigma_0_2 = s.number("sigma_0_2", b.sigma_0_2);
        b.alpha = s.number("alpha", b.alpha);
        b.bins = s.count("bins", b.bins);
        b.iterations = s.count("iterations", b.iterations);
        b.lo = s.number("lo", b.lo);
        b.hi = s.number("hi", b.hi);
        if (s.has("kernel")) {
            const json& k = s.raw("kernel");
            if (!k.is_array()) src.fail(s.path("kernel"), "expected an array of rows");
            for (const auto& row : k) {
                if (!row.is_array()) src.fail(s.path("kernel"), "expected an array of rows");
                std::vector<double> r;
                for (const auto& e : row) {
                    if (!e.is_number()) src.fail(s.path("kernel"), "kernel entries must be numbers");
                    r.push_back(e.get<double>());
                }
                b.kernel.push_back(std::move(r));
            }
        }
        b.mu = s.numbers("mu", {});
        b.pi0 = s.numbers("pi0", {});
        s.finish();
        if (b.name == "toy") {
            for (double a : b.alphas) {
                if (!(a >= 0.0)) src.fail(s.path("alphas"), "alphas must be nonnegative");
            }
            try {
                ToyGaussianSpec{b.sigma_pi2, b.sigma_k2, b.sigma_0_2, 0.0}.validate();
            } catch (const InputError& e) {
                src.fail({"baseline"}, e.what());
            }
        } else {
            if (b.iterations < 1) src.fail(s.path("iterations"), "must be at least 1");
            if (!(b.alpha >= 0.0)) src.fail(s.path("alpha"), "must be nonnegative");
            if (b.name == "richardson_lucy") b.alpha = 0.0;
            if (!b.kernel.empty()) {
                const std::size_t n = b.kernel.size();
                for (const auto& r : b.kernel) {
                    if (r.size() != n) src.fail(s.path("kernel"), "kernel must be square");
                }
                if (b.mu.size() != n) src.fail(s.path("mu"), "needs one entry per bin");
                if (b.pi0.size() != n) src.fail(s.path("pi0"), "needs one entry per bin");
            } else {
                if (b.bins < 1) src.fail(s.path("bins"), "must be at least 1");
                if (!(b.lo < b.hi)) src.fail(s.path("hi"), "must exceed lo");
                if (!preset.kernel->same_space()) {
                    src.fail({"experiment"}, "grid baselines need a deconvolution kernel");
                }
            }
        }
        c.baseline = b;
    }

    if (top.has("clouds")) {
        for (const auto& p : top.texts("clouds")) c.clouds.emplace_back(p);
    }
    top.finish();

    if (c.init.kind == InitSpec::Kind::observations && c.init.shift.size() > 0 && c.init.shift.size() != dx) {
        src.fail({"init", "shift"}, "needs " + std::to_string(dx) + " entries");
    }
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path.string(), 0, "cannot read config file");
    std::ostringstream buf;
    buf << in.rdbuf();
    RunConfig c = parse_config(buf.str(), path.string());
    // Relative data paths are taken from the config's directory.
    const auto base = path.parent_path();
    if (c.observations_file && c.observations_file->is_relative()) c.observations_file = base / *c.observations_file;
    for (auto& p : c.clouds) {
        if (p.is_relative()) p = base / p;
    }
    return c;
}

json RunConfig::resolved() const {
    json j;
    j["experiment"] = experiment;
    if (experiment == "highdim_mixture") j["dim"] = dim;
    j["misspecified"] = misspecified;
    j["observations"]["count"] = n_observations;
    if (observations_file) j["observations"]["file"] = observations_file->filename().string();
    j["solver"] = {{"alpha", solver.alpha},
                   {"eta", solver.eta},
                   {"gamma", solver.gamma},
                   {"n_particles", solver.n_particles},
                   {"minibatch", solver.minibatch},
                   {"max_steps", solver.max_steps},
                   {"resample_each_step", solver.resample_each_step},
                   {"resample_policy", policy_name(solver.resample_policy)},
                   {"early_stop", solver.early_stop},
                   {"stop_tol", solver.stop_tol},
                   {"stop_window", solver.stop_window},
                   {"denom_floor", solver.denom_floor},
                   {"monitor_every", solver.monitor_every}};
    j["init"] = {{"kind", init_kind_name(init.kind)}, {"shift", init.shift}, {"point", init.point},
                 {"lo", init.lo}, {"hi", init.hi}};
    j["reference"] = {{"kind", reference_kind_name(reference.kind)}, {"mean", reference.mean},
                      {"variance", reference.variance}};
    j["replicates"] = replicates;
    j["seed_base"] = seed_base;
    j["metrics"] = metrics;
    if (cv) {
        j["cv"] = {{"folds", cv->folds}, {"alpha_grid", cv->alpha_grid}, {"seed", cv->seed},
                   {"data_term_only", cv->data_term_only}};
    }
    if (baseline) {
        json b = {{"name", baseline->name}};
        if (baseline->name == "toy") {
            b["alphas"] = baseline->alphas;
            b["sigma_pi2"] = baseline->sigma_pi2;
            b["sigma_k2"] = baseline->sigma_k2;
            b["sigma_0_2"] = baseline->sigma_0_2;
        } else {
            b["alpha"] = baseline->alpha;
            b["iterations"] = baseline->iterations;
            if (baseline->kernel.empty()) {
                b["bins"] = baseline->bins;
                b["lo"] = baseline->lo;
                b["hi"] = baseline->hi;
            } else {
                b["kernel"] = baseline->kernel;
                b["mu"] = baseline->mu;
                b["pi0"] = baseline->pi0;
            }
        }
        j["baseline"] = b;
    }
    if (!clouds.empty()) {
        json list = json::array();
        for (const auto& p : clouds) list.push_back(p.filename().string());
        j["clouds"] = list;
    }
    return j;
}

// ---------------------------------------------------------------- running

namespace {

bool wants(const RunConfig& c, const std::string& metric) {
    return std::find(c.metrics.begin(), c.metrics.end(), metric) != c.metrics.end();
}

std::filesystem::path output_dir(const RunConfig& c, const CommandOptions& o) {
    auto dir = o.out ? *o.out : c.output_dir;
    std::filesystem::create_directories(dir);
    return dir;
}

RunConfig load_with_overrides(const CommandOptions& o) {
    RunConfig c = load_config(o.config);
    if (o.seed) c.seed_base = *o.seed;
    if (o.workers < 1) throw InputError("--workers must be at least 1");
    return c;
}

void write_json(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

ObservationSample observations_for(const RunConfig& c, const ExperimentPreset& p, std::uint64_t seed) {
    if (c.observations_file) {
        ObservationSample obs = read_observations_csv(*c.observations_file);
        if (static_cast<std::size_t>(obs.dim()) != p.kernel->dim_y()) {
            throw InputError(c.observations_file->string() + ": expected " + std::to_string(p.kernel->dim_y()) +
                             " columns");
        }
        return obs;
    }
    return p.sample_observations(c.n_observations, seed);
}

ReferenceMeasure reference_for(const RunConfig& c, const ExperimentPreset& p, const ObservationSample& obs) {
    switch (c.reference.kind) {
        case ReferenceOverride::Kind::gaussian: return ReferenceMeasure::gaussian(c.reference.mean, c.reference.variance);
        case ReferenceOverride::Kind::flat: return ReferenceMeasure::flat(p.kernel->dim_x());
        case ReferenceOverride::Kind::preset: break;
    }
    return p.reference(obs);
}

SolverConfig solver_for(const RunConfig& c, const ObservationSample& obs, std::uint64_t seed, std::size_t threads) {
    SolverConfig s = c.solver;
    s.seed = seed;
    s.threads = std::max<std::size_t>(threads, 1);
    try {
        s.validate(static_cast<std::size_t>(obs.size()));
    } catch (const InputError& e) {
        throw ConfigError("solver", 0, e.what());
    }
    return s;
}

DensityOnGrid truth_on(const ExperimentPreset& p, const EvaluationGrid& grid) {
    DensityOnGrid out{grid, std::vector<double>(grid.size())};
    std::vector<double> node(grid.dim());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid.node(i, node);
        out.values[i] = p.truth(node);
    }
    return out;
}

DensityOnGrid mu_on(const ExperimentPreset& p, const EvaluationGrid& grid, std::size_t workers) {
    DensityOnGrid out{grid, std::vector<double>(grid.size())};
    parallel_for(grid.size(), workers, [&](std::size_t i) {
        std::vector<double> node(grid.dim());
        grid.node(i, node);
        out.values[i] = p.mu_density(node);
    });
    return out;
}

MetricRow metric_row(const RunConfig& c, const ParticleCloud& cloud, std::size_t m, std::uint64_t seed,
                     std::string name, double value) {
    return {c.experiment, "fe-wgf", static_cast<std::size_t>(cloud.size()), m, seed, std::move(name), value};
}

}  // namespace

std::vector<MetricRow> compute_metrics(const ExperimentPreset& preset, const ParticleCloud& cloud,
                                       const ObservationSample* observations, const ReferenceMeasure* ref,
                                       const RunConfig& config, std::uint64_t seed, std::size_t workers) {
    std::vector<MetricRow> rows;
    const std::size_t m = observations ? static_cast<std::size_t>(observations->size()) : 0;
    const std::size_t d = static_cast<std::size_t>(cloud.dim());
    auto add = [&](std::string name, double value) { rows.push_back(metric_row(config, cloud, m, seed, std::move(name), value)); };

    if (wants(config, "moments")) {
        for (std::size_t i = 0; i < d; ++i) {
            const auto col = cloud.points.col(static_cast<Eigen::Index>(i));
            const double mean = col.mean();
            const double var = cloud.size() > 1
                                   ? (col.array() - mean).square().sum() / static_cast<double>(cloud.size() - 1)
                                   : 0.0;
            add("mean_" + std::to_string(i + 1), mean);
            add("var_" + std::to_string(i + 1), var);
        }
    }
    const bool kde_ok = cloud.size() >= 2;
    if (wants(config, "ise") && preset.metric_grid && kde_ok) {
        const DensityOnGrid est = kde_grid(cloud, silverman_bandwidth(cloud), *preset.metric_grid, workers);
        add("ise", ise(est, truth_on(preset, *preset.metric_grid)));
    }
    if (wants(config, "w1_marginal") && preset.sample_truth) {
        const Matrix truth = preset.sample_truth(static_cast<std::size_t>(cloud.size()), seed);
        std::vector<double> a(static_cast<std::size_t>(cloud.size())), b(a.size());
        for (std::size_t k = 0; k < a.size(); ++k) {
            a[k] = cloud.points(static_cast<Eigen::Index>(k), 0);
            b[k] = truth(static_cast<Eigen::Index>(k), 0);
        }
        add("w1_marginal", wasserstein1_1d(a, b));
    }
    if (wants(config, "reconvolution_ise") && preset.observation_grid && preset.mu_density) {
        const DensityOnGrid rec = reconvolve(cloud, *preset.kernel, *preset.observation_grid, workers);
        add("reconvolution_ise", ise(rec, mu_on(preset, *preset.observation_grid, workers)));
    }
    if (wants(config, "g_hat") && observations && ref && kde_ok &&
        !(ref->kind() == ReferenceMeasure::Kind::flat && config.solver.alpha > 0.0)) {
        const KernelDensity density(cloud);
        const FunctionalEstimate est = g_hat(cloud, *observations, *preset.kernel, *ref, config.solver.alpha,
                                             config.solver.eta, density, config.solver.denom_floor, workers);
        add("g_hat", est.total);
        add("data_term", est.data_term);
        add("kl_term", est.kl_term);
    }
    return rows;
}

void cmd_run(const CommandOptions& options, std::ostream& log) {
    const RunConfig c = load_with_overrides(options);
    const ExperimentPreset preset = preset_for(c);
    const auto dir = output_dir(c, options);
    const std::size_t d = preset.kernel->dim_x();

    struct Replicate {
        ParticleCloud init;
        SolverResult result;
        std::vector<MetricRow> metrics;
        std::optional<DensityOnGrid> kde;
    };
    std::vector<Replicate> reps(c.replicates);
    // One replicate: all workers go to the solver. Several: one thread each.
    const std::size_t rep_workers = c.replicates > 1 ? options.workers : 1;
    const std::size_t inner = c.replicates > 1 ? 1 : options.workers;
    parallel_for(c.replicates, rep_workers, [&](std::size_t r) {
        const std::uint64_t seed = c.seed_base + r;
        const ObservationSample obs = observations_for(c, preset, seed);
        const ReferenceMeasure ref = reference_for(c, preset, obs);
        const SolverConfig solver = solver_for(c, obs, seed, inner);
        Replicate& rep = reps[r];
        rep.init = initialize(c.init, solver.n_particles, seed, obs, ref);
        rep.result = run(solver, *preset.kernel, ref, rep.init, obs);
        rep.metrics = compute_metrics(preset, rep.result.cloud, &obs, &ref, c, seed, inner);
        if (d <= 2 && preset.metric_grid && rep.result.cloud.size() >= 2) {
            rep.kde = kde_grid(rep.result.cloud, silverman_bandwidth(rep.result.cloud), *preset.metric_grid, inner);
        }
    });

    std::vector<MetricRow> all;
    for (std::size_t r = 0; r < c.replicates; ++r) {
        const auto sub = c.replicates > 1 ? dir / ("replicate_" + std::to_string(r)) : dir;
        std::filesystem::create_directories(sub);
        const Replicate& rep = reps[r];
        write_cloud_csv(sub / "init.csv", rep.init);
        write_cloud_csv(sub / "cloud.csv", rep.result.cloud);
        write_trace_csv(sub / "trace.csv", rep.result.trace, d);
        if (rep.kde) write_density_csv(sub / "kde.csv", *rep.kde);
        all.insert(all.end(), rep.metrics.begin(), rep.metrics.end());
    }

    if (wants(c, "pointwise_mse") && c.replicates >= 2 && preset.metric_grid &&
        std::all_of(reps.begin(), reps.end(), [](const Replicate& r) { return r.kde.has_value(); })) {
        const DensityOnGrid truth = truth_on(preset, *preset.metric_grid);
        std::vector<double> mse(truth.values.size());
        std::vector<double> at_node(c.replicates);
        for (std::size_t i = 0; i < mse.size(); ++i) {
            for (std::size_t r = 0; r < c.replicates; ++r) at_node[r] = reps[r].kde->values[i];
            mse[i] = pointwise_mse(at_node, truth.values[i]);
        }
        write_density_csv(dir / "pointwise_mse.csv", DensityOnGrid{truth.grid, mse});
        all.push_back({c.experiment, "fe-wgf", c.solver.n_particles, c.n_observations, c.seed_base,
                       "integrated_pointwise_mse", truth.grid.integrate(mse)});
    }
    write_metrics_csv(dir / "metrics.csv", all);
    write_json(dir / "resolved_config.json", c.resolved());
    log << "run: " << c.replicates << " replicate(s) of " << c.experiment << " written to " << dir.string() << '\n';
}

void cmd_cv(const CommandOptions& options, std::ostream& log) {
    const RunConfig c = load_with_overrides(options);
    if (!c.cv) throw ConfigError(options.config.string(), 0, "cv: missing \"cv\" section");
    const ExperimentPreset preset = preset_for(c);
    const auto dir = output_dir(c, options);

    const ObservationSample obs = observations_for(c, preset, c.seed_base);
    const ReferenceMeasure ref = reference_for(c, preset, obs);
    CvProblem problem;
    problem.kernel = preset.kernel.get();
    problem.ref = &ref;
    problem.init = c.init;
    problem.solver = solver_for(c, obs, c.seed_base, 1);
    for (double a : c.cv->alpha_grid) {
        if (a > 0.0 && ref.kind() == ReferenceMeasure::Kind::flat) {
            throw ConfigError(options.config.string(), 0, "cv: a flat reference requires alpha = 0");
        }
    }
    const CvResult result = cv_score(*c.cv, problem, obs, options.workers);
    write_cv_csv(dir / "cv.csv", result);
    json summary;
    summary["best_alpha"] = result.best_alpha ? json(*result.best_alpha) : json(nullptr);
    write_json(dir / "cv_selected.json", summary);
    write_json(dir / "resolved_config.json", c.resolved());
    log << "cv: selected alpha ";
    if (result.best_alpha) {
        log << format_double(*result.best_alpha) << '\n';
    } else {
        log << "none (all folds failed)\n";
    }
}

void cmd_baseline(const CommandOptions& options, std::ostream& log) {
    const RunConfig c = load_with_overrides(options);
    if (!c.baseline) throw ConfigError(options.config.string(), 0, "baseline: missing \"baseline\" section");
    const BaselineConfig& b = *c.baseline;
    const auto dir = output_dir(c, options);

    if (b.name == "toy") {
        ToyGaussianSpec spec{b.sigma_pi2, b.sigma_k2, b.sigma_0_2, 0.0};
        const auto rows = toy_sweep(spec, b.alphas);
        CsvTable t;
        t.header = {"alpha", "beta", "g_value"};
        for (const auto& r : rows) {
            t.rows.push_back({format_double(r.alpha), format_double(r.beta), format_double(r.g_value)});
        }
        write_csv(dir / "toy_sweep.csv", t);
        log << "baseline toy: " << rows.size() << " alpha values\n";
    } else {
        GridProblem problem;
        std::optional<ExperimentPreset> preset;
        if (!b.kernel.empty()) {
            const std::size_t n = b.kernel.size();
            problem.centers = Matrix(static_cast<Eigen::Index>(n), 1);
            problem.kernel = Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
            for (std::size_t i = 0; i < n; ++i) {
                problem.centers(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i);
                for (std::size_t j = 0; j < n; ++j) {
                    problem.kernel(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = b.kernel[i][j];
                }
            }
            problem.mu = b.mu;
            problem.pi0 = b.pi0;
        } else {
            preset = preset_for(c);
            const ObservationSample obs = observations_for(c, *preset, c.seed_base);
            const ReferenceMeasure ref = reference_for(c, *preset, obs);
            if (ref.kind() == ReferenceMeasure::Kind::flat && b.alpha > 0.0) {
                throw ConfigError(options.config.string(), 0, "baseline: a flat reference requires alpha = 0");
            }
            const DensityFunction pi0 = [ref](Point x) {
                return ref.kind() == ReferenceMeasure::Kind::flat ? 1.0 : std::exp(ref.log_density(x));
            };
            problem = make_grid_problem(*preset->kernel, pi0, preset->mu_density, b.bins, b.lo, b.hi);
        }
        try {
            problem.validate();
        } catch (const InputError& e) {
            throw ConfigError(options.config.string(), 0, std::string("baseline: ") + e.what());
        }

        std::vector<double> state(problem.bins(), 1.0 / static_cast<double>(problem.bins()));
        CsvTable objective;
        objective.header = {"iteration", "objective"};
        objective.rows.push_back({"0", format_double(discrete_objective(state, problem, b.alpha))});
        for (std::size_t it = 1; it <= b.iterations; ++it) {
            state = b.name == "richardson_lucy" ? richardson_lucy_step(state, problem) : oslem_step(state, problem, b.alpha);
            objective.rows.push_back({std::to_string(it), format_double(discrete_objective(state, problem, b.alpha))});
        }
        write_grid_state_csv(dir / "grid_state.csv", problem.centers, state);
        write_csv(dir / "objective.csv", objective);

        std::vector<MetricRow> metrics{{c.experiment, b.name, problem.bins(), problem.bins(), c.seed_base, "objective",
                                        discrete_objective(state, problem, b.alpha)}};
        if (preset && problem.centers.cols() == 1) {
            // Bin values are densities at the centres; compare on the same nodes.
            double sq = 0.0;
            const double width = (b.hi - b.lo) / static_cast<double>(b.bins);
            for (std::size_t i = 0; i < problem.bins(); ++i) {
                const double diff = state[i] - preset->truth(row_of(problem.centers, static_cast<Eigen::Index>(i)));
                sq += diff * diff * width;
            }
            metrics.push_back({c.experiment, b.name, problem.bins(), problem.bins(), c.seed_base, "ise", sq});
        }
        write_metrics_csv(dir / "metrics.csv", metrics);
        log << "baseline " << b.name << ": " << b.iterations << " iterations on " << problem.bins() << " bins\n";
    }
    write_json(dir / "resolved_config.json", c.resolved());
}

void cmd_metrics(const CommandOptions& options, std::ostream& log) {
    const RunConfig c = load_with_overrides(options);
    if (c.clouds.empty()) throw ConfigError(options.config.string(), 0, "metrics: no \"clouds\" listed");
    const ExperimentPreset preset = preset_for(c);
    const auto dir = output_dir(c, options);

    std::vector<std::vector<MetricRow>> per(c.clouds.size());
    parallel_for(c.clouds.size(), options.workers, [&](std::size_t i) {
        const ParticleCloud cloud = read_cloud_csv(c.clouds[i]);
        if (static_cast<std::size_t>(cloud.dim()) != preset.kernel->dim_x()) {
            throw InputError(c.clouds[i].string() + ": wrong number of columns");
        }
        const std::uint64_t seed = c.seed_base + i;
        const ObservationSample obs = observations_for(c, preset, seed);
        const ReferenceMeasure ref = reference_for(c, preset, obs);
        per[i] = compute_metrics(preset, cloud, &obs, &ref, c, seed, 1);
    });
    std::vector<MetricRow> all;
    for (auto& rows : per) all.insert(all.end(), rows.begin(), rows.end());
    write_metrics_csv(dir / "metrics.csv", all);
    write_json(dir / "resolved_config.json", c.resolved());
    log << "metrics: " << all.size() << " rows for " << c.clouds.size() << " cloud(s)\n";
}

int run_command(const std::string& command, const CommandOptions& options, std::ostream& log, std::ostream& err) {
    try {
        if (command == "run") {
            cmd_run(options, log);
        } else if (command == "cv") {
            cmd_cv(options, log);
        } else if (command == "baseline") {
            cmd_baseline(options, log);
        } else if (command == "metrics") {
            cmd_metrics(options, log);
        } else {
            err << "error: unknown command '" << command << "'\n";
            return 2;
        }
        return 0;
    } catch (const NumericalFailure& e) {
        err << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const UnsupportedOperation& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace fredholm
