#include "fredholm/experiment.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fredholm {
namespace {

class CommandTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = std::filesystem::temp_directory_path() /
               ("fredholm_cmd_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        std::filesystem::remove_all(dir_);
        std::filesystem::create_directories(dir_);
    }
    void TearDown() override { std::filesystem::remove_all(dir_); }

    std::filesystem::path write_config(const std::string& text, const std::string& name = "config.json") {
        const auto path = dir_ / name;
        std::ofstream(path) << text;
        return path;
    }

    int run(const std::string& command, const std::filesystem::path& config, const std::string& out,
            std::size_t workers = 1) {
        CommandOptions o;
        o.config = config;
        o.out = dir_ / out;
        o.workers = workers;
        std::ostringstream log;
        err_.str("");
        return run_command(command, o, log, err_);
    }

    static std::string slurp(const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    }

    std::filesystem::path dir_;
    std::ostringstream err_;
};

TEST(Config, DefaultsComeFromPreset) {
    const auto c = parse_config(R"({"experiment": "toy_gaussian"})");
    EXPECT_EQ(c.solver.n_particles, 500u);
    EXPECT_EQ(c.n_observations, 10000u);
    EXPECT_EQ(c.metrics, metric_names());
}

TEST(Config, MalformedJsonReportsLine) {
    try {
        parse_config("{\n  \"experiment\": \"toy_gaussian\",\n  \"replicates\": ,\n}", "c.json");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.line(), 3u) << e.what();
    }
}

TEST(Config, SemanticErrorReportsLineOfKey) {
    const std::string text = "{\n  \"experiment\": \"gaussian_mixture_1d\",\n  \"solver\": {\n    \"n_particles\": 10,\n"
                             "    \"gamma\": -1\n  }\n}";
    try {
        parse_config(text, "c.json");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.line(), 3u) << e.what();
        EXPECT_NE(std::string(e.what()).find("gamma"), std::string::npos);
    }
    try {
        parse_config("{\n  \"solver\": {\n    \"gama\": 0.1\n  }\n}", "c.json");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.line(), 3u) << e.what();
    }
}

TEST(Config, FlatReferenceNeedsZeroAlpha) {
    EXPECT_THROW(parse_config(R"({"reference": {"kind": "flat"}, "solver": {"alpha": 0.1}})"), ConfigError);
    EXPECT_NO_THROW(parse_config(R"({"reference": {"kind": "flat"}, "solver": {"alpha": 0}})"));
}

TEST(Config, DimensionConsistency) {
    EXPECT_THROW(parse_config(R"({"init": {"kind": "point", "point": [0.1, 0.2]}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"experiment": "ct_phantom", "init": {"kind": "observations"}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"reference": {"kind": "gaussian", "mean": [0], "variance": [0]}})"), ConfigError);
}

TEST(Config, UnknownNamesRejected) {
    EXPECT_THROW(parse_config(R"({"experiment": "nope"})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"metrics": ["ise", "bogus"]})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"baseline": {"name": "fbp"}})"), ConfigError);
}

TEST_F(CommandTest, MissingConfigIsExitTwo) {
    EXPECT_EQ(run("run", dir_ / "absent.json", "o"), 2);
    EXPECT_EQ(run("nonsense", dir_ / "absent.json", "o"), 2);
}

TEST_F(CommandTest, ZeroStepsFinalCloudEqualsInit) {
    const auto cfg = write_config(R"({"experiment": "gaussian_mixture_1d", "solver": {"max_steps": 0}})");
    ASSERT_EQ(run("run", cfg, "o"), 0) << err_.str();
    EXPECT_EQ(slurp(dir_ / "o" / "cloud.csv"), slurp(dir_ / "o" / "init.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir_ / "o" / "resolved_config.json"));
}

TEST_F(CommandTest, RunIsByteIdenticalAcrossWorkers) {
    const auto cfg = write_config(R"({"experiment": "gaussian_mixture_1d", "seed_base": 4,
                                      "solver": {"n_particles": 200, "max_steps": 20}, "replicates": 2})");
    ASSERT_EQ(run("run", cfg, "a", 1), 0) << err_.str();
    ASSERT_EQ(run("run", cfg, "b", 3), 0) << err_.str();
    for (const auto& rel : {"metrics.csv", "resolved_config.json", "replicate_0/trace.csv", "replicate_1/cloud.csv",
                            "replicate_1/kde.csv", "pointwise_mse.csv"}) {
        EXPECT_EQ(slurp(dir_ / "a" / rel), slurp(dir_ / "b" / rel)) << rel;
    }
    const auto rows = read_metrics_csv(dir_ / "a" / "metrics.csv");
    EXPECT_FALSE(rows.empty());
    EXPECT_EQ(rows.back().metric, "integrated_pointwise_mse");
}

TEST_F(CommandTest, ObservationsFromFile) {
    std::ofstream(dir_ / "obs.csv") << "y\n0.3\n0.31\n0.5\n0.52\n0.49\n0.29\n";
    const auto cfg = write_config(R"({"observations": {"file": "obs.csv"},
                                      "solver": {"n_particles": 6, "minibatch": 6, "max_steps": 3}})");
    ASSERT_EQ(run("run", cfg, "o"), 0) << err_.str();
    const auto rows = read_metrics_csv(dir_ / "o" / "metrics.csv");
    ASSERT_FALSE(rows.empty());
    EXPECT_EQ(rows.front().n_observations, 6u);
}

TEST_F(CommandTest, NumericalFailureIsExitThree) {
    // A huge step throws every particle far from all data; with a
    // vanishing floor the drift overflows.
    const auto cfg = write_config(R"({"experiment": "gaussian_mixture_1d",
        "reference": {"kind": "gaussian", "mean": [0.4], "variance": [1e-300]},
        "solver": {"alpha": 1e300, "gamma": 1.0, "max_steps": 5, "n_particles": 10, "minibatch": 10}})");
    EXPECT_EQ(run("run", cfg, "o"), 3) << err_.str();
    EXPECT_NE(err_.str().find("step"), std::string::npos) << err_.str();
}

TEST_F(CommandTest, ToyBaselineSweep) {
    const auto cfg = write_config(R"({"baseline": {"name": "toy", "alphas": [0, 0.5, 1]}})");
    ASSERT_EQ(run("baseline", cfg, "o"), 0) << err_.str();
    const CsvTable t = read_csv(dir_ / "o" / "toy_sweep.csv");
    ASSERT_EQ(t.rows.size(), 3u);
    EXPECT_EQ(parse_double(t.rows[0][1]), 0.43 * 0.43);
}

TEST_F(CommandTest, OslemThreeBinReachesGridOptimum) {
    const auto p = testing::random_three_bin_problem(17);
    nlohmann::json j;
    j["baseline"] = {{"name", "oslem"}, {"alpha", 0.1}, {"iterations", 500}};
    std::vector<std::vector<double>> k(3, std::vector<double>(3));
    for (int b = 0; b < 3; ++b) {
        for (int c = 0; c < 3; ++c) k[static_cast<std::size_t>(b)][static_cast<std::size_t>(c)] = p.kernel(b, c);
    }
    j["baseline"]["kernel"] = k;
    j["baseline"]["mu"] = p.mu;
    j["baseline"]["pi0"] = p.pi0;
    const auto cfg = write_config(j.dump(2));
    ASSERT_EQ(run("baseline", cfg, "o"), 0) << err_.str();
    const auto rows = read_metrics_csv(dir_ / "o" / "metrics.csv");
    ASSERT_EQ(rows.front().metric, "objective");
    EXPECT_LE(rows.front().value, testing::simplex_grid_minimum(p, 0.1, 1e-3) + 1e-6);
    EXPECT_TRUE(std::filesystem::exists(dir_ / "o" / "grid_state.csv"));
}

TEST_F(CommandTest, PresetOslemOnMixture) {
    const auto cfg = write_config(R"({"experiment": "gaussian_mixture_1d",
        "baseline": {"name": "oslem", "alpha": 0.001, "bins": 100, "iterations": 200}})");
    ASSERT_EQ(run("baseline", cfg, "o"), 0) << err_.str();
    const Matrix state = read_points_csv(dir_ / "o" / "grid_state.csv");
    EXPECT_EQ(state.rows(), 100);
    EXPECT_TRUE((state.col(1).array() > 0).all());
}

TEST_F(CommandTest, UnknownBaselineIsExitTwo) {
    const auto cfg = write_config(R"({"baseline": {"name": "smc-ems"}})");
    EXPECT_EQ(run("baseline", cfg, "o"), 2);
    EXPECT_NE(err_.str().find(":1"), std::string::npos) << err_.str();
}

TEST_F(CommandTest, CvWritesTableAndSelection) {
    const auto cfg = write_config(R"({"experiment": "gaussian_mixture_1d", "observations": {"count": 300},
        "solver": {"n_particles": 50, "minibatch": 50, "max_steps": 10, "monitor_every": 0},
        "cv": {"folds": 3, "alpha_grid": [0.001, 0.1], "seed": 2}})");
    ASSERT_EQ(run("cv", cfg, "o", 2), 0) << err_.str();
    const auto res = read_cv_csv(dir_ / "o" / "cv.csv");
    EXPECT_EQ(res.cells.size(), 6u);
    EXPECT_EQ(res.summary.size(), 2u);
    EXPECT_TRUE(res.best_alpha.has_value());
}

TEST_F(CommandTest, MetricsFromStoredClouds) {
    const auto run_cfg = write_config(R"({"experiment": "gaussian_mixture_1d", "solver": {"max_steps": 5}})", "r.json");
    ASSERT_EQ(run("run", run_cfg, "o"), 0) << err_.str();
    const auto first = read_metrics_csv(dir_ / "o" / "metrics.csv");
    std::filesystem::copy_file(dir_ / "o" / "cloud.csv", dir_ / "stored.csv");
    const auto cfg = write_config(R"({"experiment": "gaussian_mixture_1d", "clouds": ["stored.csv"]})", "m.json");
    ASSERT_EQ(run("metrics", cfg, "m"), 0) << err_.str();
    const auto again = read_metrics_csv(dir_ / "m" / "metrics.csv");
    // Same cloud, same seed, same observations: identical metric values.
    EXPECT_EQ(first, again);
}

}  // namespace
}  // namespace fredholm
