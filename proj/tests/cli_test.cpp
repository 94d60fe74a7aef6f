#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "shrinklogit/io.hpp"
#include "shrinklogit/simulation.hpp"
#include "support/temp_dir.hpp"

namespace sl = shrinklogit;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
};

RunResult run(const std::string& args, const std::string& env = "") {
    const std::string command = env + " " + SHRINKLOGIT_CLI_PATH + " " + args + " 2>/dev/null";
    RunResult result;
    FILE* pipe = ::popen(command.c_str(), "r");
    if (pipe == nullptr) return result;
    std::array<char, 4096> buf{};
    std::size_t got = 0;
    while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) result.out.append(buf.data(), got);
    const int status = ::pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        sl::Rng rng(21);
        const sl::Matrix x = sl::generate_design(200, 4, 0.9, rng);
        const sl::Vector beta = sl::newhouse_oman_beta(x);
        const sl::Dataset data(x, sl::generate_response(x, beta, rng));
        data_path_ = (dir_ / "data.csv").string();
        std::ofstream out(data_path_);
        sl::write_dataset(out, data);
    }

    sl::testing::TempDir dir_;
    std::string data_path_;
};

}  // namespace

TEST_F(CliTest, FitEmitsJson) {
    const RunResult r = run("fit --input " + data_path_ + " --estimators ml,pcltl --format json");
    ASSERT_EQ(r.exit_code, 0);
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["estimates"].size(), 2u);
    EXPECT_EQ(j["estimates"][1]["estimator"], "pcltl");
    EXPECT_TRUE(j["fit"]["converged"].get<bool>());
}

TEST_F(CliTest, RepeatedRunsAreByteIdentical) {
    const std::string args = "fit --input " + data_path_ + " --format tsv";
    const RunResult a = run(args);
    const RunResult b = run(args);
    ASSERT_EQ(a.exit_code, 0);
    EXPECT_EQ(a.out, b.out);
}

TEST_F(CliTest, UsageErrorsExitWithOne) {
    EXPECT_EQ(run("").exit_code, 1);
    EXPECT_EQ(run("fit").exit_code, 1);
    EXPECT_EQ(run("fit --input " + data_path_ + " --k 0").exit_code, 1);
    EXPECT_EQ(run("fit --input " + data_path_ + " --estimators ridge").exit_code, 1);
    EXPECT_EQ(run("fit --input " + data_path_ + " --format xml").exit_code, 1);
    EXPECT_EQ(run("fit --input " + data_path_ + " --r 2 --ptv 0.8").exit_code, 1);
    EXPECT_EQ(run("simulate --rho 1.0 --reps 1").exit_code, 1);
    EXPECT_EQ(run("compare --input " + data_path_ + " --pair pcltl").exit_code, 1);
}

TEST_F(CliTest, DataErrorsExitWithTwo) {
    const std::string bad = (dir_ / "bad.csv").string();
    std::ofstream(bad) << "y,x1\n1,0.5\n2,0.3\n";
    EXPECT_EQ(run("fit --input " + bad).exit_code, 2);
    EXPECT_EQ(run("fit --input " + (dir_ / "missing.csv").string()).exit_code, 2);
}

TEST_F(CliTest, NumericalFailuresExitWithThree) {
    const std::string separated = (dir_ / "separated.csv").string();
    std::ofstream(separated) << "y,x1\n0,-2\n0,-1\n1,1\n1,2\n";
    EXPECT_EQ(run("fit --input " + separated).exit_code, 3);
    EXPECT_EQ(run("compare --input " + separated).exit_code, 3);
}

TEST_F(CliTest, CompareWithBetaFile) {
    const std::string beta = (dir_ / "beta.txt").string();
    std::ofstream(beta) << "0.5 0.5 0.5 0.5\n";
    const RunResult r = run("compare --input " + data_path_ +
                            " --pair pcltl:ml,pcltl:ltl --beta-source file --beta-file " + beta +
                            " --format json");
    ASSERT_EQ(r.exit_code, 0);
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["beta_source"], "true_beta");
    EXPECT_EQ(j["comparisons"].size(), 2u);
}

TEST_F(CliTest, SimulateWritesOutputAndHonorsSeedSources) {
    const std::string out_dir = (dir_ / "study").string();
    const std::string grid = "simulate --p 4 --n 200 --rho 0.8 --reps 10";
    const RunResult flag = run(grid + " --seed 17 --out " + out_dir);
    ASSERT_EQ(flag.exit_code, 0);
    EXPECT_NE(flag.out.find("PCLTL"), std::string::npos);
    std::ifstream json_file(out_dir + "/study.json");
    const auto doc = nlohmann::json::parse(json_file);
    EXPECT_EQ(doc["master_seed"].get<std::uint64_t>(), 17u);

    const RunResult env = run(grid, "SHRINKLOGIT_SEED=17");
    EXPECT_EQ(env.out, flag.out);
    const RunResult other = run(grid + " --seed 18");
    EXPECT_NE(other.out, flag.out);
}

TEST_F(CliTest, ConfigFileMirrorsFlags) {
    const std::string config = (dir_ / "study.ini").string();
    std::ofstream(config) << "[simulate]\np = 4,6\nn = 200\nrho = 0.8,0.9\nreps = 10\nseed = 17\n";
    const RunResult from_file = run("--config " + config + " simulate");
    const RunResult from_flags = run("simulate --p 4,6 --n 200 --rho 0.8,0.9 --reps 10 --seed 17");
    ASSERT_EQ(from_file.exit_code, 0);
    EXPECT_EQ(from_file.out, from_flags.out);
    EXPECT_NE(from_file.out.find("p = 6"), std::string::npos);
}
