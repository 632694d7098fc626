#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "ope/bench.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int status = -1;
    std::string out;
};

Result run_cli(const std::string& args) {
    const std::string cmd = std::string(OPE_BENCH_PATH) + " " + args + " 2>/dev/null";
    Result r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    std::size_t n = 0;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    const int raw = pclose(pipe);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return r;
}

fs::path write_temp(const std::string& name, const std::string& text) {
    const auto path = fs::temp_directory_path() / name;
    std::ofstream(path) << text;
    return path;
}

const char* kQuickFigure1 = "experiment = figure1\nreps = 20\nbootstrap_resamples = 100\np_grid = 0.5, 1.0\n";

}  // namespace

TEST(Cli, RunsWithConfigToStdout) {
    const auto cfg = write_temp("ope_cli_quick.cfg", kQuickFigure1);
    const auto r = run_cli("run figure1 --config " + cfg.string());
    EXPECT_EQ(r.status, 0);
    const auto rows = ope::bench::parse_csv(r.out);
    EXPECT_EQ(rows.size(), 6u);
    fs::remove(cfg);
}

TEST(Cli, FlagsOverrideConfig) {
    const auto cfg = write_temp("ope_cli_override.cfg", kQuickFigure1);
    const auto r = run_cli("run figure1 --config " + cfg.string() + " --seed 5 --reps 30");
    ASSERT_EQ(r.status, 0);
    for (const auto& row : ope::bench::parse_csv(r.out)) {
        EXPECT_EQ(row.seed, 5u);
        EXPECT_EQ(row.reps, 30u);
    }
    fs::remove(cfg);
}

TEST(Cli, WritesJsonFile) {
    const auto cfg = write_temp("ope_cli_json.cfg", kQuickFigure1);
    const auto out = fs::temp_directory_path() / "ope_cli_report.json";
    const auto r = run_cli("run figure1 --config " + cfg.string() + " --format json --out " + out.string());
    EXPECT_EQ(r.status, 0);
    EXPECT_TRUE(r.out.empty());
    std::ifstream in(out);
    const auto doc = nlohmann::json::parse(in);
    EXPECT_EQ(doc.size(), 6u);
    EXPECT_EQ(doc[0]["experiment"], "figure1");
    fs::remove(cfg);
    fs::remove(out);
}

TEST(Cli, IdenticalOutputForIdenticalInvocations) {
    const auto cfg = write_temp("ope_cli_repeat.cfg", kQuickFigure1);
    const auto a = run_cli("run figure1 --config " + cfg.string());
    const auto b = run_cli("run figure1 --config " + cfg.string());
    EXPECT_EQ(a.status, 0);
    EXPECT_EQ(a.out, b.out);
    fs::remove(cfg);
}

TEST(Cli, ConfigErrorsExitWithOne) {
    const auto unknown = write_temp("ope_cli_unknown.cfg", "colour = blue\n");
    EXPECT_EQ(run_cli("run figure1 --config " + unknown.string()).status, 1);
    const auto estimator = write_temp("ope_cli_estimator.cfg", "estimators = BIS, FIS\n");
    EXPECT_EQ(run_cli("run figure1 --config " + estimator.string()).status, 1);
    EXPECT_EQ(run_cli("run figure1 --config /nonexistent/config.cfg").status, 1);
    EXPECT_EQ(run_cli("run figure2").status, 1);
    EXPECT_EQ(run_cli("run figure1 --format xml").status, 1);
    EXPECT_EQ(run_cli("run ea-bias --reps 1").status, 1);
    EXPECT_EQ(run_cli("").status, 1);
    fs::remove(unknown);
    fs::remove(estimator);
}

TEST(Cli, UnwritableOutputExitsWithTwo) {
    const auto cfg = write_temp("ope_cli_io.cfg", kQuickFigure1);
    EXPECT_EQ(run_cli("run figure1 --config " + cfg.string() + " --out /nonexistent/dir/x.csv").status, 2);
    fs::remove(cfg);
}

TEST(Cli, HelpExitsWithZero) { EXPECT_EQ(run_cli("--help").status, 0); }
