#include "fiberlink/csv.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace
{
const fs::path scenario_dir = FIBERLINK_SCENARIO_DIR;

const std::string small_scenario = R"(name: tiny
seed: 5
link:
  path:
    - span: {id: a, length_km: 100, loss_db: 20}
noise:
  a: [{alpha: 2, h_rad2_per_hz_per_km: 1.4}]
SERVO
sim:
  fs_hz: 4000
  duration_s: 30
  cells_per_span: 4
analysis:
  welch_segment_s: 5
  taus_s: [0.1, 1, 5]
  slope_tau_low_s: 0.1
  slope_tau_high_s: 5
  integration_high_hz: 500
outputs:
  directory: tiny-out
)";

class Cli : public ::testing::Test
{
protected:
        void SetUp() override
        {
                dir_ = fs::temp_directory_path() /
                       ("fiberlink-cli-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
                fs::remove_all(dir_);
                fs::create_directories(dir_);
        }

        void TearDown() override
        {
                fs::remove_all(dir_);
        }

        int run(const std::string& args, const std::string& env = "") const
        {
                const std::string cmd = env + " \"" + std::string(FIBERLINK_CLI) + "\" " + args + " > \"" +
                                        (dir_ / "stdout.txt").string() + "\" 2> \"" + (dir_ / "stderr.txt").string() +
                                        "\"";
                const int status = std::system(cmd.c_str());
                return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        }

        std::string output(const std::string& name) const
        {
                std::ifstream in(dir_ / name);
                return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
        }

        fs::path write(const std::string& name, const std::string& servo) const
        {
                std::string text = small_scenario;
                text.replace(text.find("SERVO"), 5, servo);
                const auto p = dir_ / name;
                std::ofstream(p) << text;
                return p;
        }

        fs::path dir_;
};
}

TEST_F(Cli, ValidateShippedConfig)
{
        EXPECT_EQ(run("validate " + (scenario_dir / "link108.cfg").string()), 0);
        EXPECT_NE(output("stdout.txt").find("valid"), std::string::npos);
        EXPECT_EQ(run("validate " + (scenario_dir / "cascade600.cfg").string()), 0);
}

TEST_F(Cli, InvalidConfigExitsOne)
{
        std::ofstream(dir_ / "bad.cfg") << "name: bad\nlink:\n  path:\n    - span: {id: a, length_km: -4, loss_db: 1}\n";
        EXPECT_EQ(run("validate " + (dir_ / "bad.cfg").string()), 1);
        const auto err = output("stderr.txt");
        EXPECT_NE(err.find("length_km must be greater than 0"), std::string::npos);
        EXPECT_NE(err.find("seed required"), std::string::npos);
        EXPECT_EQ(run("run " + (dir_ / "bad.cfg").string()), 1);
}

TEST_F(Cli, UsageErrorsExitOne)
{
        EXPECT_EQ(run(""), 1);
        EXPECT_EQ(run("frobnicate"), 1);
        EXPECT_EQ(run("validate"), 1);
}

TEST_F(Cli, RunWritesArtifactsUnderOutputRoot)
{
        const auto cfg = write("tiny.cfg", "");
        EXPECT_EQ(run("run " + cfg.string(), "FIBERLINK_OUT=\"" + (dir_ / "root").string() + "\""), 0);
        EXPECT_TRUE(fs::exists(dir_ / "root" / "tiny-out" / "report.txt"));
        EXPECT_TRUE(fs::exists(dir_ / "root" / "tiny-out" / "adev_residual_filtered.csv"));
        EXPECT_EQ(run("run " + cfg.string() + " --out " + (dir_ / "explicit").string()), 0);
        EXPECT_TRUE(fs::exists(dir_ / "explicit" / "psd_free.csv"));
}

TEST_F(Cli, UnwritableOutputExitsThree)
{
        const auto cfg = write("tiny.cfg", "");
        std::ofstream(dir_ / "blocker") << "x";
        EXPECT_EQ(run("run " + cfg.string() + " --out " + (dir_ / "blocker" / "sub").string()), 3);
}

TEST_F(Cli, DivergingLoopExitsTwo)
{
        // An integrator corner far above the loop bandwidth passes the delay
        // check, but with an unbounded actuator the loop runs away.
        const auto cfg =
                write("unstable.cfg", "servo:\n  integrator_corner_ratio: 0.05\n  actuator_range_hz: 1.0e12\n");
        EXPECT_EQ(run("validate " + cfg.string()), 0);
        EXPECT_EQ(run("run " + cfg.string() + " --out " + (dir_ / "u").string()), 2);
        EXPECT_NE(output("stderr.txt").find("diverged"), std::string::npos);
}

TEST_F(Cli, PlanAndAnalyze)
{
        EXPECT_EQ(run("plan " + (scenario_dir / "cascade600.cfg").string() + " --out " + (dir_ / "plan").string()), 0);
        EXPECT_NE(output("stdout.txt").find("4 segment(s)"), std::string::npos);
        EXPECT_TRUE(fs::exists(dir_ / "plan" / "plan.csv"));

        fiberlink::PhaseSeries s;
        s.fs = 100.0;
        for (int i = 0; i < 5000; ++i)
        {
                s.samples.push_back(1e-3 * (i % 7));
        }
        fiberlink::csv::write_phase(dir_ / "phase.csv", s);
        EXPECT_EQ(run("analyze " + (dir_ / "phase.csv").string() + " --adev"), 0);
        EXPECT_EQ(output("stdout.txt").rfind("tau_s,adev,count\n", 0), 0u);
        EXPECT_EQ(run("analyze " + (dir_ / "phase.csv").string() + " --psd --out " + (dir_ / "psd.csv").string()), 0);
        EXPECT_TRUE(fs::exists(dir_ / "psd.csv"));
        EXPECT_EQ(run("analyze " + (dir_ / "phase.csv").string()), 1);
        EXPECT_EQ(run("analyze " + (dir_ / "missing.csv").string() + " --adev"), 1);
}
