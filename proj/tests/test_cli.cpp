#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "ncia/cli/commands.hpp"
#include "ncia/cli/run_config.hpp"

using namespace ncia;
using namespace ncia::cli;

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int count_lines(const std::string& s, const std::string& prefix = "")
{
    int n = 0;
    std::istringstream in(s);
    for (std::string line; std::getline(in, line);)
        if (line.rfind(prefix, 0) == 0 && !line.empty() && line[0] != '#') ++n;
    return n;
}

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / "ncia_cli_test";
    fs::create_directories(dir);
    return dir / name;
}

int run(const std::string& args)
{
    const std::string cmd = std::string(NCIA_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST(RunConfig, FileThenOverrides)
{
    std::istringstream in("# comment\nusers = 4\nsolver=leakage  # inline\n\ntrials=12\nseed=99\n");
    RunConfig cfg;
    read_config(in, cfg);
    EXPECT_EQ(cfg.users, 4);
    EXPECT_EQ(cfg.solver, "leakage");
    EXPECT_EQ(cfg.trials, 12);
    EXPECT_EQ(cfg.seed, 99u);
    cfg.set("trials", "3");
    EXPECT_EQ(cfg.trials, 3);
}

TEST(RunConfig, RejectsUnknownAndOutOfRange)
{
    RunConfig cfg;
    EXPECT_THROW(cfg.set("colour", "red"), ConfigError);
    EXPECT_THROW(cfg.set("users", "2"), ConfigError);
    EXPECT_THROW(cfg.set("users", "3.5"), ConfigError);
    EXPECT_THROW(cfg.set("trials", "0"), ConfigError);
    EXPECT_THROW(cfg.set("snr_step_db", "0"), ConfigError);
    EXPECT_THROW(cfg.set("solver", "magic"), ConfigError);
    EXPECT_THROW(cfg.set("loading", "waterfill"), ConfigError);
    EXPECT_THROW(cfg.set("channel", "rayleigh"), ConfigError);
    EXPECT_THROW(cfg.set("seed", "-1"), ConfigError);
    EXPECT_NO_THROW(cfg.set("channel", "deterministic:/tmp/x.txt"));
    std::istringstream bad("users\n");
    EXPECT_THROW(read_config(bad, cfg), ConfigError);
}

TEST(RunConfig, DescribeListsEveryKeyButOutput)
{
    RunConfig cfg;
    cfg.out_path = "somewhere.csv";
    const auto line = cfg.describe();
    for (const auto& key : RunConfig::keys()) {
        if (key == "out_path") EXPECT_EQ(line.find(key + "="), std::string::npos);
        else EXPECT_NE(line.find(key + "="), std::string::npos) << key;
    }
}

TEST(FormatNumber, TwelveSignificantDigits)
{
    EXPECT_EQ(format_number(1.0 / 3.0), "0.333333333333");
    EXPECT_EQ(format_number(60.0), "60");
    EXPECT_EQ(format_number(-0.0), "0");
    EXPECT_EQ(format_number(1.5e-7), "1.5e-07");
}

TEST(RateCsv, LayoutAndSorting)
{
    RunConfig cfg;
    cfg.snr_start_db = 0;
    cfg.snr_stop_db = 10;
    cfg.trials = 4;
    const auto text = rate_csv(rate_sweep(link_config(cfg)), cfg.describe());
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line.rfind("# config: ", 0), 0u);
    std::getline(in, line);
    EXPECT_EQ(line, "snr_db,scheme,mean_sum_rate_bpcu,stderr,trials");
    std::vector<std::string> schemes;
    while (std::getline(in, line)) schemes.push_back(line.substr(line.find(',') + 1, line.find(',', line.find(',') + 1) - line.find(',') - 1));
    EXPECT_EQ(schemes, (std::vector<std::string>{"bound", "bound", "bound", "ia", "ia", "ia", "tdma", "tdma", "tdma"}));
    ASSERT_FALSE(text.empty());
    EXPECT_EQ(text.back(), '\n');
    EXPECT_NE(text[text.size() - 2], '\n');
}

TEST(Certify, TableForSmallDenominators)
{
    RunConfig cfg;
    cfg.phase_denominator = 6;
    std::ostringstream out, err;
    EXPECT_EQ(cmd_certify(cfg, false, out, err), kSuccess);
    const auto text = out.str();
    EXPECT_NE(text.find("pi/5,1.618033988750,x^5 - 5x^3 + 5x + 2,x^2 - x - 1,irrational"), std::string::npos);
    // reduced a/b in [0, 2b) for b = 1..6: 2 + 2 + 4 + 4 + 8 + 4 rows
    EXPECT_EQ(count_lines(text), 1 + 24);
    // the Niven rational set is exactly b in {1, 2, 3}: 2 + 2 + 4 angles
    int rational = 0;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);)
        if (line.find(",rational ") != std::string::npos) {
            ++rational;
            const auto q = line.substr(0, line.find(','));
            const bool niven_denominator = q.find('/') == std::string::npos || q.ends_with("/2") || q.ends_with("/3");
            EXPECT_TRUE(niven_denominator) << line;
        }
    EXPECT_EQ(rational, 8);
}

TEST(Certify, EmptyRangeGivesHeaderOnly)
{
    RunConfig cfg;
    cfg.phase_denominator = 0;
    std::ostringstream out, err;
    EXPECT_EQ(cmd_certify(cfg, false, out, err), kSuccess);
    EXPECT_EQ(count_lines(out.str()), 1);
}

TEST(Certify, CoherentPlanFails)
{
    RunConfig cfg;
    cfg.phase_denominator = 4;
    std::ostringstream out, err;
    EXPECT_EQ(cmd_certify(cfg, true, out, err), kCheckFailed);
    EXPECT_NE(err.str().find("failed certification"), std::string::npos);
}

TEST(DemoDiagonality, Verdicts)
{
    RunConfig cfg;
    std::ostringstream out;
    cmd_demo_diagonality(cfg, false, out);
    const auto text = out.str();
    const auto naive = text.find("== naive");
    const auto sup = text.find("== superposition");
    const auto nc = text.find("== noncoherent");
    ASSERT_TRUE(naive != std::string::npos && sup != std::string::npos && nc != std::string::npos);
    EXPECT_NE(text.substr(naive, sup - naive).find("V[1] = (1, 0)  has a zero entry: YES"), std::string::npos);
    EXPECT_EQ(text.substr(nc).find("YES"), std::string::npos);
    EXPECT_NE(text.substr(nc).find("V[1]"), std::string::npos);

    std::ostringstream coherent;
    cmd_demo_diagonality(cfg, true, coherent);
    EXPECT_NE(coherent.str().find("warning: degenerate"), std::string::npos);
}

TEST(DemoDiagonality, NoncoherentNeverHasZeroEntries)
{
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        RunConfig cfg;
        cfg.seed = seed;
        std::ostringstream out;
        cmd_demo_diagonality(cfg, false, out);
        const auto text = out.str();
        EXPECT_EQ(text.substr(text.find("== noncoherent")).find("YES"), std::string::npos) << seed;
    }
}

TEST(Process, RateRowCountAndDeterminism)
{
    const auto a = scratch("rate_a.csv"), b = scratch("rate_b.csv");
    const std::string args = "rate --users 3 --solver closed3 --snr-start-db 0 --snr-stop-db 60 --snr-step-db 5 --trials 200 --seed 7";
    ASSERT_EQ(run(args + " --out " + a.string()), 0);
    ASSERT_EQ(run(args + " --workers 3 --out " + b.string()), 0);
    const auto text = slurp(a);
    EXPECT_EQ(count_lines(text), 1 + 3 * 13);
    EXPECT_EQ(text, slurp(b));
    EXPECT_NE(text.find("seed=7"), std::string::npos);
}

TEST(Process, BerRowCountAndDeterminism)
{
    const auto a = scratch("ber_a.csv"), b = scratch("ber_b.csv");
    const std::string args = "ber --snr-start-db 0 --snr-stop-db 20 --snr-step-db 10 --trials 32 --seed 4";
    ASSERT_EQ(run(args + " --out " + a.string()), 0);
    ASSERT_EQ(run(args + " --workers 2 --out " + b.string()), 0);
    EXPECT_EQ(count_lines(slurp(a)), 1 + 3 * 3);
    EXPECT_EQ(slurp(a), slurp(b));
}

TEST(Process, UsageErrors)
{
    EXPECT_EQ(run("rate --users 4 --solver closed3 --out " + scratch("x.csv").string()), 2);
    EXPECT_EQ(run("ber --users 4 --solver closed3 --out " + scratch("x.csv").string()), 2);
    EXPECT_EQ(run("rate --trials 2 --out /nonexistent/dir/rate.csv"), 2);
    EXPECT_EQ(run("rate --bogus 1"), 2);
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("rate --config /nonexistent/run.cfg"), 2);
    EXPECT_EQ(run("--help"), 0);
}

TEST(Process, ConfigFileWithFlagOverride)
{
    const auto cfg_path = scratch("run.cfg");
    std::ofstream(cfg_path) << "users=3\nsolver=closed3\nsnr_start_db=10\nsnr_stop_db=20\nsnr_step_db=5\ntrials=5\nseed=3\n";
    const auto out = scratch("cfg_rate.csv");
    ASSERT_EQ(run("rate --config " + cfg_path.string() + " --trials 6 --out " + out.string()), 0);
    const auto text = slurp(out);
    EXPECT_NE(text.find("trials=6"), std::string::npos);
    EXPECT_EQ(count_lines(text), 1 + 3 * 3);
}

TEST(Process, CertifyExitCodes)
{
    EXPECT_EQ(run("certify --phase-denominator 24"), 0);
    EXPECT_EQ(run("certify --coherent --phase-denominator 8"), 1);
}
