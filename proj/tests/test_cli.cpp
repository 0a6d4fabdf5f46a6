#include <aimc/cli.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args)
{
    args.insert(args.begin(), "aimc");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = aimc::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name)
{
    const auto p = fs::temp_directory_path() / ("aimc_cli_" + name);
    fs::remove_all(p);
    return p;
}

} // namespace

TEST(Cli, MvmErrorDefaults)
{
    const auto dir = scratch("mvm");
    const Result r = run({"mvm-error", "--out", dir.string(), "--repeats", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto pos = r.out.find("epsilon_m=");
    ASSERT_NE(pos, std::string::npos);
    EXPECT_NEAR(std::stod(r.out.substr(pos + 10)), 0.15, 0.015);
    const std::string csv = slurp(dir / "mvm-error.csv");
    EXPECT_EQ(csv.rfind("# aimc=mvm-error config_hash=", 0), 0u);
    EXPECT_NE(csv.find("\nrealization,epsilon\n"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "mvm-error_summary.txt"));
    fs::remove_all(dir);
}

TEST(Cli, DisableAllIsExact)
{
    const auto dir = scratch("ideal");
    const Result r = run({"mvm-error", "--disable-all", "--out", dir.string(), "--repeats", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto pos = r.out.find("epsilon_m=");
    EXPECT_LT(std::stod(r.out.substr(pos + 10)), 1e-6);
    fs::remove_all(dir);
}

TEST(Cli, UnknownConfigKeyExitsTwoNamingKey)
{
    const auto dir = scratch("badcfg");
    fs::create_directories(dir);
    std::ofstream(dir / "bad.ini") << "[forward]\nout_nosie = 0.1\n";
    const Result r = run({"mvm-error", "--config", (dir / "bad.ini").string(), "--out", dir.string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("forward.out_nosie"), std::string::npos);
    EXPECT_EQ(run({"mvm-error", "--set", "mapping.max_input_size=0", "--out", dir.string()}).code, 2);
    EXPECT_EQ(run({"no-such-command"}).code, 2);
    EXPECT_EQ(run({"sensitivity", "--param", "gravity", "--out", dir.string()}).code, 2);
    EXPECT_EQ(run({"--help"}).code, 0);
    fs::remove_all(dir);
}

TEST(Cli, RuntimeFailureExitsThree)
{
    const auto dir = scratch("fail");
    EXPECT_EQ(run({"evaluate", "--checkpoint", (dir / "missing").string(), "--out", dir.string()}).code, 3);
    fs::remove_all(dir);
}

TEST(Cli, RepeatedRunsAreByteIdentical)
{
    const auto a = scratch("det_a");
    const auto b = scratch("det_b");
    const std::vector<std::string> common{"--seed", "17", "--set", "protocol.rows=128", "--set", "protocol.cols=128"};
    auto args = [&](const fs::path& out, int threads) {
        std::vector<std::string> v{"kurtosis", "--betas", "1,2", "--repeats", "3", "--out", out.string(), "--threads",
                                   std::to_string(threads)};
        v.insert(v.end(), common.begin(), common.end());
        return v;
    };
    ASSERT_EQ(run(args(a, 1)).code, 0);
    ASSERT_EQ(run(args(b, 2)).code, 0);
    EXPECT_EQ(slurp(a / "kurtosis.csv"), slurp(b / "kurtosis.csv"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Cli, DirectMapCheckpointEvaluates)
{
    const auto dir = scratch("ckpt");
    const std::vector<std::string> small{"--set", "hwa.fp_epochs=5", "--set", "hwa.eval_times=1,3600",
                                         "--repeats", "2", "--out", dir.string()};
    std::vector<std::string> a{"direct-map", "--checkpoint", (dir / "net").string()};
    a.insert(a.end(), small.begin(), small.end());
    ASSERT_EQ(run(a).code, 0);
    std::vector<std::string> b{"evaluate", "--checkpoint", (dir / "net").string()};
    b.insert(b.end(), small.begin(), small.end());
    const Result r = run(b);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(slurp(dir / "evaluate.csv").find("t_eval,test_error,sem"), std::string::npos);
    fs::remove_all(dir);
}
