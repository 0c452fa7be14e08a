#include "ncfem/ncfem.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

using namespace ncfem;
namespace fs = std::filesystem;

namespace {

struct RunOutput
{
    int code = -1;
    std::string text;
};

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("ncfem_cli_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

RunOutput run_cli(const std::string& args, const fs::path& dir)
{
    const auto log = dir / "out.txt";
    const std::string cmd = std::string(NCFEM_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    RunOutput out;
    out.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    out.text = ss.str();
    return out;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<ConvergenceRecord> sample_records(int n)
{
    std::vector<ConvergenceRecord> r;
    for (int k = 0; k < n; ++k) {
        ConvergenceRecord c;
        c.level = k + 1;
        c.n_free = 49 * (1 << (2 * k));
        c.h_max = std::sqrt(2.0) / (4 << k);
        c.error_pw = 0.05 / (1 << k) * (1.0 + 0.01 * k);
        c.eta_total = 0.3 / (1 << k);
        c.newton_iters = 2;
        r.push_back(c);
    }
    fill_rates(r);
    return r;
}

} // namespace

TEST(Config, ParseAndValidate)
{
    RunConfig cfg;
    std::istringstream in("# study setup\ncommand = afem\nproblem=vk_manufactured\nlevels = 3\ntheta=0.25  # bulk\n"
                          "tol=1e-8\nmax_free_dofs=500\nout=/tmp/x\nseed=9\ndomain=l_shape\n\n");
    read_config(in, cfg);
    EXPECT_EQ(cfg.command, Command::Afem);
    EXPECT_EQ(cfg.problem, "vk_manufactured");
    EXPECT_EQ(cfg.levels, 3);
    EXPECT_EQ(cfg.theta, 0.25);
    EXPECT_EQ(cfg.tol, 1e-8);
    EXPECT_EQ(cfg.max_free_dofs, 500);
    EXPECT_EQ(cfg.output_dir, "/tmp/x");
    EXPECT_EQ(cfg.seed, 9u);
    EXPECT_EQ(cfg.domain, "l_shape");
    EXPECT_NO_THROW(cfg.validate());

    for (const char* bad : {"levels=0", "theta=1.5", "theta=0", "tol=-1"}) {
        RunConfig c;
        std::istringstream s(bad);
        read_config(s, c);
        EXPECT_THROW(c.validate(), UsageError) << bad;
    }
    for (const char* bad : {"levels=abc", "nonsense=1", "no equals sign", "command=run"}) {
        RunConfig c;
        std::istringstream s(bad);
        EXPECT_THROW(read_config(s, c), UsageError) << bad;
    }
}

TEST(Config, LoadDomain)
{
    EXPECT_EQ(load_domain("unit_square").num_triangles(), 2);
    EXPECT_EQ(load_domain("l_shape").num_triangles(), 6);
    EXPECT_THROW(load_domain("/nonexistent/mesh.txt"), UsageError);
    const auto dir = scratch("domain");
    {
        std::ofstream m(dir / "tri.mesh");
        m << "3 1\n0 0\n1 0\n0 1\n0 1 2\n";
    }
    EXPECT_EQ(load_domain((dir / "tri.mesh").string()).num_triangles(), 1);
}

TEST(Csv, RoundTrip)
{
    const auto records = sample_records(4);
    std::stringstream ss;
    write_csv(ss, records);
    EXPECT_EQ(ss.str().substr(0, std::string(kCsvHeader).size()), kCsvHeader);
    EXPECT_EQ(ss.str().back(), '\n');
    const auto back = read_csv(ss);
    ASSERT_EQ(back.size(), records.size());
    auto same = [](double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; };
    for (std::size_t k = 0; k < records.size(); ++k) {
        EXPECT_EQ(back[k].level, records[k].level);
        EXPECT_EQ(back[k].n_free, records[k].n_free);
        EXPECT_EQ(back[k].newton_iters, records[k].newton_iters);
        EXPECT_TRUE(same(back[k].h_max, records[k].h_max));
        EXPECT_TRUE(same(back[k].error_pw, records[k].error_pw));
        EXPECT_TRUE(same(back[k].eta_total, records[k].eta_total));
        EXPECT_TRUE(same(back[k].rate_error, records[k].rate_error));
        EXPECT_TRUE(same(back[k].rate_eta, records[k].rate_eta));
    }
}

TEST(Svg, DeterministicAndWarnsWhenEmpty)
{
    const auto dir = scratch("svg");
    const auto records = sample_records(4);
    const auto a = emit_plots(records, dir, "a.svg");
    const auto b = emit_plots(records, dir, "b.svg");
    ASSERT_TRUE(a && b);
    const std::string sa = slurp(*a);
    EXPECT_EQ(sa, slurp(*b));
    EXPECT_NE(sa.find("<svg"), std::string::npos);
    EXPECT_NE(sa.find("version=\"1.1\""), std::string::npos);
    EXPECT_EQ(std::count(sa.begin(), sa.end(), '\n') > 5, true);
    EXPECT_NE(sa.find("error_pw"), std::string::npos);
    EXPECT_NE(sa.find("eta_total"), std::string::npos);
    EXPECT_FALSE(emit_plots({}, dir, "c.svg").has_value());
    EXPECT_FALSE(fs::exists(dir / "c.svg"));
}

TEST(Cli, UnknownProblemIsUsageError)
{
    const auto dir = scratch("unknown");
    const auto r = run_cli("study --problem nope --out " + dir.string(), dir);
    EXPECT_EQ(r.code, 2);
    for (const auto& n : registry_names()) EXPECT_NE(r.text.find(n), std::string::npos) << r.text;
}

TEST(Cli, UsageErrors)
{
    const auto dir = scratch("usage");
    EXPECT_EQ(run_cli("frobnicate", dir).code, 2);
    EXPECT_EQ(run_cli("study --levels 0", dir).code, 2);
    EXPECT_EQ(run_cli("study --theta 2", dir).code, 2);
    EXPECT_EQ(run_cli("study --config /nonexistent.cfg", dir).code, 2);
    EXPECT_EQ(run_cli("study --domain nowhere", dir).code, 2);
    EXPECT_EQ(run_cli("", dir).code, 2);
}

TEST(Cli, StudyWritesCsvAndPlot)
{
    const auto dir = scratch("study");
    const auto r = run_cli("study --problem cr_manufactured --levels 3 --out " + dir.string(), dir);
    ASSERT_EQ(r.code, 0) << r.text;
    std::ifstream csv(dir / "study.csv");
    const auto records = read_csv(csv);
    ASSERT_EQ(records.size(), 3u);
    EXPECT_TRUE(fs::exists(dir / "study.svg"));
    EXPECT_TRUE(std::isnan(records.front().rate_error));
    for (std::size_t k = 1; k < records.size(); ++k) EXPECT_TRUE(std::isfinite(records[k].rate_error));
}

TEST(Cli, SingleLevelStudyHasEmptyRates)
{
    const auto dir = scratch("single");
    {
        std::ofstream cfg(dir / "run.cfg");
        cfg << "problem = ns_manufactured\nlevels = 1\ninitial_refinements = 1\nout = " << dir.string() << "\n";
    }
    const auto r = run_cli("study --config " + (dir / "run.cfg").string(), dir);
    ASSERT_EQ(r.code, 0) << r.text;
    const std::string text = slurp(dir / "study.csv");
    std::istringstream in(text);
    const auto rows = read_csv(in);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(text.substr(text.size() - 3), ",,\n");
}

TEST(Cli, FlagsOverrideConfig)
{
    const auto dir = scratch("override");
    {
        std::ofstream cfg(dir / "run.cfg");
        cfg << "problem = nope\nlevels = 1\ninitial_refinements = 1\n";
    }
    const auto r = run_cli("study --config " + (dir / "run.cfg").string() + " --problem cr_manufactured --levels 2 --out " +
                               dir.string(),
                           dir);
    ASSERT_EQ(r.code, 0) << r.text;
    std::ifstream csv(dir / "study.csv");
    EXPECT_EQ(read_csv(csv).size(), 2u);
}

TEST(Cli, VerifyPassesAndPerturbationFails)
{
    const auto dir = scratch("verify");
    for (const char* domain : {"unit_square", "l_shape"}) {
        const auto ok = run_cli(std::string("verify --initial-refinements 1 --domain ") + domain, dir);
        EXPECT_EQ(ok.code, 0) << ok.text;
        EXPECT_EQ(ok.text.find("FAIL"), std::string::npos);
        EXPECT_NE(ok.text.find("jacobian_fd"), std::string::npos);
    }
    const auto bad = run_cli("verify --initial-refinements 1 --perturb-jacobian", dir);
    EXPECT_EQ(bad.code, 1);
    EXPECT_NE(bad.text.find("FAIL"), std::string::npos);
}

TEST(Cli, NewtonDivergenceGivesPartialCsv)
{
    // a tolerance below roundoff is never reached
    const auto dir = scratch("diverge");
    const auto r = run_cli("study --problem ns_manufactured --levels 2 --tol 1e-300 --out " + dir.string(), dir);
    EXPECT_EQ(r.code, 1) << r.text;
    EXPECT_TRUE(fs::exists(dir / "study.csv"));
    std::ifstream csv(dir / "study.csv");
    EXPECT_LT(read_csv(csv).size(), 2u);
}

TEST(Cli, SolveAfemInfsup)
{
    const auto dir = scratch("commands");
    auto r = run_cli("solve --problem ns_manufactured --initial-refinements 2 --out " + dir.string(), dir);
    EXPECT_EQ(r.code, 0) << r.text;
    EXPECT_NE(r.text.find("kantorovich"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "solve.csv"));

    r = run_cli("afem --problem ns_unit_load --max-free-dofs 300 --initial-refinements 0 --out " + dir.string(), dir);
    EXPECT_EQ(r.code, 0) << r.text;
    std::ifstream afem(dir / "afem.csv");
    const auto rows = read_csv(afem);
    ASSERT_GE(rows.size(), 2u);
    EXPECT_GT(rows.back().n_free, 300);
    EXPECT_TRUE(fs::exists(dir / "afem.svg"));

    r = run_cli("infsup --problem cr_manufactured --levels 2 --initial-refinements 1 --out " + dir.string(), dir);
    EXPECT_EQ(r.code, 0) << r.text;
    const std::string inf = slurp(dir / "infsup.csv");
    EXPECT_EQ(inf.substr(0, 23), "level,n_free,h_max,beta");
    EXPECT_EQ(std::count(inf.begin(), inf.end(), '\n'), 3);
}
