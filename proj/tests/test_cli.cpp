#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* p = std::getenv("PROXMSM_BIN");
    REQUIRE_MESSAGE(p != nullptr, "PROXMSM_BIN must point at the CLI binary");
    return p;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("proxmsm_cli_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

int run(const std::string& args, const fs::path& log) {
    const std::string cmd = cli_path() + " " + args + " >" + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("simulate is byte-identical across runs with the same seed") {
    TempDir tmp;
    const fs::path log = tmp.path / "log";
    CHECK(run("simulate --n 500 --seed 7 --out " + (tmp.path / "a.csv").string() +
                  " --rolemap-out " + (tmp.path / "roles.json").string(),
              log) == 0);
    CHECK(run("simulate --n 500 --seed 7 --out " + (tmp.path / "b.csv").string(), log) == 0);
    CHECK(run("simulate --n 500 --seed 8 --out " + (tmp.path / "c.csv").string(), log) == 0);
    CHECK(slurp(tmp.path / "a.csv") == slurp(tmp.path / "b.csv"));
    CHECK(slurp(tmp.path / "a.csv") != slurp(tmp.path / "c.csv"));
}

TEST_CASE("simulate piped into fit recovers the treatment effect") {
    TempDir tmp;
    const fs::path log = tmp.path / "log";
    REQUIRE(run("simulate --n 4000 --seed 7 --out " + (tmp.path / "d.csv").string() +
                    " --rolemap-out " + (tmp.path / "r.json").string(),
                log) == 0);
    const fs::path report = tmp.path / "report.json";
    CHECK(run("fit --data " + (tmp.path / "d.csv").string() + " --roles " +
                  (tmp.path / "r.json").string() + " --estimator pdr --msmm cumulative --out " +
                  report.string(),
              log) == 0);
    const auto j = nlohmann::json::parse(slurp(report));
    const double beta1 = j.at("beta_hat").at(1).get<double>();
    CHECK(beta1 > 0.9);
    CHECK(beta1 < 1.1);
    CHECK(j.at("estimator") == "PDR");
}

TEST_CASE("missing role map exits 1 and names the path") {
    TempDir tmp;
    const fs::path log = tmp.path / "log";
    REQUIRE(run("simulate --n 50 --seed 1 --out " + (tmp.path / "d.csv").string(), log) == 0);
    CHECK(run("fit --data " + (tmp.path / "d.csv").string() + " --roles " +
                  (tmp.path / "missing.json").string(),
              log) == 1);
    CHECK(slurp(log).find("missing.json") != std::string::npos);
}

TEST_CASE("saturated spec on full-support data exits 1 with the support error") {
    TempDir tmp;
    const fs::path log = tmp.path / "log";
    REQUIRE(run("simulate --n 2000 --seed 3 --out " + (tmp.path / "d.csv").string() +
                    " --rolemap-out " + (tmp.path / "r.json").string(),
                log) == 0);
    CHECK(run("fit --data " + (tmp.path / "d.csv").string() + " --roles " +
                  (tmp.path / "r.json").string() + " --estimator por --msmm saturated",
              log) == 1);
    CHECK(slurp(log).find("regime outside support") != std::string::npos);
}

TEST_CASE("mc writes a table and is deterministic serial vs parallel") {
    TempDir tmp;
    const fs::path log = tmp.path / "log";
    const std::string base = "mc --n 300 --B 4 --seed 11 --estimators POR,PDR --format md ";
    CHECK(run(base + "--threads 1 --out " + (tmp.path / "t1.md").string(), log) == 0);
    CHECK(run(base + "--threads 4 --out " + (tmp.path / "t2.md").string(), log) == 0);
    const std::string t1 = slurp(tmp.path / "t1.md");
    CHECK(t1 == slurp(tmp.path / "t2.md"));
    CHECK(t1.find("| POR |") != std::string::npos);
}

TEST_CASE("oracle subcommand verifies a random world") {
    TempDir tmp;
    const fs::path log = tmp.path / "log";
    CHECK(run("oracle --seed 5 --emit-world " + (tmp.path / "w.json").string(), log) == 0);
    const std::string out = slurp(log);
    CHECK(out.find("complete: yes") != std::string::npos);
    CHECK(out.find("max discrepancy") != std::string::npos);

    CHECK(run("oracle --world " + (tmp.path / "w.json").string(), log) == 0);
    CHECK(slurp(log).find("complete: yes") != std::string::npos);
}

TEST_CASE("unknown options are rejected") {
    TempDir tmp;
    CHECK(run("simulate --frobnicate 1", tmp.path / "log") != 0);
}
