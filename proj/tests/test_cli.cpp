#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

// End-to-end checks that drive the installed binary the way a user would.

namespace {

namespace fs = std::filesystem;

fs::path work_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "penlab_cli_tests" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run_cli(const std::string& args_line) {
    const std::string cmd = std::string(CLI_BIN_PATH) + " " + args_line + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream f(p);
    REQUIRE(f.good());
    f << text;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::size_t columns_of(const std::string& line) {
    std::size_t n = 1;
    for (char c : line) n += c == ',' ? 1 : 0;
    return n;
}

const char* kSmallPut = R"json({
  "schema_version": 1,
  "model": {"sigma": 0.4, "r": 0.05, "q": 0.0},
  "payoff": {"type": "put", "strike": 100.0},
  "grid": {"n": 99, "m": 20, "maturity": 1.0},
  "solver": {"mode": "penalty", "epsilon": 1e-3}
})json";

}  // namespace

TEST_CASE("price writes the advertised outputs") {
    const fs::path dir = work_dir("price");
    write_file(dir / "cfg.json", kSmallPut);
    const int rc = run_cli("price --config " + (dir / "cfg.json").string() + " --out " +
                           (dir / "out").string() + " --quiet");
    CHECK(rc == 0);
    for (const char* f : {"surface.csv", "delta_surface.csv", "boundary.csv", "metadata.json"})
        CHECK(fs::exists(dir / "out" / f));

    // Wide layout: spot column plus one column per time level.
    std::ifstream surf(dir / "out" / "surface.csv");
    std::string comment, header;
    std::getline(surf, comment);
    std::getline(surf, header);
    CHECK(comment.rfind("# config=", 0) == 0);
    CHECK(columns_of(header) == 22u);  // m=20 levels plus t=0 plus S

    int rows = 0;
    std::string line;
    while (std::getline(surf, line)) ++rows;
    CHECK(rows == 101);  // N=99 interior nodes plus both ends

    const auto meta = nlohmann::json::parse(slurp(dir / "out" / "metadata.json"));
    CHECK(meta.at("command") == "price");
    CHECK(meta.at("config").at("solver").at("epsilon") == 1e-3);
    CHECK(meta.at("solve").at("max_residual").get<double>() < 1e-6);
}

TEST_CASE("a run can be replayed from its own embedded config") {
    const fs::path dir = work_dir("replay");
    write_file(dir / "cfg.json", kSmallPut);
    REQUIRE(run_cli("price --config " + (dir / "cfg.json").string() + " --out " +
                    (dir / "a").string() + " --quiet") == 0);

    std::ifstream surf(dir / "a" / "surface.csv");
    std::string comment;
    std::getline(surf, comment);
    REQUIRE(comment.rfind("# config=", 0) == 0);
    write_file(dir / "replay.json", comment.substr(std::string("# config=").size()));

    REQUIRE(run_cli("price --config " + (dir / "replay.json").string() + " --out " +
                    (dir / "b").string() + " --quiet") == 0);
    CHECK(slurp(dir / "a" / "surface.csv") == slurp(dir / "b" / "surface.csv"));
    CHECK(slurp(dir / "a" / "delta_surface.csv") == slurp(dir / "b" / "delta_surface.csv"));
    CHECK(slurp(dir / "a" / "boundary.csv") == slurp(dir / "b" / "boundary.csv"));
}

TEST_CASE("config and usage errors exit with 1") {
    const fs::path dir = work_dir("errors");
    CHECK(run_cli("price --config /nonexistent.json --out " + (dir / "o1").string()) == 1);

    write_file(dir / "bad.json", "{this is not json");
    CHECK(run_cli("price --config " + (dir / "bad.json").string() + " --out " +
                  (dir / "o2").string()) == 1);

    std::string zero_eps(kSmallPut);
    zero_eps.replace(zero_eps.find("1e-3"), 4, "0.00");
    write_file(dir / "zeroeps.json", zero_eps);
    CHECK(run_cli("price --config " + (dir / "zeroeps.json").string() + " --out " +
                  (dir / "o3").string()) == 1);

    // Missing required --out.
    write_file(dir / "cfg.json", kSmallPut);
    CHECK(run_cli("price --config " + (dir / "cfg.json").string()) == 1);
    // No subcommand at all.
    CHECK(run_cli("--config x --out y") == 1);
    // Asymptotics is put-only.
    std::string butterfly(kSmallPut);
    butterfly.replace(butterfly.find("{\"type\": \"put\", \"strike\": 100.0}"),
                      std::string("{\"type\": \"put\", \"strike\": 100.0}").size(),
                      "{\"type\": \"butterfly\", \"peak_value\": 50.0, \"alpha\": 1.0, "
                      "\"centre\": 100.0}");
    write_file(dir / "bfly.json", butterfly);
    CHECK(run_cli("asymptotics --config " + (dir / "bfly.json").string() + " --out " +
                  (dir / "o4").string()) == 1);
}

TEST_CASE("numerical failures exit with 2") {
    const fs::path dir = work_dir("solverfail");
    // Two PSOR sweeps at a tolerance the iteration cannot reach.
    const char* cfg = R"json({
      "schema_version": 1,
      "model": {"sigma": 0.4, "r": 0.05, "q": 0.0},
      "payoff": {"type": "put", "strike": 100.0},
      "grid": {"n": 99, "m": 20, "maturity": 1.0},
      "solver": {"mode": "lcp", "psor": {"tol": 1e-14, "max_sweeps": 2}}
    })json";
    write_file(dir / "cfg.json", cfg);
    CHECK(run_cli("price --config " + (dir / "cfg.json").string() + " --out " +
                  (dir / "out").string()) == 2);
}

TEST_CASE("converge produces ladder tables and is parallel-deterministic") {
    const fs::path dir = work_dir("converge");
    const char* cfg = R"json({
      "schema_version": 1,
      "model": {"sigma": 0.4, "r": 0.05, "q": 0.0},
      "payoff": {"type": "put", "strike": 100.0},
      "grid": {"n": 99, "m": 20, "maturity": 1.0},
      "solver": {"mode": "penalty", "epsilon": 1e-3},
      "converge": {"epsilons": [4e-3, 2e-3, 1e-3, 5e-4]}
    })json";
    write_file(dir / "cfg.json", cfg);
    REQUIRE(run_cli("converge --config " + (dir / "cfg.json").string() + " --out " +
                    (dir / "serial").string() + " --quiet") == 0);
    for (const char* f : {"errors.csv", "orders.csv", "orders_global.csv", "metadata.json"})
        CHECK(fs::exists(dir / "serial" / f));

    std::ifstream errs(dir / "serial" / "errors.csv");
    std::string line;
    int lines = 0;
    while (std::getline(errs, line)) ++lines;
    CHECK(lines == 6);  // comment, header, one row per epsilon

    REQUIRE(run_cli("converge --config " + (dir / "cfg.json").string() + " --out " +
                    (dir / "par").string() + " --quiet --parallel") == 0);
    CHECK(slurp(dir / "serial" / "errors.csv") == slurp(dir / "par" / "errors.csv"));
    CHECK(slurp(dir / "serial" / "orders_global.csv") ==
          slurp(dir / "par" / "orders_global.csv"));
}

TEST_CASE("bounds reports a holding sandwich") {
    const fs::path dir = work_dir("bounds");
    write_file(dir / "cfg.json", kSmallPut);
    REQUIRE(run_cli("bounds --config " + (dir / "cfg.json").string() + " --out " +
                    (dir / "out").string() + " --quiet") == 0);
    CHECK(fs::exists(dir / "out" / "bounds.csv"));
    const auto meta = nlohmann::json::parse(slurp(dir / "out" / "metadata.json"));
    CHECK(meta.at("bounds").at("sandwich_ok") == true);
    CHECK(meta.at("bounds").at("lambda_eps").get<double>() > 0.0);
}

TEST_CASE("asymptotics command runs on a put") {
    const fs::path dir = work_dir("asym");
    const char* cfg = R"json({
      "schema_version": 1,
      "model": {"sigma": 0.4, "r": 0.05, "q": 0.0},
      "payoff": {"type": "put", "strike": 100.0},
      "grid": {"n": 199, "m": 50, "maturity": 1.0},
      "solver": {"mode": "penalty", "epsilon": 1e-3}
    })json";
    write_file(dir / "cfg.json", cfg);
    REQUIRE(run_cli("asymptotics --config " + (dir / "cfg.json").string() + " --out " +
                    (dir / "out").string() + " --quiet") == 0);
    CHECK(fs::exists(dir / "out" / "asymptotics.csv"));
    CHECK(fs::exists(dir / "out" / "error_profile.csv"));
    const auto meta = nlohmann::json::parse(slurp(dir / "out" / "metadata.json"));
    CHECK(meta.at("boundary").at("lcp_boundary").get<double>() > 0.0);
}

TEST_CASE("extrapolate runs a nested ladder") {
    const fs::path dir = work_dir("extrap");
    const char* cfg = R"json({
      "schema_version": 1,
      "model": {"sigma": 0.4, "r": 0.05, "q": 0.0},
      "payoff": {"type": "put", "strike": 100.0},
      "grid": {"n": 99, "m": 8, "maturity": 1.0},
      "solver": {"mode": "penalty", "epsilon": 1e-3},
      "extrapolate": {"epsilons": [4e-3, 1e-3, 2.5e-4], "n": [99, 199, 399],
                      "m": [8, 16, 32]}
    })json";
    write_file(dir / "cfg.json", cfg);
    REQUIRE(run_cli("extrapolate --config " + (dir / "cfg.json").string() + " --out " +
                    (dir / "out").string() + " --quiet") == 0);
    CHECK(fs::exists(dir / "out" / "extrapolate_errors.csv"));
    CHECK(fs::exists(dir / "out" / "extrapolate_orders.csv"));
    const auto meta = nlohmann::json::parse(slurp(dir / "out" / "metadata.json"));
    CHECK(meta.at("rungs").size() == 3);
}

TEST_CASE("jump runs record the quadrature truncation in metadata") {
    const fs::path dir = work_dir("jump");
    const char* cfg = R"json({
      "schema_version": 1,
      "model": {"sigma": 0.4, "r": 0.05, "q": 0.0, "lambda": 0.5,
                "jump": {"kind": "lognormal", "mu_J": -0.02, "sigma_J": 0.2}},
      "payoff": {"type": "put", "strike": 100.0},
      "grid": {"n": 59, "m": 10, "maturity": 0.5},
      "solver": {"mode": "penalty", "epsilon": 1e-3}
    })json";
    write_file(dir / "cfg.json", cfg);
    REQUIRE(run_cli("price --config " + (dir / "cfg.json").string() + " --out " +
                    (dir / "out").string() + " --quiet") == 0);
    const auto meta = nlohmann::json::parse(slurp(dir / "out" / "metadata.json"));
    CHECK(std::abs(meta.at("model").at("omega").get<double>()) < 1e-12);
    CHECK(meta.at("model").contains("jump_truncation"));
    CHECK(meta.at("model").at("jump_truncation").at("quad_nodes").get<int>() > 100);
}
