#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mmv/cli.hpp"
#include "mmv/config.hpp"

using namespace mmv;
namespace fs = std::filesystem;

namespace {

fs::path make_temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("mmv_cli_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

int run_cli(const std::string& args, const fs::path& log_path) {
    const char* bin = std::getenv("MMV_CLI_BIN");
    REQUIRE(bin != nullptr);
    const std::string cmd = std::string(bin) + " " + args + " > " + log_path.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string bs_config_json(const std::string& out_dir, double mu = 0.10,
                           int n_z = 101, int n_t = 101, int n_paths = 4000) {
    std::ostringstream json;
    json << R"({
  "model": {"family": "constant", "r": 0.02, "rho": 0.0, "horizon_T": 1.0,
            "mu": )" << mu << R"(, "sigma": 0.20, "a": 0.0, "b": 0.30},
  "grid": {"z_lo": -6.0, "z_hi": 6.0, "n_z": )" << n_z << R"(, "n_t": )" << n_t << R"(},
  "mc": {"n_paths": )" << n_paths << R"(, "n_steps": 64, "seed": 12345},
  "anchor": {"x0": 1.0, "y0": 0.5, "z0": 0.0, "t0": 0.0},
  "output_dir": ")" << out_dir << R"("
})";
    return json.str();
}

std::string ou_config_json(const std::string& out_dir, int n_paths = 4000) {
    std::ostringstream json;
    json << R"({
  "model": {"family": "ou_tanh", "r": 0.02, "rho": 0.5, "horizon_T": 1.0,
            "kappa": 1.0, "m": 0.0, "beta": 0.5, "sigma0": 0.2,
            "lambda0": 0.3, "lambda1": 0.1},
  "grid": {"z_lo": -6.0, "z_hi": 6.0, "n_z": 101, "n_t": 101},
  "mc": {"n_paths": )" << n_paths << R"(, "n_steps": 64, "seed": 12345},
  "anchor": {"x0": 1.0, "y0": 0.5, "z0": 0.0, "t0": 0.0},
  "output_dir": ")" << out_dir << R"("
})";
    return json.str();
}

}  // namespace

TEST_CASE("config parsing reports the offending field") {
    CHECK_THROWS_AS(RunConfig::from_json_text("{}"), ConfigError);
    try {
        RunConfig::from_json_text(R"({"model": {"family": "constant", "r": 0.02,
            "rho": 0.0, "sigma": 0.2, "b": 0.3, "horizon_T": 1.0}})");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.field == "model.mu");
    }
    try {
        RunConfig::from_json_text(bs_config_json("x") + "garbage");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.field == "(document)");
    }
    try {
        std::string text = bs_config_json("x");
        text.replace(text.find("\"rho\": 0.0"), 10, "\"rho\": 2.0");
        RunConfig::from_json_text(text);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.field == "model.rho");
    }
}

TEST_CASE("a config without a grid section gets the suggested domain") {
    const RunConfig cfg = RunConfig::from_json_text(R"({
      "model": {"family": "ou_tanh", "r": 0.02, "rho": 0.5, "horizon_T": 1.0,
                "kappa": 2.0, "m": 0.3, "beta": 0.5, "sigma0": 0.2,
                "lambda0": 0.3, "lambda1": 0.1}
    })");
    const double sd = 0.5 / std::sqrt(4.0);
    CHECK(cfg.grid.z_lo == doctest::Approx(0.3 - 6.0 * sd).epsilon(1e-12));
    CHECK(cfg.grid.z_hi == doctest::Approx(0.3 + 6.0 * sd).epsilon(1e-12));
    CHECK(cfg.grid.n_z == 401);
}

TEST_CASE("config round-trips the documented fields") {
    const RunConfig cfg = RunConfig::from_json_text(R"({
      "model": {"family": "ou_tanh", "r": 0.02, "rho": 0.5, "horizon_T": 2.0,
                "kappa": 1.0, "m": 0.0, "beta": 0.5, "sigma0": 0.2,
                "lambda0": 0.3, "lambda1": 0.1},
      "grid": {"z_lo": -4.0, "z_hi": 4.0, "n_z": 81, "n_t": 41},
      "mc": {"n_paths": 1000, "n_steps": 32, "seed": 7, "antithetic": false},
      "anchor": {"x0": 2.0, "y0": 0.25, "z0": 0.1, "t0": 0.5},
      "theta": 0.75,
      "probes": [{"z": 0.0, "t": 0.0}, {"z": 1.0, "t": 1.0}],
      "output_dir": "somewhere",
      "tolerances": {"eps_residual": 0.002}
    })");
    CHECK(cfg.model.kind() == FamilyKind::OuTanh);
    CHECK(cfg.model.horizon() == 2.0);
    CHECK(cfg.grid.n_z == 81);
    CHECK(cfg.mc.seed == 7);
    CHECK_FALSE(cfg.mc.antithetic);
    CHECK(cfg.anchor.y0 == 0.25);
    CHECK(cfg.theta.value() == 0.75);
    CHECK(cfg.probes.size() == 2);
    CHECK(cfg.output_dir == "somewhere");
    CHECK(cfg.tolerances.eps_residual == 0.002);
}

TEST_CASE("solve subcommand writes the surface and is byte-reproducible") {
    const fs::path dir = make_temp_dir("solve");
    const fs::path config = dir / "config.json";
    write_file(config, bs_config_json((dir / "out").string()));

    CHECK(run_cli("solve --config " + config.string(), dir / "run1.log") == 0);
    const std::string first = read_file(dir / "out" / "solution.csv");
    CHECK(first.rfind("t,z,G,G_z,F,residual\n", 0) == 0);

    // column G at t = 0 is constant at -e^{0.16}
    {
        std::istringstream lines(first);
        std::string line;
        std::getline(lines, line);  // header
        REQUIRE(std::getline(lines, line));
        const auto second_comma = line.find(',', line.find(',') + 1);
        const auto third_comma = line.find(',', second_comma + 1);
        const double g = std::stod(line.substr(second_comma + 1, third_comma - second_comma - 1));
        CHECK(std::abs(g + std::exp(0.16)) <= 1e-4);
    }

    CHECK(run_cli("solve --config " + config.string(), dir / "run2.log") == 0);
    CHECK(read_file(dir / "out" / "solution.csv") == first);
}

TEST_CASE("flat-market solve emits G identically -1") {
    const fs::path dir = make_temp_dir("flat");
    const fs::path config = dir / "config.json";
    write_file(config, bs_config_json((dir / "out").string(), 0.02, 41, 21));
    CHECK(run_cli("solve --config " + config.string(), dir / "run.log") == 0);

    std::istringstream lines(read_file(dir / "out" / "solution.csv"));
    std::string line;
    std::getline(lines, line);
    int rows = 0;
    while (std::getline(lines, line)) {
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        const auto c3 = line.find(',', c2 + 1);
        const double g = std::stod(line.substr(c2 + 1, c3 - c2 - 1));
        CHECK(std::abs(g + 1.0) <= 1e-12);
        ++rows;
    }
    CHECK(rows == 41 * 21);
}

TEST_CASE("malformed config exits with code 2 and names the field") {
    const fs::path dir = make_temp_dir("badcfg");
    const fs::path config = dir / "config.json";
    write_file(config, R"({"model": {"family": "constant", "r": 0.02, "rho": 0.0,
        "sigma": 0.2, "b": 0.3, "horizon_T": 1.0}})");
    CHECK(run_cli("solve --config " + config.string(), dir / "run.log") == 2);
    CHECK(read_file(dir / "run.log").find("model.mu") != std::string::npos);

    CHECK(run_cli("solve --config " + (dir / "missing.json").string(), dir / "run2.log") == 2);
}

TEST_CASE("oracle subcommand checks probes against the sampler") {
    const fs::path dir = make_temp_dir("oracle");
    const fs::path config = dir / "config.json";
    write_file(config, bs_config_json((dir / "out").string(), 0.10, 101, 101, 2000));
    CHECK(run_cli("oracle --config " + config.string(), dir / "run.log") == 0);
    CHECK(fs::exists(dir / "out" / "oracle.csv"));
}

TEST_CASE("verify subcommand fails cleanly under an impossible tolerance") {
    const fs::path dir = make_temp_dir("verify");
    const fs::path config = dir / "config.json";
    std::string text = bs_config_json((dir / "out").string());
    text.insert(text.rfind('}'), R"(, "tolerances": {"eps_residual": 1e-9})");
    write_file(config, text);
    CHECK(run_cli("verify --config " + config.string(), dir / "run.log") == 1);
    CHECK(fs::exists(dir / "out" / "verify_summary.csv"));
}

TEST_CASE("verify subcommand certifies the constant-coefficient market") {
    const fs::path dir = make_temp_dir("verify_ok");
    const fs::path config = dir / "config.json";
    write_file(config, bs_config_json((dir / "out").string()));
    CHECK(run_cli("verify --config " + config.string(), dir / "run.log") == 0);
}

TEST_CASE("compare-mv reports the degenerate flat market") {
    const fs::path dir = make_temp_dir("mvflat");
    const fs::path config = dir / "config.json";
    write_file(config, bs_config_json((dir / "out").string(), 0.02, 41, 21, 500));
    CHECK(run_cli("compare-mv --config " + config.string(), dir / "run.log") == 1);
    CHECK(read_file(dir / "run.log").find("Degenerate") != std::string::npos);
}

TEST_CASE("compare-mv passes on the constant-coefficient market") {
    const fs::path dir = make_temp_dir("mvbs");
    const fs::path config = dir / "config.json";
    write_file(config, bs_config_json((dir / "out").string(), 0.10, 101, 101, 20000));
    CHECK(run_cli("compare-mv --config " + config.string(), dir / "run.log") == 0);
    CHECK(fs::exists(dir / "out" / "compare_mv.csv"));
    CHECK(fs::exists(dir / "out" / "compare_mv_summary.csv"));
}

TEST_CASE("--seed override changes the sampler stream") {
    const fs::path dir = make_temp_dir("seed");
    const fs::path config = dir / "config.json";
    write_file(config, ou_config_json((dir / "out").string(), 2000));
    CHECK(run_cli("oracle --config " + config.string() + " --seed 1", dir / "a.log") == 0);
    const std::string a = read_file(dir / "out" / "oracle.csv");
    CHECK(run_cli("oracle --config " + config.string() + " --seed 2", dir / "b.log") == 0);
    const std::string b = read_file(dir / "out" / "oracle.csv");
    CHECK(a != b);
    CHECK(run_cli("oracle --config " + config.string() + " --seed 1", dir / "c.log") == 0);
    CHECK(read_file(dir / "out" / "oracle.csv") == a);
}

TEST_CASE("MMV_OUTPUT_DIR environment override routes the outputs") {
    const fs::path dir = make_temp_dir("envout");
    const fs::path config = dir / "config.json";
    write_file(config, bs_config_json((dir / "ignored").string(), 0.10, 41, 21));
    const char* bin = std::getenv("MMV_CLI_BIN");
    REQUIRE(bin != nullptr);
    const std::string cmd = "MMV_OUTPUT_DIR=" + (dir / "env_out").string() + " " + bin +
                            " solve --config " + config.string() + " > " +
                            (dir / "run.log").string() + " 2>&1";
    CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    CHECK(fs::exists(dir / "env_out" / "solution.csv"));
    CHECK_FALSE(fs::exists(dir / "ignored" / "solution.csv"));

    // the --out flag wins over the environment
    const std::string cmd2 = "MMV_OUTPUT_DIR=" + (dir / "env_out2").string() + " " + bin +
                             " solve --config " + config.string() + " --out " +
                             (dir / "flag_out").string() + " > " + (dir / "run2.log").string() +
                             " 2>&1";
    CHECK(WEXITSTATUS(std::system(cmd2.c_str())) == 0);
    CHECK(fs::exists(dir / "flag_out" / "solution.csv"));
    CHECK_FALSE(fs::exists(dir / "env_out2"));
}

TEST_CASE("simulate subcommand runs the sampling checks end to end") {
    const fs::path dir = make_temp_dir("simulate");
    const fs::path config = dir / "config.json";
    std::string text = ou_config_json((dir / "out").string(), 2000);
    text.replace(text.find("\"n_steps\": 64"), 13, "\"n_steps\": 32");
    write_file(config, text);
    CHECK(run_cli("simulate --config " + config.string(), dir / "run.log") == 0);
    CHECK(fs::exists(dir / "out" / "reduction_identity.csv"));
    CHECK(fs::exists(dir / "out" / "objectives.csv"));
    CHECK(fs::exists(dir / "out" / "saddle_certification.csv"));
    CHECK(fs::exists(dir / "out" / "penalty.csv"));
}

TEST_CASE("example pipeline validates the closed-form equivalences") {
    const fs::path dir = make_temp_dir("example");
    std::ostringstream log;
    CHECK(cli::run_example_bs((dir / "out").string(), 0x5eed0001u, log) == 0);
    CHECK(log.str().find("theta") != std::string::npos);
    CHECK(fs::exists(dir / "out" / "example_bs_summary.csv"));
}
