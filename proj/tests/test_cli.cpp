#include "doctest.h"

#include "commands.hpp"
#include "fracdiff/errors.hpp"
#include "schema_check.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace fracdiff;
using namespace fracdiff::cli;
namespace fs = std::filesystem;

namespace {

const std::string kSource = FRACDIFF_SOURCE_DIR;
const std::string kCli = FRACDIFF_CLI_PATH;

std::string fixture(const std::string& name)
{
    return kSource + "/fixtures/" + name;
}

nlohmann::json schema(const std::string& name)
{
    return schema_check::load(kSource + "/schemas/" + name);
}

std::string slurp(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int run(const std::string& args)
{
    const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / "fracdiff_test_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string config_error(const std::string& text)
{
    try {
        parse_run_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST_CASE("schema checker rejects what it should")
{
    const auto s = schema("recovery.schema.json");
    nlohmann::json doc = nlohmann::json::parse(R"({"alpha_hat": 0.5})");
    CHECK_FALSE(schema_check::validate(s, doc).empty());
    doc = nlohmann::json::parse(R"({"version": 2})");
    CHECK_FALSE(schema_check::validate(schema("run_config.schema.json"), doc).empty());
    doc = nlohmann::json::parse(R"({"version": 1, "operator": {"diffusivity": {"kind": "cubic"}}})");
    CHECK_FALSE(schema_check::validate(schema("run_config.schema.json"), doc).empty());
}

TEST_CASE("run configuration")
{
    SUBCASE("every fixture parses and conforms to the schema")
    {
        const auto s = schema("run_config.schema.json");
        for (const char* name : {"round_trip.json", "round_trip_noisy.json", "counterexample.json",
                                 "variable_diffusivity.json", "landscape_witness.json"}) {
            CAPTURE(name);
            CHECK(schema_check::validate(s, schema_check::load(fixture(name))).empty());
            CHECK_NOTHROW(build_experiment(load_run_config(fixture(name))));
        }
        for (const auto& p : preset_names()) {
            CHECK(schema_check::validate(s, preset_defaults(p)).empty());
        }
    }
    SUBCASE("presets and overrides")
    {
        const auto c = parse_run_config(R"({"version": 1, "preset": "scaled_lambda1_eq_1", "problem": {"beta": 0.9}})");
        CHECK(c.diffusivity.kind == "scaled");
        CHECK(c.initial.kind == "eigenmode");
        CHECK(c.beta == 0.9);
        CHECK(c.alpha == 0.5);
        const auto ex = build_experiment(c);
        CHECK(ex.spectrum.eigenvalues()[0] == doctest::Approx(1.0).epsilon(1e-11));
        CHECK_FALSE(ex.model.k0.has_value());

        const auto v = parse_run_config(R"({"version": 1, "preset": "variable_diffusivity",
            "operator": {"diffusivity": {"kind": "constant", "value": 2}}})");
        CHECK(v.diffusivity.kind == "constant");
        CHECK(v.potential.value == -1.0);
        CHECK(parse_run_config(R"({"version": 1, "recovery": {"window": [100, 1000]}})").window->t_hi == 1000.0);
    }
    SUBCASE("errors name the offending key")
    {
        CHECK(config_error(R"({"version": 1, "problem": {"alpha": 1.0}})").find("/problem/alpha") != std::string::npos);
        CHECK(config_error(R"({"version": 1, "problem": {"beta": 1.5}})").find("/problem/beta") != std::string::npos);
        CHECK(config_error(R"({"version": 1, "problem": {"gamma": 1}})").find("/problem/gamma: unknown key") !=
              std::string::npos);
        CHECK(config_error(R"({"version": 1, "observation": {"sensor": 63}})").find("/observation/sensor") !=
              std::string::npos);
        CHECK(config_error(R"({"version": 3})").find("/version") != std::string::npos);
        CHECK(config_error(R"({"preset": "other"})").find("unknown preset") != std::string::npos);
        CHECK(config_error(R"({"version": 1, "noise": {"seed": -4}})").find("/noise/seed") != std::string::npos);
        CHECK(config_error(R"({"version": 1, "operator": {"diffusivity": {"kind": "linear", "value": 1,
            "slope": -2}}})") == "");
        CHECK_THROWS_AS(build_experiment(parse_run_config(R"({"version": 1, "operator": {"diffusivity":
            {"kind": "linear", "value": 1, "slope": -2}}})")),
                        EllipticityViolated);
        try {
            parse_run_config("{\n  \"version\": 1,\n  \"problem\": {\"alpha\": }\n}");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("line 3") != std::string::npos);
        }
    }
}

TEST_CASE("cmd_ml")
{
    std::istringstream rows(cmd_ml({1.0, -5.0, 0.0, 51, "linear"}));
    std::string line;
    std::getline(rows, line);
    CHECK(line == "z,E");
    int n = 0;
    while (std::getline(rows, line)) {
        const auto comma = line.find(',');
        const double z = std::stod(line.substr(0, comma));
        CHECK(std::stod(line.substr(comma + 1)) == doctest::Approx(std::exp(z)).epsilon(1e-14));
        ++n;
    }
    CHECK(n == 51);

    std::istringstream log_rows(cmd_ml({0.5, -1e4, -1e-2, 100, "log"}));
    std::getline(log_rows, line);
    double previous = 0.0;
    n = 0;
    while (std::getline(log_rows, line)) {
        const double e = std::stod(line.substr(line.find(',') + 1));
        CHECK(e > 0.0);
        CHECK(e > previous);
        previous = e;
        ++n;
    }
    CHECK(n == 100);

    CHECK(cmd_ml({0.5, -1.0, 0.0, 0, "linear"}) == "z,E\n");
    CHECK_THROWS_AS(cmd_ml({0.5, 1.0, 0.0, 3, "linear"}), PreconditionViolation);
    CHECK_THROWS_AS(cmd_ml({0.5, 0.0, 5.0, 3, "linear"}), UnsupportedRegime);
}

TEST_CASE("cmd_solve")
{
    SUBCASE("counterexample series does not depend on beta")
    {
        auto c = load_run_config(fixture("counterexample.json"));
        const auto first = parse_csv(cmd_solve(c).series_csv);
        c.beta = 0.9;
        const auto second = parse_csv(cmd_solve(c).series_csv);
        REQUIRE(first.values.size() == second.values.size());
        for (std::size_t i = 0; i < first.values.size(); ++i) {
            CHECK(std::abs(first.values[i] - second.values[i]) <= 1e-12);
        }
    }
    SUBCASE("early rows approach the initial value")
    {
        auto c = load_run_config(fixture("round_trip.json"));
        c.times = {"geometric", 1e-10, 1e-6, 5};
        const auto s = parse_csv(cmd_solve(c).series_csv);
        CHECK(s.values.front() == doctest::Approx(0.25).epsilon(1e-3));
    }
    SUBCASE("noisy column follows the noise contract")
    {
        const auto c = load_run_config(fixture("round_trip_noisy.json"));
        const auto out = cmd_solve(c);
        CHECK(out.series_csv.rfind("t,u_clean,u_noisy\n", 0) == 0);
        auto clean_cfg = c;
        clean_cfg.noise_level = 0.0;
        const auto clean = parse_csv(cmd_solve(clean_cfg).series_csv);
        const auto noisy = parse_csv(out.series_csv);
        CHECK(noisy.values == add_noise(clean, 0.01, 12345).values);
        CHECK(out.series_csv == cmd_solve(c).series_csv);
    }
    SUBCASE("meta.json conforms")
    {
        const auto s = schema("meta.schema.json");
        for (const char* name : {"round_trip.json", "counterexample.json", "variable_diffusivity.json"}) {
            CAPTURE(name);
            const auto meta = nlohmann::json::parse(cmd_solve(load_run_config(fixture(name))).meta_json);
            CHECK(schema_check::validate(s, meta).empty());
        }
    }
}

TEST_CASE("cmd_recover")
{
    const auto s = schema("recovery.schema.json");
    SUBCASE("round trip")
    {
        const auto c = load_run_config(fixture("round_trip.json"));
        const auto out = cmd_recover(c, parse_csv(cmd_solve(c).series_csv));
        CHECK(out.exit_code == kSuccess);
        REQUIRE(out.result.beta_hat.has_value());
        CHECK(std::abs(out.result.alpha_hat - 0.5) <= 1e-3);
        CHECK(std::abs(*out.result.beta_hat - 0.7) <= 1e-3);
        CHECK(schema_check::validate(s, nlohmann::json::parse(out.json)).empty());
    }
    SUBCASE("counterexample")
    {
        const auto c = load_run_config(fixture("counterexample.json"));
        const auto out = cmd_recover(c, parse_csv(cmd_solve(c).series_csv));
        CHECK(out.exit_code == kNonIdentifiable);
        CHECK(out.json.find("beta undetermined") != std::string::npos);
        CHECK(schema_check::validate(s, nlohmann::json::parse(out.json)).empty());
    }
}

TEST_CASE("cmd_landscape")
{
    SUBCASE("identifiable grid: unique minimum at the truth")
    {
        auto c = load_run_config(fixture("round_trip.json"));
        c.landscape_alpha = {0.35, 0.65, 7};
        c.landscape_beta = {0.55, 0.85, 7};
        const auto out = cmd_landscape(c, std::nullopt);
        REQUIRE(out.minima.size() == 1);
        CHECK(out.minima[0] == std::pair<std::size_t, std::size_t>{3, 3});
        CHECK_FALSE(out.beta_flat);
        CHECK(out.csv.rfind("alpha/beta,0.55", 0) == 0);
    }
    SUBCASE("counterexample rows are flat")
    {
        const auto out = cmd_landscape(load_run_config(fixture("counterexample.json")), std::nullopt);
        CHECK(out.beta_flat);
    }
    SUBCASE("1x1 grid")
    {
        const auto out = cmd_landscape(load_run_config(fixture("round_trip.json")), std::nullopt, parse_grid("1x1"));
        CHECK(out.landscape.values.size() == 1);
        std::istringstream rows(out.csv);
        std::string line;
        int n = 0;
        while (std::getline(rows, line)) {
            ++n;
        }
        CHECK(n == 2);
    }
    CHECK(parse_grid("50x40") == std::pair<std::size_t, std::size_t>{50, 40});
    CHECK_THROWS_AS(parse_grid("50"), ConfigError);
    CHECK_THROWS_AS(parse_grid("0x3"), ConfigError);
    CHECK_THROWS_AS(parse_grid("ax3"), ConfigError);
}

TEST_CASE("cmd_validate")
{
    const auto all = cmd_validate(validation_checks());
    REQUIRE(all.size() == 4);
    for (const auto& r : all) {
        CAPTURE(r.name);
        CHECK(r.passed);
    }
    const auto faulty = cmd_validate(validation_checks(), std::string("positivity"));
    for (const auto& r : faulty) {
        CHECK(r.passed == (r.name != "positivity"));
    }
    CHECK(cmd_validate({}).empty());
    CHECK_THROWS_AS(cmd_validate({"nonexistent"}), ConfigError);
    CHECK(format_report(all).rfind("PASS ml_reductions", 0) == 0);
}

TEST_CASE("executable exit codes and determinism")
{
    const fs::path dir = scratch("exe");
    const std::string out = " --out " + dir.string();
    CHECK(run("ml --alpha 0.5 --count 0") == 0);
    CHECK(run("validate --select ''") == 0);
    CHECK(run("validate --select ml_reductions --inject-fault ml_reductions") == 1);
    CHECK(run("solve --config " + fixture("does_not_exist.json") + out) == 1);
    CHECK(run("bogus") == 1);

    CHECK(run("solve --config " + fixture("counterexample.json") + out) == 0);
    CHECK(run("recover --config " + fixture("counterexample.json") + " --series " + (dir / "series.csv").string() +
              out) == 2);
    CHECK(run("recover --config " + fixture("counterexample.json") + " --series " + fixture("malformed.csv") + out) ==
          1);

    const fs::path a = scratch("run_a");
    const fs::path b = scratch("run_b");
    for (const fs::path& d : {a, b}) {
        REQUIRE(run("solve --config " + fixture("round_trip_noisy.json") + " --seed 99 --out " + d.string()) == 0);
        REQUIRE(run("recover --config " + fixture("round_trip_noisy.json") + " --series " +
                    (d / "series.csv").string() + " --out " + d.string()) == 0);
    }
    for (const char* f : {"series.csv", "meta.json", "recovery.json"}) {
        CAPTURE(f);
        CHECK(slurp(a / f) == slurp(b / f));
        CHECK_FALSE(slurp(a / f).empty());
    }
}
