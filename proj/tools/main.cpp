#include "commands.hpp"

#include "fracdiff/errors.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace fracdiff;
using namespace fracdiff::cli;

namespace {

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError("cannot open " + path);
    }
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
        throw Error("cannot write " + path.string());
    }
}

struct Common {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::string series_path;
    std::string grid;
};

RunConfig load(const Common& c)
{
    RunConfig cfg = load_run_config(c.config_path);
    if (!c.out_dir.empty()) {
        cfg.output_directory = c.out_dir;
    }
    if (c.seed) {
        cfg.seed = *c.seed;
    }
    return cfg;
}

TimeSeries load_series(const std::string& path)
{
    try {
        return parse_csv(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Forward solver and order recovery for space-time fractional diffusion"};
    app.require_subcommand(1);

    MlRequest ml;
    std::string ml_out;
    auto* ml_cmd = app.add_subcommand("ml", "Tabulate E_{alpha,1}(z)");
    ml_cmd->add_option("--alpha", ml.alpha, "Order")->required();
    ml_cmd->add_option("--z-min", ml.z_lo, "First argument");
    ml_cmd->add_option("--z-max", ml.z_hi, "Last argument");
    ml_cmd->add_option("--count", ml.count, "Number of rows");
    ml_cmd->add_option("--spacing", ml.spacing, "linear or log")->check(CLI::IsMember({"linear", "log"}));
    ml_cmd->add_option("--out", ml_out, "Directory for ml.csv (stdout if omitted)");

    Common common;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", common.config_path, "Run configuration (JSON)")->required();
        cmd->add_option("--out", common.out_dir, "Output directory (overrides the config)");
        cmd->add_option("--seed", common.seed, "Noise seed (overrides the config)");
    };
    auto* solve_cmd = app.add_subcommand("solve", "Write series.csv and meta.json");
    add_common(solve_cmd);
    auto* recover_cmd = app.add_subcommand("recover", "Recover (alpha, beta) from a series");
    add_common(recover_cmd);
    recover_cmd->add_option("--series", common.series_path, "CSV written by solve")->required();
    auto* land_cmd = app.add_subcommand("landscape", "Misfit over an (alpha, beta) grid");
    add_common(land_cmd);
    land_cmd->add_option("--series", common.series_path, "CSV (synthesised from the config if omitted)");
    land_cmd->add_option("--grid", common.grid, "AxB grid counts");

    std::optional<std::string> select;
    std::optional<std::string> fault;
    auto* validate_cmd = app.add_subcommand("validate", "Run the embedded invariant checks");
    validate_cmd->add_option("--select", select, "Comma-separated checks (all if omitted)");
    validate_cmd->add_option("--inject-fault", fault, "Check whose tolerance is made unattainable");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kSuccess : kFailure;
    }

    try {
        if (*ml_cmd) {
            const std::string csv = cmd_ml(ml);
            if (ml_out.empty()) {
                std::cout << csv;
            } else {
                write_file(fs::path(ml_out) / "ml.csv", csv);
            }
            return kSuccess;
        }
        if (*solve_cmd) {
            const RunConfig cfg = load(common);
            const SolveOutput out = cmd_solve(cfg);
            write_file(fs::path(cfg.output_directory) / "series.csv", out.series_csv);
            write_file(fs::path(cfg.output_directory) / "meta.json", out.meta_json);
            std::cout << "wrote " << (fs::path(cfg.output_directory) / "series.csv").string() << " and meta.json\n";
            return kSuccess;
        }
        if (*recover_cmd) {
            const RunConfig cfg = load(common);
            const RecoverOutput out = cmd_recover(cfg, load_series(common.series_path));
            write_file(fs::path(cfg.output_directory) / "recovery.json", out.json);
            std::cout << out.json;
            for (const auto& w : out.result.warnings) {
                std::cerr << "warning: " << w << "\n";
            }
            return out.exit_code;
        }
        if (*land_cmd) {
            const RunConfig cfg = load(common);
            std::optional<TimeSeries> series;
            if (!common.series_path.empty()) {
                series = load_series(common.series_path);
            }
            std::optional<std::pair<std::size_t, std::size_t>> grid;
            if (!common.grid.empty()) {
                grid = parse_grid(common.grid);
            }
            const LandscapeOutput out = cmd_landscape(cfg, series, grid);
            write_file(fs::path(cfg.output_directory) / "landscape.csv", out.csv);
            std::cout << "local minima: " << out.minima.size();
            for (const auto& [i, j] : out.minima) {
                std::cout << " (" << out.landscape.alpha_grid[i] << ", " << out.landscape.beta_grid[j] << ")";
            }
            std::cout << "\nbeta flat: " << (out.beta_flat ? "yes" : "no") << "\n";
            return kSuccess;
        }
        if (*validate_cmd) {
            std::vector<std::string> names;
            if (!select) {
                names = validation_checks();
            } else {
                std::stringstream s(*select);
                for (std::string item; std::getline(s, item, ',');) {
                    if (!item.empty()) {
                        names.push_back(item);
                    }
                }
            }
            const auto results = cmd_validate(names, fault);
            std::cout << format_report(results);
            for (const auto& r : results) {
                if (!r.passed) {
                    return kFailure;
                }
            }
            return kSuccess;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kFailure;
}
