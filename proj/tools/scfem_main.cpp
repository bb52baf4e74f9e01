// Command-line harness: `scfem run <config>` executes a configured
// experiment and writes history.csv/meta.txt; `scfem summarize <csv>`
// reports convergence slopes of a recorded history.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include "scfem/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"adaptive sparse-grid collocation FEM experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_dir;
    auto* run = app.add_subcommand("run", "execute a config file");
    run->add_option("config", config_path, "path to key=value config")->required();
    run->add_option("--output-dir", output_dir, "override the output directory");

    std::string csv_path;
    auto* summarize = app.add_subcommand("summarize", "fit slopes of a history.csv");
    summarize->add_option("history", csv_path, "path to history.csv")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints usage/help
        return e.get_exit_code() == 0 ? 0 : 1;
    }

    try {
        if (run->parsed()) {
            std::ifstream is(config_path);
            if (!is) {
                std::cerr << "error: cannot open config '" << config_path << "'\n";
                return 1;
            }
            scfem::RunConfig cfg = scfem::parse_run_config(is);
            // Output directory precedence: flag, then environment, then config.
            if (const char* env = std::getenv("SCFEM_OUTPUT_DIR"); env && *env)
                cfg.output_dir = env;
            if (!output_dir.empty()) cfg.output_dir = output_dir;
            return scfem::run_config(cfg, std::cout);
        }
        scfem::summarize_history_file(csv_path, std::cout);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
