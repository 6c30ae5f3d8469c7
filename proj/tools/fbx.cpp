// fbx: config-driven runner for the obstacle-problem experiments.
//
//   fbx solve|diagnose|classify|construct-anomalous|report --config <path> [--assert] [--out <dir>]
//
// Exit codes: 0 success, 2 config validation error, 3 numerical failure, 4 checks failed
// under --assert.

#include "fbx/runner.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    CLI::App app{"Free-boundary experiment runner"};
    app.require_subcommand(1);
    std::string config_path, out_dir;
    bool assert_checks = false;
    for (const char* name : {"solve", "diagnose", "classify", "construct-anomalous", "report"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON config")->required();
        sub->add_flag("--assert", assert_checks, "exit 4 if an acceptance check fails");
        sub->add_option("--out", out_dir, "output directory (overrides output_dir)");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    fbx::ExperimentConfig cfg;
    try {
        std::ifstream in(config_path);
        if (!in)
            throw fbx::ConfigError({"cannot open config file '" + config_path + "'"});
        fbx::Json j;
        try {
            in >> j;
        } catch (const fbx::Json::parse_error& e) {
            throw fbx::ConfigError({std::string("config is not valid JSON: ") + e.what()});
        }
        if (!j.is_object())
            throw fbx::ConfigError({"config must be a JSON object"});
        if (j.contains("command") && j["command"] != command)
            throw fbx::ConfigError({"command: config says '" + j["command"].dump() + "' but '" + command + "' was requested"});
        j["command"] = command;
        if (!out_dir.empty())
            j["output_dir"] = out_dir;
        cfg = fbx::parse_config(j);
    } catch (const fbx::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    }

    try {
        const auto manifest = fbx::run(cfg, cfg.output_dir);
        std::cout << "fbx " << command << ": " << manifest.outputs.size() << " outputs in " << cfg.output_dir
                  << " (config " << manifest.config_hash << ")\n";
        for (const auto& f : manifest.failed_checks)
            std::cout << "  check failed: " << f << '\n';
        if (assert_checks && !manifest.checks_pass)
            return 4;
    } catch (const fbx::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const fbx::DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
