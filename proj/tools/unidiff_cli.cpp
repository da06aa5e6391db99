#include "unidiff/app.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

int main(int argc, char** argv) {
    CLI::App app{"Unidirectional diffusion solver and certification suite"};
    app.require_subcommand(1);

    std::vector<std::string> overrides;
    std::string out;
    auto out_opt = [&]() -> std::optional<std::filesystem::path> {
        return out.empty() ? std::nullopt : std::optional<std::filesystem::path>(out);
    };

    std::string config;
    auto* run = app.add_subcommand("run", "Solve a configuration and certify the trajectory");
    run->add_option("config", config, "Configuration file")->required()->check(CLI::ExistingFile);

    std::string first, second;
    auto* compare = app.add_subcommand("compare", "Solve two ordered configurations and check the comparison");
    compare->add_option("config1", first, "Configuration with the smaller data")->required()->check(CLI::ExistingFile);
    compare->add_option("config2", second, "Configuration with the larger data")->required()->check(CLI::ExistingFile);

    auto* steady = app.add_subcommand("steady", "Solve the steady obstacle problem for f_inf");
    steady->add_option("config", config, "Configuration file")->required()->check(CLI::ExistingFile);

    std::string trajectory;
    auto* verify = app.add_subcommand("verify", "Re-certify a stored trajectory without solving");
    verify->add_option("dir", trajectory, "Trajectory directory")->required()->check(CLI::ExistingDirectory);

    for (auto* sub : {run, compare, steady}) {
        sub->add_option("--set", overrides, "Override a config key, e.g. --set partition.m=20");
        sub->add_option("--out", out, "Output directory (overrides output.dir)");
    }

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            return unidiff::execute(unidiff::load_config(config, overrides), std::cout, out_opt());
        }
        if (*compare) {
            return unidiff::compare_runs(unidiff::load_config(first, overrides),
                                         unidiff::load_config(second, overrides), std::cout, out_opt());
        }
        if (*steady) {
            return unidiff::steady(unidiff::load_config(config, overrides), std::cout, out_opt());
        }
        return unidiff::verify(trajectory, std::cout);
    } catch (const unidiff::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return unidiff::kExitConfigError;
    } catch (const unidiff::PreconditionError& e) {
        std::cerr << "precondition error: " << e.what() << '\n';
        return unidiff::kExitConfigError;
    } catch (const unidiff::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return unidiff::kExitNumericalError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return unidiff::kExitNumericalError;
    }
}
