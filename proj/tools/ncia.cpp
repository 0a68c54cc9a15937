// ncia: rate and BER sweeps, the diagonality demo and the phase
// certification table from the command line.

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ncia/cli/commands.hpp"
#include "ncia/cli/run_config.hpp"

namespace {

struct Flags {
    std::optional<std::string> config_path;
    std::map<std::string, std::string> values;
    int workers = 1;
    bool coherent = false;
};

void add_run_options(CLI::App& cmd, Flags& flags)
{
    cmd.add_option("--config", flags.config_path, "key=value config file; flags override it");
    for (const auto& key : ncia::cli::RunConfig::keys()) {
        std::string flag = "--" + key;
        for (char& c : flag)
            if (c == '_') c = '-';
        if (key == "out_path") flag += ",--out,-o";
        cmd.add_option_function<std::string>(flag, [&flags, key](const std::string& v) { flags.values[key] = v; },
                                             "override " + key);
    }
}

ncia::cli::RunConfig resolve(const Flags& flags)
{
    ncia::cli::RunConfig cfg;
    if (flags.config_path) {
        std::ifstream in(*flags.config_path);
        if (!in) throw ncia::ConfigError("cannot open config file '" + *flags.config_path + "'");
        ncia::cli::read_config(in, cfg);
    }
    for (const auto& [key, value] : flags.values) cfg.set(key, value);
    return cfg;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Noncoherent interference alignment simulator"};
    app.require_subcommand(1);

    Flags flags;
    auto* rate = app.add_subcommand("rate", "sum-rate sweep against TDMA and the capacity bound (CSV)");
    auto* ber = app.add_subcommand("ber", "per-user bit error rate sweep (CSV)");
    auto* demo = app.add_subcommand("demo-diagonality", "closed-form alignment under naive, superposition and noncoherent models");
    auto* certify = app.add_subcommand("certify", "irrationality certificates for rational phase differences");
    for (auto* cmd : {rate, ber, demo, certify}) add_run_options(*cmd, flags);
    for (auto* cmd : {rate, ber})
        cmd->add_option("--workers", flags.workers, "worker threads; output does not depend on it")
            ->check(CLI::Range(1, 256));
    for (auto* cmd : {demo, certify}) cmd->add_flag("--coherent", flags.coherent, "use zero phase offsets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : ncia::cli::kUsage;
    }

    try {
        const auto cfg = resolve(flags);
        if (rate->parsed()) return ncia::cli::cmd_rate(cfg, flags.workers);
        if (ber->parsed()) return ncia::cli::cmd_ber(cfg, flags.workers);
        if (demo->parsed()) return ncia::cli::cmd_demo_diagonality(cfg, flags.coherent, std::cout);
        return ncia::cli::cmd_certify(cfg, flags.coherent, std::cout, std::cerr);
    } catch (const ncia::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return ncia::cli::kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return ncia::cli::kCheckFailed;
    }
}
