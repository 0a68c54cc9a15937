#pragma once

// Flat key=value run configuration shared by every subcommand. Config files
// hold one key per line with '#' comments; command-line flags override them.

#include <charconv>
#include <cstdint>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "ncia/channel.hpp"
#include "ncia/error.hpp"
#include "ncia/link.hpp"

namespace ncia::cli {

struct RunConfig {
    int users = 3;
    std::string solver = "closed3";
    std::string channel = "gaussian";
    double snr_start_db = 0.0;
    double snr_stop_db = 60.0;
    double snr_step_db = 5.0;
    int trials = 200;
    std::uint64_t seed = 1;
    int phase_denominator = 360;
    std::string loading = "fh";
    int total_rate = 0;
    std::string out_path;

    static const std::vector<std::string>& keys()
    {
        static const std::vector<std::string> k{"users",       "solver",      "channel",     "snr_start_db",
                                                "snr_stop_db", "snr_step_db", "trials",      "seed",
                                                "phase_denominator", "loading", "total_rate", "out_path"};
        return k;
    }

    void set(std::string_view key, std::string_view value);

    /// Every key except out_path, in a fixed order. Written as the CSV's
    /// leading comment so outputs record what produced them.
    std::string describe() const;
};

namespace detail {

inline std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

template <class T>
T parse_number(std::string_view key, std::string_view text)
{
    T value{};
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end)
        throw ConfigError("invalid value '" + std::string(text) + "' for " + std::string(key));
    return value;
}

template <class T>
T parse_in_range(std::string_view key, std::string_view text, T lo, T hi)
{
    const T v = parse_number<T>(key, text);
    if (v < lo || v > hi)
        throw ConfigError(std::string(key) + " out of range: " + std::string(text));
    return v;
}

inline std::string parse_choice(std::string_view key, std::string_view text, std::initializer_list<std::string_view> options)
{
    for (auto o : options)
        if (text == o) return std::string(text);
    throw ConfigError("invalid value '" + std::string(text) + "' for " + std::string(key));
}

} // namespace detail

/// 12 significant digits, shortest form, locale independent.
inline std::string format_number(double x)
{
    if (x == 0.0) x = 0.0; // drop the sign of negative zero
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 12);
    return std::string(buf, res.ptr);
}

inline void RunConfig::set(std::string_view key, std::string_view raw)
{
    const std::string value = detail::trim(raw);
    if (key == "users") users = detail::parse_in_range(key, value, 3, 16);
    else if (key == "solver") solver = detail::parse_choice(key, value, {"closed3", "leakage", "maxsinr"});
    else if (key == "channel") {
        if (value != "gaussian" && value != "deterministic" && !value.starts_with("deterministic:"))
            throw ConfigError("invalid value '" + value + "' for channel");
        channel = value;
    } else if (key == "snr_start_db") snr_start_db = detail::parse_in_range(key, value, -100.0, 200.0);
    else if (key == "snr_stop_db") snr_stop_db = detail::parse_in_range(key, value, -100.0, 200.0);
    else if (key == "snr_step_db") {
        snr_step_db = detail::parse_in_range(key, value, 0.0, 300.0);
        if (!(snr_step_db > 0.0)) throw ConfigError("snr_step_db must be positive");
    } else if (key == "trials") trials = detail::parse_in_range(key, value, 1, 10'000'000);
    else if (key == "seed") seed = detail::parse_number<std::uint64_t>(key, value);
    else if (key == "phase_denominator") phase_denominator = detail::parse_in_range(key, value, 0, 100'000);
    else if (key == "loading") loading = detail::parse_choice(key, value, {"fh", "uniform"});
    else if (key == "total_rate") total_rate = detail::parse_in_range(key, value, 0, 1024);
    else if (key == "out_path") out_path = value;
    else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

inline std::string RunConfig::describe() const
{
    std::ostringstream os;
    os << "users=" << users << " solver=" << solver << " channel=" << channel
       << " snr_start_db=" << format_number(snr_start_db) << " snr_stop_db=" << format_number(snr_stop_db)
       << " snr_step_db=" << format_number(snr_step_db) << " trials=" << trials << " seed=" << seed
       << " phase_denominator=" << phase_denominator << " loading=" << loading << " total_rate=" << total_rate;
    return os.str();
}

/// Applies every key=value line of a config file.
inline void read_config(std::istream& in, RunConfig& cfg)
{
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string body = detail::trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
        cfg.set(detail::trim(std::string_view(body).substr(0, eq)), std::string_view(body).substr(eq + 1));
    }
}

inline NetworkConfig network_config(const RunConfig& cfg)
{
    NetworkConfig net;
    net.users = cfg.users;
    if (cfg.channel == "gaussian") return net;
    if (cfg.channel == "deterministic") return NetworkConfig::deterministic_ones(cfg.users);
    net.channel_mode = ChannelMode::deterministic;
    net.deterministic_values = load_channel_file(cfg.channel.substr(std::string_view("deterministic:").size()), cfg.users);
    return net;
}

inline SolverTag solver_tag(const std::string& s)
{
    if (s == "closed3") return SolverTag::closed3;
    if (s == "leakage") return SolverTag::leakage;
    if (s == "maxsinr") return SolverTag::maxsinr;
    throw ConfigError("unknown solver '" + s + "'");
}

inline LinkConfig link_config(const RunConfig& cfg, int workers = 1)
{
    LinkConfig link;
    link.network = network_config(cfg);
    link.solver = solver_tag(cfg.solver);
    link.snr_grid_db = snr_grid(cfg.snr_start_db, cfg.snr_stop_db, cfg.snr_step_db);
    link.trials = cfg.trials;
    link.master_seed = cfg.seed;
    link.phase_denominator = cfg.phase_denominator;
    link.loading = cfg.loading == "uniform" ? Loading::uniform : Loading::fh;
    link.total_rate = cfg.total_rate;
    link.workers = workers;
    link.validate();
    return link;
}

/// Rate CSV rows sorted by (scheme, snr_db), preceded by a config comment.
inline std::string rate_csv(const LinkReport& rep, const std::string& config_line)
{
    std::ostringstream os;
    os << "# config: " << config_line << '\n';
    os << "snr_db,scheme,mean_sum_rate_bpcu,stderr,trials\n";
    const auto emit = [&](const char* scheme, const std::vector<CurvePoint>& curve) {
        for (const auto& p : curve)
            os << format_number(p.snr_db) << ',' << scheme << ',' << format_number(p.mean) << ','
               << format_number(p.std_err) << ',' << p.trials << '\n';
    };
    emit("bound", rep.bound);
    emit("ia", rep.ia);
    emit("tdma", rep.tdma);
    return os.str();
}

/// BER CSV rows sorted by (snr_db, user).
inline std::string ber_csv(const LinkReport& rep, const std::string& config_line)
{
    std::ostringstream os;
    os << "# config: " << config_line << '\n';
    os << "snr_db,user,loading,ber,bit_count,error_count\n";
    for (const auto& p : rep.ber)
        os << format_number(p.snr_db) << ',' << p.user << ',' << to_string(p.loading) << ',' << format_number(p.ber())
           << ',' << p.bits << ',' << p.errors << '\n';
    return os.str();
}

} // namespace ncia::cli
