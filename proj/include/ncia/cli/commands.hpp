#pragma once

// Subcommand bodies. Each returns the process exit code; configuration and
// I/O problems surface as ConfigError, which the front end maps to exit 2.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <locale>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ncia/align.hpp"
#include "ncia/channel.hpp"
#include "ncia/cli/run_config.hpp"
#include "ncia/link.hpp"
#include "ncia/phases.hpp"

namespace ncia::cli {

enum ExitCode : int { kSuccess = 0, kCheckFailed = 1, kUsage = 2 };

/// Writes the whole file at once; an unwritable path is a config error.
inline void write_file(const std::string& path, const std::string& contents)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << contents;
    out.flush();
    if (!out) throw ConfigError("failed writing '" + path + "'");
}

inline void emit_text(const RunConfig& cfg, const std::string& text, std::ostream& fallback)
{
    if (cfg.out_path.empty()) fallback << text;
    else write_file(cfg.out_path, text);
}

inline int cmd_rate(const RunConfig& cfg, int workers = 1)
{
    const auto link = link_config(cfg, workers);
    write_file(cfg.out_path.empty() ? "rate.csv" : cfg.out_path, rate_csv(rate_sweep(link), cfg.describe()));
    return kSuccess;
}

inline int cmd_ber(const RunConfig& cfg, int workers = 1)
{
    const auto link = link_config(cfg, workers);
    write_file(cfg.out_path.empty() ? "ber.csv" : cfg.out_path, ber_csv(ber_sweep(link), cfg.describe()));
    return kSuccess;
}

namespace detail {

inline std::string format_matrix(const Eigen::MatrixXd& m)
{
    std::ostringstream os;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        os << "    [";
        for (Eigen::Index c = 0; c < m.cols(); ++c) os << (c ? ", " : "") << format_number(m(r, c));
        os << "]\n";
    }
    return os.str();
}

inline bool has_zero_entry(const Eigen::Vector2d& v, double tol = 1e-12)
{
    return v.cwiseAbs().minCoeff() < tol;
}

inline void describe_alignment(std::ostream& os, const std::string& title, const EquivalentNetwork& net, bool degenerate_ok)
{
    os << "== " << title << " ==\n";
    ClosedFormOptions opts;
    opts.allow_degenerate = degenerate_ok;
    ClosedFormResult res;
    try {
        res = closed_form_ia3(net, opts);
    } catch (const Error& e) {
        os << "warning: degenerate network, no alignment: " << e.what() << "\n\n";
        return;
    }
    const auto& rep = res.report;
    os << "  E =\n" << format_matrix(rep.E) << "  F =\n" << format_matrix(rep.F) << "  G =\n" << format_matrix(rep.G);
    os << "  eigenvalue of E: " << format_number(rep.eigenvalue) << '\n';
    for (int i = 0; i < 3; ++i) {
        const auto& v = res.solution.V[i];
        os << "  V[" << i + 1 << "] = (" << format_number(v(0)) << ", " << format_number(v(1)) << ")  has a zero entry: "
           << (has_zero_entry(v) ? "YES" : "NO") << '\n';
    }
    if (rep.degenerate) os << "  warning: desired signal collapses onto the interference at some receiver\n";
    os << "  leakage: " << format_number(res.solution.leakage) << "\n\n";
}

} // namespace detail

/// Side-by-side closed-form alignment of one 3-user channel draw under the
/// naive 2-use extension, the superposition extension and noncoherent
/// demodulation. With coherent set, the noncoherent model uses zero offsets.
inline int cmd_demo_diagonality(const RunConfig& cfg, bool coherent, std::ostream& fallback)
{
    if (cfg.users != 3) throw ConfigError("closed3 requires 3 users");
    const auto net_cfg = network_config(cfg);
    const auto real = draw_channel(net_cfg, derive_seed(cfg.seed, {seed_stream::channel, 0}));

    std::ostringstream os;
    os << "# config: " << cfg.describe() << (coherent ? " coherent=1" : "") << '\n';
    detail::describe_alignment(os, "naive 2-use extension", network_from_matrices(naive_extension(real)), true);

    Rng rng(derive_seed(cfg.seed, {seed_stream::phases, 0, 0}));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> lambda(3);
    for (double& l : lambda) l = normal(rng);
    detail::describe_alignment(os, "superposition extension", network_from_matrices(superposition_extension(real, lambda)),
                               true);

    if (coherent) {
        detail::describe_alignment(os, "coherent demodulation (zero offsets)",
                                   build_equivalent_network(real, PhasePlan::coherent(3)), false);
    } else {
        const PhaseSampler sampler(cfg.phase_denominator);
        bool shown = false;
        for (std::uint64_t attempt = 0; attempt < 100 && !shown; ++attempt) {
            try {
                const auto net = build_equivalent_network(real, sampler.sample(3, derive_seed(cfg.seed, {seed_stream::phases, 1, attempt})));
                closed_form_ia3(net);
                detail::describe_alignment(os, "noncoherent demodulation", net, false);
                shown = true;
            } catch (const DegeneratePhase&) {
            } catch (const NoRealAlignment&) {
            } catch (const DegenerateAlignment&) {
            }
        }
        if (!shown) os << "== noncoherent demodulation ==\nwarning: no usable phase plan in 100 attempts\n";
    }
    emit_text(cfg, os.str(), fallback);
    return kSuccess;
}

/// Certification table for every reduced a/b with b up to
/// min(phase_denominator, 24), then a check of one sampled plan's angles.
/// Returns kCheckFailed if any plan angle is not certified irrational.
inline int cmd_certify(const RunConfig& cfg, bool coherent, std::ostream& fallback, std::ostream& diag)
{
    constexpr int kExhaustiveCap = 24;
    const int top = std::min(cfg.phase_denominator, kExhaustiveCap);

    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << "# config: " << cfg.describe() << (coherent ? " coherent=1" : "") << '\n';
    os << "q,2cos(q),polynomial,rational_free_factor,verdict\n";
    for (std::int64_t b = 1; b <= top; ++b)
        for (std::int64_t a = 0; a < 2 * b; ++a) {
            if (std::gcd(a, b) != 1) continue;
            const RationalAngle q(a, b);
            const auto poly = cosine_min_poly(q);
            const auto cert = certify_irrational(q);
            double t = 2.0 * q.cos();
            if (std::abs(t) < 5e-13) t = 0.0;
            os << q.to_string() << ',' << std::fixed << std::setprecision(12) << t << std::defaultfloat
               << ',' << format_polynomial(poly.coeffs, 'x') << ',' << format_polynomial(rational_free_factor(poly), 'x')
               << ',';
            if (cert.irrational) os << "irrational\n";
            else os << "rational " << cert.num << (cert.den != 1 ? "/" + std::to_string(cert.den) : "") << '\n';
        }
    emit_text(cfg, os.str(), fallback);

    if (cfg.phase_denominator < 3 && !coherent) return kSuccess;
    const auto plan = sample_phase_plan(cfg.users, cfg.phase_denominator, derive_seed(cfg.seed, {seed_stream::phases, 0, 0}),
                                       coherent);
    int failures = 0;
    for (int j = 0; j < plan.users(); ++j)
        for (int k = 0; k < plan.branches(); ++k)
            for (int i = 0; i < plan.users(); ++i)
                for (int use = 0; use < 2; ++use) {
                    const auto delta = plan.difference(j, k, i, use);
                    if (admissible_difference(delta)) continue;
                    ++failures;
                    diag << "uncertified angle " << delta.to_string() << " at receiver " << j + 1 << " branch " << k + 1
                         << " transmitter " << i + 1 << " use " << use + 1 << '\n';
                }
    if (failures > 0) {
        diag << failures << " plan angle(s) failed certification\n";
        return kCheckFailed;
    }
    return kSuccess;
}

} // namespace ncia::cli
