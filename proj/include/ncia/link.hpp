#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "ncia/align.hpp"
#include "ncia/channel.hpp"
#include "ncia/config.hpp"
#include "ncia/modem.hpp"
#include "ncia/phases.hpp"
#include "ncia/rng.hpp"

namespace ncia {

enum class Loading { fh, uniform };

inline std::string to_string(Loading l) { return l == Loading::fh ? "fh" : "uniform"; }

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

struct LinkConfig {
    NetworkConfig network;
    SolverTag solver = SolverTag::closed3;
    std::vector<double> snr_grid_db;
    int trials = 100;
    std::uint64_t master_seed = 1;
    /// Branch noise standard deviation; 0 gives a noiseless run.
    double noise_std = 1.0;
    int phase_denominator = 360;
    /// Worker threads. Results do not depend on this value.
    int workers = 1;

    int leakage_max_iters = 20000;
    double leakage_tol = 1e-24;
    int maxsinr_iters = 100;
    /// Phase plans whose alignment leaves more normalized leakage, or keeps
    /// less than min_desired of some desired signal, are resampled
    /// (zero-forcing solvers only).
    double max_leakage = 1e-12;
    double min_desired = 1e-3;
    int max_resamples = 100;

    Loading loading = Loading::fh;
    /// Bits per block across all users (R_T); 0 means 2 bits per user.
    int total_rate = 0;
    int blocks_per_trial = 500;
    int min_errors = 100;

    int effective_total_rate() const { return total_rate > 0 ? total_rate : 2 * network.users; }

    void validate() const
    {
        network.validate();
        if (trials < 1) throw ConfigError("trials must be at least 1");
        if (snr_grid_db.empty()) throw ConfigError("SNR grid is empty");
        for (std::size_t n = 1; n < snr_grid_db.size(); ++n)
            if (!(snr_grid_db[n] > snr_grid_db[n - 1])) throw ConfigError("SNR grid must be strictly increasing");
        if (solver == SolverTag::closed3 && network.users != 3) throw ConfigError("closed3 requires 3 users");
        if (workers < 1) throw ConfigError("workers must be at least 1");
        if (noise_std < 0.0) throw ConfigError("noise standard deviation must be non-negative");
        if (blocks_per_trial < 1) throw ConfigError("blocks per trial must be at least 1");
    }
};

struct CurvePoint {
    double snr_db = 0.0;
    double mean = 0.0;
    double std_err = 0.0;
    int trials = 0;
};

struct BerPoint {
    double snr_db = 0.0;
    int user = 0;
    Loading loading = Loading::fh;
    std::uint64_t bits = 0;
    std::uint64_t errors = 0;
    /// Trials skipped for infeasible loading or failed alignment.
    int skipped = 0;

    double ber() const { return bits == 0 ? 0.0 : static_cast<double>(errors) / static_cast<double>(bits); }
};

struct LinkReport {
    std::vector<double> snr_grid_db;
    std::vector<CurvePoint> ia;
    std::vector<CurvePoint> tdma;
    std::vector<CurvePoint> bound;
    double dof_slope = std::numeric_limits<double>::quiet_NaN();
    double tdma_slope = std::numeric_limits<double>::quiet_NaN();
    int skipped_trials = 0;
    std::vector<BerPoint> ber;
};

/// Runs fn(index) for index in [0, count) on `workers` threads. Work units
/// write into their own slots, so results are independent of scheduling.
inline void parallel_for(int workers, int count, const std::function<void(int)>& fn)
{
    if (workers <= 1 || count <= 1) {
        for (int n = 0; n < count; ++n) fn(n);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> pool;
    const int threads = std::min(workers, count);
    pool.reserve(threads);
    for (int w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            for (int n = next++; n < count; n = next++) {
                try {
                    fn(n);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

/// Post-filter SINR per user with per-use power P = snr (symbol energy 2P)
/// and unit noise.
inline std::vector<double> per_user_sinr(const EquivalentNetwork& net, const IASolution& sol, double snr)
{
    const double energy = 2.0 * snr;
    std::vector<double> out(net.users);
    for (int i = 0; i < net.users; ++i) {
        const auto& u = sol.U[i];
        const double desired = u.dot(net.H(i, i) * sol.V[i]);
        double denom = u.dot(net.noise_cov[i] * u);
        for (int l = 0; l < net.users; ++l) {
            if (l == i) continue;
            const double x = u.dot(net.H(i, l) * sol.V[l]);
            denom += energy * x * x;
        }
        out[i] = energy * desired * desired / denom;
    }
    return out;
}

/// (1/4) log2(1 + SINR) bits per channel use: one real symbol per 2 uses.
inline std::vector<double> per_user_rates(const EquivalentNetwork& net, const IASolution& sol, double snr)
{
    auto rates = per_user_sinr(net, sol, snr);
    for (double& r : rates) r = 0.25 * std::log2(1.0 + r);
    return rates;
}

/// Orthogonal time sharing: each user alone in 1/K of the uses at per-use
/// power P, coherent reception.
inline double tdma_baseline(const ChannelRealization& real, double snr)
{
    const int k_users = real.users();
    double sum = 0.0;
    for (int i = 0; i < k_users; ++i) {
        const double gain = 0.5 * (real(i, i, 0) * real(i, i, 0) + real(i, i, 1) * real(i, i, 1));
        sum += 0.5 * std::log2(1.0 + snr * gain);
    }
    return sum / k_users;
}

/// (K/2) (1/2) log2(1 + snr): the sum-capacity curve without its o(log) term.
inline double capacity_bound(int users, double snr) { return 0.25 * users * std::log2(1.0 + snr); }

/// Effective SNR per unit transmit power of user i after filtering.
inline double effective_gain(const EquivalentNetwork& net, const IASolution& sol, int i)
{
    const auto& u = sol.U[i];
    const double d = u.dot(net.H(i, i) * sol.V[i]);
    return d * d / u.dot(net.noise_cov[i] * u);
}

/// init_seed only matters for the leakage solver's starting precoders.
inline IASolution solve_alignment(const EquivalentNetwork& net, const LinkConfig& cfg, double snr,
                                  std::optional<std::uint64_t> init_seed = std::nullopt)
{
    switch (cfg.solver) {
    case SolverTag::closed3: return closed_form_ia3(net).solution;
    case SolverTag::leakage: return min_leakage_solve(net, cfg.leakage_max_iters, cfg.leakage_tol, init_seed);
    case SolverTag::maxsinr: return max_sinr_solve(net, snr, cfg.maxsinr_iters);
    }
    throw ConfigError("unknown solver");
}

/// One Monte Carlo trial's network. For the zero-forcing solvers the
/// solution is SNR independent and is stored here.
struct PreparedTrial {
    ChannelRealization channel;
    EquivalentNetwork net;
    std::optional<IASolution> solution;
    int resamples = 0;
};

namespace seed_stream {
inline constexpr std::uint64_t channel = 1;
inline constexpr std::uint64_t phases = 2;
inline constexpr std::uint64_t payload = 3;
inline constexpr std::uint64_t solver_init = 4;
} // namespace seed_stream

/// Draws the trial's channel and resamples phase plans until the network is
/// non-degenerate and (for zero-forcing solvers) aligns below max_leakage.
/// Returns nullopt once max_resamples plans have failed.
inline std::optional<PreparedTrial> prepare_trial(const LinkConfig& cfg, const PhaseSampler& sampler, int trial)
{
    PreparedTrial out;
    out.channel = draw_channel(cfg.network, derive_seed(cfg.master_seed, {seed_stream::channel, std::uint64_t(trial)}));
    const int k_users = cfg.network.users;
    for (int attempt = 0; attempt < cfg.max_resamples; ++attempt) {
        const auto plan = sampler.sample(
            k_users, derive_seed(cfg.master_seed, {seed_stream::phases, std::uint64_t(trial), std::uint64_t(attempt)}));
        try {
            out.net = build_equivalent_network(out.channel, plan);
            if (cfg.solver != SolverTag::maxsinr) {
                auto sol = solve_alignment(
                    out.net, cfg, 1.0,
                    derive_seed(cfg.master_seed, {seed_stream::solver_init, std::uint64_t(trial), std::uint64_t(attempt)}));
                if (!(sol.leakage <= cfg.max_leakage) || !(min_desired_fraction(out.net, sol) >= cfg.min_desired)) continue;
                out.solution = std::move(sol);
            }
            out.resamples = attempt;
            return out;
        } catch (const DegeneratePhase&) {
        } catch (const NoRealAlignment&) {
        } catch (const DegenerateAlignment&) {
        }
    }
    return std::nullopt;
}

namespace detail {

inline std::vector<double> snr_linear(const std::vector<double>& grid_db)
{
    std::vector<double> out;
    for (double db : grid_db) out.push_back(db_to_linear(db));
    return out;
}

struct Moments {
    double sum = 0.0;
    double sum_sq = 0.0;
    int n = 0;

    void add(double x)
    {
        sum += x;
        sum_sq += x * x;
        ++n;
    }
    double mean() const { return n == 0 ? 0.0 : sum / n; }
    double std_err() const
    {
        if (n < 2) return 0.0;
        const double m = mean();
        const double var = std::max(0.0, (sum_sq - n * m * m) / (n - 1));
        return std::sqrt(var / n);
    }
};

} // namespace detail

/// Least-squares slope of mean sum rate against (1/2) log2(snr) over the
/// upper half of the grid.
inline double dof_slope(const std::vector<CurvePoint>& curve)
{
    const std::size_t start = curve.size() / 2;
    if (curve.size() - start < 2) return std::numeric_limits<double>::quiet_NaN();
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    double n = 0.0;
    for (std::size_t p = start; p < curve.size(); ++p) {
        const double x = 0.5 * std::log2(db_to_linear(curve[p].snr_db));
        const double y = curve[p].mean;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        n += 1.0;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Mean sum-rate of the aligned network against the TDMA baseline and the
/// capacity bound over the SNR grid.
inline LinkReport rate_sweep(const LinkConfig& cfg)
{
    cfg.validate();
    const PhaseSampler sampler(cfg.phase_denominator);
    const auto snr = detail::snr_linear(cfg.snr_grid_db);
    const std::size_t points = snr.size();

    struct TrialRates {
        std::vector<double> tdma;
        std::optional<std::vector<double>> ia;
    };
    std::vector<TrialRates> results(cfg.trials);

    parallel_for(cfg.workers, cfg.trials, [&](int t) {
        auto& r = results[t];
        const auto prepared = prepare_trial(cfg, sampler, t);
        const auto channel = prepared ? prepared->channel
                                      : draw_channel(cfg.network, derive_seed(cfg.master_seed, {seed_stream::channel, std::uint64_t(t)}));
        for (double s : snr) r.tdma.push_back(tdma_baseline(channel, s));
        if (!prepared) return;
        std::vector<double> ia;
        for (double s : snr) {
            const IASolution sol = prepared->solution ? *prepared->solution : solve_alignment(prepared->net, cfg, s);
            const auto rates = per_user_rates(prepared->net, sol, s);
            double sum = 0.0;
            for (double x : rates) sum += x;
            ia.push_back(sum);
        }
        r.ia = std::move(ia);
    });

    LinkReport rep;
    rep.snr_grid_db = cfg.snr_grid_db;
    std::vector<detail::Moments> ia(points), tdma(points);
    for (const auto& r : results) {
        for (std::size_t p = 0; p < points; ++p) tdma[p].add(r.tdma[p]);
        if (!r.ia) {
            ++rep.skipped_trials;
            continue;
        }
        for (std::size_t p = 0; p < points; ++p) ia[p].add((*r.ia)[p]);
    }
    for (std::size_t p = 0; p < points; ++p) {
        const double db = cfg.snr_grid_db[p];
        rep.ia.push_back({db, ia[p].mean(), ia[p].std_err(), ia[p].n});
        rep.tdma.push_back({db, tdma[p].mean(), tdma[p].std_err(), tdma[p].n});
        rep.bound.push_back({db, capacity_bound(cfg.network.users, snr[p]), 0.0, cfg.trials});
    }
    rep.dof_slope = dof_slope(rep.ia);
    rep.tdma_slope = dof_slope(rep.tdma);
    return rep;
}

/// Smallest grid SNR where the aligned sum rate beats TDMA with both standard
/// errors under 10% of the gap.
inline std::optional<double> crossover_scan(const LinkReport& rep)
{
    const std::size_t points = std::min(rep.ia.size(), rep.tdma.size());
    for (std::size_t p = 0; p < points; ++p) {
        const double gap = rep.ia[p].mean - rep.tdma[p].mean;
        if (gap > 0.0 && rep.ia[p].std_err < 0.1 * gap && rep.tdma[p].std_err < 0.1 * gap) return rep.ia[p].snr_db;
    }
    return std::nullopt;
}

struct BitCounts {
    std::vector<std::uint64_t> bits;
    std::vector<std::uint64_t> errors;
};

/// Sends `blocks` Gray-PAM blocks through the aligned network: receiver j
/// sees sum_i H[j][i] V[i] s_i plus correlated branch noise, filters with
/// U[j] and slices against its own constellation. Only active users count.
inline BitCounts simulate_blocks(const EquivalentNetwork& net, const IASolution& sol, const LoadingPlan& plan,
                                 double noise_std, int blocks, Rng& rng)
{
    const int k_users = net.users;
    BitCounts counts{std::vector<std::uint64_t>(k_users, 0), std::vector<std::uint64_t>(k_users, 0)};

    std::vector<Eigen::VectorXd> tx(k_users);
    for (int i = 0; i < k_users; ++i) tx[i] = Eigen::VectorXd::Zero(net.branches());
    PairGrid<Eigen::VectorXd> footprint(k_users);
    for (int j = 0; j < k_users; ++j)
        for (int i = 0; i < k_users; ++i) footprint(j, i) = net.H(j, i) * sol.V[i];

    std::vector<PamConstellation> constellations;
    std::vector<double> amplitude(k_users, 0.0);
    for (int i = 0; i < k_users; ++i) {
        constellations.emplace_back(1 << std::max(plan.rate[i], 1));
        amplitude[i] = sol.U[i].dot(footprint(i, i)) * std::sqrt(2.0 * plan.power[i]);
    }

    std::bernoulli_distribution coin(0.5);
    std::vector<std::vector<std::uint8_t>> bits(k_users);
    for (int b = 0; b < blocks; ++b) {
        for (int i : plan.active) {
            bits[i].resize(plan.rate[i]);
            for (auto& bit : bits[i]) bit = coin(rng) ? 1 : 0;
        }
        const auto symbols = pam_modulate(bits, plan);
        const auto noise = sample_branch_noise(net, noise_std, rng);
        for (int j : plan.active) {
            Eigen::VectorXd x = noise[j];
            for (int i : plan.active) x.noalias() += footprint(j, i) * symbols[i];
            const double y = sol.U[j].dot(x);
            const auto decided = amplitude[j] > 0.0 ? pam_detect(y, amplitude[j], constellations[j])
                                                    : std::vector<std::uint8_t>(plan.rate[j], 0);
            for (int k = 0; k < plan.rate[j]; ++k)
                if (decided[k] != bits[j][k]) ++counts.errors[j];
            counts.bits[j] += static_cast<std::uint64_t>(plan.rate[j]);
        }
    }
    return counts;
}

/// Rate/power plan for one trial from the post-alignment gains. The total
/// power budget is K * snr, i.e. per-use power snr per user on average.
inline LoadingPlan plan_loading(const EquivalentNetwork& net, const IASolution& sol, const LinkConfig& cfg, double snr)
{
    std::vector<double> gains(net.users);
    for (int i = 0; i < net.users; ++i) gains[i] = std::max(effective_gain(net, sol, i), 1e-300);
    const double total_power = net.users * snr;
    return cfg.loading == Loading::fh ? fh_loading(gains, cfg.effective_total_rate(), total_power)
                                      : uniform_loading(gains, cfg.effective_total_rate(), total_power);
}

/// Per-user bit error rates over the SNR grid. At each point trials run in
/// fixed batches until at least min_errors bit errors are seen or the trial
/// cap is reached; the stopping point depends only on the batch order.
inline LinkReport ber_sweep(const LinkConfig& cfg)
{
    cfg.validate();
    constexpr int kBatch = 16;
    const PhaseSampler sampler(cfg.phase_denominator);
    const auto snr = detail::snr_linear(cfg.snr_grid_db);
    const int k_users = cfg.network.users;

    std::vector<std::optional<PreparedTrial>> prepared(cfg.trials);
    std::vector<bool> ready(cfg.trials, false);

    LinkReport rep;
    rep.snr_grid_db = cfg.snr_grid_db;
    for (std::size_t p = 0; p < snr.size(); ++p) {
        std::vector<std::uint64_t> bits(k_users, 0), errors(k_users, 0);
        int skipped = 0;
        for (int first = 0; first < cfg.trials; first += kBatch) {
            const int count = std::min(kBatch, cfg.trials - first);
            std::vector<std::optional<BitCounts>> batch(count);
            parallel_for(cfg.workers, count, [&](int n) {
                const int t = first + n;
                if (!ready[t]) prepared[t] = prepare_trial(cfg, sampler, t);
                if (!prepared[t]) return;
                const auto& trial = *prepared[t];
                const IASolution sol = trial.solution ? *trial.solution : solve_alignment(trial.net, cfg, snr[p]);
                try {
                    const auto plan = plan_loading(trial.net, sol, cfg, snr[p]);
                    Rng rng(derive_seed(cfg.master_seed, {seed_stream::payload, std::uint64_t(t), std::uint64_t(p)}));
                    batch[n] = simulate_blocks(trial.net, sol, plan, cfg.noise_std, cfg.blocks_per_trial, rng);
                } catch (const InfeasibleRate&) {
                }
            });
            for (int n = 0; n < count; ++n) ready[first + n] = true;

            std::uint64_t total_errors = 0;
            for (int n = 0; n < count; ++n) {
                if (!batch[n]) {
                    ++skipped;
                    continue;
                }
                for (int i = 0; i < k_users; ++i) {
                    bits[i] += batch[n]->bits[i];
                    errors[i] += batch[n]->errors[i];
                }
            }
            for (auto e : errors) total_errors += e;
            if (total_errors >= static_cast<std::uint64_t>(cfg.min_errors)) break;
        }
        for (int i = 0; i < k_users; ++i)
            rep.ber.push_back({cfg.snr_grid_db[p], i + 1, cfg.loading, bits[i], errors[i], skipped});
        rep.skipped_trials = std::max(rep.skipped_trials, skipped);
    }
    return rep;
}

/// Exact-grid helper: start, start + step, ... up to stop (inclusive within
/// a small tolerance).
inline std::vector<double> snr_grid(double start_db, double stop_db, double step_db)
{
    if (!(step_db > 0.0)) throw ConfigError("SNR step must be positive");
    if (stop_db < start_db) throw ConfigError("SNR stop is below SNR start");
    std::vector<double> grid;
    const auto n = static_cast<long>(std::floor((stop_db - start_db) / step_db + 1e-9));
    for (long k = 0; k <= n; ++k) grid.push_back(start_db + static_cast<double>(k) * step_db);
    return grid;
}

} // namespace ncia
