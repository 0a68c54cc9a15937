#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ncia/error.hpp"

namespace ncia {

inline constexpr std::uint32_t gray_encode(std::uint32_t m) noexcept { return m ^ (m >> 1); }

inline constexpr std::uint32_t gray_decode(std::uint32_t g) noexcept
{
    std::uint32_t m = g;
    for (std::uint32_t shift = 1; shift < 32; shift <<= 1) m ^= m >> shift;
    return m;
}

/// M-ary PAM with equispaced symmetric levels scaled to unit average energy.
/// Level index m carries the Gray code of m, most significant bit first.
class PamConstellation {
public:
    explicit PamConstellation(int order) : order_(order)
    {
        if (order < 2 || (order & (order - 1)) != 0)
            throw ConfigError("PAM order must be a power of two >= 2, got " + std::to_string(order));
        bits_ = std::countr_zero(static_cast<unsigned>(order));
        scale_ = std::sqrt(3.0 / (static_cast<double>(order) * order - 1.0));
    }

    static PamConstellation from_bits(int bits) { return PamConstellation(1 << bits); }

    int order() const noexcept { return order_; }
    int bits_per_symbol() const noexcept { return bits_; }
    /// Distance between adjacent levels.
    double spacing() const noexcept { return 2.0 * scale_; }

    double level(int m) const noexcept { return (2.0 * m - order_ + 1.0) * scale_; }

    std::vector<double> points() const
    {
        std::vector<double> p(order_);
        for (int m = 0; m < order_; ++m) p[m] = level(m);
        return p;
    }

    double map(std::span<const std::uint8_t> bits) const
    {
        if (static_cast<int>(bits.size()) != bits_) throw ConfigError("bit group does not match PAM order");
        std::uint32_t g = 0;
        for (auto b : bits) g = (g << 1) | (b & 1U);
        return level(static_cast<int>(gray_decode(g)));
    }

    /// Nearest level to x; exact midpoints resolve to the lower level.
    int nearest_index(double x) const noexcept
    {
        const double pos = (x / scale_ + order_ - 1.0) / 2.0;
        const double m = std::ceil(pos - 0.5);
        return static_cast<int>(std::clamp(m, 0.0, static_cast<double>(order_ - 1)));
    }

    std::vector<std::uint8_t> demap(int m) const
    {
        const std::uint32_t g = gray_encode(static_cast<std::uint32_t>(m));
        std::vector<std::uint8_t> bits(bits_);
        for (int k = 0; k < bits_; ++k) bits[k] = static_cast<std::uint8_t>((g >> (bits_ - 1 - k)) & 1U);
        return bits;
    }

private:
    int order_;
    int bits_ = 1;
    double scale_ = 1.0;
};

/// Rate and power allocation over the users' post-alignment scalar channels.
struct LoadingPlan {
    std::vector<int> active;      // indices of users carrying data, ascending
    std::vector<int> rate;        // bits per block, 0 for inactive users
    std::vector<double> power;    // transmit power share, 0 for inactive users
    std::vector<double> gains;    // effective gain per user

    int total_rate() const { return std::accumulate(rate.begin(), rate.end(), 0); }
    double total_power() const { return std::accumulate(power.begin(), power.end(), 0.0); }
};

/// Real-valued Fischer-Huber rates before integer rounding.
struct RealRates {
    std::vector<bool> active;
    std::vector<double> rate;
};

/// R[i] = R_T/n + (1/2) log2(g[i] / GM) over the active set, where GM is the
/// geometric mean of the active gains. The weakest user is dropped while any
/// rate is non-positive.
inline RealRates fh_real_rates(std::span<const double> gains, double total_rate)
{
    const std::size_t k = gains.size();
    for (double g : gains)
        if (!(g > 0.0)) throw ConfigError("loading needs positive gains");
    RealRates out{std::vector<bool>(k, true), std::vector<double>(k, 0.0)};
    for (;;) {
        std::size_t n = 0;
        double mean_log = 0.0;
        for (std::size_t i = 0; i < k; ++i)
            if (out.active[i]) {
                ++n;
                mean_log += std::log2(gains[i]);
            }
        mean_log /= static_cast<double>(n);
        std::size_t worst = k;
        for (std::size_t i = 0; i < k; ++i) {
            if (!out.active[i]) {
                out.rate[i] = 0.0;
                continue;
            }
            out.rate[i] = total_rate / static_cast<double>(n) + 0.5 * (std::log2(gains[i]) - mean_log);
            if (out.rate[i] <= 0.0 && (worst == k || out.rate[i] < out.rate[worst])) worst = i;
        }
        if (worst == k) return out;
        out.active[worst] = false;
    }
}

namespace detail {

inline void assign_powers(LoadingPlan& plan, double total_power)
{
    plan.power.assign(plan.rate.size(), 0.0);
    double denom = 0.0;
    for (int i : plan.active) denom += std::exp2(2.0 * plan.rate[i]) / plan.gains[i];
    for (int i : plan.active) plan.power[i] = total_power * (std::exp2(2.0 * plan.rate[i]) / plan.gains[i]) / denom;
}

} // namespace detail

/// Fischer-Huber loading: real rates from fh_real_rates, rounded to integers
/// by largest fractional part (ties toward the larger gain) so the total is
/// exact, then P[i] proportional to 2^(2R[i]) / g[i], which equalizes the
/// minimum distance across active channels.
inline LoadingPlan fh_loading(std::span<const double> gains, int total_rate, double total_power)
{
    if (total_rate < 1) throw InfeasibleRate("total rate must be at least one bit");
    if (!(total_power > 0.0)) throw ConfigError("total power must be positive");
    const auto real = fh_real_rates(gains, total_rate);
    const std::size_t k = gains.size();

    LoadingPlan plan;
    plan.gains.assign(gains.begin(), gains.end());
    plan.rate.assign(k, 0);
    std::vector<std::size_t> order;
    int assigned = 0;
    for (std::size_t i = 0; i < k; ++i)
        if (real.active[i]) {
            plan.rate[i] = static_cast<int>(std::floor(real.rate[i]));
            assigned += plan.rate[i];
            order.push_back(i);
        }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        const double fx = real.rate[x] - std::floor(real.rate[x]);
        const double fy = real.rate[y] - std::floor(real.rate[y]);
        if (std::abs(fx - fy) > 1e-9) return fx > fy;
        return gains[x] > gains[y];
    });
    for (std::size_t r = 0; assigned < total_rate; ++r, ++assigned) plan.rate[order[r % order.size()]] += 1;
    if (assigned != total_rate) throw InfeasibleRate("rounded rates do not meet the total rate");

    for (std::size_t i = 0; i < k; ++i)
        if (plan.rate[i] > 0) plan.active.push_back(static_cast<int>(i));
    if (plan.active.empty()) throw InfeasibleRate("no channel can carry data");
    detail::assign_powers(plan, total_power);
    return plan;
}

/// Equal split: every user gets R_T / K bits (remainder to the strongest
/// users) and P_T / K power.
inline LoadingPlan uniform_loading(std::span<const double> gains, int total_rate, double total_power)
{
    const int k = static_cast<int>(gains.size());
    if (total_rate < k) throw InfeasibleRate("uniform loading needs at least one bit per user");
    LoadingPlan plan;
    plan.gains.assign(gains.begin(), gains.end());
    plan.rate.assign(k, total_rate / k);
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return gains[x] > gains[y]; });
    for (int r = 0; r < total_rate % k; ++r) plan.rate[order[r]] += 1;
    plan.active = std::vector<int>(k);
    std::iota(plan.active.begin(), plan.active.end(), 0);
    plan.power.assign(k, total_power / k);
    return plan;
}

/// One transmit symbol: the Gray-mapped unit-energy level scaled by
/// sqrt(2P), so a symbol spread over the 2-use block averages power P per use.
inline double pam_modulate(std::span<const std::uint8_t> bits, int rate, double power)
{
    return std::sqrt(2.0 * power) * PamConstellation::from_bits(rate).map(bits);
}

/// Per-user symbols for one block; inactive users send 0.
inline std::vector<double> pam_modulate(const std::vector<std::vector<std::uint8_t>>& bits, const LoadingPlan& plan)
{
    std::vector<double> symbols(plan.rate.size(), 0.0);
    for (int i : plan.active) symbols[i] = pam_modulate(bits[i], plan.rate[i], plan.power[i]);
    return symbols;
}

/// Minimum-distance slicer. effective_gain is the amplitude mapping a
/// unit-energy level onto the observation.
inline std::vector<std::uint8_t> pam_detect(double observation, double effective_gain,
                                            const PamConstellation& constellation)
{
    if (!(effective_gain > 0.0)) throw DomainError("detection needs a positive effective gain");
    return constellation.demap(constellation.nearest_index(observation / effective_gain));
}

} // namespace ncia
