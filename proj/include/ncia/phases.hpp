#pragma once

// Rational-multiple-of-pi phase offsets and the exact integer machinery that
// certifies every cosine factor of the equivalent channel as irrational.
//
// The object certified is t = 2cos(q), not cos(q): 2cos of a rational
// multiple of pi is always a root of a monic integer polynomial, so it is
// either an integer or irrational. The integers reachable are -2..2, which
// is exactly the rational-cosine set {0, +-1/2, +-1}.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>

#include "ncia/error.hpp"
#include "ncia/rng.hpp"

namespace ncia {

/// Smallest admissible |cos| of any phase difference used by the channel.
inline constexpr double kCosineFloor = 1e-6;

/// Largest polynomial degree built explicitly by certify_irrational.
inline constexpr std::int64_t kExplicitDegreeLimit = 64;

/// The angle a*pi/b, kept reduced with gcd(a, b) = 1 and 0 <= a < 2b.
class RationalAngle {
public:
    constexpr RationalAngle() = default;

    RationalAngle(std::int64_t numerator, std::int64_t denominator)
    {
        if (denominator == 0) throw DomainError("rational angle with zero denominator");
        if (denominator < 0) {
            numerator = -numerator;
            denominator = -denominator;
        }
        const std::int64_t period = 2 * denominator;
        numerator %= period;
        if (numerator < 0) numerator += period;
        const std::int64_t g = std::gcd(numerator, denominator);
        a_ = numerator / g;
        b_ = denominator / g;
    }

    constexpr std::int64_t numerator() const noexcept { return a_; }
    constexpr std::int64_t denominator() const noexcept { return b_; }

    double radians() const noexcept
    {
        return std::numbers::pi * static_cast<double>(a_) / static_cast<double>(b_);
    }
    double cos() const noexcept { return std::cos(radians()); }
    double sin() const noexcept { return std::sin(radians()); }

    friend RationalAngle operator-(const RationalAngle& x, const RationalAngle& y)
    {
        return {x.a_ * y.b_ - y.a_ * x.b_, x.b_ * y.b_};
    }
    friend RationalAngle operator+(const RationalAngle& x, const RationalAngle& y)
    {
        return {x.a_ * y.b_ + y.a_ * x.b_, x.b_ * y.b_};
    }
    friend bool operator==(const RationalAngle&, const RationalAngle&) = default;

    std::string to_string() const
    {
        if (a_ == 0) return "0";
        std::ostringstream os;
        if (a_ != 1) os << a_;
        os << "pi";
        if (b_ != 1) os << '/' << b_;
        return os.str();
    }

private:
    std::int64_t a_ = 0;
    std::int64_t b_ = 1;
};

/// Monic integer polynomial satisfied by t = 2cos(q). Coefficients are stored
/// in ascending order, so coeffs.back() == 1.
struct CosinePolynomial {
    RationalAngle q;
    std::vector<std::int64_t> coeffs;

    int degree() const noexcept { return static_cast<int>(coeffs.size()) - 1; }

    // Horner in extended precision: near t = +-2 the monomial terms cancel
    // by many orders of magnitude once the degree passes ~20.
    double evaluate(double t) const noexcept
    {
        long double acc = 0.0L;
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it)
            acc = acc * t + static_cast<long double>(*it);
        return static_cast<double>(acc);
    }
};

namespace detail {

using BigInt = boost::multiprecision::cpp_int;
using BigRational = boost::multiprecision::cpp_rational;
using RationalPoly = std::vector<BigRational>;

inline std::int64_t checked_mul(std::int64_t x, std::int64_t y)
{
    std::int64_t r;
    if (__builtin_mul_overflow(x, y, &r)) throw std::overflow_error("cosine polynomial overflow");
    return r;
}

inline std::int64_t checked_sub(std::int64_t x, std::int64_t y)
{
    std::int64_t r;
    if (__builtin_sub_overflow(x, y, &r)) throw std::overflow_error("cosine polynomial overflow");
    return r;
}

inline void trim(RationalPoly& p)
{
    while (p.size() > 1 && p.back() == 0) p.pop_back();
}

inline RationalPoly poly_mod(RationalPoly num, const RationalPoly& den)
{
    trim(num);
    while (num.size() >= den.size() && !(num.size() == 1 && num[0] == 0)) {
        const BigRational factor = num.back() / den.back();
        const std::size_t shift = num.size() - den.size();
        for (std::size_t i = 0; i < den.size(); ++i) num[i + shift] -= factor * den[i];
        num.pop_back();
        trim(num);
    }
    return num;
}

inline RationalPoly poly_div_exact(RationalPoly num, const RationalPoly& den)
{
    trim(num);
    RationalPoly quot(num.size() - den.size() + 1);
    while (num.size() >= den.size()) {
        const BigRational factor = num.back() / den.back();
        const std::size_t shift = num.size() - den.size();
        quot[shift] = factor;
        for (std::size_t i = 0; i < den.size(); ++i) num[i + shift] -= factor * den[i];
        num.pop_back();
        if (num.empty()) break;
    }
    return quot;
}

inline RationalPoly poly_gcd(RationalPoly x, RationalPoly y)
{
    trim(x);
    trim(y);
    while (!(y.size() == 1 && y[0] == 0)) {
        RationalPoly r = poly_mod(x, y);
        x = std::move(y);
        y = std::move(r);
    }
    const BigRational lead = x.back();
    for (auto& c : x) c /= lead;
    return x;
}

} // namespace detail

/// Builds t_b(t) - 2(-1)^a for q = a*pi/b, where t_0 = 2, t_1 = t and
/// t_n = t*t_{n-1} - t_{n-2}. Since t_n(2cos x) = 2cos(nx), the value
/// t = 2cos(q) is a root. Throws std::overflow_error past int64 range
/// (degrees above roughly 90).
inline CosinePolynomial cosine_min_poly(const RationalAngle& q)
{
    const std::int64_t b = q.denominator();
    std::vector<std::int64_t> prev{2};
    std::vector<std::int64_t> cur{0, 1};
    for (std::int64_t n = 2; n <= b; ++n) {
        std::vector<std::int64_t> next(cur.size() + 1, 0);
        for (std::size_t i = 0; i < cur.size(); ++i) next[i + 1] = cur[i];
        for (std::size_t i = 0; i < prev.size(); ++i) next[i] = detail::checked_sub(next[i], prev[i]);
        prev = std::move(cur);
        cur = std::move(next);
    }
    const std::int64_t rhs = (q.numerator() % 2 == 0) ? 2 : -2;
    cur[0] = detail::checked_sub(cur[0], rhs);
    return {q, std::move(cur)};
}

/// Exact value of t_n(z) for an integer z in [-2, 2]. The state (t_k, t_k+1)
/// of the recurrence is periodic with period dividing 12 for those z.
inline std::int64_t chebyshev_at_integer(std::int64_t n, std::int64_t z)
{
    if (z < -2 || z > 2) throw DomainError("chebyshev_at_integer needs |z| <= 2");
    if (n < 0) throw DomainError("chebyshev_at_integer needs n >= 0");
    std::array<std::int64_t, 14> t{};
    t[0] = 2;
    t[1] = z;
    for (std::size_t k = 2; k < t.size(); ++k) t[k] = z * t[k - 1] - t[k - 2];
    if (t[12] != t[0] || t[13] != t[1]) throw std::logic_error("recurrence period does not divide 12");
    return t[static_cast<std::size_t>(n % 12)];
}

/// All integer roots of a monic integer polynomial: zero when the constant
/// term vanishes, plus every divisor of the lowest nonzero coefficient that
/// evaluates to exactly zero.
inline std::vector<std::int64_t> integer_roots(const CosinePolynomial& p)
{
    std::size_t low = 0;
    while (low < p.coeffs.size() && p.coeffs[low] == 0) ++low;
    std::vector<std::int64_t> roots;
    if (low > 0) roots.push_back(0);
    if (low >= p.coeffs.size() - 1) return roots;

    const auto eval = [&](std::int64_t z) {
        detail::BigInt acc = 0;
        for (auto it = p.coeffs.rbegin(); it != p.coeffs.rend(); ++it) acc = acc * z + *it;
        return acc;
    };
    const std::int64_t c = p.coeffs[low] < 0 ? -p.coeffs[low] : p.coeffs[low];
    for (std::int64_t d = 1; d * d <= c; ++d) {
        if (c % d != 0) continue;
        for (std::int64_t cand : {d, -d, c / d, -(c / d)})
            if (std::find(roots.begin(), roots.end(), cand) == roots.end() && eval(cand) == 0)
                roots.push_back(cand);
    }
    std::sort(roots.begin(), roots.end());
    return roots;
}

/// The factor left after dividing out every integer root (with multiplicity)
/// and taking the square-free part. For q = pi/5 this is t^2 - t - 1.
inline std::vector<std::int64_t> rational_free_factor(const CosinePolynomial& p)
{
    detail::RationalPoly poly(p.coeffs.begin(), p.coeffs.end());
    for (std::int64_t z : integer_roots(p)) {
        const detail::RationalPoly linear{detail::BigRational(-z), detail::BigRational(1)};
        while (poly.size() > 1) {
            const auto rem = detail::poly_mod(poly, linear);
            if (!(rem.size() == 1 && rem[0] == 0)) break;
            poly = detail::poly_div_exact(poly, linear);
        }
    }
    detail::RationalPoly deriv;
    for (std::size_t i = 1; i < poly.size(); ++i)
        deriv.push_back(poly[i] * static_cast<long long>(i));
    if (deriv.empty()) deriv.push_back(0);
    detail::RationalPoly squarefree = poly;
    if (!(deriv.size() == 1 && deriv[0] == 0)) {
        const auto g = detail::poly_gcd(poly, deriv);
        squarefree = detail::poly_div_exact(poly, g);
    }
    const detail::BigRational lead = squarefree.back();
    std::vector<std::int64_t> out;
    for (const auto& c : squarefree) {
        const detail::BigRational v = c / lead;
        if (denominator(v) != 1) throw std::logic_error("non-integral factor of a monic polynomial");
        out.push_back(static_cast<std::int64_t>(numerator(v)));
    }
    return out;
}

inline std::string format_polynomial(const std::vector<std::int64_t>& coeffs, char var = 't')
{
    std::ostringstream os;
    bool first = true;
    for (std::size_t i = coeffs.size(); i-- > 0;) {
        const std::int64_t c = coeffs[i];
        if (c == 0) continue;
        const std::int64_t mag = c < 0 ? -c : c;
        if (first) {
            if (c < 0) os << '-';
        } else {
            os << (c < 0 ? " - " : " + ");
        }
        if (mag != 1 || i == 0) os << mag;
        if (i >= 1) os << var;
        if (i >= 2) os << '^' << i;
        first = false;
    }
    if (first) os << '0';
    return os.str();
}

/// Verdict on cos(q): irrational, or the exact rational num/den.
struct CosineCertificate {
    bool irrational = true;
    std::int64_t num = 0;
    std::int64_t den = 1;

    double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
};

namespace detail {

inline CosineCertificate rational_from_root(std::int64_t z)
{
    // cos(q) = z / 2, reduced
    if (z % 2 == 0) return {false, z / 2, 1};
    return {false, z, 2};
}

// Distinct roots of the cosine polynomial near +-2 are separated by about
// (2pi/b)^2, so the match window must shrink with b.
inline double root_match_tolerance(std::int64_t b)
{
    const double spacing = std::numbers::pi / static_cast<double>(b);
    return std::min(1e-9, 0.25 * spacing * spacing);
}

} // namespace detail

/// Certificate via the explicit polynomial: an integer root equal to 2cos(q)
/// means cos(q) is rational; otherwise Gauss's lemma makes 2cos(q), a
/// non-integer root of a monic integer polynomial, irrational.
inline CosineCertificate certify_by_divisors(const RationalAngle& q)
{
    const auto poly = cosine_min_poly(q);
    const double t = 2.0 * q.cos();
    const double tol = detail::root_match_tolerance(q.denominator());
    for (std::int64_t z : integer_roots(poly))
        if (std::abs(t - static_cast<double>(z)) < tol) return detail::rational_from_root(z);
    return {};
}

/// Same certificate for any degree. Every root of t_b(t) - c with |c| <= 2
/// lies in [-2, 2] (for |t| > 2, |t_b(t)| > 2), so the only integer
/// candidates are -2..2, each tested exactly through the recurrence.
inline CosineCertificate certify_by_root_range(const RationalAngle& q)
{
    const double t = 2.0 * q.cos();
    const double tol = detail::root_match_tolerance(q.denominator());
    const std::int64_t rhs = (q.numerator() % 2 == 0) ? 2 : -2;
    for (std::int64_t z = -2; z <= 2; ++z) {
        if (chebyshev_at_integer(q.denominator(), z) != rhs) continue;
        if (std::abs(t - static_cast<double>(z)) < tol) return detail::rational_from_root(z);
    }
    return {};
}

inline CosineCertificate certify_irrational(const RationalAngle& q)
{
    if (q.denominator() <= kExplicitDegreeLimit) return certify_by_divisors(q);
    return certify_by_root_range(q);
}

/// (a + d)^2 / (ad - bc) for the transformation x -> (ax + b) / (cx + d).
inline double similarity_parameter(const Eigen::Matrix2d& m)
{
    const double tr = m.trace();
    return tr * tr / m.determinant();
}

/// Checks that h(x) = 1 - 1/(sigma x), sigma = 4cos^2(a pi / p), has period p:
/// its matrix [[sigma, -1], [sigma, 0]] raised to the p-th power must be a
/// scalar multiple of the identity.
inline bool mobius_period_check(int p, int a)
{
    if (p < 2 || a < 1 || a >= p || std::gcd(a, p) != 1)
        throw DomainError("mobius_period_check needs 1 <= a < p with gcd(a, p) = 1");
    const double c = std::cos(std::numbers::pi * a / p);
    const double sigma = 4.0 * c * c;
    if (sigma < 1e-12) throw DomainError("similarity parameter vanishes");

    Eigen::Matrix2d m;
    m << sigma, -1.0, sigma, 0.0;
    Eigen::Matrix2d power = Eigen::Matrix2d::Identity();
    for (int i = 0; i < p; ++i) power = power * m;

    const double scale = std::pow(m.norm(), p);
    const double tol = 1e-9 * scale;
    return std::abs(power(0, 1)) < tol && std::abs(power(1, 0)) < tol &&
           std::abs(power(0, 0) - power(1, 1)) < tol;
}

/// Transmitter offsets theta[i][use] and receiver branch offsets
/// phi[j][k][use].
struct PhasePlan {
    std::vector<std::array<RationalAngle, 2>> theta;
    std::vector<std::vector<std::array<RationalAngle, 2>>> phi;
    /// false for plans that skipped certification (coherent control plans)
    bool certified = false;

    int users() const noexcept { return static_cast<int>(theta.size()); }
    int branches() const noexcept { return phi.empty() ? 0 : static_cast<int>(phi.front().size()); }

    /// Angle phi_{k,use}^{[j]} - theta_use^{[i]} entering H[j][i](k, use).
    RationalAngle difference(int j, int k, int i, int use) const
    {
        return phi[j][k][use] - theta[i][use];
    }

    /// All offsets zero: the coherent-demodulation control case.
    static PhasePlan coherent(int users)
    {
        PhasePlan plan;
        plan.theta.assign(users, {});
        plan.phi.assign(users, std::vector<std::array<RationalAngle, 2>>(users - 1));
        plan.certified = false;
        return plan;
    }
};

/// True when cos(delta) is certified irrational and clears the degeneracy floor.
inline bool admissible_difference(const RationalAngle& delta)
{
    if (std::abs(delta.cos()) < kCosineFloor) return false;
    return certify_irrational(delta).irrational;
}

/// Re-checks both plan invariants over every used (receiver offset,
/// transmitter offset) pair.
inline bool verify_plan(const PhasePlan& plan)
{
    const int k_users = plan.users();
    for (int j = 0; j < k_users; ++j)
        for (int k = 0; k < plan.branches(); ++k)
            for (int use = 0; use < 2; ++use)
                for (int i = 0; i < k_users; ++i)
                    if (!admissible_difference(plan.difference(j, k, i, use))) return false;
    return true;
}

/// Samples certified phase plans over the reduced fractions a*pi/b with
/// b <= denominator_bound. The fraction table is built once, and the sampler
/// is immutable afterwards, so one instance can serve concurrent workers.
class PhaseSampler {
public:
    static constexpr int kMaxPlanAttempts = 2000;
    static constexpr int kMaxOffsetTries = 256;

    explicit PhaseSampler(int denominator_bound) : bound_(denominator_bound)
    {
        // Below 3 every difference has denominator 1 or 2, always rational.
        if (denominator_bound < 3)
            throw ConfigError("phase denominator bound " + std::to_string(denominator_bound) +
                              " admits no certified plan");
        for (std::int64_t b = 1; b <= denominator_bound; ++b)
            for (std::int64_t a = 0; a < 2 * b; ++a)
                if (std::gcd(a, b) == 1) table_.emplace_back(a, b);
    }

    int denominator_bound() const noexcept { return bound_; }
    std::size_t fraction_count() const noexcept { return table_.size(); }

    PhasePlan sample(int users, std::uint64_t seed) const
    {
        Rng rng(seed);
        std::uniform_int_distribution<std::size_t> pick(0, table_.size() - 1);
        PhasePlan plan;
        plan.theta.resize(users);
        plan.phi.assign(users, std::vector<std::array<RationalAngle, 2>>(users - 1));
        for (int attempt = 0; attempt < kMaxPlanAttempts; ++attempt) {
            for (auto& t : plan.theta)
                for (auto& x : t) x = table_[pick(rng)];
            if (fill_receivers(plan, rng, pick)) {
                plan.certified = true;
                return plan;
            }
        }
        throw ConfigError("phase denominator bound " + std::to_string(bound_) +
                          " too small to admit a certified plan");
    }

private:
    template <class Dist>
    bool fill_receivers(PhasePlan& plan, Rng& rng, Dist& pick) const
    {
        const int k_users = plan.users();
        for (int j = 0; j < k_users; ++j)
            for (int k = 0; k < k_users - 1; ++k)
                for (int use = 0; use < 2; ++use) {
                    bool found = false;
                    for (int tries = 0; tries < kMaxOffsetTries && !found; ++tries) {
                        const RationalAngle cand = table_[pick(rng)];
                        found = std::all_of(plan.theta.begin(), plan.theta.end(), [&](const auto& t) {
                            return admissible_difference(cand - t[use]);
                        });
                        if (found) plan.phi[j][k][use] = cand;
                    }
                    if (!found) return false;
                }
        return true;
    }

    int bound_;
    std::vector<RationalAngle> table_;
};

/// One-shot convenience wrapper around PhaseSampler. With coherent_override
/// every offset is zero and the plan is marked non-certified.
inline PhasePlan sample_phase_plan(int users, int denominator_bound, std::uint64_t seed,
                                   bool coherent_override = false)
{
    if (users < 3) throw ConfigError("network needs at least 3 users");
    if (coherent_override) return PhasePlan::coherent(users);
    return PhaseSampler(denominator_bound).sample(users, seed);
}

} // namespace ncia
