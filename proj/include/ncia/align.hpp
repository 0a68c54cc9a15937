#pragma once

#include <array>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ncia/channel.hpp"
#include "ncia/error.hpp"
#include "ncia/rng.hpp"

namespace ncia {

enum class SolverTag { closed3, leakage, maxsinr };

inline std::string to_string(SolverTag tag)
{
    switch (tag) {
    case SolverTag::closed3: return "closed3";
    case SolverTag::leakage: return "leakage";
    case SolverTag::maxsinr: return "maxsinr";
    }
    return "?";
}

/// Unit precoders V[i] (2-vectors) and unit receive filters U[j]
/// ((K-1)-vectors) with alignment diagnostics.
struct IASolution {
    std::vector<Eigen::Vector2d> V;
    std::vector<Eigen::VectorXd> U;
    SolverTag solver = SolverTag::closed3;
    /// Normalized residual interference power, see leakage_of.
    double leakage = 0.0;
    int iterations_used = 0;
    /// Raw interference power after every half-iteration (leakage solver only).
    std::vector<double> leakage_history;
};

/// Sum over receivers and interferers of (U[j]^T H[j][i] V[i])^2.
inline double interference_power(const EquivalentNetwork& net, const std::vector<Eigen::Vector2d>& V,
                                 const std::vector<Eigen::VectorXd>& U)
{
    double total = 0.0;
    for (int j = 0; j < net.users; ++j)
        for (int i = 0; i < net.users; ++i) {
            if (i == j) continue;
            const double x = U[j].dot(net.H(j, i) * V[i]);
            total += x * x;
        }
    return total;
}

/// Post-filter interference power normalized by the pre-filter interference
/// power. Zero iff interference is aligned and zero-forced everywhere.
inline double leakage_of(const EquivalentNetwork& net, const std::vector<Eigen::Vector2d>& V,
                         const std::vector<Eigen::VectorXd>& U)
{
    double before = 0.0;
    for (int j = 0; j < net.users; ++j)
        for (int i = 0; i < net.users; ++i)
            if (i != j) before += (net.H(j, i) * V[i]).squaredNorm();
    if (before == 0.0) return 0.0;
    return interference_power(net, V, U) / before;
}

namespace detail {

// First nonzero component positive.
template <class Vec>
void canonical_sign(Vec& v)
{
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        if (v(k) == 0.0) continue;
        if (v(k) < 0.0) v = -v;
        return;
    }
}

// Flip each receive filter so the desired effective gain is non-negative.
inline void orient_filters(const EquivalentNetwork& net, IASolution& sol)
{
    for (int j = 0; j < net.users; ++j) {
        canonical_sign(sol.V[j]);
    }
    for (int j = 0; j < net.users; ++j)
        if (sol.U[j].dot(net.H(j, j) * sol.V[j]) < 0.0) sol.U[j] = -sol.U[j];
}

inline double sine_between(const Eigen::Vector2d& x, const Eigen::Vector2d& y)
{
    const double nx = x.norm();
    const double ny = y.norm();
    if (nx == 0.0 || ny == 0.0) return 0.0;
    return std::abs(x(0) * y(1) - x(1) * y(0)) / (nx * ny);
}

} // namespace detail

/// Intermediate matrices of the 3-user closed form, with all free alignment
/// scalars set to 1.
struct AlignmentReport {
    Eigen::Matrix2d E = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d F = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d G = Eigen::Matrix2d::Zero();
    double eigenvalue = 0.0;
    /// 0 for the larger root of the characteristic polynomial, 1 for the smaller.
    int eigenvector_index = 0;
    /// Sine of the angle between the two interference vectors per receiver.
    std::array<double, 3> residuals{};
    /// Sine of the angle between desired signal and aligned interference.
    std::array<double, 3> desired_separation{};
    bool degenerate = false;
};

struct ClosedFormResult {
    IASolution solution;
    AlignmentReport report;
};

struct ClosedFormOptions {
    /// Angle (radians) under which the desired direction counts as collapsed
    /// onto the interference direction.
    double degenerate_angle = 1e-6;
    /// Cross channels with a larger 2-norm condition number are rejected.
    double max_condition = 1e8;
    /// Report degenerate solutions instead of throwing DegenerateAlignment.
    bool allow_degenerate = false;
};

namespace detail {

struct EigenChoice {
    double value;
    int index;
    Eigen::Vector2d vector;
};

inline std::vector<Eigen::Vector2d> eigenvectors_for(const Eigen::Matrix2d& e, double lambda)
{
    const Eigen::Matrix2d a = e - lambda * Eigen::Matrix2d::Identity();
    const double scale = std::max(1.0, e.cwiseAbs().maxCoeff());
    if (a.cwiseAbs().maxCoeff() <= 1e-12 * scale) return {Eigen::Vector2d::UnitX(), Eigen::Vector2d::UnitY()};
    const int r = a.row(0).squaredNorm() >= a.row(1).squaredNorm() ? 0 : 1;
    Eigen::Vector2d v(-a(r, 1), a(r, 0));
    v.normalize();
    canonical_sign(v);
    return {v};
}

// Real eigenvalue of largest magnitude; ties go to the candidate vector with
// the larger first component.
inline EigenChoice select_eigenvector(const Eigen::Matrix2d& e)
{
    const double half_tr = 0.5 * e.trace();
    const double half_diff = 0.5 * (e(0, 0) - e(1, 1));
    double disc = half_diff * half_diff + e(0, 1) * e(1, 0);
    const double scale = std::max(1.0, half_tr * half_tr);
    if (disc < 0.0) {
        if (disc < -1e-13 * scale) throw NoRealAlignment("alignment matrix has complex eigenvalues");
        disc = 0.0;
    }
    const double root = std::sqrt(disc);
    const std::array<double, 2> lambdas{half_tr + root, half_tr - root};

    std::vector<EigenChoice> candidates;
    const double best = std::max(std::abs(lambdas[0]), std::abs(lambdas[1]));
    for (int idx = 0; idx < 2; ++idx) {
        if (std::abs(lambdas[idx]) != best) continue;
        for (auto& v : eigenvectors_for(e, lambdas[idx])) candidates.push_back({lambdas[idx], idx, v});
    }
    EigenChoice chosen = candidates.front();
    for (const auto& c : candidates)
        if (c.vector(0) > chosen.vector(0)) chosen = c;
    return chosen;
}

inline Eigen::Matrix2d checked_inverse(const Eigen::Matrix2d& m, double max_condition, int j, int i)
{
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(m);
    const auto& s = svd.singularValues();
    if (s(1) == 0.0 || s(0) / s(1) > max_condition)
        throw DegenerateAlignment("cross channel H[" + std::to_string(j + 1) + "][" + std::to_string(i + 1) +
                                  "] is ill-conditioned");
    return m.inverse();
}

} // namespace detail

/// Closed-form 3-user alignment: V[1] is an eigenvector of
/// E = H31^-1 H32 H12^-1 H13 H23^-1 H21, V[2] follows F = H32^-1 H31 and
/// V[3] follows G = H23^-1 H21. Each receiver zero-forces the aligned
/// interference direction.
inline ClosedFormResult closed_form_ia3(const EquivalentNetwork& net, const ClosedFormOptions& opts = {})
{
    if (net.users != 3 || net.branches() != 2) throw ConfigError("closed3 requires 3 users");

    Eigen::Matrix2d h[3][3];
    for (int j = 0; j < 3; ++j)
        for (int i = 0; i < 3; ++i) h[j][i] = net.H(j, i);

    Eigen::Matrix2d inv[3][3];
    for (int j = 0; j < 3; ++j)
        for (int i = 0; i < 3; ++i)
            if (i != j) inv[j][i] = detail::checked_inverse(h[j][i], opts.max_condition, j, i);

    ClosedFormResult out;
    auto& rep = out.report;
    rep.E = inv[2][0] * h[2][1] * inv[0][1] * h[0][2] * inv[1][2] * h[1][0];
    rep.F = inv[2][1] * h[2][0];
    rep.G = inv[1][2] * h[1][0];

    const auto choice = detail::select_eigenvector(rep.E);
    rep.eigenvalue = choice.value;
    rep.eigenvector_index = choice.index;

    auto& sol = out.solution;
    sol.solver = SolverTag::closed3;
    sol.V.resize(3);
    sol.V[0] = choice.vector;
    sol.V[1] = (rep.F * sol.V[0]).normalized();
    sol.V[2] = (rep.G * sol.V[0]).normalized();
    for (auto& v : sol.V) detail::canonical_sign(v);

    sol.U.resize(3);
    const double sin_floor = std::sin(opts.degenerate_angle);
    for (int j = 0; j < 3; ++j) {
        const int p = (j + 1) % 3;
        const int q = (j + 2) % 3;
        const Eigen::Vector2d a = h[j][p] * sol.V[p];
        const Eigen::Vector2d b = h[j][q] * sol.V[q];
        rep.residuals[j] = detail::sine_between(a, b);

        const Eigen::Vector2d w = (a.squaredNorm() >= b.squaredNorm() ? a : b).normalized();
        sol.U[j] = Eigen::Vector2d(-w(1), w(0));

        rep.desired_separation[j] = detail::sine_between(h[j][j] * sol.V[j], w);
        if (rep.desired_separation[j] < sin_floor) rep.degenerate = true;
    }
    if (rep.degenerate && !opts.allow_degenerate)
        throw DegenerateAlignment("desired signal collapses onto the aligned interference");

    detail::orient_filters(net, sol);
    sol.leakage = leakage_of(net, sol.V, sol.U);
    sol.iterations_used = 0;
    return out;
}

namespace detail {

inline Eigen::VectorXd min_eigenvector(const Eigen::MatrixXd& q)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
    return es.eigenvectors().col(0);
}

} // namespace detail

/// Alternating interference-leakage minimization. Receive filters take the
/// least-interfered direction at each receiver; precoders then do the same in
/// the reciprocal network, where every channel is transposed. Both
/// half-steps minimize the same total interference power, so the recorded
/// history never increases (up to rounding).
///
/// Without init_seed every precoder starts at (1, 0). For K >= 4 that start
/// is a useless fixed point of the noncoherent model: each footprint
/// H[j][i] (1, 0)^T lies in the plane spanned by receiver j's first-use
/// cos/sin phase vectors, so one filter cancels interference and desired
/// signal alike. A seed draws isotropic random starting precoders instead.
inline IASolution min_leakage_solve(const EquivalentNetwork& net, int max_iters, double tol,
                                    std::optional<std::uint64_t> init_seed = std::nullopt)
{
    const int k_users = net.users;
    if (k_users < 3) throw ConfigError("leakage solver needs at least 3 users");
    const int n = net.branches();

    IASolution sol;
    sol.solver = SolverTag::leakage;
    sol.V.assign(k_users, Eigen::Vector2d::UnitX());
    if (init_seed) {
        Rng rng(*init_seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (auto& v : sol.V) {
            do {
                v = Eigen::Vector2d(normal(rng), normal(rng));
            } while (v.norm() == 0.0);
            v.normalize();
        }
    }
    sol.U.assign(k_users, Eigen::VectorXd::Zero(n));

    const auto update_filters = [&] {
        for (int j = 0; j < k_users; ++j) {
            Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
            for (int i = 0; i < k_users; ++i) {
                if (i == j) continue;
                const Eigen::VectorXd x = net.H(j, i) * sol.V[i];
                q.noalias() += x * x.transpose();
            }
            sol.U[j] = detail::min_eigenvector(q);
        }
    };
    const auto update_precoders = [&] {
        for (int i = 0; i < k_users; ++i) {
            Eigen::Matrix2d q = Eigen::Matrix2d::Zero();
            for (int j = 0; j < k_users; ++j) {
                if (j == i) continue;
                const Eigen::Vector2d x = net.H(j, i).transpose() * sol.U[j];
                q.noalias() += x * x.transpose();
            }
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(q);
            sol.V[i] = es.eigenvectors().col(0);
        }
    };

    update_filters();
    sol.leakage_history.push_back(interference_power(net, sol.V, sol.U));
    sol.leakage = leakage_of(net, sol.V, sol.U);
    int iter = 0;
    while (iter < max_iters && sol.leakage >= tol) {
        update_precoders();
        sol.leakage_history.push_back(interference_power(net, sol.V, sol.U));
        update_filters();
        sol.leakage_history.push_back(interference_power(net, sol.V, sol.U));
        sol.leakage = leakage_of(net, sol.V, sol.U);
        ++iter;
    }
    sol.iterations_used = iter;
    detail::orient_filters(net, sol);
    return sol;
}

/// Smallest share of desired signal amplitude a receive filter keeps:
/// min over j of |U[j]^T H[j][j] V[j]| / |H[j][j] V[j]|. Zero-leakage
/// solutions that also cancel a desired signal score 0.
inline double min_desired_fraction(const EquivalentNetwork& net, const IASolution& sol)
{
    double out = 1.0;
    for (int j = 0; j < net.users; ++j) {
        const Eigen::VectorXd d = net.H(j, j) * sol.V[j];
        const double norm = d.norm();
        out = std::min(out, norm == 0.0 ? 0.0 : std::abs(sol.U[j].dot(d)) / norm);
    }
    return out;
}

/// True when consecutive history entries never increase beyond rounding
/// slack relative to the starting value.
inline bool leakage_monotone(const std::vector<double>& history, double rel_slack = 1e-12)
{
    if (history.empty()) return true;
    const double slack = rel_slack * history.front();
    for (std::size_t n = 1; n < history.size(); ++n)
        if (history[n] > history[n - 1] + slack) return false;
    return true;
}

/// Iterative max-SINR. Receive filters are U[j] ~ B_j^-1 H[j][j] V[j] with B_j
/// the interference-plus-colored-noise covariance at receiver j; precoders
/// get the mirror update in the reciprocal network, whose noise is white.
/// Transmit symbol energy is 2 * snr over the 2-use block, noise variance 1.
inline IASolution max_sinr_solve(const EquivalentNetwork& net, double snr, int max_iters)
{
    if (!(snr > 0.0)) throw ConfigError("max-SINR needs a positive SNR");
    const int k_users = net.users;
    const int n = net.branches();
    const double power = 2.0 * snr;

    IASolution sol;
    sol.solver = SolverTag::maxsinr;
    sol.V.assign(k_users, Eigen::Vector2d::UnitX());
    sol.U.assign(k_users, Eigen::VectorXd::Zero(n));

    const auto solve_spd = [](Eigen::MatrixXd b, const Eigen::VectorXd& rhs) {
        Eigen::LLT<Eigen::MatrixXd> llt(b);
        if (llt.info() != Eigen::Success) {
            b.diagonal().array() += 1e-12;
            llt.compute(b);
        }
        Eigen::VectorXd x = llt.info() == Eigen::Success ? Eigen::VectorXd(llt.solve(rhs))
                                                         : Eigen::VectorXd(b.ldlt().solve(rhs));
        return x;
    };

    const auto update_filters = [&] {
        for (int j = 0; j < k_users; ++j) {
            Eigen::MatrixXd b = net.noise_cov[j];
            for (int i = 0; i < k_users; ++i) {
                if (i == j) continue;
                const Eigen::VectorXd x = net.H(j, i) * sol.V[i];
                b.noalias() += power * x * x.transpose();
            }
            Eigen::VectorXd u = solve_spd(std::move(b), net.H(j, j) * sol.V[j]);
            const double norm = u.norm();
            if (norm > 0.0) sol.U[j] = u / norm;
        }
    };
    const auto update_precoders = [&] {
        for (int i = 0; i < k_users; ++i) {
            Eigen::MatrixXd b = Eigen::MatrixXd::Identity(2, 2);
            for (int j = 0; j < k_users; ++j) {
                if (j == i) continue;
                const Eigen::Vector2d x = net.H(j, i).transpose() * sol.U[j];
                b.noalias() += power * x * x.transpose();
            }
            Eigen::VectorXd v = solve_spd(std::move(b), net.H(i, i).transpose() * sol.U[i]);
            const double norm = v.norm();
            if (norm > 0.0) sol.V[i] = v / norm;
        }
    };

    for (int it = 0; it < max_iters; ++it) {
        update_filters();
        update_precoders();
    }
    update_filters();
    sol.iterations_used = max_iters;
    detail::orient_filters(net, sol);
    sol.leakage = leakage_of(net, sol.V, sol.U);
    return sol;
}

} // namespace ncia
