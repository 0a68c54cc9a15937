#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <locale>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ncia/config.hpp"
#include "ncia/error.hpp"
#include "ncia/phases.hpp"
#include "ncia/rng.hpp"

namespace ncia {

/// Dense K x K grid addressed as (receiver j, transmitter i).
template <class T>
class PairGrid {
public:
    PairGrid() = default;
    explicit PairGrid(int users, const T& init = T{})
        : users_(users), cells_(static_cast<std::size_t>(users) * users, init)
    {
    }

    int users() const noexcept { return users_; }
    T& operator()(int j, int i) { return cells_[index(j, i)]; }
    const T& operator()(int j, int i) const { return cells_[index(j, i)]; }

private:
    std::size_t index(int j, int i) const noexcept
    {
        return static_cast<std::size_t>(j) * users_ + static_cast<std::size_t>(i);
    }

    int users_ = 0;
    std::vector<T> cells_;
};

/// Real gains h[j][i][use] for every transmitter-receiver pair.
class ChannelRealization {
public:
    ChannelRealization() = default;
    ChannelRealization(int users, std::vector<double> gains) : users_(users), gains_(std::move(gains))
    {
        if (gains_.size() != static_cast<std::size_t>(users) * users * 2)
            throw ConfigError("channel realization has the wrong number of gains");
    }

    int users() const noexcept { return users_; }
    double operator()(int j, int i, int use) const { return gains_[index(j, i, use)]; }
    double& operator()(int j, int i, int use) { return gains_[index(j, i, use)]; }
    const std::vector<double>& gains() const noexcept { return gains_; }

    /// Multiplies every gain by c.
    ChannelRealization scaled(double c) const
    {
        ChannelRealization out = *this;
        for (double& g : out.gains_) g *= c;
        return out;
    }

    friend bool operator==(const ChannelRealization&, const ChannelRealization&) = default;

private:
    std::size_t index(int j, int i, int use) const noexcept
    {
        return (static_cast<std::size_t>(j) * users_ + static_cast<std::size_t>(i)) * 2 +
               static_cast<std::size_t>(use);
    }

    int users_ = 0;
    std::vector<double> gains_;
};

inline ChannelRealization draw_channel(const NetworkConfig& config, std::uint64_t seed)
{
    config.validate();
    const int k_users = config.users;
    if (config.channel_mode == ChannelMode::deterministic)
        return {k_users, *config.deterministic_values};

    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> gains(static_cast<std::size_t>(k_users) * k_users * 2);
    for (double& g : gains) {
        do {
            g = normal(rng);
        } while (g == 0.0);
    }
    return {k_users, std::move(gains)};
}

/// Reads deterministic gains: one line per (j, i) pair in row-major order,
/// holding the two uses' gains. Blank lines and '#' comments are skipped.
inline std::vector<double> read_channel_values(std::istream& in, int users)
{
    std::vector<double> values;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        fields.imbue(std::locale::classic());
        double first = 0.0;
        if (!(fields >> first)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            throw ConfigError("channel file line " + std::to_string(line_no) + ": expected a number");
        }
        double second = 0.0;
        std::string extra;
        if (!(fields >> second) || (fields >> extra))
            throw ConfigError("channel file line " + std::to_string(line_no) +
                              ": expected exactly two values");
        values.push_back(first);
        values.push_back(second);
    }
    const auto expected = static_cast<std::size_t>(users) * users * 2;
    if (values.size() != expected)
        throw ConfigError("channel file holds " + std::to_string(values.size() / 2) + " pairs, expected " +
                          std::to_string(expected / 2));
    return values;
}

inline std::vector<double> load_channel_file(const std::string& path, int users)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open channel file '" + path + "'");
    return read_channel_values(in, users);
}

/// diag(h[j][i][0], h[j][i][1]) per pair: the plain 2-use extension.
inline PairGrid<Eigen::Matrix2d> naive_extension(const ChannelRealization& real)
{
    const int k_users = real.users();
    PairGrid<Eigen::Matrix2d> out(k_users, Eigen::Matrix2d::Zero());
    for (int j = 0; j < k_users; ++j)
        for (int i = 0; i < k_users; ++i) {
            out(j, i)(0, 0) = real(j, i, 0);
            out(j, i)(1, 1) = real(j, i, 1);
        }
    return out;
}

/// [[h1, 0], [lambda_j h1, h2]]: the second use plus a scaled copy of the
/// first. Receiver j must apply one lambda_j to every transmitter, since the
/// superposed components cannot be told apart.
inline PairGrid<Eigen::Matrix2d> superposition_extension(const ChannelRealization& real,
                                                         const std::vector<double>& lambda)
{
    const int k_users = real.users();
    if (static_cast<int>(lambda.size()) != k_users)
        throw ConfigError("superposition needs one scaling factor per receiver");
    PairGrid<Eigen::Matrix2d> out(k_users, Eigen::Matrix2d::Zero());
    for (int j = 0; j < k_users; ++j)
        for (int i = 0; i < k_users; ++i) {
            const double h1 = real(j, i, 0);
            out(j, i)(0, 0) = h1;
            out(j, i)(1, 0) = lambda[j] * h1;
            out(j, i)(1, 1) = real(j, i, 1);
        }
    return out;
}

/// The (K-1) x 2 equivalent channels seen after multi-branch noncoherent
/// demodulation, plus the correlation of the branch noise at each receiver.
struct EquivalentNetwork {
    int users = 0;
    PairGrid<Eigen::MatrixXd> H;
    /// Sigma[j](k, l) = sum over uses of cos(phi_k - phi_l).
    std::vector<Eigen::MatrixXd> noise_cov;
    /// Branch noise is noise_basis[j] * w with w white; basis * basis^T = Sigma.
    std::vector<Eigen::MatrixXd> noise_basis;
    PhasePlan phases;

    int branches() const noexcept { return users == 0 ? 0 : static_cast<int>(H(0, 0).rows()); }
};

/// Builds a network directly from per-pair matrices with white unit branch
/// noise. Used to feed the naive and superposition models to the solvers.
template <class Matrix>
EquivalentNetwork network_from_matrices(const PairGrid<Matrix>& grid)
{
    EquivalentNetwork net;
    net.users = grid.users();
    net.H = PairGrid<Eigen::MatrixXd>(net.users);
    for (int j = 0; j < net.users; ++j)
        for (int i = 0; i < net.users; ++i) net.H(j, i) = grid(j, i);
    const auto n = net.branches();
    net.noise_cov.assign(net.users, Eigen::MatrixXd::Identity(n, n));
    net.noise_basis.assign(net.users, Eigen::MatrixXd::Identity(n, n));
    net.phases = PhasePlan::coherent(net.users);
    return net;
}

/// H[j][i](k, use) = cos(phi_{k,use}^{[j]} - theta_use^{[i]}) h[j][i][use].
/// Throws DegeneratePhase if any cosine factor is below kCosineFloor.
inline EquivalentNetwork build_equivalent_network(const ChannelRealization& real, const PhasePlan& plan)
{
    const int k_users = real.users();
    if (plan.users() != k_users || plan.branches() != k_users - 1 ||
        static_cast<int>(plan.phi.size()) != k_users)
        throw ConfigError("phase plan does not match the network size");
    const int n = k_users - 1;

    EquivalentNetwork net;
    net.users = k_users;
    net.phases = plan;
    net.H = PairGrid<Eigen::MatrixXd>(k_users, Eigen::MatrixXd::Zero(n, 2));
    for (int j = 0; j < k_users; ++j)
        for (int i = 0; i < k_users; ++i)
            for (int k = 0; k < n; ++k)
                for (int use = 0; use < 2; ++use) {
                    const double c = plan.difference(j, k, i, use).cos();
                    if (std::abs(c) < kCosineFloor)
                        throw DegeneratePhase("cosine factor below degeneracy floor at receiver " +
                                              std::to_string(j + 1) + ", transmitter " +
                                              std::to_string(i + 1));
                    net.H(j, i)(k, use) = c * real(j, i, use);
                }

    net.noise_cov.reserve(k_users);
    net.noise_basis.reserve(k_users);
    for (int j = 0; j < k_users; ++j) {
        Eigen::MatrixXd cov(n, n);
        Eigen::MatrixXd basis(n, 4);
        for (int k = 0; k < n; ++k) {
            for (int l = 0; l < n; ++l)
                cov(k, l) = (plan.phi[j][k][0] - plan.phi[j][l][0]).cos() +
                            (plan.phi[j][k][1] - plan.phi[j][l][1]).cos();
            for (int use = 0; use < 2; ++use) {
                basis(k, 2 * use) = plan.phi[j][k][use].cos();
                basis(k, 2 * use + 1) = plan.phi[j][k][use].sin();
            }
        }
        net.noise_cov.push_back(std::move(cov));
        net.noise_basis.push_back(std::move(basis));
    }
    return net;
}

/// Draws one set of branch noise vectors: per use an in-phase/quadrature pair
/// of std noise_std, projected onto each branch's demodulation phase.
inline std::vector<Eigen::VectorXd> sample_branch_noise(const EquivalentNetwork& net, double noise_std,
                                                        Rng& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Eigen::VectorXd> out;
    out.reserve(net.users);
    for (int j = 0; j < net.users; ++j) {
        const auto& basis = net.noise_basis[j];
        Eigen::VectorXd w(basis.cols());
        for (Eigen::Index c = 0; c < w.size(); ++c) w(c) = noise_std * normal(rng);
        out.emplace_back(basis * w);
    }
    return out;
}

inline std::vector<Eigen::VectorXd> sample_branch_noise(const EquivalentNetwork& net, double noise_std,
                                                        std::uint64_t seed)
{
    Rng rng(seed);
    return sample_branch_noise(net, noise_std, rng);
}

} // namespace ncia
