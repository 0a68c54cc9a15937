#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ncia/error.hpp"

namespace ncia {

enum class ChannelMode { gaussian, deterministic };

/// K-user single-antenna network with a 2-use symbol extension and K-1
/// artificial demodulation branches per receiver.
struct NetworkConfig {
    int users = 3;
    ChannelMode channel_mode = ChannelMode::gaussian;
    /// K*K*2 gains, row-major in (receiver, transmitter, use). Only read in
    /// deterministic mode.
    std::optional<std::vector<double>> deterministic_values;

    static constexpr int extension = 2;

    int branches() const noexcept { return users - 1; }

    /// Alignment counting condition N + M >= (K + 1) d with M = 2, d = 1.
    bool alignment_feasible() const noexcept { return branches() + extension >= users + 1; }

    void validate() const
    {
        if (users < 3) throw ConfigError("network needs at least 3 users");
        const bool det = channel_mode == ChannelMode::deterministic;
        if (det != deterministic_values.has_value())
            throw ConfigError("deterministic values must be given exactly in deterministic mode");
        if (det) {
            const auto expected = static_cast<std::size_t>(users) * users * extension;
            if (deterministic_values->size() != expected)
                throw ConfigError("deterministic mode needs " + std::to_string(expected) +
                                  " channel values, got " +
                                  std::to_string(deterministic_values->size()));
            for (double v : *deterministic_values)
                if (v == 0.0) throw ConfigError("deterministic channel values must be nonzero");
        }
    }

    /// Deterministic network with every gain equal to one.
    static NetworkConfig deterministic_ones(int users)
    {
        NetworkConfig c;
        c.users = users;
        c.channel_mode = ChannelMode::deterministic;
        c.deterministic_values =
            std::vector<double>(static_cast<std::size_t>(users) * users * extension, 1.0);
        return c;
    }
};

} // namespace ncia
