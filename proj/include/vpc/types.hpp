#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace vpc {

/// Universal currency: voltages, currents, impedances and complex power,
/// all in per-unit.
using Complex = std::complex<double>;

using NodeId = int;

/// Directed line identifier, oriented upstream -> downstream.
struct LineId {
    NodeId up = 0;
    NodeId down = 0;

    friend bool operator==(const LineId&, const LineId&) = default;
    friend auto operator<=>(const LineId&, const LineId&) = default;
};

inline bool is_finite(Complex z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
}

inline Complex from_polar(double magnitude, double angle_rad) {
    return std::polar(magnitude, angle_rad);
}

// ---------------------------------------------------------------------------
// Error types
// ---------------------------------------------------------------------------

struct UnknownNode : std::runtime_error {
    explicit UnknownNode(NodeId n)
        : std::runtime_error("unknown node " + std::to_string(n)), node(n) {}
    NodeId node;
};

struct SlackNodeNotControllable : std::runtime_error {
    SlackNodeNotControllable()
        : std::runtime_error("the slack node cannot be controlled") {}
};

struct ZeroImpedanceEstimate : std::runtime_error {
    ZeroImpedanceEstimate()
        : std::runtime_error("path impedance estimate must be nonzero") {}
};

struct Infeasible : std::runtime_error {
    explicit Infeasible(const std::string& what) : std::runtime_error(what) {}
};

struct NonConvergent : std::runtime_error {
    explicit NonConvergent(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateImpedance : std::runtime_error {
    DegenerateImpedance()
        : std::runtime_error("z01 + z12 must be nonzero") {}
};

struct InvalidRow : std::runtime_error {
    explicit InvalidRow(int row)
        : std::runtime_error("invalid sensitivity table row " + std::to_string(row)) {}
};

struct CalibrationFailed : std::runtime_error {
    explicit CalibrationFailed(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace vpc
