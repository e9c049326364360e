#pragma once

#include <string>
#include <variant>
#include <vector>

#include "vpc/feeder.hpp"

namespace vpc {

/// Voltage phasor setpoint held by a phasor feedback controller.
struct PhasorTarget {
    NodeId node = 0;
    Complex target;  // |target| > 0, angle relative to the slack reference
};

enum class RayFamily { standard, cross };

/// Voltage magnitude setpoint plus the adjustment-power-factor ray along
/// which the magnitude feedback controller moves its power injection.
struct MagnitudeTarget {
    NodeId node = 0;
    double target_magnitude = 1.0;  // in (0, 2)
    double apf = 1.0;               // in [0, 1]
    RayFamily family = RayFamily::standard;
};

using ControllerSpec = std::variant<PhasorTarget, MagnitudeTarget>;

struct ControllerResult {
    /// PFC: total current at the controlled node (replaces any background
    /// entry there). MFC: adjustment current added on top of the background.
    Complex injection_current;
    /// S = v * conj(i) at the controlled node for the current above.
    Complex injection_power;
    int iterations = 0;
    bool converged = true;
};

/// Closed-form current that pins the controlled node's voltage phasor to the
/// target given the other constant-current injections.
ControllerResult pfc_equilibrium(const Feeder& feeder, const InjectionSet& background,
                                 const PhasorTarget& target);

/// One proportional feedback update: prev + gain * (target - measured) / z_est.
/// With an exact impedance estimate and fixed disturbances the phasor error
/// contracts by |1 - gain| per step.
Complex pfc_feedback_step(Complex measured_phasor, const PhasorTarget& target, double gain,
                          Complex path_impedance_estimate, Complex prev_injection);

/// Unit direction in the (P, Q) plane for a given adjustment power factor.
/// standard: (apf, +sqrt(1-apf^2)); cross: (apf, -sqrt(1-apf^2)).
Complex apf_ray(double apf, RayFamily family);

struct MfcOptions {
    double s_max = 10.0;       // search bracket for the signed adjustment power
    int bracket_samples = 201;  // odd sample count across [-s_max, s_max]
    double outer_tol = 1e-9;   // on | |v| - target |
    double inner_tol = 1e-11;  // on the current fixed point
    int max_outer = 200;
    int max_inner = 100;
};

/// Scalar root-find for the adjustment power s along the APF ray such that
/// the re-solved voltage magnitude hits the target. The inner fixed point
/// converts constant power to current through the local voltage. When two
/// roots bracket (a power-flow fold) the smaller-|s| branch is returned.
/// Throws Infeasible when no s in the bracket reaches the target and
/// NonConvergent when the inner fixed point diverges.
ControllerResult mfc_equilibrium(const Feeder& feeder, const InjectionSet& background,
                                 const MagnitudeTarget& target, const MfcOptions& options = {});

struct EquilibriumResult {
    InjectionSet injections;  // background with all controller currents applied
    CircuitSolution solution;
    std::vector<ControllerResult> results;  // one per controller, input order
};

/// Joint equilibrium of a controller mix. Phasor targets are solved exactly
/// as one linear system; magnitude controllers are relaxed against it until
/// every target holds.
EquilibriumResult equilibrate(const Feeder& feeder, const InjectionSet& background,
                              const std::vector<ControllerSpec>& controllers,
                              const MfcOptions& options = {});

}  // namespace vpc
