#include "vpc/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>

namespace vpc {
namespace {

void check_controlled_node(const Feeder& feeder, NodeId node) {
    if (!feeder.has_node(node)) throw UnknownNode(node);
    if (node == feeder.slack()) throw SlackNodeNotControllable();
}

/// Dense complex solve by Gaussian elimination with partial pivoting.
/// Controller sets are tiny, so no factorization machinery is needed.
std::vector<Complex> solve_dense(std::vector<std::vector<Complex>> a, std::vector<Complex> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        }
        if (std::abs(a[pivot][col]) < 1e-14) {
            throw std::invalid_argument("singular controller coupling matrix");
        }
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const Complex factor = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c) a[r][c] -= factor * a[col][c];
            b[r] -= factor * b[col];
        }
    }
    std::vector<Complex> x(n);
    for (std::size_t row = n; row-- > 0;) {
        Complex acc = b[row];
        for (std::size_t c = row + 1; c < n; ++c) acc -= a[row][c] * x[c];
        x[row] = acc / a[row][row];
    }
    return x;
}

}  // namespace

ControllerResult pfc_equilibrium(const Feeder& feeder, const InjectionSet& background,
                                 const PhasorTarget& target) {
    check_controlled_node(feeder, target.node);
    if (!is_finite(target.target) || std::abs(target.target) <= 0.0) {
        throw std::invalid_argument("phasor target must be finite and nonzero");
    }
    const Complex z_self = feeder.common_path_impedance(target.node, target.node);
    if (std::abs(z_self) < 1e-14) {
        throw std::invalid_argument("controlled node has zero path impedance");
    }
    Complex coupled{0.0, 0.0};
    for (const auto& [node, current] : background.entries()) {
        if (node == target.node) continue;  // background at the node is replaced
        coupled += feeder.common_path_impedance(target.node, node) * current;
    }
    const Complex current = (target.target - feeder.slack_voltage() - coupled) / z_self;

    ControllerResult result;
    result.injection_current = current;
    result.injection_power = target.target * std::conj(current);
    return result;
}

Complex pfc_feedback_step(Complex measured_phasor, const PhasorTarget& target, double gain,
                          Complex path_impedance_estimate, Complex prev_injection) {
    if (!(gain > 0.0 && gain <= 1.0)) {
        throw std::invalid_argument("gain must lie in (0, 1]");
    }
    if (std::abs(path_impedance_estimate) <= 0.0 || !is_finite(path_impedance_estimate)) {
        throw ZeroImpedanceEstimate();
    }
    return prev_injection + gain * (target.target - measured_phasor) / path_impedance_estimate;
}

Complex apf_ray(double apf, RayFamily family) {
    if (!(apf >= 0.0 && apf <= 1.0)) {
        throw std::invalid_argument("adjustment power factor must lie in [0, 1]");
    }
    const double q = std::sqrt(std::max(0.0, 1.0 - apf * apf));
    return family == RayFamily::standard ? Complex{apf, q} : Complex{apf, -q};
}

namespace {

struct InnerSolve {
    Complex adjustment_current;
    Complex node_voltage;
    int iterations = 0;
};

/// Constant-power fixed point at one node: di = conj(s * ray / v).
std::optional<InnerSolve> solve_adjustment(const Feeder& feeder, const InjectionSet& background,
                                           NodeId node, Complex ray, double s,
                                           const MfcOptions& options, Complex v_start) {
    Complex v = v_start;
    Complex di{0.0, 0.0};
    for (int it = 0; it < options.max_inner; ++it) {
        if (std::abs(v) < 1e-8 || !is_finite(v)) return std::nullopt;
        const Complex di_next = std::conj(s * ray / v);
        InjectionSet adjusted = background;
        adjusted.add(node, di_next);
        const CircuitSolution sol = solve(feeder, adjusted);
        const Complex v_next = sol.voltages.at(node);
        if (std::abs(di_next - di) <= options.inner_tol) {
            return InnerSolve{di_next, v_next, it + 1};
        }
        di = di_next;
        v = v_next;
    }
    return std::nullopt;
}

}  // namespace

ControllerResult mfc_equilibrium(const Feeder& feeder, const InjectionSet& background,
                                 const MagnitudeTarget& target, const MfcOptions& options) {
    check_controlled_node(feeder, target.node);
    if (!(target.target_magnitude > 0.0 && target.target_magnitude < 2.0)) {
        throw std::invalid_argument("magnitude target must lie in (0, 2)");
    }
    const Complex ray = apf_ray(target.apf, target.family);

    const CircuitSolution base = solve(feeder, background);
    const Complex v_base = base.voltages.at(target.node);

    int evaluations = 0;
    Complex v_warm = v_base;
    auto evaluate = [&](double s) -> std::optional<InnerSolve> {
        ++evaluations;
        auto inner = solve_adjustment(feeder, background, target.node, ray, s, options, v_warm);
        if (inner) v_warm = inner->node_voltage;
        return inner;
    };

    auto finish = [&](double s, const InnerSolve& inner) {
        ControllerResult result;
        result.injection_current = inner.adjustment_current;
        result.injection_power = s * ray;
        result.iterations = evaluations;
        result.converged = true;
        return result;
    };

    const double err0 = std::abs(v_base) - target.target_magnitude;
    if (std::abs(err0) <= options.outer_tol) {
        return finish(0.0, InnerSolve{Complex{0.0, 0.0}, v_base, 0});
    }

    auto bisect = [&](double lo, double hi, double f_lo) -> std::optional<ControllerResult> {
        for (int it = 0; it < options.max_outer; ++it) {
            const double mid = 0.5 * (lo + hi);
            auto inner = evaluate(mid);
            if (!inner) {
                throw NonConvergent("adjustment-power fixed point diverged during bisection");
            }
            const double f_mid = std::abs(inner->node_voltage) - target.target_magnitude;
            if (std::abs(f_mid) <= options.outer_tol) {
                return finish(mid, *inner);
            }
            if ((f_lo <= 0.0) == (f_mid <= 0.0)) {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
            }
        }
        throw NonConvergent("magnitude root-find exceeded the outer iteration budget");
    };

    // expand outward from s = 0 so a fold's smaller-|s| branch is found first
    const int half = std::max(1, (options.bracket_samples - 1) / 2);
    const double step = options.s_max / half;
    double prev_f[2] = {err0, err0};
    bool prev_ok[2] = {true, true};
    for (int k = 1; k <= half; ++k) {
        std::optional<ControllerResult> found;
        for (int dir = 0; dir < 2; ++dir) {
            const double sign = dir == 0 ? 1.0 : -1.0;
            const double s = sign * k * step;
            auto inner = evaluate(s);
            if (!inner) {
                prev_ok[dir] = false;
                continue;
            }
            const double f = std::abs(inner->node_voltage) - target.target_magnitude;
            if (std::abs(f) <= options.outer_tol) {
                found = found ? *found : finish(s, *inner);
                continue;
            }
            if (prev_ok[dir] && (prev_f[dir] <= 0.0) != (f <= 0.0)) {
                const double lo = std::min(s, sign * (k - 1) * step);
                const double hi = std::max(s, sign * (k - 1) * step);
                const double f_lo = lo == s ? f : prev_f[dir];
                auto root = bisect(lo, hi, f_lo);
                if (root && (!found || std::abs(root->injection_power) <
                                           std::abs(found->injection_power))) {
                    found = root;
                }
            }
            prev_ok[dir] = true;
            prev_f[dir] = f;
        }
        if (found) return *found;
    }
    throw Infeasible("no adjustment power within the search bracket reaches the magnitude target");
}

EquilibriumResult equilibrate(const Feeder& feeder, const InjectionSet& background,
                              const std::vector<ControllerSpec>& controllers,
                              const MfcOptions& options) {
    std::set<NodeId> controlled;
    std::vector<const PhasorTarget*> phasors;
    std::vector<const MagnitudeTarget*> magnitudes;
    for (const ControllerSpec& spec : controllers) {
        const NodeId node = std::holds_alternative<PhasorTarget>(spec)
                                ? std::get<PhasorTarget>(spec).node
                                : std::get<MagnitudeTarget>(spec).node;
        check_controlled_node(feeder, node);
        if (!controlled.insert(node).second) {
            throw std::invalid_argument("node " + std::to_string(node) +
                                        " has more than one controller");
        }
        if (std::holds_alternative<PhasorTarget>(spec)) {
            phasors.push_back(&std::get<PhasorTarget>(spec));
        } else {
            magnitudes.push_back(&std::get<MagnitudeTarget>(spec));
        }
    }

    // exact joint solve for the phasor-controlled currents given everything else
    auto solve_phasor_currents = [&](const InjectionSet& others) -> std::vector<Complex> {
        const std::size_t n = phasors.size();
        std::vector<std::vector<Complex>> a(n, std::vector<Complex>(n));
        std::vector<Complex> b(n);
        for (std::size_t r = 0; r < n; ++r) {
            const NodeId p = phasors[r]->node;
            for (std::size_t c = 0; c < n; ++c) {
                a[r][c] = feeder.common_path_impedance(p, phasors[c]->node);
            }
            Complex coupled{0.0, 0.0};
            for (const auto& [node, current] : others.entries()) {
                coupled += feeder.common_path_impedance(p, node) * current;
            }
            b[r] = phasors[r]->target - feeder.slack_voltage() - coupled;
        }
        return solve_dense(std::move(a), std::move(b));
    };

    InjectionSet bg_wo_phasors = background;
    for (const PhasorTarget* t : phasors) {
        bg_wo_phasors.set(t->node, Complex{0.0, 0.0});  // replaced, not stacked
    }

    std::vector<Complex> mfc_adjust(magnitudes.size(), Complex{0.0, 0.0});
    std::vector<Complex> pfc_current(phasors.size(), Complex{0.0, 0.0});
    std::vector<ControllerResult> mfc_results(magnitudes.size());

    const int max_sweeps = magnitudes.empty() ? 1 : options.max_outer;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        InjectionSet with_mfc = bg_wo_phasors;
        for (std::size_t m = 0; m < magnitudes.size(); ++m) {
            with_mfc.add(magnitudes[m]->node, mfc_adjust[m]);
        }
        if (!phasors.empty()) {
            pfc_current = solve_phasor_currents(with_mfc);
        }
        if (magnitudes.empty()) break;

        double worst = 0.0;
        for (std::size_t m = 0; m < magnitudes.size(); ++m) {
            InjectionSet seen = with_mfc;
            for (std::size_t p = 0; p < phasors.size(); ++p) {
                seen.set(phasors[p]->node, pfc_current[p]);
            }
            seen.add(magnitudes[m]->node, -mfc_adjust[m]);  // re-decide from scratch
            mfc_results[m] = mfc_equilibrium(feeder, seen, *magnitudes[m], options);
            worst = std::max(worst, std::abs(mfc_adjust[m] - mfc_results[m].injection_current));
            mfc_adjust[m] = mfc_results[m].injection_current;
        }
        if (worst <= options.inner_tol * 10.0 && sweep > 0) break;
        if (sweep + 1 == max_sweeps) {
            throw NonConvergent("controller mix did not reach a joint equilibrium");
        }
    }

    InjectionSet final_inj = bg_wo_phasors;
    for (std::size_t p = 0; p < phasors.size(); ++p) {
        final_inj.set(phasors[p]->node, pfc_current[p]);
    }
    for (std::size_t m = 0; m < magnitudes.size(); ++m) {
        final_inj.add(magnitudes[m]->node, mfc_adjust[m]);
    }
    const CircuitSolution solution = solve(feeder, final_inj);

    EquilibriumResult out{final_inj, solution, {}};
    std::size_t ip = 0, im = 0;
    for (const ControllerSpec& spec : controllers) {
        if (std::holds_alternative<PhasorTarget>(spec)) {
            const NodeId node = std::get<PhasorTarget>(spec).node;
            ControllerResult r;
            r.injection_current = pfc_current[ip];
            r.injection_power = solution.voltages.at(node) * std::conj(pfc_current[ip]);
            out.results.push_back(r);
            ++ip;
        } else {
            out.results.push_back(mfc_results[im]);
            ++im;
        }
    }
    return out;
}

}  // namespace vpc
