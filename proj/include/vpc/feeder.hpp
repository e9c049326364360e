#pragma once

#include <map>
#include <optional>
#include <vector>

#include "vpc/types.hpp"

namespace vpc {

struct Line {
    NodeId up = 0;
    NodeId down = 0;
    Complex impedance;
    std::optional<double> ampacity;  // |i| limit, p.u.

    [[nodiscard]] LineId id() const { return LineId{up, down}; }
};

/// Radial feeder: a tree of series-impedance lines rooted at the slack node
/// (the first node of the list). The slack holds a fixed voltage and absorbs
/// the net current imbalance; every other node carries one upstream line.
class Feeder {
public:
    Feeder(std::vector<NodeId> nodes, std::vector<Line> lines,
           Complex slack_voltage = Complex{1.0, 0.0});

    /// Chain 0-1-...-(n-1) with identical line impedance.
    static Feeder chain(int node_count, Complex line_impedance,
                        Complex slack_voltage = Complex{1.0, 0.0});

    [[nodiscard]] const std::vector<NodeId>& nodes() const { return nodes_; }
    [[nodiscard]] const std::vector<Line>& lines() const { return lines_; }
    [[nodiscard]] NodeId slack() const { return nodes_.front(); }
    [[nodiscard]] Complex slack_voltage() const { return slack_voltage_; }
    [[nodiscard]] bool has_node(NodeId n) const { return index_.count(n) != 0; }

    /// Upstream line of a non-slack node.
    [[nodiscard]] const Line& upstream_line(NodeId n) const;

    /// Sum of line impedances shared by the slack->a and slack->b paths.
    /// Symmetric; zero when either argument is the slack.
    [[nodiscard]] Complex common_path_impedance(NodeId a, NodeId b) const;

    /// True when `n` lies in the subtree rooted at `root` (inclusive).
    [[nodiscard]] bool in_subtree(NodeId n, NodeId root) const;

private:
    void validate() const;

    std::vector<NodeId> nodes_;
    std::vector<Line> lines_;
    Complex slack_voltage_;
    std::map<NodeId, std::size_t> index_;
    std::map<NodeId, NodeId> parent_;  // non-slack node -> upstream node
};

/// Constant-current injections keyed by node. Positive = current injected
/// into the network. The slack never carries an entry.
class InjectionSet {
public:
    InjectionSet() = default;
    InjectionSet(std::initializer_list<std::pair<NodeId, Complex>> entries);

    void set(NodeId node, Complex current);
    void add(NodeId node, Complex current);
    [[nodiscard]] Complex at(NodeId node) const;  // zero when absent
    [[nodiscard]] const std::map<NodeId, Complex>& entries() const { return entries_; }

    [[nodiscard]] InjectionSet plus(const InjectionSet& other) const;
    [[nodiscard]] InjectionSet scaled(double factor) const;

private:
    std::map<NodeId, Complex> entries_;
};

struct CircuitSolution {
    std::map<NodeId, Complex> voltages;      // includes the slack
    std::map<LineId, Complex> line_currents;  // oriented upstream -> downstream
};

/// Exact linear solve of the constant-current circuit. Line current on
/// (u, d) equals minus the total injection in the subtree under d; node
/// voltages follow from the series drops, so KCL/KVL hold by construction.
CircuitSolution solve(const Feeder& feeder, const InjectionSet& injections);

std::map<LineId, double> line_flow_magnitudes(const CircuitSolution& solution);

}  // namespace vpc
