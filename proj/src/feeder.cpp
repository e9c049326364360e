#include "vpc/feeder.hpp"

#include <algorithm>
#include <set>

namespace vpc {

Feeder::Feeder(std::vector<NodeId> nodes, std::vector<Line> lines, Complex slack_voltage)
    : nodes_(std::move(nodes)), lines_(std::move(lines)), slack_voltage_(slack_voltage) {
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
        index_[nodes_[k]] = k;
    }
    for (const Line& line : lines_) {
        parent_[line.down] = line.up;
    }
    validate();
    // keep lines in root-to-leaf order so a single pass computes voltages
    // and a reverse pass accumulates subtree injections
    std::map<NodeId, int> depth;
    depth[slack()] = 0;
    auto node_depth = [&](NodeId n) {
        std::vector<NodeId> chase;
        while (depth.find(n) == depth.end()) {
            chase.push_back(n);
            n = parent_.at(n);
        }
        int d = depth.at(n);
        for (auto it = chase.rbegin(); it != chase.rend(); ++it) {
            depth[*it] = ++d;
        }
        return d;
    };
    std::stable_sort(lines_.begin(), lines_.end(), [&](const Line& a, const Line& b) {
        return node_depth(a.down) < node_depth(b.down);
    });
}

Feeder Feeder::chain(int node_count, Complex line_impedance, Complex slack_voltage) {
    std::vector<NodeId> nodes;
    std::vector<Line> lines;
    for (int k = 0; k < node_count; ++k) {
        nodes.push_back(k);
        if (k > 0) {
            lines.push_back(Line{k - 1, k, line_impedance, std::nullopt});
        }
    }
    return Feeder(std::move(nodes), std::move(lines), slack_voltage);
}

void Feeder::validate() const {
    if (nodes_.empty()) {
        throw std::invalid_argument("feeder needs at least the slack node");
    }
    if (index_.size() != nodes_.size()) {
        throw std::invalid_argument("duplicate node ids");
    }
    if (!is_finite(slack_voltage_)) {
        throw std::invalid_argument("slack voltage must be finite");
    }
    if (lines_.size() + 1 != nodes_.size()) {
        throw std::invalid_argument("line count must be node count - 1");
    }
    std::set<NodeId> seen_down;
    for (const Line& line : lines_) {
        if (!has_node(line.up)) throw UnknownNode(line.up);
        if (!has_node(line.down)) throw UnknownNode(line.down);
        if (line.down == slack()) {
            throw std::invalid_argument("slack node cannot have an upstream line");
        }
        if (!seen_down.insert(line.down).second) {
            throw std::invalid_argument("node " + std::to_string(line.down) +
                                        " has more than one upstream line");
        }
        if (!is_finite(line.impedance) || std::abs(line.impedance) <= 0.0) {
            throw std::invalid_argument("line impedance must be finite and nonzero");
        }
    }
    // every non-slack node must reach the slack through parents (no cycles)
    for (NodeId n : nodes_) {
        NodeId cur = n;
        std::size_t hops = 0;
        while (cur != slack()) {
            auto it = parent_.find(cur);
            if (it == parent_.end()) {
                throw std::invalid_argument("node " + std::to_string(n) +
                                            " is not connected to the slack");
            }
            cur = it->second;
            if (++hops > nodes_.size()) {
                throw std::invalid_argument("feeder topology contains a cycle");
            }
        }
    }
}

const Line& Feeder::upstream_line(NodeId n) const {
    if (!has_node(n)) throw UnknownNode(n);
    if (n == slack()) {
        throw std::invalid_argument("slack node has no upstream line");
    }
    for (const Line& line : lines_) {
        if (line.down == n) return line;
    }
    throw std::logic_error("validated feeder is missing an upstream line");
}

Complex Feeder::common_path_impedance(NodeId a, NodeId b) const {
    if (!has_node(a)) throw UnknownNode(a);
    if (!has_node(b)) throw UnknownNode(b);
    auto path_to_root = [&](NodeId n) {
        std::vector<NodeId> path;  // n, ..., slack
        for (NodeId cur = n; cur != slack(); cur = parent_.at(cur)) {
            path.push_back(cur);
        }
        path.push_back(slack());
        return path;
    };
    std::vector<NodeId> pa = path_to_root(a);
    std::set<NodeId> on_a(pa.begin(), pa.end());
    // walk from b toward the root until the paths merge, then sum the rest
    NodeId meet = b;
    while (on_a.count(meet) == 0) {
        meet = parent_.at(meet);
    }
    Complex total{0.0, 0.0};
    for (NodeId cur = meet; cur != slack(); cur = parent_.at(cur)) {
        total += upstream_line(cur).impedance;
    }
    return total;
}

bool Feeder::in_subtree(NodeId n, NodeId root) const {
    if (!has_node(n)) throw UnknownNode(n);
    if (!has_node(root)) throw UnknownNode(root);
    for (NodeId cur = n;; cur = parent_.at(cur)) {
        if (cur == root) return true;
        if (cur == slack()) return false;
    }
}

InjectionSet::InjectionSet(std::initializer_list<std::pair<NodeId, Complex>> entries) {
    for (const auto& [node, current] : entries) {
        set(node, current);
    }
}

void InjectionSet::set(NodeId node, Complex current) {
    if (!is_finite(current)) {
        throw std::invalid_argument("injection current must be finite");
    }
    entries_[node] = current;
}

void InjectionSet::add(NodeId node, Complex current) {
    set(node, at(node) + current);
}

Complex InjectionSet::at(NodeId node) const {
    auto it = entries_.find(node);
    return it == entries_.end() ? Complex{0.0, 0.0} : it->second;
}

InjectionSet InjectionSet::plus(const InjectionSet& other) const {
    InjectionSet out = *this;
    for (const auto& [node, current] : other.entries_) {
        out.add(node, current);
    }
    return out;
}

InjectionSet InjectionSet::scaled(double factor) const {
    InjectionSet out;
    for (const auto& [node, current] : entries_) {
        out.set(node, current * factor);
    }
    return out;
}

CircuitSolution solve(const Feeder& feeder, const InjectionSet& injections) {
    for (const auto& [node, current] : injections.entries()) {
        if (!feeder.has_node(node)) throw UnknownNode(node);
        if (node == feeder.slack()) {
            throw std::invalid_argument("the slack node cannot carry an injection");
        }
        (void)current;
    }

    // subtree injection sums, leaves first
    std::map<NodeId, Complex> subtree_sum;
    for (NodeId n : feeder.nodes()) {
        subtree_sum[n] = injections.at(n);
    }
    const auto& lines = feeder.lines();
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        subtree_sum[it->up] += subtree_sum[it->down];
    }

    CircuitSolution sol;
    sol.voltages[feeder.slack()] = feeder.slack_voltage();
    for (const Line& line : lines) {
        const Complex current = -subtree_sum[line.down];
        sol.line_currents[line.id()] = current;
        sol.voltages[line.down] = sol.voltages.at(line.up) - current * line.impedance;
    }
    return sol;
}

std::map<LineId, double> line_flow_magnitudes(const CircuitSolution& solution) {
    std::map<LineId, double> out;
    for (const auto& [id, current] : solution.line_currents) {
        out[id] = std::abs(current);
    }
    return out;
}

}  // namespace vpc
