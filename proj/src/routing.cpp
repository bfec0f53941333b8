#include "qsense/routing.hpp"

#include <algorithm>
#include <deque>
#include <numeric>

namespace qsense {

Topology::Topology(int n, std::vector<std::vector<NodeId>> adj)
    : n_(n), adj_(std::move(adj)) {
    compute_distances();
}

Topology Topology::path(int n) {
    if (n < 1) throw ParamViolation("topology needs at least one node");
    std::vector<std::vector<NodeId>> adj(static_cast<std::size_t>(n));
    for (int v = 0; v + 1 < n; ++v) {
        adj[static_cast<std::size_t>(v)].push_back(v + 1);
        adj[static_cast<std::size_t>(v + 1)].push_back(v);
    }
    return Topology(n, std::move(adj));
}

Topology Topology::ring(int n) {
    if (n < 3) return path(n);
    auto t = path(n);
    t.adj_[0].push_back(n - 1);
    t.adj_[static_cast<std::size_t>(n - 1)].push_back(0);
    t.compute_distances();
    return t;
}

Topology Topology::from_edges(int n, const std::vector<std::pair<NodeId, NodeId>>& edges) {
    if (n < 1) throw ParamViolation("topology needs at least one node");
    std::vector<std::vector<NodeId>> adj(static_cast<std::size_t>(n));
    for (auto [a, b] : edges) {
        if (a < 0 || a >= n || b < 0 || b >= n || a == b) {
            throw ParamViolation("bad topology edge " + std::to_string(a) + "-" +
                                 std::to_string(b));
        }
        adj[static_cast<std::size_t>(a)].push_back(b);
        adj[static_cast<std::size_t>(b)].push_back(a);
    }
    Topology t(n, std::move(adj));
    for (int v = 0; v < n; ++v) {
        if (t.dist_[0][static_cast<std::size_t>(v)] < 0) {
            throw ParamViolation("topology must be connected");
        }
    }
    return t;
}

void Topology::compute_distances() {
    dist_.assign(static_cast<std::size_t>(n_),
                 std::vector<int>(static_cast<std::size_t>(n_), -1));
    for (int s = 0; s < n_; ++s) {
        auto& d = dist_[static_cast<std::size_t>(s)];
        std::deque<NodeId> bfs{s};
        d[static_cast<std::size_t>(s)] = 0;
        while (!bfs.empty()) {
            NodeId v = bfs.front();
            bfs.pop_front();
            for (NodeId u : adj_[static_cast<std::size_t>(v)]) {
                if (d[static_cast<std::size_t>(u)] < 0) {
                    d[static_cast<std::size_t>(u)] = d[static_cast<std::size_t>(v)] + 1;
                    bfs.push_back(u);
                }
            }
        }
    }
}

int Topology::hop_distance(NodeId a, NodeId b) const {
    return dist_[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
}

int write_distance(const Topology& t, const std::set<NodeId>& write_nodes, NodeId v) {
    int sum = 0;
    for (NodeId u : write_nodes) sum += t.hop_distance(v, u);
    return sum;
}

void WriteDistanceTable::refresh(const std::set<NodeId>& write_nodes) {
    any_writes_ = !write_nodes.empty();
    for (NodeId v = 0; v < topo_->node_count(); ++v) {
        table_[static_cast<std::size_t>(v)] = write_distance(*topo_, write_nodes, v);
    }
}

std::vector<NodeId> pick_read_nodes(const WriteDistanceTable& wdt, int k, RngStream& rng) {
    const int n = static_cast<int>(wdt.values().size());
    if (k > n) throw ParamViolation("cannot pick " + std::to_string(k) + " of " +
                                    std::to_string(n) + " nodes");
    if (!wdt.any_writes()) {
        // no writes anywhere: a random window of adjacent nodes
        const int start = static_cast<int>(rng.below(static_cast<std::uint64_t>(n - k + 1)));
        std::vector<NodeId> out(static_cast<std::size_t>(k));
        std::iota(out.begin(), out.end(), start);
        return out;
    }
    std::vector<NodeId> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
        if (wdt.at(a) != wdt.at(b)) return wdt.at(a) > wdt.at(b);
        return a < b;
    });
    order.resize(static_cast<std::size_t>(k));
    return order;
}

} // namespace qsense
