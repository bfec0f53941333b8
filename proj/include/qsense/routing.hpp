#pragma once

#include <set>
#include <utility>
#include <vector>

#include "qsense/common.hpp"
#include "qsense/rng.hpp"

namespace qsense {

/// Undirected connected node graph. The path (line) shape is the default
/// because it reproduces the write-distance worked example; ring and
/// explicit edge lists are accepted too.
class Topology {
public:
    static Topology path(int n);
    static Topology ring(int n);
    static Topology from_edges(int n, const std::vector<std::pair<NodeId, NodeId>>& edges);

    int node_count() const { return n_; }

    /// Shortest-path hop count; symmetric, zero on the diagonal.
    int hop_distance(NodeId a, NodeId b) const;

private:
    Topology(int n, std::vector<std::vector<NodeId>> adj);
    void compute_distances();

    int n_ = 0;
    std::vector<std::vector<NodeId>> adj_;
    std::vector<std::vector<int>> dist_;
};

/// Sum of hop distances from v to every node currently under a write lock.
int write_distance(const Topology& t, const std::set<NodeId>& write_nodes, NodeId v);

/// Per-node write distances, maintained by the coordinator and refreshed
/// on every write-lock grant/release.
class WriteDistanceTable {
public:
    WriteDistanceTable() = default;
    explicit WriteDistanceTable(const Topology* t)
        : topo_(t), table_(static_cast<std::size_t>(t->node_count()), 0) {}

    /// Full recomputation from the active write-node set.
    void refresh(const std::set<NodeId>& write_nodes);

    int at(NodeId v) const { return table_[static_cast<std::size_t>(v)]; }
    const std::vector<int>& values() const { return table_; }
    bool any_writes() const { return any_writes_; }

private:
    const Topology* topo_ = nullptr;
    std::vector<int> table_;
    bool any_writes_ = false;
};

/// k read targets: by descending write distance (ties by node index) when
/// writes are active, otherwise a seeded random contiguous window of k
/// adjacent nodes.
std::vector<NodeId> pick_read_nodes(const WriteDistanceTable& wdt, int k, RngStream& rng);

} // namespace qsense
