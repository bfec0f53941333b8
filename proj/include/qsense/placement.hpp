#pragma once

#include <iosfwd>
#include <map>
#include <vector>

#include "qsense/code_model.hpp"
#include "qsense/common.hpp"

namespace qsense {

/// The chunks changed by one native chunk, in footprint-row order.
struct Group {
    int index = 0;                 ///< native chunk index
    std::vector<ChunkId> chunks;   ///< sorted
};

/// chunk -> (node, slot) assignment plus the inverse node -> chunk view.
class PlacementMap {
public:
    PlacementMap() = default;
    PlacementMap(int nodes, int alpha);

    void place(ChunkId c, NodeId node, SlotId slot);

    bool is_placed(ChunkId c) const;
    ChunkRef locate(ChunkId c) const;

    /// Chunks on one node, by slot; -1 marks an empty slot.
    const std::vector<ChunkId>& node_chunks(NodeId node) const;

    int placed_count() const { return placed_; }
    int node_count() const { return nodes_; }
    int alpha() const { return alpha_; }

    void write_csv(std::ostream& out) const;
    static PlacementMap read_csv(int nodes, int alpha, std::istream& in);

private:
    int nodes_ = 0;
    int alpha_ = 0;
    int placed_ = 0;
    std::map<ChunkId, ChunkRef> where_;
    std::vector<std::vector<ChunkId>> per_node_;
};

/// One audit record per greedy step, for oracle checks.
struct GroupChoice {
    int group = 0;                          ///< chosen group index
    int overlap = 0;                        ///< shared chunks with node content
    NodeId node = -1;                       ///< node being filled at choice time
    std::vector<ChunkId> node_content;      ///< chunks on that node before placing
    std::vector<int> unplaced_groups;       ///< candidates at choice time
};

/// Group g is footprint row g.
std::vector<Group> build_groups(const FootprintMatrix& f);

/// Greedy packing: fill node 0 with group 0, spill overflow forward, then
/// repeatedly place the unplaced group sharing the most chunks with the
/// current node's content (ties by group index; zero overlap falls back to
/// the lowest-index unplaced group). Shared chunks are stored once.
PlacementMap assign(const std::vector<Group>& groups, int nodes, int alpha,
                    std::vector<GroupChoice>* audit = nullptr);

} // namespace qsense
