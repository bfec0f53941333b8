#include "qsense/placement.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace qsense {

PlacementMap::PlacementMap(int nodes, int alpha)
    : nodes_(nodes),
      alpha_(alpha),
      per_node_(static_cast<std::size_t>(nodes),
                std::vector<ChunkId>(static_cast<std::size_t>(alpha), -1)) {}

void PlacementMap::place(ChunkId c, NodeId node, SlotId slot) {
    if (node < 0 || node >= nodes_ || slot < 0 || slot >= alpha_) {
        throw CapacityExceeded("placement coordinate out of range");
    }
    if (where_.count(c)) throw CapacityExceeded("chunk placed twice");
    if (per_node_[static_cast<std::size_t>(node)][static_cast<std::size_t>(slot)] != -1) {
        throw CapacityExceeded("slot occupied");
    }
    where_[c] = ChunkRef{node, slot};
    per_node_[static_cast<std::size_t>(node)][static_cast<std::size_t>(slot)] = c;
    ++placed_;
}

bool PlacementMap::is_placed(ChunkId c) const { return where_.count(c) > 0; }

ChunkRef PlacementMap::locate(ChunkId c) const {
    auto it = where_.find(c);
    if (it == where_.end()) {
        throw Unplaced("chunk " + std::to_string(c) + " is not placed");
    }
    return it->second;
}

const std::vector<ChunkId>& PlacementMap::node_chunks(NodeId node) const {
    return per_node_[static_cast<std::size_t>(node)];
}

void PlacementMap::write_csv(std::ostream& out) const {
    out << "# qsense-placement v1\n";
    out << "chunk,node,slot\n";
    for (const auto& [c, ref] : where_) {
        out << c << ',' << ref.node << ',' << ref.slot << '\n';
    }
}

PlacementMap PlacementMap::read_csv(int nodes, int alpha, std::istream& in) {
    PlacementMap pm(nodes, alpha);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("chunk,", 0) == 0) continue;
        std::istringstream ss(line);
        std::string c, node, slot;
        if (std::getline(ss, c, ',') && std::getline(ss, node, ',') && std::getline(ss, slot, ',')) {
            pm.place(std::stoi(c), std::stoi(node), std::stoi(slot));
        }
    }
    return pm;
}

std::vector<Group> build_groups(const FootprintMatrix& f) {
    std::vector<Group> groups;
    groups.reserve(static_cast<std::size_t>(f.native_count()));
    for (int u = 0; u < f.native_count(); ++u) {
        groups.push_back(Group{u, f.row(u)});
    }
    return groups;
}

PlacementMap assign(const std::vector<Group>& groups, int nodes, int alpha,
                    std::vector<GroupChoice>* audit) {
    std::set<ChunkId> distinct;
    for (const auto& g : groups) distinct.insert(g.chunks.begin(), g.chunks.end());
    if (static_cast<int>(distinct.size()) > nodes * alpha) {
        throw CapacityExceeded(std::to_string(distinct.size()) + " distinct chunks exceed " +
                               std::to_string(nodes) + "*" + std::to_string(alpha) +
                               " slots");
    }

    PlacementMap pm(nodes, alpha);
    std::set<ChunkId> placed;
    std::vector<bool> done(groups.size(), false);
    NodeId cur = 0;
    SlotId slot = 0;
    std::vector<ChunkId> cur_content;

    auto place_chunk = [&](ChunkId c) {
        if (placed.count(c)) return;
        if (slot == alpha) {  // node full, move on
            ++cur;
            slot = 0;
            cur_content.clear();
        }
        pm.place(c, cur, slot++);
        placed.insert(c);
        cur_content.push_back(c);
    };

    std::size_t remaining = groups.size();
    while (remaining > 0) {
        // A full node has no residual context: the next chunk starts an
        // empty node, so overlaps are measured against nothing.
        const std::vector<ChunkId> no_context;
        const std::vector<ChunkId>& ctx = (slot == alpha) ? no_context : cur_content;

        int choice = -1;
        int best_overlap = -1;
        std::vector<int> candidates;
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            if (done[gi]) continue;
            candidates.push_back(static_cast<int>(gi));
            int ov = 0;
            for (ChunkId c : groups[gi].chunks) {
                if (std::find(ctx.begin(), ctx.end(), c) != ctx.end()) ++ov;
            }
            if (ov > best_overlap) {  // ties keep the lowest group index
                best_overlap = ov;
                choice = static_cast<int>(gi);
            }
        }
        if (audit) {
            audit->push_back(GroupChoice{groups[static_cast<std::size_t>(choice)].index,
                                         best_overlap, (slot == alpha) ? cur + 1 : cur, ctx,
                                         candidates});
        }
        for (ChunkId c : groups[static_cast<std::size_t>(choice)].chunks) place_chunk(c);
        done[static_cast<std::size_t>(choice)] = true;
        --remaining;
    }
    return pm;
}

} // namespace qsense
