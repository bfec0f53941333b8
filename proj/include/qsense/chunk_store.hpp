#pragma once

#include <deque>
#include <optional>
#include <set>
#include <vector>

#include "qsense/common.hpp"

namespace qsense {

enum class LockBit : int { None = 0, Read = 1, Write = 2 };

/// A chunk's approval of one request.
struct Vote {
    NodeId node = -1;
    SlotId slot = -1;
    RequestId request = 0;
};

struct Waiter {
    RequestId request = 0;
    ReqKind kind = ReqKind::Read;
};

/// Per-chunk state: whether it may vote, what lock it carries, who holds
/// read locks and who is queued behind the current lock.
struct ChunkState {
    bool vote_bit = true;
    LockBit lock_bit = LockBit::None;
    std::set<RequestId> readers;
    std::deque<Waiter> waiting;              // FIFO; priorities live in the scheduler
    std::set<RequestId> outstanding_votes;   // voted, lock not yet applied/released

    bool invariants_hold() const {
        switch (lock_bit) {
        case LockBit::None: return vote_bit && readers.empty();
        case LockBit::Read: return vote_bit && !readers.empty();
        case LockBit::Write: return !vote_bit && readers.empty();
        }
        return false;
    }
};

struct BitTransition {
    NodeId node;
    SlotId slot;
    bool old_vote, new_vote;
    LockBit old_lock, new_lock;
    RequestId request;
};

/// All chunks of the cluster, indexed by (node, slot). Owned by the
/// single-threaded event loop; every method is one atomic transition.
class ChunkStore {
public:
    ChunkStore(int nodes, int alpha);

    int nodes() const { return nodes_; }
    int alpha() const { return alpha_; }

    const ChunkState& state(ChunkRef c) const { return at(c); }

    /// Emits a Vote iff the vote bit is set and `kind` is compatible with
    /// the current lock (free: anything; read-locked: read/repair;
    /// write-locked: nothing). A denied request joins the waiting queue
    /// unless it is already in it.
    std::optional<Vote> request_vote(ChunkRef c, ReqKind kind, RequestId req);

    /// True if a vote for `kind` would be granted right now.
    bool can_vote(ChunkRef c, ReqKind kind) const;

    /// Read: lock bit 1, request joins readers, vote bit unchanged.
    /// Write: requires a free chunk; vote bit 0, lock bit 2.
    BitTransition apply_lock(ChunkRef c, ReqKind kind, RequestId req);

    /// Drops req's lock. When the chunk becomes free the compatible heads
    /// of the waiting queue are popped and returned for re-voting.
    std::pair<BitTransition, std::vector<Waiter>> release_lock(ChunkRef c, RequestId req);

    /// Removes req from the waiting queue (re-selection / demotion).
    bool cancel_waiting(ChunkRef c, RequestId req);

    bool is_waiting(ChunkRef c, RequestId req) const;

    /// Clears the outstanding-vote marker without applying a lock (vote
    /// went stale or the solicitation was cancelled).
    void retract_vote(ChunkRef c, RequestId req);

    /// Pops compatible waiting heads for an already-free chunk.
    std::vector<Waiter> promote_waiters(ChunkRef c);

    bool all_invariants_hold() const;

private:
    ChunkState& at(ChunkRef c);
    const ChunkState& at(ChunkRef c) const;

    int nodes_;
    int alpha_;
    std::vector<ChunkState> chunks_;
};

} // namespace qsense
