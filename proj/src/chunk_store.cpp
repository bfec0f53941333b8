#include "qsense/chunk_store.hpp"

#include <algorithm>

namespace qsense {

namespace {
std::string chunk_name(ChunkRef c) {
    return "(" + std::to_string(c.node) + "," + std::to_string(c.slot) + ")";
}
}  // namespace

ChunkStore::ChunkStore(int nodes, int alpha)
    : nodes_(nodes),
      alpha_(alpha),
      chunks_(static_cast<std::size_t>(nodes) * static_cast<std::size_t>(alpha)) {}

ChunkState& ChunkStore::at(ChunkRef c) {
    if (c.node < 0 || c.node >= nodes_ || c.slot < 0 || c.slot >= alpha_) {
        throw IndexOutOfRange("no chunk at " + chunk_name(c));
    }
    return chunks_[static_cast<std::size_t>(c.node) * static_cast<std::size_t>(alpha_) +
                   static_cast<std::size_t>(c.slot)];
}

const ChunkState& ChunkStore::at(ChunkRef c) const {
    return const_cast<ChunkStore*>(this)->at(c);
}

bool ChunkStore::can_vote(ChunkRef c, ReqKind kind) const {
    const ChunkState& s = at(c);
    if (!s.vote_bit) return false;
    switch (s.lock_bit) {
    case LockBit::None: return true;
    case LockBit::Read: return kind == ReqKind::Read || kind == ReqKind::Repair;
    case LockBit::Write: return false;
    }
    return false;
}

std::optional<Vote> ChunkStore::request_vote(ChunkRef c, ReqKind kind, RequestId req) {
    ChunkState& s = at(c);
    if (can_vote(c, kind)) {
        if (s.outstanding_votes.count(req) || s.readers.count(req)) {
            throw DuplicateVote("chunk " + chunk_name(c) + " already voted for request " +
                                std::to_string(req));
        }
        s.outstanding_votes.insert(req);
        return Vote{c.node, c.slot, req};
    }
    if (!is_waiting(c, req)) s.waiting.push_back(Waiter{req, kind});
    return std::nullopt;
}

BitTransition ChunkStore::apply_lock(ChunkRef c, ReqKind kind, RequestId req) {
    ChunkState& s = at(c);
    BitTransition tr{c.node, c.slot, s.vote_bit, s.vote_bit, s.lock_bit, s.lock_bit, req};
    if (kind == ReqKind::Write) {
        if (s.lock_bit != LockBit::None) {
            throw IllegalLock("write lock on non-free chunk " + chunk_name(c));
        }
        s.vote_bit = false;
        s.lock_bit = LockBit::Write;
        s.readers.clear();
    } else {
        if (s.lock_bit == LockBit::Write) {
            throw IllegalLock("read lock on write-locked chunk " + chunk_name(c));
        }
        s.lock_bit = LockBit::Read;
        s.readers.insert(req);
    }
    s.outstanding_votes.erase(req);
    tr.new_vote = s.vote_bit;
    tr.new_lock = s.lock_bit;
    return tr;
}

std::pair<BitTransition, std::vector<Waiter>> ChunkStore::release_lock(ChunkRef c,
                                                                       RequestId req) {
    ChunkState& s = at(c);
    BitTransition tr{c.node, c.slot, s.vote_bit, s.vote_bit, s.lock_bit, s.lock_bit, req};
    if (s.lock_bit == LockBit::Write) {
        s.lock_bit = LockBit::None;
        s.vote_bit = true;
    } else if (s.lock_bit == LockBit::Read && s.readers.count(req)) {
        s.readers.erase(req);
        if (s.readers.empty()) s.lock_bit = LockBit::None;
    } else {
        throw NotHeld("request " + std::to_string(req) + " holds no lock on chunk " +
                      chunk_name(c));
    }
    tr.new_vote = s.vote_bit;
    tr.new_lock = s.lock_bit;
    std::vector<Waiter> promoted;
    if (s.lock_bit == LockBit::None) promoted = promote_waiters(c);
    return {tr, promoted};
}

std::vector<Waiter> ChunkStore::promote_waiters(ChunkRef c) {
    ChunkState& s = at(c);
    std::vector<Waiter> out;
    if (s.lock_bit != LockBit::None || s.waiting.empty()) return out;
    if (s.waiting.front().kind == ReqKind::Write) {
        // a write head is promoted alone
        out.push_back(s.waiting.front());
        s.waiting.pop_front();
        return out;
    }
    // consecutive reads and repairs are compatible with one another
    while (!s.waiting.empty() && s.waiting.front().kind != ReqKind::Write) {
        out.push_back(s.waiting.front());
        s.waiting.pop_front();
    }
    return out;
}

bool ChunkStore::cancel_waiting(ChunkRef c, RequestId req) {
    ChunkState& s = at(c);
    auto it = std::find_if(s.waiting.begin(), s.waiting.end(),
                           [&](const Waiter& w) { return w.request == req; });
    if (it == s.waiting.end()) return false;
    s.waiting.erase(it);
    return true;
}

bool ChunkStore::is_waiting(ChunkRef c, RequestId req) const {
    const ChunkState& s = at(c);
    return std::any_of(s.waiting.begin(), s.waiting.end(),
                       [&](const Waiter& w) { return w.request == req; });
}

void ChunkStore::retract_vote(ChunkRef c, RequestId req) {
    at(c).outstanding_votes.erase(req);
}

bool ChunkStore::all_invariants_hold() const {
    return std::all_of(chunks_.begin(), chunks_.end(),
                       [](const ChunkState& s) { return s.invariants_hold(); });
}

} // namespace qsense
