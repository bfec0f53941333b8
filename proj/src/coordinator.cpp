#include "qsense/coordinator.hpp"

#include <algorithm>
#include <cassert>
#include <numeric>
#include <sstream>

namespace qsense {

// ---------------------------------------------------------------- LockTable

void LockTable::insert(RequestId req, ChunkRef c, LockType t) {
    auto& entries = by_chunk_[c];
    if (t == LockType::Write) {
        for (const auto& [other, ot] : entries) {
            if (ot == LockType::Write || ot == LockType::Read) {
                throw IllegalLock("write entry conflicts with existing lock on chunk");
            }
        }
    }
    if (t == LockType::Read) {
        for (const auto& [other, ot] : entries) {
            if (ot == LockType::Write) {
                throw IllegalLock("read entry conflicts with write lock on chunk");
            }
        }
    }
    auto [it, inserted] = entries.emplace(req, t);
    if (!inserted) {
        it->second = t;
        return;
    }
    ++count_;
}

void LockTable::erase(RequestId req, ChunkRef c) {
    auto it = by_chunk_.find(c);
    if (it == by_chunk_.end() || !it->second.count(req)) {
        throw NotHeld("no lock-table entry for request " + std::to_string(req));
    }
    it->second.erase(req);
    if (it->second.empty()) by_chunk_.erase(it);
    --count_;
}

bool LockTable::has(RequestId req, ChunkRef c, LockType t) const {
    auto f = find(req, c);
    return f && *f == t;
}

std::optional<LockType> LockTable::find(RequestId req, ChunkRef c) const {
    auto it = by_chunk_.find(c);
    if (it == by_chunk_.end()) return std::nullopt;
    auto jt = it->second.find(req);
    if (jt == it->second.end()) return std::nullopt;
    return jt->second;
}

const std::map<RequestId, LockType>* LockTable::chunk_entries(ChunkRef c) const {
    auto it = by_chunk_.find(c);
    return it == by_chunk_.end() ? nullptr : &it->second;
}

// ------------------------------------------------------------- restriction

std::optional<RequestId> check_consistency_restriction(
    const std::set<ChunkRef>& candidate, const std::vector<PendingWriteRecord>& records) {
    for (const auto& rec : records) {
        bool hits_done = false;
        bool hits_waiting = false;
        for (const ChunkRef& c : candidate) {
            if (!hits_done && rec.done_set.count(c)) hits_done = true;
            if (!hits_waiting && rec.waiting_set.count(c)) hits_waiting = true;
            if (hits_done && hits_waiting) return rec.request;
        }
    }
    return std::nullopt;
}

void CoordResult::merge(CoordResult&& other) {
    messages.insert(messages.end(), other.messages.begin(), other.messages.end());
    quorum_reached.insert(quorum_reached.end(), other.quorum_reached.begin(),
                          other.quorum_reached.end());
}

// -------------------------------------------------------------- Coordinator

Coordinator::Coordinator(const CodeParams& params, const FootprintMatrix& footprint,
                         const PlacementMap& placement, const Topology& topology,
                         TraceSink& sink, RngStream routing_rng)
    : params_(validate_params(params)),
      quorums_(quorum_values(params)),
      footprint_(footprint),
      placement_(placement),
      topology_(topology),
      sink_(sink),
      routing_rng_(routing_rng),
      store_(params.N, params.alpha),
      wdt_(&topology) {}

Request& Coordinator::req(RequestId id) {
    auto it = requests_.find(id);
    if (it == requests_.end()) throw UnknownRequest("request " + std::to_string(id));
    return it->second;
}

const Request& Coordinator::request(RequestId id) const {
    return const_cast<Coordinator*>(this)->req(id);
}

void Coordinator::set_state(Request& r, ReqState s) {
    r.state = s;
    if (s == ReqState::WaitingOnLocks && r.kind != ReqKind::Write) {
        starving_.insert(r.id);
    } else {
        starving_.erase(r.id);
    }
}

void Coordinator::forget(RequestId id) {
    auto it = requests_.find(id);
    if (it == requests_.end()) return;
    if (it->second.state != ReqState::Done) {
        throw UnknownRequest("cannot forget an unfinished request");
    }
    starving_.erase(id);
    requests_.erase(it);
}

ChunkRef Coordinator::locate(ChunkId c) const { return placement_.locate(c); }

std::set<ChunkRef> Coordinator::node_chunk_set(NodeId node) const {
    std::set<ChunkRef> out;
    for (SlotId j = 0; j < params_.alpha; ++j) out.insert(ChunkRef{node, j});
    return out;
}

void Coordinator::trace(double now, TraceEvent ev, const Request& r, ChunkRef c,
                        std::string detail) {
    TraceRow row;
    row.time = now;
    row.event = ev;
    row.request = r.id;
    row.kind = r.kind;
    row.node = c.node;
    row.slot = c.slot;
    row.detail = std::move(detail);
    sink_.row(row);
}

void Coordinator::trace_bits(double now, const BitTransition& tr) {
    TraceRow row;
    row.time = now;
    row.event = TraceEvent::Bits;
    row.request = tr.request;
    row.has_kind = false;
    row.node = tr.node;
    row.slot = tr.slot;
    row.detail = "bits=v" + std::to_string(tr.old_vote ? 1 : 0) + "l" +
                 std::to_string(static_cast<int>(tr.old_lock)) + ">v" +
                 std::to_string(tr.new_vote ? 1 : 0) + "l" +
                 std::to_string(static_cast<int>(tr.new_lock));
    sink_.row(row);
}

RequestId Coordinator::create_request(ReqKind kind, double now, int native_idx,
                                      std::optional<std::vector<NodeId>> forced_nodes,
                                      bool manual) {
    Request r;
    r.id = next_id_++;
    r.kind = kind;
    r.arrival = now;
    r.manual = manual;
    r.activated = !manual;
    switch (kind) {
    case ReqKind::Read:
        r.quorum = quorums_.r;
        if (forced_nodes) {
            if (static_cast<int>(forced_nodes->size()) != params_.k) {
                throw ConfigError("forced read target list must have k nodes");
            }
            r.forced_nodes = std::move(forced_nodes);
        }
        break;
    case ReqKind::Write: {
        if (native_idx < 0 || native_idx >= params_.k) {
            throw IndexOutOfRange("write needs a native chunk index in 0..k-1");
        }
        r.native_idx = native_idx;
        const auto& row = footprint_.row(native_idx);
        for (ChunkId c : row) r.write_targets.push_back(locate(c));
        std::sort(r.write_targets.begin(), r.write_targets.end());
        r.quorum = static_cast<int>(r.write_targets.size());
        break;
    }
    case ReqKind::Repair:
        r.quorum = quorums_.rep;
        break;
    }
    const RequestId id = r.id;
    requests_.emplace(id, std::move(r));
    return id;
}

std::vector<PendingWriteRecord> Coordinator::pending_write_records() const {
    std::vector<PendingWriteRecord> out;
    for (const auto& [id, r] : requests_) {
        if (r.kind != ReqKind::Write) continue;
        if (r.state != ReqState::WaitingVotes && r.state != ReqState::WaitingOnLocks) continue;
        if (r.locked_chunks.empty() && r.waiting_chunks.empty()) continue;
        out.push_back(PendingWriteRecord{id, r.locked_chunks, r.waiting_chunks});
    }
    return out;
}

bool Coordinator::restriction_allows(const Request& r, const std::set<ChunkRef>& extra) const {
    std::set<ChunkRef> candidate = r.locked_chunks;
    candidate.insert(extra.begin(), extra.end());
    auto records = pending_write_records();
    // a write never restricts itself
    std::erase_if(records, [&](const PendingWriteRecord& rec) { return rec.request == r.id; });
    return !check_consistency_restriction(candidate, records).has_value();
}

std::vector<NodeId> Coordinator::read_preference_order(int k_needed, bool initial) {
    if (wdt_.any_writes() || !initial) {
        std::vector<NodeId> order(static_cast<std::size_t>(params_.N));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
            if (wdt_.at(a) != wdt_.at(b)) return wdt_.at(a) > wdt_.at(b);
            return a < b;
        });
        return order;
    }
    // no writes anywhere: start from a random window of adjacent nodes,
    // then fall back to index order for replacements
    std::vector<NodeId> order = pick_read_nodes(wdt_, std::min(k_needed, params_.N), routing_rng_);
    std::set<NodeId> seen(order.begin(), order.end());
    for (NodeId v = 0; v < params_.N; ++v) {
        if (!seen.count(v)) order.push_back(v);
    }
    return order;
}

std::vector<NodeId> Coordinator::admissible_read_nodes(Request& r, int needed, bool initial) {
    std::vector<NodeId> out;
    if (needed <= 0) return out;
    std::vector<NodeId> order;
    if (r.forced_nodes) {
        order = *r.forced_nodes;
    } else {
        order = read_preference_order(params_.k, initial);
    }
    for (NodeId v : order) {
        if (static_cast<int>(out.size()) >= needed) break;
        if (r.held_nodes.count(v) || r.solicited_nodes.count(v) || r.failed_nodes.count(v)) {
            continue;
        }
        if (!restriction_allows(r, node_chunk_set(v))) continue;
        out.push_back(v);
    }
    return out;
}

std::vector<ChunkRef> Coordinator::pick_repair_chunks(NodeId node) const {
    std::vector<ChunkRef> lockable, rest;
    for (SlotId j = 0; j < params_.alpha; ++j) {
        ChunkRef c{node, j};
        (store_.can_vote(c, ReqKind::Repair) ? lockable : rest).push_back(c);
    }
    lockable.insert(lockable.end(), rest.begin(), rest.end());
    lockable.resize(static_cast<std::size_t>(params_.beta));
    return lockable;
}

std::vector<NodeId> Coordinator::admissible_repair_nodes(Request& r, int needed) {
    std::vector<NodeId> out;
    if (needed <= 0) return out;
    std::vector<NodeId> order(static_cast<std::size_t>(params_.N));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
        if (wdt_.at(a) != wdt_.at(b)) return wdt_.at(a) > wdt_.at(b);
        return a < b;
    });
    for (NodeId v : order) {
        if (static_cast<int>(out.size()) >= needed) break;
        if (r.held_nodes.count(v) || r.solicited_nodes.count(v) || r.failed_nodes.count(v)) {
            continue;
        }
        auto picks = pick_repair_chunks(v);
        if (!restriction_allows(r, std::set<ChunkRef>(picks.begin(), picks.end()))) continue;
        out.push_back(v);
    }
    return out;
}

CoordResult Coordinator::solicit_chunk(Request& r, ChunkRef c, double now) {
    CoordResult res;
    const std::uint64_t ticket = new_ticket();
    r.tickets[c] = ticket;
    trace(now, TraceEvent::Solicit, r, c, "epoch=" + std::to_string(r.epoch));
    res.messages.push_back(OutMsg{OutMsg::Type::VoteRequest, r.id, c, r.kind, ticket});
    return res;
}

CoordResult Coordinator::solicit_node(Request& r, NodeId node, double now) {
    CoordResult res;
    r.solicited_nodes.insert(node);
    if (r.kind == ReqKind::Repair) {
        auto it = r.repair_targets.find(node);
        if (it == r.repair_targets.end()) {
            it = r.repair_targets.emplace(node, pick_repair_chunks(node)).first;
        }
        for (ChunkRef c : it->second) res.merge(solicit_chunk(r, c, now));
    } else {
        for (SlotId j = 0; j < params_.alpha; ++j) {
            res.merge(solicit_chunk(r, ChunkRef{node, j}, now));
        }
    }
    return res;
}

CoordResult Coordinator::admit(RequestId id, double now) {
    Request& r = req(id);
    CoordResult res;
    if (!r.activated || r.state == ReqState::Done || r.state == ReqState::LockedRunning) {
        return res;
    }
    switch (r.kind) {
    case ReqKind::Write:
        for (ChunkRef c : r.write_targets) {
            if (r.locked_chunks.count(c) || r.waiting_chunks.count(c) || r.tickets.count(c)) {
                continue;
            }
            res.merge(solicit_chunk(r, c, now));
        }
        break;
    case ReqKind::Read: {
        const int needed = params_.k - static_cast<int>(r.held_nodes.size()) -
                           static_cast<int>(r.solicited_nodes.size());
        const bool initial = r.held_nodes.empty() && r.solicited_nodes.empty();
        auto nodes = admissible_read_nodes(r, needed, initial);
        for (NodeId v : nodes) res.merge(solicit_node(r, v, now));
        if (static_cast<int>(nodes.size()) < needed) {
            ++starvations;
            trace(now, TraceEvent::Starve, r, ChunkRef{},
                  "short=" + std::to_string(needed - static_cast<int>(nodes.size())));
        }
        break;
    }
    case ReqKind::Repair: {
        const int needed = params_.d - static_cast<int>(r.held_nodes.size()) -
                           static_cast<int>(r.solicited_nodes.size());
        auto nodes = admissible_repair_nodes(r, needed);
        for (NodeId v : nodes) res.merge(solicit_node(r, v, now));
        if (static_cast<int>(nodes.size()) < needed) {
            ++starvations;
            trace(now, TraceEvent::Starve, r, ChunkRef{},
                  "short=" + std::to_string(needed - static_cast<int>(nodes.size())));
        }
        break;
    }
    }
    return res;
}

CoordResult Coordinator::deliver_vote_request(const OutMsg& msg, double now) {
    CoordResult res;
    auto it = requests_.find(msg.request);
    if (it == requests_.end()) return res;
    Request& r = it->second;
    auto tk = r.tickets.find(msg.chunk);
    if (tk == r.tickets.end() || tk->second != msg.ticket) return res;  // cancelled in flight

    auto vote = store_.request_vote(msg.chunk, r.kind, r.id);
    if (vote) {
        trace(now, TraceEvent::Vote, r, msg.chunk, "epoch=" + std::to_string(r.epoch));
        res.messages.push_back(OutMsg{OutMsg::Type::VoteReply, r.id, msg.chunk, r.kind,
                                      msg.ticket});
        return res;
    }
    // denied: the chunk queued the request
    ++denials;
    r.waiting_chunks.insert(msg.chunk);
    table_.insert(r.id, msg.chunk,
                  r.kind == ReqKind::Write ? LockType::WaitingWrite : LockType::WaitingRead);
    if (r.state == ReqState::WaitingVotes) set_state(r, ReqState::WaitingOnLocks);
    trace(now, TraceEvent::Deny, r, msg.chunk, "queued");
    if (r.kind != ReqKind::Write) {
        res.messages.push_back(OutMsg{OutMsg::Type::DenialNotice, r.id, msg.chunk, r.kind,
                                      msg.ticket});
    }
    return res;
}

CoordResult Coordinator::on_vote(const OutMsg& msg, double now) {
    CoordResult res;
    auto it = requests_.find(msg.request);
    if (it == requests_.end()) {
        ++stale_votes;
        return res;
    }
    Request& r = it->second;
    auto tk = r.tickets.find(msg.chunk);
    if (r.state == ReqState::Done || r.state == ReqState::LockedRunning ||
        tk == r.tickets.end() || tk->second != msg.ticket) {
        ++stale_votes;
        trace(now, TraceEvent::Stale, r, msg.chunk, "lifecycle");
        return res;
    }
    return grant_vote(r, msg.chunk, now);
}

CoordResult Coordinator::grant_vote(Request& r, ChunkRef c, double now) {
    CoordResult res;
    const ChunkState& s = store_.state(c);

    if (r.kind == ReqKind::Write) {
        if (s.lock_bit != LockBit::None) {
            // lost the race since the vote was emitted; join the queue
            ++stale_votes;
            trace(now, TraceEvent::Stale, r, c, "race");
            store_.retract_vote(c, r.id);
            auto v2 = store_.request_vote(c, r.kind, r.id);
            assert(!v2);
            (void)v2;
            r.waiting_chunks.insert(c);
            table_.insert(r.id, c, LockType::WaitingWrite);
            if (r.state == ReqState::WaitingVotes) set_state(r, ReqState::WaitingOnLocks);
            trace(now, TraceEvent::Deny, r, c, "queued");
            return res;
        }
        auto tr = store_.apply_lock(c, ReqKind::Write, r.id);
        table_.insert(r.id, c, LockType::Write);
        r.locked_chunks.insert(c);
        r.waiting_chunks.erase(c);
        ++r.votes;
        r.tickets.erase(c);
        trace_bits(now, tr);
        trace(now, TraceEvent::Grant, r, c, "lock=write");
        if (++write_lock_count_[c.node] == 1) refresh_wdt(now);
        if (r.votes == r.quorum) res.merge(start_execution(r, now));
        return res;
    }

    // read / repair
    const bool lockable = s.lock_bit != LockBit::Write;
    if (!lockable || !restriction_allows(r, {c})) {
        ++stale_votes;
        trace(now, TraceEvent::Stale, r, c, lockable ? "restriction" : "race");
        store_.retract_vote(c, r.id);
        res.merge(r.kind == ReqKind::Read ? handle_read_denial(r, c.node, now)
                                          : handle_repair_denial(r, c.node, now));
        return res;
    }
    auto tr = store_.apply_lock(c, r.kind, r.id);
    table_.insert(r.id, c, LockType::Read);
    r.locked_chunks.insert(c);
    r.waiting_chunks.erase(c);
    ++r.votes;
    r.tickets.erase(c);
    trace_bits(now, tr);
    trace(now, TraceEvent::Grant, r, c, "lock=read");

    // node-level bookkeeping
    const auto targets = r.kind == ReqKind::Read
                             ? node_chunk_set(c.node)
                             : std::set<ChunkRef>(r.repair_targets[c.node].begin(),
                                                  r.repair_targets[c.node].end());
    const bool node_full = std::all_of(targets.begin(), targets.end(), [&](ChunkRef t) {
        return r.locked_chunks.count(t) > 0;
    });
    if (node_full) {
        r.held_nodes.insert(c.node);
        r.solicited_nodes.erase(c.node);
    }
    if (r.votes == r.quorum) res.merge(start_execution(r, now));
    return res;
}

CoordResult Coordinator::on_denial(const OutMsg& msg, double now) {
    CoordResult res;
    auto it = requests_.find(msg.request);
    if (it == requests_.end()) return res;
    Request& r = it->second;
    if (r.state == ReqState::Done || r.state == ReqState::LockedRunning) return res;
    auto tk = r.tickets.find(msg.chunk);
    if (tk == r.tickets.end() || tk->second != msg.ticket) return res;  // superseded
    if (r.kind == ReqKind::Write) return res;  // writes wait for the locks to release
    return r.kind == ReqKind::Read ? handle_read_denial(r, msg.chunk.node, now)
                                   : handle_repair_denial(r, msg.chunk.node, now);
}

CoordResult Coordinator::abandon_node(Request& r, NodeId node, double now) {
    CoordResult res;
    const auto targets = r.kind == ReqKind::Repair && r.repair_targets.count(node)
                             ? std::set<ChunkRef>(r.repair_targets[node].begin(),
                                                  r.repair_targets[node].end())
                             : node_chunk_set(node);
    for (ChunkRef c : targets) {
        if (r.waiting_chunks.count(c)) {
            store_.cancel_waiting(c, r.id);
            table_.erase(r.id, c);
            r.waiting_chunks.erase(c);
            r.tickets.erase(c);
            trace(now, TraceEvent::Cancel, r, c, "waiting");
        } else if (r.tickets.count(c)) {
            store_.retract_vote(c, r.id);
            r.tickets.erase(c);
            trace(now, TraceEvent::Cancel, r, c, "vote");
        }
        if (r.locked_chunks.count(c)) res.merge(release_chunk(r, c, now));
    }
    r.solicited_nodes.erase(node);
    r.held_nodes.erase(node);
    r.failed_nodes.insert(node);
    if (r.kind == ReqKind::Repair) r.repair_targets.erase(node);
    return res;
}

CoordResult Coordinator::handle_read_denial(Request& r, NodeId node, double now) {
    CoordResult res;
    if (r.held_nodes.count(node)) return res;  // completed while the notice travelled
    auto fresh = admissible_read_nodes(r, 1, false);
    // the denying node is itself admissible-looking; do not pick it again
    std::erase(fresh, node);
    if (!fresh.empty()) {
        res.merge(abandon_node(r, node, now));
        res.merge(solicit_node(r, fresh.front(), now));
        return res;
    }
    // nowhere else to go: keep the waiting entries and starve
    set_state(r, ReqState::WaitingOnLocks);
    ++starvations;
    trace(now, TraceEvent::Starve, r, ChunkRef{-1, -1}, "node=" + std::to_string(node));
    return res;
}

CoordResult Coordinator::handle_repair_denial(Request& r, NodeId node, double now) {
    CoordResult res;
    if (r.held_nodes.count(node)) return res;
    auto fresh = admissible_repair_nodes(r, 1);
    std::erase(fresh, node);
    if (!fresh.empty()) {
        res.merge(abandon_node(r, node, now));
        res.merge(solicit_node(r, fresh.front(), now));
        return res;
    }
    set_state(r, ReqState::WaitingOnLocks);
    ++starvations;
    trace(now, TraceEvent::Starve, r, ChunkRef{-1, -1}, "node=" + std::to_string(node));
    return res;
}

CoordResult Coordinator::start_execution(Request& r, double now) {
    CoordResult res;

    // sanity: the quorum shape must match the claims
    if (r.kind == ReqKind::Read) {
        if (static_cast<int>(r.held_nodes.size()) != params_.k ||
            r.votes != quorums_.r) {
            throw IllegalLock("read reached quorum without k fully locked nodes");
        }
    } else if (r.kind == ReqKind::Repair) {
        if (static_cast<int>(r.held_nodes.size()) != params_.d || r.votes != quorums_.rep) {
            throw IllegalLock("repair reached quorum without d helper nodes");
        }
    } else if (r.votes != r.quorum ||
               r.locked_chunks != std::set<ChunkRef>(r.write_targets.begin(),
                                                     r.write_targets.end())) {
        throw IllegalLock("write reached quorum without its footprint locked");
    }

    // drop leftover waiting entries and in-flight solicitations
    for (auto it = r.tickets.begin(); it != r.tickets.end(); ++it) {
        const ChunkRef c = it->first;
        if (r.waiting_chunks.count(c)) {
            store_.cancel_waiting(c, r.id);
            table_.erase(r.id, c);
            trace(now, TraceEvent::Cancel, r, c, "waiting");
        } else {
            store_.retract_vote(c, r.id);
            trace(now, TraceEvent::Cancel, r, c, "vote");
        }
    }
    r.waiting_chunks.clear();
    r.tickets.clear();
    r.solicited_nodes.clear();
    r.failed_nodes.clear();

    set_state(r, ReqState::LockedRunning);
    trace(now, TraceEvent::Start, r, ChunkRef{-1, -1},
          "votes=" + std::to_string(r.votes) + ";quorum=" + std::to_string(r.quorum));
    res.quorum_reached.push_back(r.id);
    return res;
}

CoordResult Coordinator::release_chunk(Request& r, ChunkRef c, double now) {
    CoordResult res;
    auto [tr, promoted] = store_.release_lock(c, r.id);
    table_.erase(r.id, c);
    r.locked_chunks.erase(c);
    --r.votes;
    trace_bits(now, tr);
    trace(now, TraceEvent::Release, r, c, "");
    if (tr.old_lock == LockBit::Write) {
        if (--write_lock_count_[c.node] == 0) {
            write_lock_count_.erase(c.node);
            refresh_wdt(now);
        }
    }
    for (const Waiter& w : promoted) {
        Request& wr = req(w.request);
        auto tk = wr.tickets.find(c);
        if (tk == wr.tickets.end()) {
            throw IllegalLock("promoted waiter without a live solicitation");
        }
        wr.waiting_chunks.erase(c);
        table_.erase(w.request, c);
        trace(now, TraceEvent::Promote, wr, c, "");
        auto v = store_.request_vote(c, w.kind, w.request);
        if (!v) throw IllegalLock("promoted waiter could not vote");
        trace(now, TraceEvent::Vote, wr, c, "epoch=" + std::to_string(wr.epoch));
        res.messages.push_back(OutMsg{OutMsg::Type::VoteReply, w.request, c, w.kind,
                                      tk->second});
    }
    return res;
}

CoordResult Coordinator::complete_request(RequestId id, double now) {
    Request& r = req(id);
    if (r.state != ReqState::LockedRunning) {
        throw UnknownRequest("request " + std::to_string(id) + " is not running");
    }
    CoordResult res;
    // release every lock; order by chunk for determinism
    std::vector<ChunkRef> held(r.locked_chunks.begin(), r.locked_chunks.end());
    for (ChunkRef c : held) res.merge(release_chunk(r, c, now));
    set_state(r, ReqState::Done);
    r.held_nodes.clear();
    trace(now, TraceEvent::Complete, r, ChunkRef{-1, -1}, "");
    return res;
}

void Coordinator::cancel_pending(RequestId id, double now) {
    Request& r = req(id);
    for (auto& [c, ticket] : r.tickets) {
        if (r.waiting_chunks.count(c)) {
            store_.cancel_waiting(c, r.id);
            table_.erase(r.id, c);
            trace(now, TraceEvent::Cancel, r, c, "waiting");
        } else {
            store_.retract_vote(c, r.id);
            trace(now, TraceEvent::Cancel, r, c, "vote");
        }
    }
    r.tickets.clear();
    r.waiting_chunks.clear();
}

CoordResult Coordinator::demote(RequestId id, double now) {
    Request& r = req(id);
    cancel_pending(id, now);
    CoordResult res;
    std::vector<ChunkRef> held(r.locked_chunks.begin(), r.locked_chunks.end());
    for (ChunkRef c : held) res.merge(release_chunk(r, c, now));
    --r.priority;
    ++r.epoch;
    r.votes = 0;
    r.held_nodes.clear();
    r.solicited_nodes.clear();
    r.failed_nodes.clear();
    r.repair_targets.clear();
    set_state(r, ReqState::WaitingVotes);
    trace(now, TraceEvent::Demote, r, ChunkRef{-1, -1},
          "priority=" + std::to_string(r.priority) + ";epoch=" + std::to_string(r.epoch));
    return res;
}

CoordResult Coordinator::reevaluate_starving(double now) {
    CoordResult res;
    const std::vector<RequestId> starving(starving_.begin(), starving_.end());
    for (RequestId id : starving) {
        Request& r = req(id);
        if (r.state != ReqState::WaitingOnLocks || r.kind == ReqKind::Write || !r.activated) {
            continue;
        }
        r.failed_nodes.clear();
        const int want = r.kind == ReqKind::Read ? params_.k : params_.d;
        int needed = want - static_cast<int>(r.held_nodes.size()) -
                     static_cast<int>(r.solicited_nodes.size());
        if (needed <= 0) continue;
        auto fresh = r.kind == ReqKind::Read ? admissible_read_nodes(r, needed, false)
                                             : admissible_repair_nodes(r, needed);
        for (NodeId v : fresh) res.merge(solicit_node(r, v, now));
    }
    return res;
}

CoordResult Coordinator::script_grant(RequestId id, ChunkRef c, double now) {
    Request& r = req(id);
    if (r.state == ReqState::Done || r.state == ReqState::LockedRunning) {
        throw ConfigError("script grant on a finished request");
    }
    if (r.kind != ReqKind::Write) r.solicited_nodes.insert(c.node);
    if (r.kind == ReqKind::Repair) {
        auto& t = r.repair_targets[c.node];
        if (std::find(t.begin(), t.end(), c) == t.end()) t.push_back(c);
    }
    CoordResult res = solicit_chunk(r, c, now);
    res.messages.clear();  // delivered synchronously below
    auto vote = store_.request_vote(c, r.kind, r.id);
    if (!vote) {
        throw ConfigError("scripted grant: chunk (" + std::to_string(c.node) + "," +
                          std::to_string(c.slot) + ") cannot vote for request " +
                          std::to_string(id));
    }
    trace(now, TraceEvent::Vote, r, c, "epoch=" + std::to_string(r.epoch));
    res.merge(grant_vote(r, c, now));
    return res;
}

void Coordinator::refresh_wdt(double now) {
    std::set<NodeId> writes;
    for (const auto& [node, cnt] : write_lock_count_) {
        if (cnt > 0) writes.insert(node);
    }
    wdt_.refresh(writes);
    std::string detail = "wd=";
    for (NodeId v = 0; v < params_.N; ++v) {
        if (v) detail += ';';
        detail += std::to_string(wdt_.at(v));
    }
    TraceRow row;
    row.time = now;
    row.event = TraceEvent::Wdt;
    row.has_request = false;
    row.has_kind = false;
    row.detail = std::move(detail);
    sink_.row(row);
}

RequestView Coordinator::view(RequestId id) const {
    const Request& r = request(id);
    return RequestView{r.id, r.priority, r.arrival, r.votes, r.quorum};
}

void Coordinator::check_integrity() const {
    if (!store_.all_invariants_hold()) {
        throw IllegalLock("chunk bit invariants violated");
    }
    for (NodeId v = 0; v < params_.N; ++v) {
        for (SlotId j = 0; j < params_.alpha; ++j) {
            const ChunkRef c{v, j};
            const ChunkState& s = store_.state(c);
            const auto* entries = table_.chunk_entries(c);
            int writes = 0, reads = 0;
            std::size_t waits = 0;
            if (entries) {
                for (const auto& [rid, t] : *entries) {
                    switch (t) {
                    case LockType::Write: ++writes; break;
                    case LockType::Read:
                        ++reads;
                        if (!s.readers.count(rid)) {
                            throw IllegalLock("lock table read entry without chunk reader");
                        }
                        break;
                    default: ++waits; break;
                    }
                }
            }
            if ((s.lock_bit == LockBit::Write) != (writes == 1)) {
                throw IllegalLock("write lock bit and lock table disagree");
            }
            if (writes > 0 && reads > 0) {
                throw IllegalLock("write entry coexists with read entries");
            }
            if (static_cast<std::size_t>(reads) != s.readers.size()) {
                throw IllegalLock("reader set and lock table disagree");
            }
            if (waits != s.waiting.size()) {
                throw IllegalLock("waiting queue and lock table disagree");
            }
            if (s.vote_bit != (s.lock_bit != LockBit::Write)) {
                throw IllegalLock("vote bit out of step with lock bit");
            }
        }
    }
    // write-distance table freshness
    std::set<NodeId> writes;
    for (NodeId v = 0; v < params_.N; ++v) {
        for (SlotId j = 0; j < params_.alpha; ++j) {
            if (store_.state(ChunkRef{v, j}).lock_bit == LockBit::Write) {
                writes.insert(v);
                break;
            }
        }
    }
    for (NodeId v = 0; v < params_.N; ++v) {
        if (wdt_.at(v) != write_distance(topology_, writes, v)) {
            throw IllegalLock("write distance table is stale");
        }
    }
    for (const auto& [id, r] : requests_) {
        if (r.votes != static_cast<int>(r.locked_chunks.size())) {
            throw IllegalLock("vote count and locked set disagree");
        }
        for (ChunkRef c : r.locked_chunks) {
            auto t = table_.find(id, c);
            if (!t || (*t != (r.kind == ReqKind::Write ? LockType::Write : LockType::Read))) {
                throw IllegalLock("request holds a lock missing from the table");
            }
        }
    }
    for (const auto& rec : pending_write_records()) {
        for (ChunkRef c : rec.done_set) {
            if (rec.waiting_set.count(c)) {
                throw IllegalLock("pending write record sets intersect");
            }
        }
    }
}

} // namespace qsense
