#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "qsense/chunk_store.hpp"
#include "qsense/code_model.hpp"
#include "qsense/common.hpp"
#include "qsense/placement.hpp"
#include "qsense/routing.hpp"
#include "qsense/scheduler.hpp"
#include "qsense/trace.hpp"

namespace qsense {

enum class LockType { Read, Write, WaitingRead, WaitingWrite };

/// Coordinator-side record of granted and waiting locks, mirrored against
/// the chunk bits (the two views are cross-checked in integrity tests).
class LockTable {
public:
    void insert(RequestId req, ChunkRef c, LockType t);
    void erase(RequestId req, ChunkRef c);
    bool has(RequestId req, ChunkRef c, LockType t) const;
    std::optional<LockType> find(RequestId req, ChunkRef c) const;

    /// Entries on one chunk.
    const std::map<RequestId, LockType>* chunk_entries(ChunkRef c) const;

    std::size_t size() const { return count_; }

private:
    std::map<ChunkRef, std::map<RequestId, LockType>> by_chunk_;
    std::size_t count_ = 0;
};

enum class ReqState { WaitingVotes, WaitingOnLocks, LockedRunning, Done };

/// Consistency-restriction view of one in-flight write: the chunks it has
/// already write-locked and the chunks it is queued behind.
struct PendingWriteRecord {
    RequestId request = 0;
    std::set<ChunkRef> done_set;
    std::set<ChunkRef> waiting_set;
};

/// Rejects a candidate selection that touches both the done set and the
/// waiting set of the same pending write. Returns the offending record's
/// request id, or nullopt when allowed.
std::optional<RequestId> check_consistency_restriction(
    const std::set<ChunkRef>& candidate, const std::vector<PendingWriteRecord>& records);

struct Request {
    RequestId id = 0;
    ReqKind kind = ReqKind::Read;
    int priority = 0;
    double arrival = 0.0;
    int slot = 0;
    ReqState state = ReqState::WaitingVotes;
    int epoch = 0;          ///< bumped on demotion; stale votes carry old epochs
    int quorum = 0;
    int votes = 0;          ///< equals locked_chunks.size() at all times
    int native_idx = -1;    ///< writes: which native chunk changed
    bool manual = false;    ///< scripted: solicits only when activated
    bool activated = true;
    bool admitted = false;  ///< has begun participating (engine bookkeeping)

    std::optional<std::vector<NodeId>> forced_nodes;  ///< scripted read targets
    std::vector<ChunkRef> write_targets;              ///< writes: located footprint

    std::set<ChunkRef> locked_chunks;
    std::set<ChunkRef> waiting_chunks;
    std::set<NodeId> held_nodes;        ///< reads: nodes with all alpha locked
    std::set<NodeId> solicited_nodes;   ///< reads/repairs: in-flight nodes
    std::set<NodeId> failed_nodes;      ///< denied this epoch, skipped until retry
    std::map<ChunkRef, std::uint64_t> tickets;  ///< outstanding solicitations
    std::map<NodeId, std::vector<ChunkRef>> repair_targets;
};

/// Messages the coordinator wants delivered after the transport delay.
struct OutMsg {
    enum class Type { VoteRequest, VoteReply, DenialNotice };
    Type type = Type::VoteRequest;
    RequestId request = 0;
    ChunkRef chunk;
    ReqKind kind = ReqKind::Read;
    std::uint64_t ticket = 0;
};

struct CoordResult {
    std::vector<OutMsg> messages;
    std::vector<RequestId> quorum_reached;

    void merge(CoordResult&& other);
};

/// Super-user logic: vote accounting, lock granting, read/repair target
/// selection, the consistency restriction, and lock release/promotion.
class Coordinator {
public:
    Coordinator(const CodeParams& params, const FootprintMatrix& footprint,
                const PlacementMap& placement, const Topology& topology,
                TraceSink& sink, RngStream routing_rng);

    RequestId create_request(ReqKind kind, double now, int native_idx = -1,
                             std::optional<std::vector<NodeId>> forced_nodes = std::nullopt,
                             bool manual = false);

    /// Begins (or resumes) soliciting votes for an admitted request.
    CoordResult admit(RequestId id, double now);

    /// Node side: a vote request arrives at a chunk.
    CoordResult deliver_vote_request(const OutMsg& msg, double now);

    /// Coordinator side: a vote arrives back.
    CoordResult on_vote(const OutMsg& msg, double now);

    /// Coordinator side: a denial notice arrives back (reads/repairs may
    /// re-select; writes keep waiting).
    CoordResult on_denial(const OutMsg& msg, double now);

    /// Releases every lock, refreshes the write-distance table, closes the
    /// pending-write record and promotes waiting requests.
    CoordResult complete_request(RequestId id, double now);

    /// Drops a victim's waiting entries and in-flight votes (first half of
    /// demotion; do this for every victim before releasing locks).
    void cancel_pending(RequestId id, double now);

    /// Releases held locks, decrements priority, bumps the epoch and
    /// returns the request to the vote-gathering state.
    CoordResult demote(RequestId id, double now);

    /// Retry selection for starving reads/repairs after locks freed up.
    CoordResult reevaluate_starving(double now);

    /// Scripted vote-and-grant in one step, through the normal grant path.
    CoordResult script_grant(RequestId id, ChunkRef chunk, double now);

    // --- queries ---
    const Request& request(RequestId id) const;
    bool exists(RequestId id) const { return requests_.count(id) > 0; }
    std::vector<PendingWriteRecord> pending_write_records() const;
    const WriteDistanceTable& wdt() const { return wdt_; }
    const ChunkStore& chunks() const { return store_; }
    const LockTable& lock_table() const { return table_; }
    const QuorumValues& quorums() const { return quorums_; }
    const CodeParams& params() const { return params_; }
    RequestView view(RequestId id) const;

    /// All invariants that tie the coordinator views together; throws on
    /// violation. Used by the engine's per-event integrity checking.
    void check_integrity() const;

    /// Drops the record of a finished request (memory hygiene on long
    /// runs; later messages addressed to it count as stale).
    void forget(RequestId id);

    void assign_slot(RequestId id, int slot) { req(id).slot = slot; }
    void activate(RequestId id) { req(id).activated = true; }
    void mark_admitted(RequestId id) { req(id).admitted = true; }

    /// Read-target preference order (write distance desc, index asc; or a
    /// random adjacent window when no writes are active).
    std::vector<NodeId> read_preference_order(int k_needed, bool initial);

private:
    Request& req(RequestId id);
    void set_state(Request& r, ReqState s);
    ChunkRef locate(ChunkId c) const;
    std::set<ChunkRef> node_chunk_set(NodeId node) const;
    std::uint64_t new_ticket() { return ++ticket_seq_; }

    CoordResult solicit_chunk(Request& r, ChunkRef c, double now);
    CoordResult solicit_node(Request& r, NodeId node, double now);
    CoordResult grant_vote(Request& r, ChunkRef c, double now);
    CoordResult handle_read_denial(Request& r, NodeId node, double now);
    CoordResult handle_repair_denial(Request& r, NodeId node, double now);
    CoordResult start_execution(Request& r, double now);
    CoordResult abandon_node(Request& r, NodeId node, double now);
    CoordResult release_chunk(Request& r, ChunkRef c, double now);
    std::vector<NodeId> admissible_read_nodes(Request& r, int needed, bool initial);
    std::vector<NodeId> admissible_repair_nodes(Request& r, int needed);
    std::vector<ChunkRef> pick_repair_chunks(NodeId node) const;
    bool restriction_allows(const Request& r, const std::set<ChunkRef>& extra) const;
    void refresh_wdt(double now);
    void trace(double now, TraceEvent ev, const Request& r, ChunkRef c,
               std::string detail = {});
    void trace_bits(double now, const BitTransition& tr);

    CodeParams params_;
    QuorumValues quorums_;
    const FootprintMatrix& footprint_;
    const PlacementMap& placement_;
    const Topology& topology_;
    TraceSink& sink_;
    RngStream routing_rng_;

    ChunkStore store_;
    LockTable table_;
    WriteDistanceTable wdt_;
    std::map<NodeId, int> write_lock_count_;  // per node, drives the WDT
    std::map<RequestId, Request> requests_;
    std::set<RequestId> starving_;  // reads/repairs in WaitingOnLocks
    RequestId next_id_ = 0;
    std::uint64_t ticket_seq_ = 0;

public:
    // counters surfaced into metrics
    std::uint64_t stale_votes = 0;
    std::uint64_t denials = 0;
    std::uint64_t starvations = 0;
};

} // namespace qsense
