#include "qsense/sim.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <queue>
#include <sstream>

namespace qsense {

double sample_interarrival(double rate, RngStream& rng) { return rng.exponential(rate); }

FootprintMatrix SimConfig::make_footprint() const {
    switch (footprint_mode) {
    case FootprintMode::Dense: return FootprintMatrix::dense(code);
    case FootprintMode::Uniform: return FootprintMatrix::uniform_random(code, footprint_seed);
    case FootprintMode::Explicit: return FootprintMatrix::explicit_rows(code, footprint_rows);
    }
    throw ConfigError("bad footprint mode");
}

Topology SimConfig::make_topology() const {
    switch (topo_shape) {
    case TopoShape::Path: return Topology::path(code.N);
    case TopoShape::Ring: return Topology::ring(code.N);
    case TopoShape::Explicit: return Topology::from_edges(code.N, topo_edges);
    }
    throw ConfigError("bad topology shape");
}

void complete_placement(PlacementMap& pm, int total_chunks) {
    NodeId node = 0;
    SlotId slot = 0;
    auto bump = [&] {
        if (++slot == pm.alpha()) {
            slot = 0;
            ++node;
        }
    };
    for (ChunkId c = 0; c < total_chunks; ++c) {
        if (pm.is_placed(c)) continue;
        while (node < pm.node_count() && pm.node_chunks(node)[static_cast<std::size_t>(slot)] != -1) {
            bump();
        }
        if (node >= pm.node_count()) {
            throw CapacityExceeded("no free slot for chunk " + std::to_string(c));
        }
        pm.place(c, node, slot);
    }
}

// ------------------------------------------------------------------ Metrics

std::map<int, double> Metrics::in_system_pmf() const {
    std::map<int, double> pmf;
    double total = 0.0;
    for (const auto& [n, t] : in_system_time) total += t;
    if (total <= 0) return pmf;
    for (const auto& [n, t] : in_system_time) pmf[n] = t / total;
    return pmf;
}

double Metrics::mean_latency(ReqKind k) const {
    const auto i = static_cast<std::size_t>(k);
    return completions[i] ? latency_sum[i] / static_cast<double>(completions[i]) : 0.0;
}

std::map<std::string, double> Metrics::rows() const {
    std::map<std::string, double> out;
    const char* kinds[3] = {"read", "write", "repair"};
    for (int i = 0; i < 3; ++i) {
        out["arrivals_" + std::string(kinds[i])] = static_cast<double>(arrivals[i]);
        out["completions_" + std::string(kinds[i])] = static_cast<double>(completions[i]);
        out["mean_latency_" + std::string(kinds[i])] = mean_latency(static_cast<ReqKind>(i));
    }
    out["demotions"] = static_cast<double>(demotions);
    out["deadlock_rounds"] = static_cast<double>(deadlock_rounds);
    out["stale_votes"] = static_cast<double>(stale_votes);
    out["denials"] = static_cast<double>(denials);
    out["starvations"] = static_cast<double>(starvations);
    out["grants"] = static_cast<double>(grants);
    out["releases"] = static_cast<double>(releases);
    out["end_time"] = end_time;
    char name[32];
    for (const auto& [n, p] : in_system_pmf()) {
        std::snprintf(name, sizeof name, "in_system_p_%03d", n);
        out[name] = p;
    }
    return out;
}

void Metrics::write_csv(std::ostream& out) const {
    out << "# qsense-metrics v1\n";
    out << "statistic,value\n";
    for (const auto& [name, value] : rows()) {
        out << name << ',' << format_double(value) << '\n';
    }
}

void MetricsSink::row(const TraceRow& r) {
    ++count_;
    if (inner_) inner_->row(r);
    metrics_.end_time = std::max(metrics_.end_time, r.time);
    auto bump = [&](int delta) {
        metrics_.in_system_time[in_system_] += r.time - last_change_;
        last_change_ = r.time;
        in_system_ += delta;
    };
    switch (r.event) {
    case TraceEvent::Arrival:
        ++metrics_.arrivals[static_cast<std::size_t>(r.kind)];
        open_arrivals_[r.request] = r.time;
        bump(+1);
        break;
    case TraceEvent::Complete: {
        ++metrics_.completions[static_cast<std::size_t>(r.kind)];
        auto it = open_arrivals_.find(r.request);
        if (it != open_arrivals_.end()) {
            metrics_.latency_sum[static_cast<std::size_t>(r.kind)] += r.time - it->second;
            open_arrivals_.erase(it);
        }
        bump(-1);
        break;
    }
    case TraceEvent::Demote: ++metrics_.demotions; break;
    case TraceEvent::Deadlock: ++metrics_.deadlock_rounds; break;
    case TraceEvent::Stale: ++metrics_.stale_votes; break;
    case TraceEvent::Deny: ++metrics_.denials; break;
    case TraceEvent::Starve: ++metrics_.starvations; break;
    case TraceEvent::Grant: ++metrics_.grants; break;
    case TraceEvent::Release: ++metrics_.releases; break;
    default: break;
    }
}

Metrics metrics_from_trace(const std::vector<TraceRow>& rows) {
    NullSink null;
    MetricsSink sink(null);
    for (const TraceRow& r : rows) sink.row(r);
    return sink.take();
}

// ------------------------------------------------------------------- Engine

namespace {

enum class EvType : int {
    ServiceComplete = 0,
    VoteReply = 1,
    VoteRequest = 2,
    DenialNotice = 3,
    Arrival = 4,
    Resolicit = 5,
    SlotTick = 6,
    Script = 7,
    TimeoutCheck = 8,
};

struct Ev {
    double time = 0.0;
    EvType type = EvType::Arrival;
    int neg_priority = 0;
    double req_arrival = 0.0;
    RequestId rid = 0;
    std::uint64_t seq = 0;
    OutMsg msg;
    ReqKind arrival_kind = ReqKind::Read;
    RequestId target = 0;
    int script_idx = -1;
};

struct EvLater {
    bool operator()(const Ev& a, const Ev& b) const {
        auto key = [](const Ev& e) {
            return std::make_tuple(e.time, static_cast<int>(e.type), e.neg_priority,
                                   e.req_arrival, e.rid, e.seq);
        };
        return key(a) > key(b);
    }
};

class Engine {
public:
    Engine(const SimConfig& cfg, TraceSink& user_sink)
        : cfg_(cfg),
          sink_(user_sink),
          footprint_(cfg.make_footprint()),
          topology_(cfg.make_topology()),
          placement_(make_placement(cfg, footprint_)),
          coord_(cfg.code, footprint_, placement_, topology_, sink_,
                 make_stream(cfg.seed, Stream::Routing)),
          queue_(cfg.slot_policy),
          monitor_(cfg.deadlock),
          arrivals_{make_stream(cfg.seed, Stream::ReadArrivals),
                    make_stream(cfg.seed, Stream::WriteArrivals),
                    make_stream(cfg.seed, Stream::RepairArrivals)},
          services_(make_stream(cfg.seed, Stream::Services)),
          workload_(make_stream(cfg.seed, Stream::Workload)) {
        cfg_.workload.validate();
        cfg_.slot_policy.validate();
        cfg_.deadlock.validate();
    }

    Metrics run();

private:
    static PlacementMap make_placement(const SimConfig& cfg, const FootprintMatrix& fp) {
        auto groups = build_groups(fp);
        PlacementMap pm = assign(groups, cfg.code.N, cfg.code.alpha);
        complete_placement(pm, cfg.code.total_chunks());
        return pm;
    }

    void push(Ev e) {
        e.seq = ++seq_;
        events_.push(std::move(e));
    }

    void push_for_request(double time, EvType type, RequestId rid) {
        Ev e;
        e.time = time;
        e.type = type;
        e.rid = rid;
        e.target = rid;
        if (coord_.exists(rid)) {
            const Request& r = coord_.request(rid);
            e.neg_priority = -r.priority;
            e.req_arrival = r.arrival;
        }
        push(std::move(e));
    }

    void schedule_arrival(ReqKind kind) {
        const double rate = kind == ReqKind::Read    ? cfg_.workload.lambda_r
                            : kind == ReqKind::Write ? cfg_.workload.lambda_w
                                                     : cfg_.workload.lambda_rep;
        if (rate <= 0) return;
        const double t = now_ + sample_interarrival(rate, arrivals_[static_cast<std::size_t>(kind)]);
        if (t > cfg_.horizon) return;
        Ev e;
        e.time = t;
        e.type = EvType::Arrival;
        e.arrival_kind = kind;
        push(std::move(e));
    }

    void handle_result(CoordResult&& res) {
        for (OutMsg& m : res.messages) {
            Ev e;
            e.time = now_ + cfg_.message_delay;
            e.type = m.type == OutMsg::Type::VoteRequest    ? EvType::VoteRequest
                     : m.type == OutMsg::Type::VoteReply    ? EvType::VoteReply
                                                            : EvType::DenialNotice;
            e.rid = m.request;
            if (coord_.exists(m.request)) {
                const Request& r = coord_.request(m.request);
                e.neg_priority = -r.priority;
                e.req_arrival = r.arrival;
            }
            e.msg = m;
            push(std::move(e));
        }
        for (RequestId id : res.quorum_reached) {
            monitor_.reset(now_);
            const Request& r = coord_.request(id);
            const double mu = r.kind == ReqKind::Write ? cfg_.workload.mu_w : cfg_.workload.mu_r;
            push_for_request(now_ + services_.exponential(mu), EvType::ServiceComplete, id);
        }
    }

    void dispatch_admit(RequestId id) {
        if (!coord_.exists(id)) return;
        const Request& r = coord_.request(id);
        if (!r.activated || r.state == ReqState::Done) return;
        if (!r.admitted) {
            coord_.mark_admitted(id);
            if (live_admitted_++ == 0) monitor_.reset(now_);
        }
        handle_result(coord_.admit(id, now_));
    }

    void admit_from_queue(const std::vector<RequestId>& ids) {
        // slot-opening batches run in priority order
        std::vector<RequestView> views;
        views.reserve(ids.size());
        for (RequestId id : ids) views.push_back(coord_.view(id));
        for (RequestId id : next_actions(std::move(views))) dispatch_admit(id);
    }

    void after_slot_motion() {
        if (auto t = queue_.wakeup_time(now_)) {
            if (!slot_tick_pending_ || *t < slot_tick_time_ - 1e-12) {
                Ev e;
                e.time = *t;
                e.type = EvType::SlotTick;
                push(std::move(e));
                slot_tick_pending_ = true;
                slot_tick_time_ = *t;
            }
        }
    }

    RequestId new_request(ReqKind kind, int native, std::optional<std::vector<NodeId>> nodes,
                          bool manual) {
        admit_from_queue(queue_.advance(now_));
        const RequestId id = coord_.create_request(kind, now_, native, std::move(nodes), manual);
        const int slot = queue_.enqueue(id, now_);
        coord_.assign_slot(id, slot);
        TraceRow row;
        row.time = now_;
        row.event = TraceEvent::Arrival;
        row.request = id;
        row.kind = kind;
        row.detail = "slot=" + std::to_string(slot);
        if (kind == ReqKind::Write) row.detail += ";native=" + std::to_string(native);
        sink_.row(row);
        if (queue_.in_running_slot(id)) dispatch_admit(id);
        schedule_check();
        return id;
    }

    void schedule_check() {
        if (live_admitted_ == 0 || check_pending_) return;
        Ev e;
        e.time = std::max(now_, monitor_.next_check_time());
        e.type = EvType::TimeoutCheck;
        push(std::move(e));
        check_pending_ = true;
    }

    std::vector<RequestId> stuck_requests() const {
        std::vector<RequestId> out;
        for (RequestId id : queue_.running_unfinished()) {
            if (!coord_.exists(id)) continue;
            const Request& r = coord_.request(id);
            if (r.activated && r.admitted &&
                (r.state == ReqState::WaitingVotes || r.state == ReqState::WaitingOnLocks)) {
                out.push_back(id);
            }
        }
        return out;
    }

    void on_timeout_check() {
        check_pending_ = false;
        auto stuck = stuck_requests();
        if (stuck.empty()) {
            // nothing pending a quorum; the continuity clock restarts
            monitor_.reset(now_);
            return;
        }
        if (!monitor_.detect(now_, true)) {
            schedule_check();
            return;
        }
        // deadlock: demote the minimum-ratio quarter
        std::vector<RequestView> views;
        views.reserve(stuck.size());
        for (RequestId id : stuck) views.push_back(coord_.view(id));
        const auto victims = pick_demotion_victims(views);
        ++round_;
        std::string ids, ratios;
        for (RequestId v : victims) {
            if (!ids.empty()) ids += '|';
            ids += std::to_string(v);
            const auto& r = coord_.request(v);
            if (!ratios.empty()) ratios += '|';
            ratios += std::to_string(r.votes) + "/" + std::to_string(r.quorum);
        }
        TraceRow row;
        row.time = now_;
        row.event = TraceEvent::Deadlock;
        row.has_request = false;
        row.has_kind = false;
        row.detail = "round=" + std::to_string(round_) + ";demoted=" + ids + ";ratios=" + ratios;
        sink_.row(row);

        for (RequestId v : victims) coord_.cancel_pending(v, now_);
        for (RequestId v : victims) {
            handle_result(coord_.demote(v, now_));
            push_for_request(now_ + cfg_.message_delay, EvType::Resolicit, v);
        }
        monitor_.reset(now_);
        schedule_check();
    }

    void run_script_op(const ScriptOp& op) {
        switch (op.kind) {
        case ScriptOp::Kind::Read:
        case ScriptOp::Kind::Write:
        case ScriptOp::Kind::Repair: {
            const ReqKind kind = op.kind == ScriptOp::Kind::Read    ? ReqKind::Read
                                 : op.kind == ScriptOp::Kind::Write ? ReqKind::Write
                                                                    : ReqKind::Repair;
            script_requests_.push_back(new_request(kind, op.native, op.nodes, op.manual));
            break;
        }
        case ScriptOp::Kind::Grant: {
            const RequestId id = script_request(op.ref);
            if (!coord_.request(id).admitted) {
                coord_.mark_admitted(id);
                if (live_admitted_++ == 0) monitor_.reset(now_);
            }
            const Request& r = coord_.request(id);
            std::vector<ChunkRef> targets;
            if (op.slot >= 0) {
                targets.push_back(ChunkRef{op.node, op.slot});
            } else if (r.kind == ReqKind::Write) {
                for (ChunkRef c : r.write_targets) {
                    if (c.node == op.node) targets.push_back(c);
                }
            } else {
                const int span = r.kind == ReqKind::Repair ? cfg_.code.beta : cfg_.code.alpha;
                for (SlotId j = 0; j < span; ++j) targets.push_back(ChunkRef{op.node, j});
            }
            for (ChunkRef c : targets) handle_result(coord_.script_grant(id, c, now_));
            schedule_check();
            break;
        }
        case ScriptOp::Kind::Activate: {
            const RequestId id = script_request(op.ref);
            coord_.activate(id);
            if (queue_.in_running_slot(id)) dispatch_admit(id);
            schedule_check();
            break;
        }
        }
    }

    RequestId script_request(int ref) const {
        if (ref < 0 || ref >= static_cast<int>(script_requests_.size())) {
            throw ConfigError("script ref " + std::to_string(ref) + " does not exist yet");
        }
        return script_requests_[static_cast<std::size_t>(ref)];
    }

    const SimConfig& cfg_;
    MetricsSink sink_;
    FootprintMatrix footprint_;
    Topology topology_;
    PlacementMap placement_;
    Coordinator coord_;
    RequestQueue queue_;
    DeadlockMonitor monitor_;
    RngStream arrivals_[3];
    RngStream services_;
    RngStream workload_;

    std::priority_queue<Ev, std::vector<Ev>, EvLater> events_;
    std::uint64_t seq_ = 0;
    double now_ = 0.0;
    int live_admitted_ = 0;
    bool check_pending_ = false;
    bool slot_tick_pending_ = false;
    double slot_tick_time_ = 0.0;
    int round_ = 0;
    std::vector<RequestId> script_requests_;
};

Metrics Engine::run() {
    for (int k = 0; k < 3; ++k) schedule_arrival(static_cast<ReqKind>(k));
    for (std::size_t i = 0; i < cfg_.script.size(); ++i) {
        Ev e;
        e.time = cfg_.script[i].time;
        e.type = EvType::Script;
        e.script_idx = static_cast<int>(i);
        e.rid = static_cast<RequestId>(i);  // keeps same-time script ops ordered
        push(std::move(e));
    }

    const double cap = std::max(cfg_.horizon, 1.0) * 3.0 + 1000.0 * cfg_.deadlock.t0 +
                       1000.0 * cfg_.message_delay + 100.0;
    while (!events_.empty()) {
        Ev e = events_.top();
        events_.pop();
        now_ = e.time;
        if (now_ > cap) {
            throw Error("simulation failed to drain by t=" + format_double(now_) +
                        "; protocol liveness is broken");
        }
        switch (e.type) {
        case EvType::Arrival: {
            now_ = e.time;
            schedule_arrival(e.arrival_kind);
            int native = -1;
            if (e.arrival_kind == ReqKind::Write) {
                native = static_cast<int>(workload_.below(static_cast<std::uint64_t>(cfg_.code.k)));
            }
            new_request(e.arrival_kind, native, std::nullopt, false);
            break;
        }
        case EvType::VoteRequest:
            handle_result(coord_.deliver_vote_request(e.msg, now_));
            break;
        case EvType::VoteReply:
            handle_result(coord_.on_vote(e.msg, now_));
            schedule_check();
            break;
        case EvType::DenialNotice:
            handle_result(coord_.on_denial(e.msg, now_));
            break;
        case EvType::ServiceComplete: {
            const bool counted = coord_.request(e.target).admitted;
            handle_result(coord_.complete_request(e.target, now_));
            if (counted) --live_admitted_;
            queue_.mark_done(e.target);
            coord_.forget(e.target);
            admit_from_queue(queue_.advance(now_));
            after_slot_motion();
            handle_result(coord_.reevaluate_starving(now_));
            break;
        }
        case EvType::Resolicit:
            dispatch_admit(e.target);
            schedule_check();
            break;
        case EvType::SlotTick:
            slot_tick_pending_ = false;
            admit_from_queue(queue_.advance(now_));
            after_slot_motion();
            break;
        case EvType::Script:
            run_script_op(cfg_.script[static_cast<std::size_t>(e.script_idx)]);
            break;
        case EvType::TimeoutCheck:
            on_timeout_check();
            break;
        }
        if (cfg_.integrity_checks) coord_.check_integrity();
    }
    return sink_.take();
}

}  // namespace

Metrics run_simulation(const SimConfig& cfg, TraceSink& sink) {
    validate_params(cfg.code);
    Engine engine(cfg, sink);
    return engine.run();
}

BacklogResult backlog_experiment(int N0, double mu, const std::vector<double>& t_grid,
                                 int replications, std::uint64_t seed) {
    if (N0 < 1) throw DomainError("backlog experiment needs N0 >= 1");
    if (mu <= 0) throw NonPositiveRate("backlog experiment needs mu > 0");
    if (replications < 1) throw DomainError("need at least one replication");
    BacklogResult res;
    res.t_grid = t_grid;
    res.replications = replications;
    res.pmf.assign(static_cast<std::size_t>(N0) + 1,
                   std::vector<double>(t_grid.size(), 0.0));
    RngStream rng(seed, static_cast<std::uint64_t>(Stream::Services));
    std::vector<double> finish(static_cast<std::size_t>(N0));
    for (int rep = 0; rep < replications; ++rep) {
        double t = 0.0;
        for (int i = 0; i < N0; ++i) {
            t += rng.exponential(mu);
            finish[static_cast<std::size_t>(i)] = t;
        }
        for (std::size_t ti = 0; ti < t_grid.size(); ++ti) {
            const auto done = std::upper_bound(finish.begin(), finish.end(), t_grid[ti]) -
                              finish.begin();
            const int m = N0 - static_cast<int>(done);
            res.pmf[static_cast<std::size_t>(m)][ti] += 1.0;
        }
    }
    for (auto& row : res.pmf) {
        for (double& v : row) v /= static_cast<double>(replications);
    }
    return res;
}

} // namespace qsense
