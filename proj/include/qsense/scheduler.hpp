#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "qsense/common.hpp"

namespace qsense {

/// Slot formation rule: either all requests arriving in a fixed time
/// window share a slot, or every r_s consecutive arrivals do.
struct SlotPolicy {
    enum class Mode { TimeWindow, Count };
    Mode mode = Mode::TimeWindow;
    double window = 1.0;  ///< t_s, for TimeWindow
    int count = 1;        ///< r_s, for Count

    void validate() const {
        if (mode == Mode::TimeWindow && !(window > 0)) {
            throw ParamViolation("slot window must be positive");
        }
        if (mode == Mode::Count && count < 1) {
            throw ParamViolation("slot count must be positive");
        }
    }
};

struct DeadlockConfig {
    double t0 = 1.0;  ///< continuous-starvation timeout

    void validate() const {
        if (!(t0 > 0)) throw ParamViolation("t0 must be positive");
    }
};

/// Exact votes-to-quorum ratio.
struct Ratio {
    long long num = 0;
    long long den = 1;

    friend bool operator<(const Ratio& a, const Ratio& b) {
        return a.num * b.den < b.num * a.den;
    }
    friend bool operator==(const Ratio& a, const Ratio& b) {
        return a.num * b.den == b.num * a.den;
    }
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

inline Ratio request_vote_ratio(int votes, int quorum) {
    if (quorum <= 0) throw DomainError("quorum must be positive");
    return Ratio{votes, quorum};
}

/// What the deadlock resolver needs to know about one pending request.
struct RequestView {
    RequestId id = 0;
    int priority = 0;
    double arrival = 0.0;
    int votes = 0;
    int quorum = 1;
};

/// Handling order inside a slot: priority desc, arrival asc, id asc.
std::vector<RequestId> next_actions(std::vector<RequestView> running_slot);

/// Picks ceil(|pending|/4) requests with minimum request-vote ratio (ties
/// by request id ascending). Caller demotes them and releases their locks.
std::vector<RequestId> pick_demotion_victims(const std::vector<RequestView>& pending);

/// Continuity clock for deadlock detection: the running slot is deadlocked
/// when no request has completed its quorum for a continuous t0.
class DeadlockMonitor {
public:
    explicit DeadlockMonitor(DeadlockConfig cfg) : cfg_(cfg) { cfg_.validate(); }

    void reset(double now) { last_reset_ = now; }
    double last_reset() const { return last_reset_; }
    double next_check_time() const { return last_reset_ + cfg_.t0; }

    /// True iff there are stuck requests and the clock ran out.
    bool detect(double now, bool any_stuck) const {
        return any_stuck && now - last_reset_ >= cfg_.t0 - 1e-12;
    }

    const DeadlockConfig& config() const { return cfg_; }

private:
    DeadlockConfig cfg_;
    double last_reset_ = 0.0;
};

/// Slot bookkeeping: assigns arrivals to slots and advances the running
/// slot once everything in it has finished.
class RequestQueue {
public:
    RequestQueue(SlotPolicy policy, double start_time = 0.0);

    /// Assigns the request to the open slot and returns the slot id.
    int enqueue(RequestId id, double now);

    void mark_done(RequestId id);

    int running_slot() const { return running_; }
    bool in_running_slot(RequestId id) const;

    /// Requests of the running slot that are not done.
    std::vector<RequestId> running_unfinished() const;

    /// Advances past finished (and, for time windows, expired) slots.
    /// Returns requests newly admitted to solicitation, in slot order.
    std::vector<RequestId> advance(double now);

    /// Time at which the running slot's window elapses, when requests are
    /// already queued behind a finished-but-open window.
    std::optional<double> wakeup_time(double now) const;

    int slot_of(RequestId id) const;

private:
    int slot_for_arrival(double now);
    bool slot_closed(int slot, double now) const;

    SlotPolicy policy_;
    double start_time_;
    std::uint64_t arrivals_ = 0;
    int running_ = 0;
    int max_slot_ = 0;
    std::map<int, std::vector<RequestId>> slots_;
    std::map<RequestId, int> slot_of_;
    std::map<RequestId, bool> done_;
};

} // namespace qsense
