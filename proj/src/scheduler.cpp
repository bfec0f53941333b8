#include "qsense/scheduler.hpp"

#include <algorithm>
#include <cmath>

namespace qsense {

std::vector<RequestId> next_actions(std::vector<RequestView> slot) {
    std::stable_sort(slot.begin(), slot.end(), [](const RequestView& a, const RequestView& b) {
        if (a.priority != b.priority) return a.priority > b.priority;
        if (a.arrival != b.arrival) return a.arrival < b.arrival;
        return a.id < b.id;
    });
    std::vector<RequestId> out;
    out.reserve(slot.size());
    for (const auto& v : slot) out.push_back(v.id);
    return out;
}

std::vector<RequestId> pick_demotion_victims(const std::vector<RequestView>& pending) {
    if (pending.empty()) return {};
    const std::size_t n_demote =
        (pending.size() + 3) / 4;  // ceil(|pending| / 4), always at least one
    std::vector<RequestView> order = pending;
    std::stable_sort(order.begin(), order.end(), [](const RequestView& a, const RequestView& b) {
        const Ratio ra = request_vote_ratio(a.votes, a.quorum);
        const Ratio rb = request_vote_ratio(b.votes, b.quorum);
        if (!(ra == rb)) return ra < rb;
        return a.id < b.id;
    });
    std::vector<RequestId> out;
    for (std::size_t i = 0; i < n_demote; ++i) out.push_back(order[i].id);
    return out;
}

RequestQueue::RequestQueue(SlotPolicy policy, double start_time)
    : policy_(policy), start_time_(start_time) {
    policy_.validate();
}

int RequestQueue::slot_for_arrival(double now) {
    if (policy_.mode == SlotPolicy::Mode::TimeWindow) {
        return static_cast<int>(std::floor((now - start_time_) / policy_.window + 1e-12));
    }
    return static_cast<int>(arrivals_ / static_cast<std::uint64_t>(policy_.count));
}

int RequestQueue::enqueue(RequestId id, double now) {
    const int slot = slot_for_arrival(now);
    ++arrivals_;
    slots_[slot].push_back(id);
    slot_of_[id] = slot;
    done_[id] = false;
    max_slot_ = std::max(max_slot_, slot);
    return slot;
}

void RequestQueue::mark_done(RequestId id) {
    auto it = done_.find(id);
    if (it == done_.end()) throw UnknownRequest("request " + std::to_string(id));
    it->second = true;
}

bool RequestQueue::in_running_slot(RequestId id) const {
    auto it = slot_of_.find(id);
    return it != slot_of_.end() && it->second == running_;
}

int RequestQueue::slot_of(RequestId id) const {
    auto it = slot_of_.find(id);
    if (it == slot_of_.end()) throw UnknownRequest("request " + std::to_string(id));
    return it->second;
}

std::vector<RequestId> RequestQueue::running_unfinished() const {
    std::vector<RequestId> out;
    auto it = slots_.find(running_);
    if (it == slots_.end()) return out;
    for (RequestId id : it->second) {
        if (!done_.at(id)) out.push_back(id);
    }
    return out;
}

bool RequestQueue::slot_closed(int slot, double now) const {
    auto it = slots_.find(slot);
    if (it != slots_.end()) {
        for (RequestId id : it->second) {
            if (!done_.at(id)) return false;
        }
    }
    if (policy_.mode == SlotPolicy::Mode::TimeWindow) {
        const double end = start_time_ + (slot + 1) * policy_.window;
        return now >= end - 1e-12;
    }
    // count slots close once filled
    return it != slots_.end() &&
           it->second.size() >= static_cast<std::size_t>(policy_.count);
}

std::vector<RequestId> RequestQueue::advance(double now) {
    std::vector<RequestId> admitted;
    const int open = policy_.mode == SlotPolicy::Mode::TimeWindow
                         ? static_cast<int>(std::floor((now - start_time_) / policy_.window + 1e-12))
                         : static_cast<int>(arrivals_ / static_cast<std::uint64_t>(policy_.count));
    while (running_ < open && slot_closed(running_, now)) {
        // prune the slot we are leaving
        auto old = slots_.find(running_);
        if (old != slots_.end()) {
            for (RequestId id : old->second) {
                slot_of_.erase(id);
                done_.erase(id);
            }
            slots_.erase(old);
        }
        ++running_;
        auto it = slots_.find(running_);
        if (it == slots_.end()) continue;
        for (RequestId id : it->second) {
            if (!done_.at(id)) admitted.push_back(id);
        }
    }
    return admitted;
}

std::optional<double> RequestQueue::wakeup_time(double now) const {
    if (policy_.mode != SlotPolicy::Mode::TimeWindow) return std::nullopt;
    if (slots_.upper_bound(running_) == slots_.end()) return std::nullopt;
    auto it = slots_.find(running_);
    if (it != slots_.end()) {
        for (RequestId id : it->second) {
            if (!done_.at(id)) return std::nullopt;  // still busy
        }
    }
    const double end = start_time_ + (running_ + 1) * policy_.window;
    if (end > now + 1e-12) return end;
    return std::nullopt;
}

} // namespace qsense
