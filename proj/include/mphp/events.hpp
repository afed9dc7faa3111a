#pragma once

#include <mphp/error.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace mphp {

struct Event {
    double t{0.0};         // days since the start of the observation window
    std::size_t type{0};   // dense type index in [0, U)

    friend bool operator==(const Event&, const Event&) = default;
};

// Time-ordered marks on [0, horizon]. For equal times, index order is the
// tie-break: "j precedes i" always means j < i.
class EventSequence {
public:
    EventSequence() = default;

    EventSequence(std::vector<Event> events, double horizon, std::size_t num_types)
        : events_(std::move(events)), horizon_(horizon), num_types_(num_types) {
        validate();
    }

    // Stable sort by time so that same-time events keep their input order.
    static EventSequence from_unsorted(std::vector<Event> events, double horizon,
                                       std::size_t num_types) {
        std::stable_sort(events.begin(), events.end(),
                         [](const Event& a, const Event& b) { return a.t < b.t; });
        return EventSequence(std::move(events), horizon, num_types);
    }

    [[nodiscard]] std::span<const Event> events() const noexcept { return events_; }
    [[nodiscard]] const Event& operator[](std::size_t i) const { return events_[i]; }
    [[nodiscard]] std::size_t size() const noexcept { return events_.size(); }
    [[nodiscard]] bool empty() const noexcept { return events_.empty(); }
    [[nodiscard]] double horizon() const noexcept { return horizon_; }
    [[nodiscard]] std::size_t num_types() const noexcept { return num_types_; }

    [[nodiscard]] auto begin() const noexcept { return events_.begin(); }
    [[nodiscard]] auto end() const noexcept { return events_.end(); }

    [[nodiscard]] std::vector<std::size_t> counts_by_type() const {
        std::vector<std::size_t> counts(num_types_, 0);
        for (const auto& e : events_) {
            ++counts[e.type];
        }
        return counts;
    }

    // Events strictly before `t_end`, observed on [0, t_end].
    [[nodiscard]] EventSequence truncated(double t_end) const {
        std::vector<Event> kept;
        for (const auto& e : events_) {
            if (e.t >= t_end) {
                break;
            }
            kept.push_back(e);
        }
        return EventSequence(std::move(kept), t_end, num_types_);
    }

    friend bool operator==(const EventSequence&, const EventSequence&) = default;

private:
    void validate() const {
        if (num_types_ == 0) {
            throw InputError("event sequence needs at least one type");
        }
        if (!std::isfinite(horizon_) || horizon_ < 0.0) {
            throw InputError("event sequence horizon must be finite and non-negative");
        }
        double previous = 0.0;
        for (std::size_t i = 0; i < events_.size(); ++i) {
            const auto& e = events_[i];
            if (!std::isfinite(e.t) || e.t < 0.0 || e.t > horizon_) {
                throw InputError("event " + std::to_string(i) + " lies outside [0, horizon]");
            }
            if (e.t < previous) {
                throw InputError("event " + std::to_string(i) + " is out of time order");
            }
            if (e.type >= num_types_) {
                throw InputError("event " + std::to_string(i) + " has type out of range");
            }
            previous = e.t;
        }
    }

    std::vector<Event> events_;
    double horizon_{0.0};
    std::size_t num_types_{1};
};

} // namespace mphp
