#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "mulesim/datapipe.hpp"
#include "mulesim/model.hpp"
#include "mulesim/rng.hpp"

namespace mulesim {

// ---- sensor node -------------------------------------------------------

enum class NodePhase { Idle, BackoffPending, AwaitingPoll, SendingBurst };

inline const char* to_string(NodePhase p) {
    switch (p) {
    case NodePhase::Idle: return "idle";
    case NodePhase::BackoffPending: return "backoff";
    case NodePhase::AwaitingPoll: return "awaiting_poll";
    case NodePhase::SendingBurst: return "burst";
    }
    return "?";
}

/// A queued measurement. Records stay in the queue until their delivery to
/// the mule is confirmed by the engine; a record whose data packet is lost
/// returns to the offerable pool and rides the next cycle.
struct QueuedRecord {
    SensorRecord record;
    SimTime generated_at = 0.0;
    bool in_flight = false;
};

/// UWPOLLING sensor-node state machine: Idle -> BackoffPending ->
/// AwaitingPoll -> SendingBurst -> Idle, with timeout edges back to Idle.
class SensorNode {
public:
    SensorNode() = default;
    explicit SensorNode(NodeId id) : id_(id) {}

    NodeId id() const { return id_; }
    NodePhase phase() const { return phase_; }

    void enqueue(const SensorRecord& r, SimTime generated_at) {
        queue_.push_back({r, generated_at, false});
    }

    /// Records currently offerable (queued, not in flight).
    int queue_length() const {
        return static_cast<int>(
            std::count_if(queue_.begin(), queue_.end(),
                          [](const QueuedRecord& q) { return !q.in_flight; }));
    }

    /// Everything retained, in-flight included. Run-end conservation uses this.
    int retained() const { return static_cast<int>(queue_.size()); }

    int in_flight() const { return retained() - queue_length(); }

    int last_probe_offer() const { return last_probe_offer_; }
    long delivered_total() const { return delivered_total_; }

    /// Trigger reception. Returns the scheduled probe transmission time, or
    /// nullopt when the node stays idle (nothing to send) or the trigger is
    /// ignored because the node is mid-cycle.
    std::optional<SimTime> on_trigger(SimTime now, const ProtocolParams& params, Rng& rng) {
        if (phase_ != NodePhase::Idle) return std::nullopt;  // suppressed
        if (queue_length() == 0) return std::nullopt;
        phase_ = NodePhase::BackoffPending;
        return now + rng.uniform(params.t_b_min, params.t_b_max);
    }

    /// Builds the probe at its transmission time; the offer is capped at the
    /// burst limit so the mule's time allocation stays exact.
    Packet make_probe(NodeId mule, SimTime now, const ProtocolParams& params) {
        last_probe_offer_ = std::min(queue_length(), params.burst_limit);
        Packet p;
        p.kind = PacketKind::Probe;
        p.src = id_;
        p.dst = mule;
        p.size_bytes = kControlPacketBytes;
        p.info = ProbeInfo{last_probe_offer_};
        p.tx_start = now;
        p.tx_end = now + tx_duration_bytes(kControlPacketBytes, params);
        return p;
    }

    /// Probe fully transmitted: wait for the poll, up to the node timeout.
    SimTime on_probe_sent(SimTime tx_end, const ProtocolParams& params) {
        phase_ = NodePhase::AwaitingPoll;
        ++timeout_serial_;
        return tx_end + params.node_poll_timeout;
    }

    int timeout_serial() const { return timeout_serial_; }

    /// Poll reception. Returns the burst of data packets, oldest records
    /// first, back to back from `now`. Empty when the poll is for another
    /// node or the phase is wrong.
    std::vector<Packet> on_poll(const Packet& poll, SimTime now, const ProtocolParams& params) {
        if (poll.kind != PacketKind::Poll) return {};
        const auto& info = std::get<PollInfo>(poll.info);
        if (info.polled != id_) return {};
        if (phase_ != NodePhase::AwaitingPoll) return {};
        phase_ = NodePhase::SendingBurst;
        ++timeout_serial_;  // poll arrived; pending timeout is stale

        const int n = std::min(last_probe_offer_, queue_length());
        std::vector<Packet> burst;
        SimTime t = now;
        const double airtime = tx_duration_bytes(kDataPacketBytes, params);
        for (auto& q : queue_) {
            if (static_cast<int>(burst.size()) == n) break;
            if (q.in_flight) continue;
            q.in_flight = true;
            Packet p;
            p.kind = PacketKind::Data;
            p.src = id_;
            p.dst = poll.src;
            p.size_bytes = kDataPacketBytes;
            p.info = DataInfo{encode(q.record).text, q.generated_at};
            p.tx_start = t;
            p.tx_end = t + airtime;
            t = p.tx_end;
            burst.push_back(p);
        }
        burst_remaining_ = static_cast<int>(burst.size());
        if (burst.empty()) phase_ = NodePhase::Idle;
        return burst;
    }

    /// One data transmission of the burst finished; back to Idle after the last.
    void on_data_sent() {
        if (phase_ == NodePhase::SendingBurst && --burst_remaining_ <= 0)
            phase_ = NodePhase::Idle;
    }

    /// Backoff expired with nothing left to offer; skip the probe.
    void cancel_backoff() {
        if (phase_ == NodePhase::BackoffPending) phase_ = NodePhase::Idle;
    }

    /// Poll never arrived; abort the cycle and keep all records.
    void on_poll_timeout(int serial) {
        if (serial != timeout_serial_) return;             // canceled timer
        if (phase_ == NodePhase::SendingBurst) return;     // state guard
        if (phase_ == NodePhase::AwaitingPoll) phase_ = NodePhase::Idle;
    }

    /// Engine feedback: the data packet carrying the record generated at
    /// `generated_at` reached the mule. The record leaves the queue.
    void confirm_delivery(SimTime generated_at) {
        for (auto it = queue_.begin(); it != queue_.end(); ++it) {
            if (it->in_flight && it->generated_at == generated_at) {
                queue_.erase(it);
                ++delivered_total_;
                return;
            }
        }
    }

    /// Engine feedback: the data packet was lost; the record becomes
    /// offerable again for the next cycle.
    void release_in_flight(SimTime generated_at) {
        for (auto& q : queue_)
            if (q.in_flight && q.generated_at == generated_at) {
                q.in_flight = false;
                return;
            }
    }

    const std::deque<QueuedRecord>& queue() const { return queue_; }

private:
    NodeId id_;
    NodePhase phase_ = NodePhase::Idle;
    std::deque<QueuedRecord> queue_;
    int last_probe_offer_ = 0;
    int burst_remaining_ = 0;
    long delivered_total_ = 0;
    int timeout_serial_ = 0;
};

// ---- mule ----------------------------------------------------------------

enum class MulePhase { Discovery, Polling };

inline const char* to_string(MulePhase p) {
    return p == MulePhase::Discovery ? "discovery" : "polling";
}

struct ProbeOffer {
    NodeId node;
    int n_offered = 0;
};

/// Poll order by proportional fairness: nodes offering more data go earlier,
/// nodes already served a lot go later. priority = n_offered / (1 + history),
/// ties broken by lower id.
inline std::vector<NodeId> build_poll_list(const std::vector<ProbeOffer>& probes,
                                           const std::map<NodeId, long>& history) {
    std::vector<ProbeOffer> sorted = probes;
    auto priority = [&](const ProbeOffer& o) {
        auto it = history.find(o.node);
        const long delivered = it == history.end() ? 0 : it->second;
        return static_cast<double>(o.n_offered) / (1.0 + static_cast<double>(delivered));
    };
    std::stable_sort(sorted.begin(), sorted.end(),
                     [&](const ProbeOffer& a, const ProbeOffer& b) {
                         const double pa = priority(a), pb = priority(b);
                         if (pa != pb) return pa > pb;
                         return a.node < b.node;
                     });
    std::vector<NodeId> order;
    order.reserve(sorted.size());
    for (const auto& o : sorted) order.push_back(o.node);
    return order;
}

/// Close of the probe-collection window for a trigger transmitted at
/// `trigger_tx_start`: trigger airtime, the worst-case backoff, one probe
/// airtime and a propagation allowance.
inline SimTime probe_window_close(SimTime trigger_tx_start, const ProtocolParams& params) {
    const double trigger_airtime = tx_duration_bytes(kControlPacketBytes, params);
    const double probe_airtime = tx_duration_bytes(kControlPacketBytes, params);
    return trigger_tx_start + trigger_airtime + params.t_b_max + probe_airtime +
           params.max_prop_slack;
}

/// Deadline for one polled node: poll airtime, the promised burst, round-trip
/// propagation allowance and the guard.
inline SimTime poll_deadline(SimTime poll_tx_start, int n_offered,
                             const ProtocolParams& params) {
    const double poll_airtime = tx_duration_bytes(kControlPacketBytes, params);
    const double data_airtime = tx_duration_bytes(kDataPacketBytes, params);
    return poll_tx_start + poll_airtime + n_offered * data_airtime +
           2.0 * params.max_prop_slack + params.poll_guard;
}

struct CurrentPoll {
    NodeId node;
    int expected = 0;
    int received = 0;
    SimTime deadline = 0.0;
};

/// UWPOLLING vehicle state machine: broadcast a trigger, collect probes for
/// a fixed window, poll every probing node in fairness order, repeat.
class Mule {
public:
    Mule() = default;
    explicit Mule(NodeId id) : id_(id) {}

    NodeId id() const { return id_; }
    MulePhase phase() const { return phase_; }
    const std::vector<ProbeOffer>& probe_buffer() const { return probe_buffer_; }
    const std::vector<NodeId>& poll_list() const { return poll_list_; }
    const std::map<NodeId, long>& history() const { return history_; }
    const std::optional<CurrentPoll>& current_poll() const { return current_poll_; }
    long cycles_started() const { return cycles_started_; }

    /// Enters (or re-enters) discovery and builds the trigger packet.
    Packet start_discovery(SimTime now, const ProtocolParams& params) {
        phase_ = MulePhase::Discovery;
        probe_buffer_.clear();
        poll_list_.clear();
        current_poll_.reset();
        probe_window_open_ = true;
        ++cycles_started_;
        Packet p;
        p.kind = PacketKind::Trigger;
        p.src = id_;
        p.dst = std::nullopt;  // broadcast
        p.size_bytes = kControlPacketBytes;
        p.info = TriggerInfo{};
        p.tx_start = now;
        p.tx_end = now + tx_duration_bytes(kControlPacketBytes, params);
        return p;
    }

    /// Probe reception; returns false when the probe falls outside the
    /// collection window and is ignored.
    bool on_probe(const Packet& probe) {
        if (phase_ != MulePhase::Discovery || !probe_window_open_) return false;
        const auto& info = std::get<ProbeInfo>(probe.info);
        for (auto& o : probe_buffer_)
            if (o.node == probe.src) {
                o.n_offered = info.n_offered;
                return true;
            }
        probe_buffer_.push_back({probe.src, info.n_offered});
        return true;
    }

    /// Probe window closed: order the offers. Returns false when nobody
    /// probed and the mule should start discovery again.
    bool close_probe_window() {
        probe_window_open_ = false;
        if (probe_buffer_.empty()) return false;
        poll_list_ = build_poll_list(probe_buffer_, history_);
        next_poll_index_ = 0;
        phase_ = MulePhase::Polling;
        return true;
    }

    bool poll_list_exhausted() const { return next_poll_index_ >= poll_list_.size(); }

    /// Polls the next node in the list. Caller checks poll_list_exhausted().
    Packet poll_next(SimTime now, const ProtocolParams& params) {
        const NodeId target = poll_list_[next_poll_index_++];
        int expected = 0;
        for (const auto& o : probe_buffer_)
            if (o.node == target) expected = o.n_offered;
        Packet p;
        p.kind = PacketKind::Poll;
        p.src = id_;
        p.dst = target;
        p.size_bytes = kControlPacketBytes;
        p.info = PollInfo{target, expected};
        p.tx_start = now;
        p.tx_end = now + tx_duration_bytes(kControlPacketBytes, params);
        current_poll_ = CurrentPoll{target, expected, 0, poll_deadline(now, expected, params)};
        ++poll_serial_;
        return p;
    }

    int poll_serial() const { return poll_serial_; }

    /// Data reception. Returns true when the current polled node has now
    /// delivered everything it promised and the mule can advance early.
    bool on_data(const Packet& data) {
        ++history_[data.src];
        if (current_poll_ && current_poll_->node == data.src) {
            ++current_poll_->received;
            if (current_poll_->received >= current_poll_->expected) {
                current_poll_.reset();
                return true;
            }
        }
        return false;
    }

    /// Poll deadline passed without the full burst. Returns true when the
    /// timer was still live and the mule should advance.
    bool on_poll_deadline(int serial) {
        if (serial != poll_serial_ || !current_poll_) return false;
        current_poll_.reset();
        return true;
    }

private:
    NodeId id_{0};
    MulePhase phase_ = MulePhase::Discovery;
    bool probe_window_open_ = false;
    std::vector<ProbeOffer> probe_buffer_;
    std::vector<NodeId> poll_list_;
    std::size_t next_poll_index_ = 0;
    std::optional<CurrentPoll> current_poll_;
    std::map<NodeId, long> history_;
    int poll_serial_ = 0;
    long cycles_started_ = 0;
};

}  // namespace mulesim
