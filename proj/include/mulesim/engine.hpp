#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "mulesim/channel.hpp"
#include "mulesim/datapipe.hpp"
#include "mulesim/metrics.hpp"
#include "mulesim/mobility.hpp"
#include "mulesim/model.hpp"
#include "mulesim/protocol.hpp"
#include "mulesim/rng.hpp"
#include "mulesim/scenario.hpp"
#include "mulesim/trace.hpp"

namespace mulesim {

enum class EventKind { GenerateRecord, TxStart, TxEnd, RxArrival, TimerFired, MuleWaypointUpdate };

enum class TimerKind { NodeProbeSend, NodePollTimeout, MuleProbeWindow, MulePollDeadline };

/// One scheduled event. The queue pops in (time, sequence) order; the
/// sequence counter makes simultaneous events pop in creation order, so a
/// run is a deterministic function of scenario and seed.
struct Event {
    SimTime time = 0.0;
    std::uint64_t seq = 0;
    EventKind kind = EventKind::TimerFired;

    std::shared_ptr<const Packet> packet;  // TxStart / TxEnd / RxArrival
    NodeId receiver;                       // RxArrival
    bool channel_ok = false;               // RxArrival: Bernoulli draw result
    double window_start = 0.0;             // RxArrival: reception window
    double window_end = 0.0;
    std::uint64_t packet_serial = 0;

    TimerKind timer = TimerKind::NodeProbeSend;  // TimerFired
    NodeId owner;
    int serial = 0;
};

struct EventAfter {
    bool operator()(const Event& a, const Event& b) const {
        if (a.time != b.time) return a.time > b.time;
        return a.seq > b.seq;
    }
};

struct RunResult {
    MetricsReport report;
    std::vector<TraceEntry> trace;
    std::vector<ShoreMessage> shore;
    Conservation conservation;
    long generate_events = 0;
    long cycles_started = 0;
};

/// Discrete-event core tying protocol, channel, mobility and the data
/// pipeline together for one scenario run. Strictly single threaded; one
/// seeded RNG stream consumed in event order.
class Simulation {
public:
    explicit Simulation(const Scenario& sc) : sc_(sc), rng_(sc.seed.value_or(0)) {
        sc_.validate();
        mule_ = Mule(sc_.mule_id);
        for (const auto& [id, pos] : sc_.topology.node_positions) nodes_.emplace(id, SensorNode(id));
        entity_order_.push_back(sc_.mule_id);
        for (const auto& [id, pos] : sc_.topology.node_positions) entity_order_.push_back(id);
        std::sort(entity_order_.begin(), entity_order_.end());
    }

    RunResult run() {
        schedule_generations();
        schedule_waypoint_updates();
        start_discovery(0.0);

        while (!queue_.empty() && queue_.top().time <= sc_.duration) {
            Event ev = queue_.top();
            queue_.pop();
            now_ = ev.time;
            dispatch(ev);
        }

        RunResult result;
        result.trace = std::move(trace_);
        result.shore = std::move(shore_);
        result.report = build_report(result.trace);
        result.generate_events = generate_events_;
        result.cycles_started = mule_.cycles_started();
        result.conservation.generated = generated_total_;
        for (const auto& [id, node] : nodes_) {
            result.conservation.delivered += node.delivered_total();
            result.conservation.queued += node.queue_length();
            result.conservation.in_flight += node.in_flight();
        }
        write_outputs(result);
        return result;
    }

private:
    // ---- scheduling -----------------------------------------------------

    void push(Event ev) {
        ev.seq = next_seq_++;
        queue_.push(std::move(ev));
    }

    void schedule_generations() {
        const double stop = sc_.effective_generation_stop();
        const double interval = sc_.protocol.generation_interval;
        const long n_nodes = static_cast<long>(nodes_.size());
        // Sensors run on their own clocks: same period, staggered phases.
        // Offsets lie in (0, interval] so each node still generates exactly
        // floor(stop / interval) records.
        long rank = 0;
        for (const NodeId id : entity_order_) {
            if (id == sc_.mule_id) continue;
            const double offset = interval * static_cast<double>(rank + 1) /
                                  static_cast<double>(n_nodes);
            ++rank;
            for (double t = offset; t <= stop; t += interval) {
                Event ev;
                ev.time = t;
                ev.kind = EventKind::GenerateRecord;
                ev.owner = id;
                push(std::move(ev));
            }
        }
    }

    void schedule_waypoint_updates() {
        for (double t : sc_.path.segment_change_times(sc_.duration)) {
            Event ev;
            ev.time = t;
            ev.kind = EventKind::MuleWaypointUpdate;
            push(std::move(ev));
        }
    }

    void schedule_timer(SimTime at, TimerKind kind, NodeId owner, int serial) {
        Event ev;
        ev.time = at;
        ev.kind = EventKind::TimerFired;
        ev.timer = kind;
        ev.owner = owner;
        ev.serial = serial;
        push(std::move(ev));
    }

    // ---- event dispatch -------------------------------------------------

    void dispatch(const Event& ev) {
        switch (ev.kind) {
        case EventKind::GenerateRecord: handle_generate(ev); break;
        case EventKind::TxStart: handle_tx_start(ev); break;
        case EventKind::TxEnd: handle_tx_end(ev); break;
        case EventKind::RxArrival: handle_rx(ev); break;
        case EventKind::TimerFired: handle_timer(ev); break;
        case EventKind::MuleWaypointUpdate: break;  // positions are sampled lazily
        }
    }

    void handle_generate(const Event& ev) {
        ++generate_events_;
        ++generated_total_;
        SensorNode& node = nodes_.at(ev.owner);
        const SensorRecord record = make_record(ev.owner, now_);
        node.enqueue(record, now_);
        TraceEntry e = base_entry(TraceEvent::Generate, TraceOutcome::Generated);
        e.src = ev.owner;
        e.info = encode(record).text;
        trace_.push_back(e);
    }

    void handle_tx_start(const Event& ev) {
        const Packet& p = *ev.packet;
        trackers_[p.src].add_own_transmission(p.tx_start, p.tx_end);

        {
            TraceEntry e = base_entry(TraceEvent::Tx, TraceOutcome::Sent);
            e.src = p.src;
            e.dst = p.dst;
            e.kind = p.kind;
            e.info = packet_info(p);
            trace_.push_back(e);
        }

        // Bernoulli delivery draw per potential receiver, ascending id order.
        const Position src_pos = position_of(p.src, p.tx_start);
        for (const NodeId rid : entity_order_) {
            if (rid == p.src) continue;
            const Position dst_pos = position_of(rid, p.tx_start);
            const DeliveryResult res =
                deliver(p, src_pos, dst_pos, endpoint_class(p.src), endpoint_class(rid),
                        sc_.channel, rng_);
            const double prop = propagation_delay(src_pos, dst_pos, sc_.channel);
            // Anything synchronized occupies the receiver's window and can
            // collide, overheard packets included.
            if (res.delivered)
                trackers_[rid].add_reception(p.tx_start + prop, p.tx_end + prop,
                                             ev.packet_serial);

            // Only intended receivers produce arrival events and trace rows.
            const bool intended = p.dst ? (*p.dst == rid) : rid != sc_.mule_id;
            if (!intended) continue;
            Event rx;
            rx.time = res.arrival;
            rx.kind = EventKind::RxArrival;
            rx.packet = ev.packet;
            rx.receiver = rid;
            rx.channel_ok = res.delivered;
            rx.window_start = p.tx_start + prop;
            rx.window_end = p.tx_end + prop;
            rx.packet_serial = ev.packet_serial;
            push(std::move(rx));
        }
    }

    void handle_tx_end(const Event& ev) {
        const Packet& p = *ev.packet;
        switch (p.kind) {
        case PacketKind::Probe: {
            SensorNode& node = nodes_.at(p.src);
            const SimTime deadline = node.on_probe_sent(p.tx_end, sc_.protocol);
            schedule_timer(deadline, TimerKind::NodePollTimeout, p.src, node.timeout_serial());
            break;
        }
        case PacketKind::Data:
            nodes_.at(p.src).on_data_sent();
            break;
        case PacketKind::Trigger:
        case PacketKind::Poll:
            break;
        }
    }

    void handle_rx(const Event& ev) {
        const Packet& p = *ev.packet;
        CollisionTracker& tracker = trackers_[ev.receiver];
        tracker.prune(now_ - 60.0);

        if (!ev.channel_ok) {
            trace_rx(p, ev.receiver, TraceOutcome::LostChannel);
            if (p.kind == PacketKind::Data)
                nodes_.at(p.src).release_in_flight(std::get<DataInfo>(p.info).generated_at);
            return;
        }
        if (tracker.collided(ev.window_start, ev.window_end, ev.packet_serial)) {
            trace_rx(p, ev.receiver, TraceOutcome::LostCollision);
            if (p.kind == PacketKind::Data)
                nodes_.at(p.src).release_in_flight(std::get<DataInfo>(p.info).generated_at);
            return;
        }

        if (ev.receiver == sc_.mule_id)
            mule_receive(p);
        else
            node_receive(nodes_.at(ev.receiver), p);
    }

    void node_receive(SensorNode& node, const Packet& p) {
        switch (p.kind) {
        case PacketKind::Trigger: {
            if (node.phase() != NodePhase::Idle) {
                trace_rx(p, node.id(), TraceOutcome::Ignored);  // suppressed mid-cycle
                return;
            }
            trace_rx(p, node.id(), TraceOutcome::Delivered);
            const auto probe_at = node.on_trigger(now_, sc_.protocol, rng_);
            if (probe_at) schedule_timer(*probe_at, TimerKind::NodeProbeSend, node.id(), 0);
            break;
        }
        case PacketKind::Poll: {
            if (node.phase() != NodePhase::AwaitingPoll) {
                trace_rx(p, node.id(), TraceOutcome::Ignored);
                return;
            }
            trace_rx(p, node.id(), TraceOutcome::Delivered);
            for (const Packet& data : node.on_poll(p, now_, sc_.protocol)) transmit(data);
            break;
        }
        case PacketKind::Probe:
        case PacketKind::Data:
            trace_rx(p, node.id(), TraceOutcome::Ignored);
            break;
        }
    }

    void mule_receive(const Packet& p) {
        switch (p.kind) {
        case PacketKind::Probe: {
            const bool accepted = mule_.on_probe(p);
            trace_rx(p, sc_.mule_id, accepted ? TraceOutcome::Delivered : TraceOutcome::Ignored);
            break;
        }
        case PacketKind::Data: {
            trace_rx(p, sc_.mule_id, TraceOutcome::Delivered);
            const auto& info = std::get<DataInfo>(p.info);
            nodes_.at(p.src).confirm_delivery(info.generated_at);
            const UtcDateTime rx_clock =
                sc_.start_utc.plus_seconds(static_cast<std::int64_t>(std::floor(now_)));
            shore_.push_back(to_shore_json(decode(EncodedRecord{info.encoded}), rx_clock));
            if (mule_.on_data(p)) proceed_polling(now_);  // full burst in, advance early
            break;
        }
        case PacketKind::Trigger:
        case PacketKind::Poll:
            trace_rx(p, sc_.mule_id, TraceOutcome::Ignored);
            break;
        }
    }

    void handle_timer(const Event& ev) {
        switch (ev.timer) {
        case TimerKind::NodeProbeSend: {
            SensorNode& node = nodes_.at(ev.owner);
            if (node.queue_length() == 0) {
                node.cancel_backoff();  // everything got confirmed meanwhile
                return;
            }
            transmit(node.make_probe(sc_.mule_id, now_, sc_.protocol));
            break;
        }
        case TimerKind::NodePollTimeout:
            nodes_.at(ev.owner).on_poll_timeout(ev.serial);
            break;
        case TimerKind::MuleProbeWindow: {
            if (ev.serial != static_cast<int>(mule_.cycles_started())) return;  // stale
            if (mule_.close_probe_window())
                poll_next(now_);
            else
                start_discovery(now_);  // nobody probed
            break;
        }
        case TimerKind::MulePollDeadline:
            if (mule_.on_poll_deadline(ev.serial)) proceed_polling(now_);
            break;
        }
    }

    // ---- protocol driving -----------------------------------------------

    void start_discovery(SimTime t) {
        const Packet trigger = mule_.start_discovery(t, sc_.protocol);
        transmit(trigger);
        schedule_timer(probe_window_close(t, sc_.protocol), TimerKind::MuleProbeWindow,
                       sc_.mule_id, static_cast<int>(mule_.cycles_started()));
    }

    void poll_next(SimTime t) {
        const Packet poll = mule_.poll_next(t, sc_.protocol);
        transmit(poll);
        schedule_timer(mule_.current_poll()->deadline, TimerKind::MulePollDeadline, sc_.mule_id,
                       mule_.poll_serial());
    }

    void proceed_polling(SimTime t) {
        if (!mule_.poll_list_exhausted())
            poll_next(t);
        else
            start_discovery(t);  // all nodes polled, discovery starts again
    }

    void transmit(const Packet& p) {
        auto shared = std::make_shared<const Packet>(p);
        Event tx;
        tx.time = p.tx_start;
        tx.kind = EventKind::TxStart;
        tx.packet = shared;
        tx.packet_serial = next_packet_serial_++;
        push(std::move(tx));
        Event end;
        end.time = p.tx_end;
        end.kind = EventKind::TxEnd;
        end.packet = shared;
        push(std::move(end));
    }

    // ---- helpers ----------------------------------------------------------

    Position position_of(NodeId id, SimTime t) const {
        if (id == sc_.mule_id) return position_at(sc_.path, t);
        return sc_.topology.node_positions.at(id);
    }

    EndpointClass endpoint_class(NodeId id) const {
        return id == sc_.mule_id ? EndpointClass::Mule : EndpointClass::Static;
    }

    SensorRecord make_record(NodeId id, SimTime t) const {
        const long day_sec =
            (sc_.start_utc.time_of_day().day_seconds() + static_cast<long>(std::floor(t))) % 86400;
        SensorRecord r;
        r.node = id;
        r.time_of_day = TimeOfDay::from_day_seconds(day_sec);
        r.data_type = 'T';
        // day-periodic mock temperature, quantized to the 4-char wire grid
        const double raw = 18.0 + 2.0 * std::sin(2.0 * M_PI * day_sec / 86400.0);
        r.value = std::round(raw * 10.0) / 10.0;
        return r;
    }

    TraceEntry base_entry(TraceEvent event, TraceOutcome outcome) const {
        TraceEntry e;
        e.time = round_trace_time(now_);
        e.event = event;
        e.outcome = outcome;
        const Position m = position_at(sc_.path, now_);
        e.mule_x = std::round(m.x * 1e6) / 1e6;
        e.mule_y = std::round(m.y * 1e6) / 1e6;
        return e;
    }

    std::string packet_info(const Packet& p) const {
        char buf[32];
        switch (p.kind) {
        case PacketKind::Probe:
            std::snprintf(buf, sizeof(buf), "%d", std::get<ProbeInfo>(p.info).n_offered);
            return buf;
        case PacketKind::Poll:
            std::snprintf(buf, sizeof(buf), "%d", std::get<PollInfo>(p.info).n_expected);
            return buf;
        case PacketKind::Data:
            std::snprintf(buf, sizeof(buf), "%.6f",
                          round_trace_time(std::get<DataInfo>(p.info).generated_at));
            return buf;
        case PacketKind::Trigger:
            return "";
        }
        return "";
    }

    void trace_rx(const Packet& p, NodeId receiver, TraceOutcome outcome) {
        TraceEntry e = base_entry(TraceEvent::Rx, outcome);
        e.src = p.src;
        e.dst = receiver;
        e.kind = p.kind;
        e.info = packet_info(p);
        trace_.push_back(e);
    }

    void write_outputs(const RunResult& result) const {
        if (!sc_.trace_path.empty()) write_trace(sc_.trace_path, result.trace);
        if (!sc_.shore_json_path.empty()) {
            std::ofstream out(sc_.shore_json_path, std::ios::binary);
            if (!out)
                throw std::runtime_error("cannot open shore output: " + sc_.shore_json_path);
            for (const auto& msg : result.shore) out << msg.json() << '\n';
        }
        if (!sc_.report_path.empty()) {
            std::ofstream out(sc_.report_path, std::ios::binary);
            if (!out) throw std::runtime_error("cannot open report output: " + sc_.report_path);
            out << report_json(result.report, result.conservation).dump(2) << '\n';
        }
        if (!sc_.reception_map_path.empty())
            export_reception_map(result.report, sc_.reception_map_path);
    }

    Scenario sc_;
    Rng rng_;
    Mule mule_;
    std::map<NodeId, SensorNode> nodes_;
    std::vector<NodeId> entity_order_;
    std::map<NodeId, CollisionTracker> trackers_;

    std::priority_queue<Event, std::vector<Event>, EventAfter> queue_;
    std::uint64_t next_seq_ = 0;
    std::uint64_t next_packet_serial_ = 1;
    SimTime now_ = 0.0;

    std::vector<TraceEntry> trace_;
    std::vector<ShoreMessage> shore_;
    long generate_events_ = 0;
    long generated_total_ = 0;
};

/// Runs a scenario end to end, writing whatever output files it names.
inline RunResult run(const Scenario& sc) { return Simulation(sc).run(); }

// ---- trace replay validation ---------------------------------------------

struct ReplayVerdict {
    std::vector<std::string> violations;
    std::vector<std::string> warnings;

    bool ok() const { return violations.empty(); }
};

/// Re-checks protocol safety against a trace: data only inside the sender's
/// current poll grant, at most burst_limit data packets per grant, and
/// polls only for nodes that probed since the last trigger.
inline ReplayVerdict replay_entries(const std::vector<TraceEntry>& entries, int burst_limit = 5) {
    ReplayVerdict verdict;
    if (entries.empty()) {
        verdict.warnings.push_back("empty trace: nothing to check");
        return verdict;
    }

    bool trigger_seen = false;
    double last_trigger_time = -1.0;
    std::set<int> probed_since_trigger;
    std::map<int, double> last_poll_time;  // node -> delivered poll rx time
    std::map<int, int> data_since_poll;

    auto fmt_time = [](double t) {
        char b[32];
        std::snprintf(b, sizeof(b), "%.6f", t);
        return std::string(b);
    };

    for (const auto& e : entries) {
        if (e.event == TraceEvent::Tx && e.kind == PacketKind::Trigger) {
            trigger_seen = true;
            last_trigger_time = e.time;
            probed_since_trigger.clear();
        } else if (e.event == TraceEvent::Rx && e.kind == PacketKind::Probe &&
                   e.outcome == TraceOutcome::Delivered && e.src) {
            probed_since_trigger.insert(e.src->value);
        } else if (e.event == TraceEvent::Tx && e.kind == PacketKind::Poll && e.dst) {
            if (!trigger_seen)
                verdict.violations.push_back("t=" + fmt_time(e.time) +
                                             ": poll before any trigger (no discovery phase)");
            else if (!probed_since_trigger.count(e.dst->value))
                verdict.violations.push_back("t=" + fmt_time(e.time) + ": poll to node " +
                                             e.dst->wire() +
                                             " without a probe in the current discovery");
        } else if (e.event == TraceEvent::Rx && e.kind == PacketKind::Poll &&
                   e.outcome == TraceOutcome::Delivered && e.dst) {
            last_poll_time[e.dst->value] = e.time;
            data_since_poll[e.dst->value] = 0;
        } else if (e.event == TraceEvent::Tx && e.kind == PacketKind::Data && e.src) {
            const auto it = last_poll_time.find(e.src->value);
            if (it == last_poll_time.end()) {
                verdict.violations.push_back("t=" + fmt_time(e.time) + ": data from node " +
                                             e.src->wire() + " that was never polled");
            } else if (last_trigger_time > it->second) {
                verdict.violations.push_back("t=" + fmt_time(e.time) + ": data from node " +
                                             e.src->wire() + " outside its poll cycle");
            } else if (++data_since_poll[e.src->value] > burst_limit) {
                verdict.violations.push_back("t=" + fmt_time(e.time) + ": node " +
                                             e.src->wire() + " exceeded the burst cap of " +
                                             std::to_string(burst_limit));
            }
        }
    }
    return verdict;
}

inline ReplayVerdict replay(const std::string& trace_path, int burst_limit = 5) {
    return replay_entries(read_trace(trace_path), burst_limit);
}

}  // namespace mulesim
