#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mulesim/protocol.hpp"

using namespace mulesim;

namespace {

SensorRecord record_for(int node, int minute) {
    SensorRecord r;
    r.node = NodeId(node);
    r.time_of_day = TimeOfDay(0, minute % 60, 0);
    r.data_type = 'T';
    r.value = 18.5;
    return r;
}

SensorNode node_with_records(int id, int count, const ProtocolParams&) {
    SensorNode node{NodeId(id)};
    for (int i = 0; i < count; ++i) node.enqueue(record_for(id, i), 60.0 * (i + 1));
    return node;
}

}  // namespace

TEST_CASE("idle node with empty queue stays idle on trigger") {
    ProtocolParams params;
    SensorNode node{NodeId(3)};
    Rng rng(1);
    CHECK_FALSE(node.on_trigger(100.0, params, rng).has_value());
    CHECK(node.phase() == NodePhase::Idle);
}

TEST_CASE("probe offer is capped at the burst limit") {
    ProtocolParams params;
    SensorNode node = node_with_records(3, 7, params);
    Rng rng(1);
    const auto at = node.on_trigger(100.0, params, rng);
    REQUIRE(at.has_value());
    CHECK(*at >= 100.0 + params.t_b_min);
    CHECK(*at <= 100.0 + params.t_b_max);
    const Packet probe = node.make_probe(NodeId(0), *at, params);
    CHECK(std::get<ProbeInfo>(probe.info).n_offered == 5);
    CHECK(probe.size_bytes == kControlPacketBytes);
}

TEST_CASE("trigger is suppressed outside the idle phase") {
    ProtocolParams params;
    SensorNode node = node_with_records(3, 2, params);
    Rng rng(1);
    REQUIRE(node.on_trigger(0.0, params, rng).has_value());
    CHECK(node.phase() == NodePhase::BackoffPending);
    CHECK_FALSE(node.on_trigger(1.0, params, rng).has_value());
    CHECK(node.phase() == NodePhase::BackoffPending);
}

TEST_CASE("backoff draws are uniform on [t_b_min, t_b_max]") {
    // Kolmogorov-Smirnov against the uniform CDF; critical value for
    // alpha = 0.01 is 1.628/sqrt(n).
    ProtocolParams params;
    Rng rng(2024);
    const int n = 10000;
    std::vector<double> draws;
    draws.reserve(n);
    for (int i = 0; i < n; ++i) {
        SensorNode node = node_with_records(3, 1, params);
        const auto at = node.on_trigger(0.0, params, rng);
        REQUIRE(at.has_value());
        draws.push_back((*at - params.t_b_min) / (params.t_b_max - params.t_b_min));
    }
    std::sort(draws.begin(), draws.end());
    double d_stat = 0.0;
    for (int i = 0; i < n; ++i) {
        const double cdf = draws[i];
        d_stat = std::max(d_stat, std::abs(cdf - static_cast<double>(i) / n));
        d_stat = std::max(d_stat, std::abs(static_cast<double>(i + 1) / n - cdf));
    }
    CHECK(d_stat < 1.628 / std::sqrt(static_cast<double>(n)));
}

namespace {

SensorNode probed_node(int id, int records, const ProtocolParams& params, int* offer = nullptr) {
    SensorNode node = node_with_records(id, records, params);
    Rng rng(5);
    const auto at = node.on_trigger(0.0, params, rng);
    REQUIRE(at.has_value());
    const Packet probe = node.make_probe(NodeId(0), *at, params);
    if (offer) *offer = std::get<ProbeInfo>(probe.info).n_offered;
    node.on_probe_sent(probe.tx_end, params);
    REQUIRE(node.phase() == NodePhase::AwaitingPoll);
    return node;
}

Packet poll_for(int node, int expected, SimTime t = 20.0) {
    Packet poll;
    poll.kind = PacketKind::Poll;
    poll.src = NodeId(0);
    poll.dst = NodeId(node);
    poll.size_bytes = kControlPacketBytes;
    poll.info = PollInfo{NodeId(node), expected};
    poll.tx_start = t - 0.24;
    poll.tx_end = t;
    return poll;
}

}  // namespace

TEST_CASE("poll releases the promised burst and empties the queue") {
    ProtocolParams params;
    SensorNode node = probed_node(3, 3, params);
    const auto burst = node.on_poll(poll_for(3, 3), 20.0, params);
    REQUIRE(burst.size() == 3);
    CHECK(node.queue_length() == 0);
    CHECK(node.phase() == NodePhase::SendingBurst);
    for (const auto& p : burst) CHECK(p.size_bytes == kDataPacketBytes);
    // back to back
    for (std::size_t i = 1; i < burst.size(); ++i)
        CHECK(burst[i].tx_start == Catch::Approx(burst[i - 1].tx_end));
    for (std::size_t i = 0; i < burst.size(); ++i) node.on_data_sent();
    CHECK(node.phase() == NodePhase::Idle);
}

TEST_CASE("full burst of five") {
    ProtocolParams params;
    SensorNode node = probed_node(3, 5, params);
    const auto burst = node.on_poll(poll_for(3, 5), 20.0, params);
    CHECK(burst.size() == 5);
}

TEST_CASE("burst never exceeds the limit or the offer") {
    ProtocolParams params;
    Rng rng(31);
    for (int i = 0; i < 100; ++i) {
        const int records = 1 + static_cast<int>(rng.next() % 12);
        int offer = 0;
        SensorNode node = probed_node(3, records, params, &offer);
        const auto burst = node.on_poll(poll_for(3, offer), 20.0, params);
        REQUIRE(static_cast<int>(burst.size()) <= params.burst_limit);
        REQUIRE(static_cast<int>(burst.size()) == std::min(offer, records));
    }
}

TEST_CASE("burst sends the oldest records first") {
    ProtocolParams params;
    SensorNode node = probed_node(3, 8, params);  // offers 5 of 8
    const auto burst = node.on_poll(poll_for(3, 5), 20.0, params);
    REQUIRE(burst.size() == 5);
    std::vector<double> gens;
    for (const auto& p : burst) gens.push_back(std::get<DataInfo>(p.info).generated_at);
    CHECK(std::is_sorted(gens.begin(), gens.end()));
    CHECK(gens.front() == 60.0);  // the very first record
    CHECK(gens.back() == 300.0);
}

TEST_CASE("poll for another node or in the wrong phase is ignored") {
    ProtocolParams params;
    SensorNode node = probed_node(3, 3, params);
    CHECK(node.on_poll(poll_for(4, 3), 20.0, params).empty());
    CHECK(node.phase() == NodePhase::AwaitingPoll);

    SensorNode idle = node_with_records(3, 3, params);
    CHECK(idle.on_poll(poll_for(3, 3), 20.0, params).empty());
    CHECK(idle.phase() == NodePhase::Idle);
}

TEST_CASE("poll timeout aborts the cycle and keeps every record") {
    ProtocolParams params;
    SensorNode node = probed_node(3, 4, params);
    const int before = node.queue_length();
    node.on_poll_timeout(node.timeout_serial());
    CHECK(node.phase() == NodePhase::Idle);
    CHECK(node.queue_length() == before);

    // the same records are offered on the next cycle
    Rng rng(6);
    const auto at = node.on_trigger(200.0, params, rng);
    REQUIRE(at.has_value());
    const Packet probe = node.make_probe(NodeId(0), *at, params);
    CHECK(std::get<ProbeInfo>(probe.info).n_offered == 4);
}

TEST_CASE("a stale timeout cannot fire during the burst") {
    ProtocolParams params;
    SensorNode node = probed_node(3, 3, params);
    const int stale = node.timeout_serial();
    const auto burst = node.on_poll(poll_for(3, 3), 20.0, params);
    REQUIRE(!burst.empty());
    node.on_poll_timeout(stale);  // canceled by the poll
    CHECK(node.phase() == NodePhase::SendingBurst);
}

TEST_CASE("poll list orders by offered data over served history") {
    const std::map<NodeId, long> history{{NodeId(1), 0}, {NodeId(2), 20}};
    SECTION("single probe") {
        CHECK(build_poll_list({{NodeId(4), 3}}, {}) == std::vector<NodeId>{NodeId(4)});
    }
    SECTION("served node goes later") {
        // 5/1 = 5 beats 5/21 = 0.24
        const auto order = build_poll_list({{NodeId(2), 5}, {NodeId(1), 5}}, history);
        CHECK(order == std::vector<NodeId>{NodeId(1), NodeId(2)});
    }
    SECTION("ties break toward the lower id") {
        const auto order = build_poll_list({{NodeId(9), 3}, {NodeId(2), 3}}, {});
        CHECK(order == std::vector<NodeId>{NodeId(2), NodeId(9)});
    }
    SECTION("empty probes give an empty list") {
        CHECK(build_poll_list({}, {}).empty());
    }
    SECTION("result is a permutation of the probe senders") {
        const std::vector<ProbeOffer> probes{{NodeId(1), 2}, {NodeId(5), 5}, {NodeId(9), 1}};
        auto order = build_poll_list(probes, history);
        REQUIRE(order.size() == probes.size());
        std::sort(order.begin(), order.end());
        CHECK(order == std::vector<NodeId>{NodeId(1), NodeId(5), NodeId(9)});
    }
}

TEST_CASE("poll deadline formula") {
    ProtocolParams params;  // guard 2 s, slack 0.35 s, 200 bit/s
    CHECK(poll_deadline(0.0, 5, params) == Catch::Approx(7.94));
    CHECK(poll_deadline(100.0, 1, params) == Catch::Approx(103.94));
}

TEST_CASE("probe window close formula") {
    ProtocolParams params;
    CHECK(probe_window_close(0.0, params) == Catch::Approx(0.24 + 15.0 + 0.24 + 0.35));
}

TEST_CASE("mule collects probes only while the window is open") {
    ProtocolParams params;
    Mule mule{NodeId(0)};
    const Packet trigger = mule.start_discovery(0.0, params);
    CHECK(trigger.kind == PacketKind::Trigger);
    CHECK_FALSE(trigger.dst.has_value());  // broadcast
    CHECK(mule.probe_buffer().empty());

    SensorNode node = node_with_records(4, 2, params);
    Rng rng(7);
    node.on_trigger(0.3, params, rng);
    Packet probe = node.make_probe(NodeId(0), 5.0, params);

    CHECK(mule.on_probe(probe));
    REQUIRE(mule.close_probe_window());
    CHECK(mule.phase() == MulePhase::Polling);

    // a late duplicate after the window close is rejected
    CHECK_FALSE(mule.on_probe(probe));
}

TEST_CASE("mule with no probes returns to discovery") {
    ProtocolParams params;
    Mule mule{NodeId(0)};
    mule.start_discovery(0.0, params);
    CHECK_FALSE(mule.close_probe_window());
    mule.start_discovery(15.83, params);
    CHECK(mule.phase() == MulePhase::Discovery);
    CHECK(mule.cycles_started() == 2);
}

TEST_CASE("mule advances early once the promised burst is in") {
    ProtocolParams params;
    Mule mule{NodeId(0)};
    mule.start_discovery(0.0, params);
    Packet probe;
    probe.kind = PacketKind::Probe;
    probe.src = NodeId(4);
    probe.dst = NodeId(0);
    probe.info = ProbeInfo{2};
    REQUIRE(mule.on_probe(probe));
    REQUIRE(mule.close_probe_window());
    const Packet poll = mule.poll_next(16.0, params);
    CHECK(std::get<PollInfo>(poll.info).polled == NodeId(4));
    CHECK(mule.current_poll()->deadline == Catch::Approx(16.0 + 0.24 + 2.0 + 0.7 + 2.0));

    Packet data;
    data.kind = PacketKind::Data;
    data.src = NodeId(4);
    data.dst = NodeId(0);
    data.info = DataInfo{"", 60.0};
    CHECK_FALSE(mule.on_data(data));  // 1 of 2
    CHECK(mule.on_data(data));        // full burst: advance now
    CHECK(mule.poll_list_exhausted());
    CHECK(mule.history().at(NodeId(4)) == 2);
}

TEST_CASE("stale poll deadlines are ignored") {
    ProtocolParams params;
    Mule mule{NodeId(0)};
    mule.start_discovery(0.0, params);
    Packet probe;
    probe.kind = PacketKind::Probe;
    probe.src = NodeId(4);
    probe.dst = NodeId(0);
    probe.info = ProbeInfo{1};
    REQUIRE(mule.on_probe(probe));
    REQUIRE(mule.close_probe_window());
    mule.poll_next(16.0, params);
    const int serial = mule.poll_serial();

    Packet data;
    data.kind = PacketKind::Data;
    data.src = NodeId(4);
    data.dst = NodeId(0);
    data.info = DataInfo{"", 60.0};
    CHECK(mule.on_data(data));               // early advance resolved this poll
    CHECK_FALSE(mule.on_poll_deadline(serial));  // deadline is now stale
}

TEST_CASE("deadline path advances exactly once") {
    ProtocolParams params;
    Mule mule{NodeId(0)};
    mule.start_discovery(0.0, params);
    Packet probe;
    probe.kind = PacketKind::Probe;
    probe.src = NodeId(4);
    probe.dst = NodeId(0);
    probe.info = ProbeInfo{5};
    REQUIRE(mule.on_probe(probe));
    REQUIRE(mule.close_probe_window());
    mule.poll_next(16.0, params);
    CHECK(mule.on_poll_deadline(mule.poll_serial()));
    CHECK_FALSE(mule.on_poll_deadline(mule.poll_serial()));  // already resolved
}
