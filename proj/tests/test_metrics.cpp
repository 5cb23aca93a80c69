#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "mulesim/metrics.hpp"
#include "mulesim/rng.hpp"

using namespace mulesim;

TEST_CASE("pdr is received over sent") {
    CHECK(*compute_pdr(48, 38) == Catch::Approx(38.0 / 48.0));
    CHECK(std::abs(*compute_pdr(48, 38) - 0.791) < 1e-3);
    CHECK(std::abs(*compute_pdr(60, 32) - 0.533) < 1e-3);
    CHECK(*compute_pdr(42, 42) == 1.0);
    CHECK_FALSE(compute_pdr(0, 0).has_value());
    CHECK_THROWS_AS(compute_pdr(5, 6), std::invalid_argument);
    CHECK_THROWS_AS(compute_pdr(-1, 0), std::invalid_argument);
}

TEST_CASE("pdd is reception minus generation") {
    CHECK(compute_pdd(100.0, 174.0) == 74.0);
    CHECK(compute_pdd(0.0, 0.0) == 0.0);
    CHECK_THROWS_AS(compute_pdd(10.0, 9.0), std::logic_error);
}

TEST_CASE("jfi equals the square of the sum over n times the sum of squares") {
    CHECK(*compute_jfi({10, 10, 10}) == Catch::Approx(1.0));
    CHECK(*compute_jfi({42}) == Catch::Approx(1.0));
    CHECK_FALSE(compute_jfi({0, 0, 0}).has_value());
    CHECK_THROWS_AS(compute_jfi({}), std::invalid_argument);
    CHECK_THROWS_AS(compute_jfi({3, -1}), std::invalid_argument);

    // field counts from one topology-1 style run
    const std::vector<long> counts{38, 55, 60, 58};
    const double sum = 38 + 55 + 60 + 58;
    const double sum_sq = 38.0 * 38 + 55.0 * 55 + 60.0 * 60 + 58.0 * 58;
    const double by_hand = sum * sum / (4.0 * sum_sq);
    CHECK(*compute_jfi(counts) == by_hand);
    CHECK(by_hand == Catch::Approx(0.9735).margin(5e-5));
}

TEST_CASE("jfi is scale invariant and bounded") {
    Rng rng(13);
    for (int i = 0; i < 2000; ++i) {
        const int n = 1 + static_cast<int>(rng.next() % 8);
        std::vector<long> counts, scaled;
        long total = 0;
        for (int k = 0; k < n; ++k) {
            const long c = static_cast<long>(rng.next() % 100);
            counts.push_back(c);
            scaled.push_back(7 * c);
            total += c;
        }
        if (total == 0) continue;
        const double j = *compute_jfi(counts);
        REQUIRE(j >= 1.0 / n - 1e-12);
        REQUIRE(j <= 1.0 + 1e-12);
        REQUIRE(*compute_jfi(scaled) == Catch::Approx(j).epsilon(1e-12));
    }
}

TEST_CASE("jfi is 1 exactly when all counts are equal and nonzero") {
    CHECK(*compute_jfi({7, 7, 7, 7}) == Catch::Approx(1.0).epsilon(1e-15));
    CHECK(*compute_jfi({7, 7, 7, 8}) < 1.0);
    // one dominating node drives jfi toward 1/N
    CHECK(*compute_jfi({100000, 1, 1, 1}) == Catch::Approx(0.25).margin(1e-4));
}

TEST_CASE("jitter is the mean absolute difference of consecutive delays") {
    CHECK(*compute_jitter({5.0, 5.0, 5.0}) == 0.0);
    CHECK(*compute_jitter({1.0, 2.0, 4.0}) == Catch::Approx(1.5));
    CHECK_FALSE(compute_jitter({1.0}).has_value());
    CHECK_FALSE(compute_jitter({}).has_value());
}

TEST_CASE("jitter matches a brute-force loop and ignores level shifts") {
    Rng rng(21);
    for (int i = 0; i < 2000; ++i) {
        const int n = 2 + static_cast<int>(rng.next() % 40);
        std::vector<double> delays, shifted;
        for (int k = 0; k < n; ++k) {
            delays.push_back(rng.uniform(0, 500));
            shifted.push_back(delays.back() + 123.456);
        }
        double acc = 0;
        for (int k = 0; k + 1 < n; ++k) acc += std::abs(delays[k + 1] - delays[k]);
        const double oracle = acc / (n - 1);
        REQUIRE(std::abs(*compute_jitter(delays) - oracle) <= 1e-12);
        REQUIRE(*compute_jitter(shifted) == Catch::Approx(*compute_jitter(delays)).margin(1e-9));
    }
}

namespace {

TraceEntry gen_row(double t, int node) {
    TraceEntry e;
    e.time = t;
    e.event = TraceEvent::Generate;
    e.src = NodeId(node);
    e.outcome = TraceOutcome::Generated;
    return e;
}

TraceEntry data_rx(double t, int node, double gen_time, double x, double y,
                   TraceOutcome outcome = TraceOutcome::Delivered) {
    TraceEntry e;
    e.time = t;
    e.event = TraceEvent::Rx;
    e.src = NodeId(node);
    e.dst = NodeId(0);
    e.kind = PacketKind::Data;
    e.outcome = outcome;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", gen_time);
    e.info = buf;
    e.mule_x = x;
    e.mule_y = y;
    return e;
}

TraceEntry data_tx(double t, int node) {
    TraceEntry e;
    e.time = t;
    e.event = TraceEvent::Tx;
    e.src = NodeId(node);
    e.dst = NodeId(0);
    e.kind = PacketKind::Data;
    e.outcome = TraceOutcome::Sent;
    return e;
}

}  // namespace

TEST_CASE("reports aggregate the trace") {
    std::vector<TraceEntry> entries{
        gen_row(60, 1),  gen_row(60, 2),  gen_row(120, 1), gen_row(120, 2),
        data_tx(130, 1), data_rx(131, 1, 60, 5.0, 6.0),
        data_tx(132, 1), data_rx(133, 1, 120, 5.5, 6.5),
        data_tx(140, 2), data_rx(141, 2, 60, 7.0, 8.0, TraceOutcome::LostChannel),
        data_tx(150, 2), data_rx(151, 2, 60, 9.0, 10.0),
    };
    const MetricsReport rep = build_report(entries);
    REQUIRE(rep.per_node.size() == 2);

    const NodeMetrics& n1 = rep.per_node.at(NodeId(1));
    CHECK(n1.sent == 2);
    CHECK(n1.received == 2);
    CHECK(*n1.pdr == 1.0);
    CHECK(*n1.mean_pdd == Catch::Approx((71.0 + 13.0) / 2));
    CHECK(n1.mac_sent == 2);
    CHECK(*n1.mac_pdr == 1.0);

    const NodeMetrics& n2 = rep.per_node.at(NodeId(2));
    CHECK(n2.sent == 2);
    CHECK(n2.received == 1);
    CHECK(*n2.pdr == 0.5);
    CHECK(n2.mac_sent == 2);
    CHECK(*n2.mac_pdr == 0.5);

    CHECK(rep.network.total_sent == 4);
    CHECK(rep.network.total_received == 3);
    CHECK(*rep.network.jfi == *compute_jfi({2, 1}));
    CHECK(*rep.network.jitter == *compute_jitter({71.0, 13.0, 91.0}));
    REQUIRE(rep.reception_points.size() == 3);
    CHECK(rep.reception_points[0].pos.x == 5.0);
    CHECK(rep.reception_points[2].src == NodeId(2));
}

TEST_CASE("reception map export") {
    std::vector<TraceEntry> entries{gen_row(60, 1), data_tx(70, 1),
                                    data_rx(71, 1, 60, 1.25, -2.5)};
    const MetricsReport rep = build_report(entries);
    const std::string csv = reception_map_csv(rep);
    CHECK(csv == "x,y,src\n1.250000,-2.500000,01\n");

    // no deliveries: header only
    const MetricsReport empty = build_report({gen_row(60, 1)});
    CHECK(reception_map_csv(empty) == "x,y,src\n");
}

TEST_CASE("row count in the map equals total received") {
    std::vector<TraceEntry> entries;
    for (int i = 0; i < 7; ++i) {
        entries.push_back(gen_row(60 * (i + 1), 1 + i % 3));
        entries.push_back(data_tx(60 * (i + 1) + 5, 1 + i % 3));
        entries.push_back(data_rx(60 * (i + 1) + 6, 1 + i % 3, 60 * (i + 1), i, i));
    }
    const MetricsReport rep = build_report(entries);
    const std::string csv = reception_map_csv(rep);
    long rows = std::count(csv.begin(), csv.end(), '\n') - 1;
    CHECK(rows == rep.network.total_received);
}

TEST_CASE("table rendering carries the field-report columns") {
    std::vector<TraceEntry> entries{gen_row(60, 1), data_tx(70, 1), data_rx(71, 1, 60, 0, 0)};
    const std::string table = render_table(build_report(entries));
    CHECK(table.find("Node") != std::string::npos);
    CHECK(table.find("Sent") != std::string::npos);
    CHECK(table.find("Received") != std::string::npos);
    CHECK(table.find("PDR") != std::string::npos);
    CHECK(table.find("PDD") != std::string::npos);
    CHECK(table.find("01") != std::string::npos);
    CHECK(table.find("network:") != std::string::npos);
}

TEST_CASE("report json keeps full precision and absent metrics as null") {
    std::vector<TraceEntry> entries{gen_row(60, 1), data_tx(70, 1), data_rx(71, 1, 60, 0, 0),
                                    gen_row(60, 2)};
    const MetricsReport rep = build_report(entries);
    const nlohmann::json j = report_json(rep);
    CHECK(j["per_node"]["01"]["pdr"].get<double>() == 1.0);
    CHECK(j["per_node"]["02"]["mean_pdd"].is_null());
    CHECK(j["network"]["total_sent"].get<long>() == 2);
}
