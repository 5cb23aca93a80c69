#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mulesim/model.hpp"
#include "mulesim/trace.hpp"

namespace mulesim {

/// received / sent. Absent when nothing was sent.
inline std::optional<double> compute_pdr(long sent, long received) {
    if (sent < 0 || received < 0 || received > sent)
        throw std::invalid_argument("require sent >= received >= 0");
    if (sent == 0) return std::nullopt;
    return static_cast<double>(received) / static_cast<double>(sent);
}

/// Packet delivery delay: generation to correct reception.
inline double compute_pdd(SimTime generation, SimTime reception) {
    if (reception < generation)
        throw std::logic_error("reception precedes generation");
    return reception - generation;
}

/// Jain's fairness index over per-node received counts:
/// (sum c)^2 / (N * sum c^2). Absent when every count is zero.
inline std::optional<double> compute_jfi(const std::vector<long>& counts) {
    if (counts.empty()) throw std::invalid_argument("counts must be non-empty");
    double sum = 0.0, sum_sq = 0.0;
    for (long c : counts) {
        if (c < 0) throw std::invalid_argument("counts must be >= 0");
        sum += static_cast<double>(c);
        sum_sq += static_cast<double>(c) * static_cast<double>(c);
    }
    if (sum == 0.0) return std::nullopt;
    return (sum * sum) / (static_cast<double>(counts.size()) * sum_sq);
}

/// Mean absolute difference of consecutive delivery delays. Absent below
/// two samples.
inline std::optional<double> compute_jitter(const std::vector<double>& delays) {
    if (delays.size() < 2) return std::nullopt;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < delays.size(); ++i)
        acc += std::abs(delays[i + 1] - delays[i]);
    return acc / static_cast<double>(delays.size() - 1);
}

struct NodeMetrics {
    long sent = 0;       // records generated (headline denominator)
    long received = 0;   // records delivered to the mule
    std::optional<double> pdr;
    std::optional<double> mean_pdd;
    long mac_sent = 0;   // data packet transmissions, retries included
    std::optional<double> mac_pdr;
};

struct NetworkMetrics {
    std::optional<double> jfi;
    std::optional<double> mean_pdd;
    std::optional<double> jitter;
    long total_sent = 0;
    long total_received = 0;
};

struct ReceptionPoint {
    Position pos;
    NodeId src;
    double time = 0.0;
};

struct MetricsReport {
    std::map<NodeId, NodeMetrics> per_node;
    NetworkMetrics network;
    std::vector<ReceptionPoint> reception_points;
};

/// Rebuilds every metric from trace rows alone. The engine's own report goes
/// through this path, so re-running it over a parsed trace file reproduces
/// the report exactly.
inline MetricsReport build_report(const std::vector<TraceEntry>& entries) {
    MetricsReport rep;
    std::vector<double> delays_in_order;

    for (const auto& e : entries) {
        if (e.event == TraceEvent::Generate && e.src) {
            rep.per_node[*e.src].sent += 1;
        } else if (e.event == TraceEvent::Tx && e.kind == PacketKind::Data &&
                   e.outcome == TraceOutcome::Sent && e.src) {
            rep.per_node[*e.src].mac_sent += 1;
        } else if (e.event == TraceEvent::Rx && e.kind == PacketKind::Data &&
                   e.outcome == TraceOutcome::Delivered && e.src) {
            auto& nm = rep.per_node[*e.src];
            nm.received += 1;
            const double gen_time = std::stod(e.info);
            const double pdd = compute_pdd(gen_time, e.time);
            nm.mean_pdd = nm.mean_pdd.value_or(0.0);  // accumulate below
            *nm.mean_pdd += pdd;
            delays_in_order.push_back(pdd);
            rep.reception_points.push_back({{e.mule_x, e.mule_y, 0.0}, *e.src, e.time});
        }
    }

    std::vector<long> counts;
    double pdd_sum = 0.0;
    long pdd_n = 0;
    for (auto& [id, nm] : rep.per_node) {
        if (nm.mean_pdd) {
            pdd_sum += *nm.mean_pdd;
            pdd_n += nm.received;
            *nm.mean_pdd /= static_cast<double>(nm.received);
        }
        nm.pdr = compute_pdr(nm.sent, std::min(nm.received, nm.sent));
        nm.mac_pdr = nm.mac_sent > 0
                         ? std::optional<double>(static_cast<double>(nm.received) /
                                                 static_cast<double>(nm.mac_sent))
                         : std::nullopt;
        rep.network.total_sent += nm.sent;
        rep.network.total_received += nm.received;
        counts.push_back(nm.received);
    }
    if (!counts.empty()) rep.network.jfi = compute_jfi(counts);
    if (pdd_n > 0) rep.network.mean_pdd = pdd_sum / static_cast<double>(pdd_n);
    rep.network.jitter = compute_jitter(delays_in_order);
    return rep;
}

/// CSV of the mule position for every delivered data packet (the Fig.-12
/// style reception map).
inline std::string reception_map_csv(const MetricsReport& rep) {
    std::ostringstream out;
    out << "x,y,src\n";
    char buf[80];
    for (const auto& p : rep.reception_points) {
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%s", p.pos.x, p.pos.y, p.src.wire().c_str());
        out << buf << '\n';
    }
    return out.str();
}

inline void export_reception_map(const MetricsReport& rep, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open reception map file: " + path);
    out << reception_map_csv(rep);
}

/// Aligned per-node table in the field-report layout
/// (Node | Sent | Received | PDR | PDD), MAC PDR appended.
inline std::string render_table(const MetricsReport& rep) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-6s %6s %9s %7s %10s %8s\n", "Node", "Sent", "Received",
                  "PDR", "PDD [s]", "MAC PDR");
    out << line;
    auto ratio = [](const std::optional<double>& v) {
        if (!v) return std::string("-");
        char b[16];
        std::snprintf(b, sizeof(b), "%.3f", *v);
        return std::string(b);
    };
    auto secs = [](const std::optional<double>& v) {
        if (!v) return std::string("-");
        char b[24];
        std::snprintf(b, sizeof(b), "%.2f", *v);
        return std::string(b);
    };
    for (const auto& [id, nm] : rep.per_node) {
        std::snprintf(line, sizeof(line), "%-6s %6ld %9ld %7s %10s %8s\n", id.wire().c_str(),
                      nm.sent, nm.received, ratio(nm.pdr).c_str(), secs(nm.mean_pdd).c_str(),
                      ratio(nm.mac_pdr).c_str());
        out << line;
    }
    std::snprintf(line, sizeof(line),
                  "network: sent %ld  received %ld  JFI %s  mean PDD %s s  jitter %s s\n",
                  rep.network.total_sent, rep.network.total_received,
                  ratio(rep.network.jfi).c_str(), secs(rep.network.mean_pdd).c_str(),
                  secs(rep.network.jitter).c_str());
    out << line;
    return out.str();
}

/// Run-end record accounting. Generated records are never dropped: each is
/// delivered, still queued, or in flight when the run ends.
struct Conservation {
    long generated = 0;
    long delivered = 0;
    long queued = 0;
    long in_flight = 0;

    bool balanced() const { return generated == delivered + queued + in_flight; }
};

/// Machine-readable report with full-precision values.
inline nlohmann::json report_json(const MetricsReport& rep,
                                  const std::optional<Conservation>& conservation = std::nullopt) {
    nlohmann::json j;
    auto opt = [](const std::optional<double>& v) {
        return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    };
    for (const auto& [id, nm] : rep.per_node) {
        j["per_node"][id.wire()] = {{"sent", nm.sent},
                                    {"received", nm.received},
                                    {"pdr", opt(nm.pdr)},
                                    {"mean_pdd", opt(nm.mean_pdd)},
                                    {"mac_sent", nm.mac_sent},
                                    {"mac_pdr", opt(nm.mac_pdr)}};
    }
    j["network"] = {{"jfi", opt(rep.network.jfi)},
                    {"mean_pdd", opt(rep.network.mean_pdd)},
                    {"jitter", opt(rep.network.jitter)},
                    {"total_sent", rep.network.total_sent},
                    {"total_received", rep.network.total_received}};
    if (conservation) {
        j["conservation"] = {{"generated", conservation->generated},
                             {"delivered", conservation->delivered},
                             {"queued", conservation->queued},
                             {"in_flight", conservation->in_flight},
                             {"balanced", conservation->balanced()}};
    }
    auto& pts = j["reception_points"] = nlohmann::json::array();
    for (const auto& p : rep.reception_points)
        pts.push_back({{"x", p.pos.x}, {"y", p.pos.y}, {"src", p.src.wire()}, {"time", p.time}});
    return j;
}

}  // namespace mulesim
