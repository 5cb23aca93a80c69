#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mulesim/model.hpp"

namespace mulesim {

enum class TraceEvent { Generate, Tx, Rx };

enum class TraceOutcome { Generated, Sent, Delivered, LostChannel, LostCollision, Ignored };

inline const char* to_string(TraceEvent e) {
    switch (e) {
    case TraceEvent::Generate: return "gen";
    case TraceEvent::Tx: return "tx";
    case TraceEvent::Rx: return "rx";
    }
    return "?";
}

inline const char* to_string(TraceOutcome o) {
    switch (o) {
    case TraceOutcome::Generated: return "generated";
    case TraceOutcome::Sent: return "sent";
    case TraceOutcome::Delivered: return "delivered";
    case TraceOutcome::LostChannel: return "lost_channel";
    case TraceOutcome::LostCollision: return "lost_collision";
    case TraceOutcome::Ignored: return "ignored";
    }
    return "?";
}

/// Times carry microsecond resolution in the trace; rounding at entry
/// creation keeps in-memory metrics and a re-parse of the CSV bit-identical.
inline double round_trace_time(double t) { return std::round(t * 1e6) / 1e6; }

/// One trace row. Packet rows record one terminal outcome per intended
/// receiver; `gen` rows record measurement creation so post-run analysis can
/// rebuild every metric from the trace alone.
struct TraceEntry {
    double time = 0.0;
    TraceEvent event = TraceEvent::Generate;
    std::optional<NodeId> src;
    std::optional<NodeId> dst;          // empty on gen rows and broadcasts
    std::optional<PacketKind> kind;     // empty on gen rows
    TraceOutcome outcome = TraceOutcome::Generated;
    std::string info;                   // probe/poll: count; data: generation time
    double mule_x = 0.0;
    double mule_y = 0.0;
};

inline constexpr const char* kTraceHeader = "time,event,src,dst,kind,outcome,info,mule_x,mule_y";

inline std::string trace_line(const TraceEntry& e) {
    char num[32];
    std::string line;
    std::snprintf(num, sizeof(num), "%.6f", e.time);
    line += num;
    line += ',';
    line += to_string(e.event);
    line += ',';
    if (e.src) line += e.src->wire();
    line += ',';
    if (e.dst) line += e.dst->wire();
    line += ',';
    if (e.kind) line += to_string(*e.kind);
    line += ',';
    line += to_string(e.outcome);
    line += ',';
    line += e.info;
    line += ',';
    std::snprintf(num, sizeof(num), "%.6f", e.mule_x);
    line += num;
    line += ',';
    std::snprintf(num, sizeof(num), "%.6f", e.mule_y);
    line += num;
    return line;
}

inline void write_trace(const std::string& path, const std::vector<TraceEntry>& entries) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open trace file for writing: " + path);
    out << kTraceHeader << '\n';
    for (const auto& e : entries) out << trace_line(e) << '\n';
}

class TraceParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

inline TraceEvent parse_event(const std::string& s, int lineno) {
    if (s == "gen") return TraceEvent::Generate;
    if (s == "tx") return TraceEvent::Tx;
    if (s == "rx") return TraceEvent::Rx;
    throw TraceParseError("trace line " + std::to_string(lineno) + ": unknown event '" + s + "'");
}

inline PacketKind parse_kind(const std::string& s, int lineno) {
    if (s == "trigger") return PacketKind::Trigger;
    if (s == "probe") return PacketKind::Probe;
    if (s == "poll") return PacketKind::Poll;
    if (s == "data") return PacketKind::Data;
    throw TraceParseError("trace line " + std::to_string(lineno) + ": unknown kind '" + s + "'");
}

inline TraceOutcome parse_outcome(const std::string& s, int lineno) {
    if (s == "generated") return TraceOutcome::Generated;
    if (s == "sent") return TraceOutcome::Sent;
    if (s == "delivered") return TraceOutcome::Delivered;
    if (s == "lost_channel") return TraceOutcome::LostChannel;
    if (s == "lost_collision") return TraceOutcome::LostCollision;
    if (s == "ignored") return TraceOutcome::Ignored;
    throw TraceParseError("trace line " + std::to_string(lineno) + ": unknown outcome '" + s +
                          "'");
}

}  // namespace detail

inline std::vector<TraceEntry> parse_trace(std::istream& in) {
    std::vector<TraceEntry> entries;
    std::string line;
    int lineno = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!saw_header) {
            if (line != kTraceHeader)
                throw TraceParseError("trace line 1: bad header");
            saw_header = true;
            continue;
        }
        auto f = detail::split_csv(line);
        if (f.size() != 9)
            throw TraceParseError("trace line " + std::to_string(lineno) + ": expected 9 fields, got " +
                                  std::to_string(f.size()));
        TraceEntry e;
        try {
            e.time = std::stod(f[0]);
            e.mule_x = std::stod(f[7]);
            e.mule_y = std::stod(f[8]);
        } catch (const std::exception&) {
            throw TraceParseError("trace line " + std::to_string(lineno) + ": bad number");
        }
        e.event = detail::parse_event(f[1], lineno);
        if (!f[2].empty()) e.src = NodeId::from_wire(f[2]);
        if (!f[3].empty()) e.dst = NodeId::from_wire(f[3]);
        if (!f[4].empty()) e.kind = detail::parse_kind(f[4], lineno);
        e.outcome = detail::parse_outcome(f[5], lineno);
        e.info = f[6];
        entries.push_back(e);
    }
    if (!saw_header && !entries.empty())
        throw TraceParseError("trace has no header");
    return entries;
}

inline std::vector<TraceEntry> read_trace(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TraceParseError("cannot open trace file: " + path);
    return parse_trace(in);
}

}  // namespace mulesim
