#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

namespace mulesim {

/// Simulation clock, seconds from run start. Monotone within a run.
using SimTime = double;

/// Identity of a network entity. Rendered as exactly two decimal digits
/// on the wire, so ids are restricted to [0, 99].
struct NodeId {
    int value = 0;

    NodeId() = default;
    explicit NodeId(int v) : value(v) {
        if (v < 0 || v > 99)
            throw std::invalid_argument("NodeId out of range [0,99]: " + std::to_string(v));
    }

    auto operator<=>(const NodeId&) const = default;

    /// Two-character zero-padded wire form, e.g. 7 -> "07".
    std::string wire() const {
        std::string s = std::to_string(value);
        return s.size() == 1 ? "0" + s : s;
    }

    static NodeId from_wire(const std::string& s) {
        if (s.size() != 2 || !std::isdigit(static_cast<unsigned char>(s[0])) ||
            !std::isdigit(static_cast<unsigned char>(s[1])))
            throw std::invalid_argument("NodeId wire form must be 2 digits: '" + s + "'");
        return NodeId((s[0] - '0') * 10 + (s[1] - '0'));
    }
};

/// Planar position in a local metric frame, optional depth below surface.
struct Position {
    double x = 0.0;
    double y = 0.0;
    double depth = 0.0;

    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(depth) && depth >= 0.0;
    }
};

inline double distance(const Position& a, const Position& b) {
    const double dx = a.x - b.x, dy = a.y - b.y, dz = a.depth - b.depth;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

/// Wall-clock time of day, second granularity (the TIMESTAMP wire field).
struct TimeOfDay {
    int hour = 0;
    int minute = 0;
    int second = 0;

    TimeOfDay() = default;
    TimeOfDay(int h, int m, int s) : hour(h), minute(m), second(s) {
        if (h < 0 || h > 23 || m < 0 || m > 59 || s < 0 || s > 59)
            throw std::invalid_argument("TimeOfDay out of range");
    }

    static TimeOfDay from_day_seconds(long s) {
        s %= 86400;
        if (s < 0) s += 86400;
        return TimeOfDay(static_cast<int>(s / 3600), static_cast<int>((s % 3600) / 60),
                         static_cast<int>(s % 60));
    }

    long day_seconds() const { return hour * 3600L + minute * 60L + second; }

    auto operator<=>(const TimeOfDay&) const = default;
};

/// One environmental measurement, the unit muled to shore.
struct SensorRecord {
    NodeId node;
    TimeOfDay time_of_day;
    char data_type = 'T';
    double value = 0.0;

    bool operator==(const SensorRecord&) const = default;
};

enum class PacketKind { Trigger, Probe, Poll, Data };

inline const char* to_string(PacketKind k) {
    switch (k) {
    case PacketKind::Trigger: return "trigger";
    case PacketKind::Probe: return "probe";
    case PacketKind::Poll: return "poll";
    case PacketKind::Data: return "data";
    }
    return "?";
}

struct ProbeInfo {
    int n_offered = 0;  // queued records offered for the next poll, capped at burst limit
};

struct PollInfo {
    NodeId polled;
    int n_expected = 0;
};

struct DataInfo {
    std::string encoded;        // 13-char compressed record
    SimTime generated_at = 0.0; // when the carried record was created
};

struct TriggerInfo {};

/// One acoustic frame. Control frames (trigger/probe/poll) are 6 bytes,
/// data frames 25 bytes (13-byte payload plus 12 bytes of stack headers).
struct Packet {
    PacketKind kind = PacketKind::Trigger;
    NodeId src;
    std::optional<NodeId> dst;  // nullopt = broadcast
    int size_bytes = 0;
    std::variant<TriggerInfo, ProbeInfo, PollInfo, DataInfo> info;
    SimTime tx_start = 0.0;
    SimTime tx_end = 0.0;
};

inline constexpr int kControlPacketBytes = 6;
inline constexpr int kDataPacketBytes = 25;
inline constexpr int kEncodedRecordBytes = 13;

/// MAC and traffic parameters for one run.
struct ProtocolParams {
    double t_b_min = 0.5;              // backoff lower bound [s]
    double t_b_max = 15.0;             // backoff upper bound [s]
    int burst_limit = 5;               // data packets per node per poll cycle
    double bitrate = 200.0;            // modem bitrate [bit/s]
    double generation_interval = 60.0; // seconds between record generations per node
    double poll_guard = 2.0;           // slack added to per-node poll timeouts [s]
    double max_prop_slack = 0.35;      // propagation allowance in timeout formulas [s]
    // A node that probed abandons the cycle after this long without a poll.
    // Kept short: while waiting it is deaf to new triggers, and a deaf node
    // costs far more across cycles than an occasionally wasted poll slot.
    double node_poll_timeout = 25.0;

    void validate() const {
        if (!(t_b_min >= 0.0) || !(t_b_min < t_b_max))
            throw std::invalid_argument("require 0 <= t_b_min < t_b_max");
        if (burst_limit < 1) throw std::invalid_argument("burst_limit must be >= 1");
        if (!(bitrate > 0.0)) throw std::invalid_argument("bitrate must be > 0");
        if (!(generation_interval > 0.0))
            throw std::invalid_argument("generation_interval must be > 0");
        if (poll_guard < 0.0 || max_prop_slack < 0.0)
            throw std::invalid_argument("poll_guard and max_prop_slack must be >= 0");
        if (!(node_poll_timeout > 0.0))
            throw std::invalid_argument("node_poll_timeout must be > 0");
    }
};

/// Airtime of a packet at the configured bitrate.
inline double tx_duration(const Packet& p, const ProtocolParams& params) {
    if (p.size_bytes <= 0) throw std::invalid_argument("packet size must be positive");
    return p.size_bytes * 8.0 / params.bitrate;
}

inline double tx_duration_bytes(int size_bytes, const ProtocolParams& params) {
    if (size_bytes <= 0) throw std::invalid_argument("packet size must be positive");
    return size_bytes * 8.0 / params.bitrate;
}

}  // namespace mulesim
