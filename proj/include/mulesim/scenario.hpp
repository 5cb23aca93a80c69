#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mulesim/channel.hpp"
#include "mulesim/datapipe.hpp"
#include "mulesim/mobility.hpp"
#include "mulesim/model.hpp"

namespace mulesim {

class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Everything one run needs: who is where, how the mule moves, protocol and
/// channel constants, duration and the seed. Output paths are optional; an
/// empty path skips that artifact.
struct Scenario {
    Topology topology;
    WaypointPath path;
    ProtocolParams protocol;
    ChannelParams channel;
    double duration = 3900.0;
    std::optional<std::uint64_t> seed;  // mandatory: runs must be reproducible
    NodeId mule_id{0};
    UtcDateTime start_utc = parse_iso8601("2021-03-02T00:00:00Z");
    double generation_stop = -1.0;  // < 0 means "until duration"
    std::string trace_path;
    std::string shore_json_path;
    std::string report_path;
    std::string reception_map_path;

    double effective_generation_stop() const {
        return generation_stop < 0.0 ? duration : std::min(generation_stop, duration);
    }

    void validate() const {
        if (!(duration > 0.0)) throw ScenarioError("duration must be > 0");
        if (!seed) throw ScenarioError("seed is mandatory");
        protocol.validate();
        try {
            channel.validate();
        } catch (const std::invalid_argument& e) {
            throw ScenarioError(std::string("channel: ") + e.what());
        }
        try {
            path.validate();
        } catch (const std::invalid_argument& e) {
            throw ScenarioError(std::string("path: ") + e.what());
        }
        if (topology.node_positions.empty()) throw ScenarioError("topology has no nodes");
        for (const auto& [id, pos] : topology.node_positions) {
            if (!pos.finite()) throw ScenarioError("node " + id.wire() + " position not finite");
            if (id == mule_id)
                throw ScenarioError("node id " + id.wire() + " clashes with the mule id");
        }
        // the vehicle must keep clearance from every buoy
        const auto& wps = path.waypoints;
        for (const auto& [id, pos] : topology.node_positions) {
            for (std::size_t i = 0; i + 1 < wps.size(); ++i)
                if (geom::point_segment_distance(pos, wps[i], wps[i + 1]) < kMinPathClearance)
                    throw ScenarioError("path passes closer than 2 m to node " + id.wire());
            if (path.loop && wps.size() >= 2 &&
                geom::point_segment_distance(pos, wps.back(), wps.front()) < kMinPathClearance)
                throw ScenarioError("path passes closer than 2 m to node " + id.wire());
        }
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t");
    const auto b = s.find_last_not_of(" \t");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

struct KeyLine {
    std::string key;
    std::string value;
    int lineno = 0;
};

inline double parse_double(const KeyLine& kl) {
    try {
        std::size_t used = 0;
        const double v = std::stod(kl.value, &used);
        if (used != kl.value.size()) throw std::invalid_argument(kl.value);
        return v;
    } catch (const std::exception&) {
        throw ScenarioError("line " + std::to_string(kl.lineno) + ": '" + kl.key +
                            "' expects a number, got '" + kl.value + "'");
    }
}

inline bool parse_bool(const KeyLine& kl) {
    if (kl.value == "true" || kl.value == "1") return true;
    if (kl.value == "false" || kl.value == "0") return false;
    throw ScenarioError("line " + std::to_string(kl.lineno) + ": '" + kl.key +
                        "' expects true/false");
}

}  // namespace detail

/// Parses the sectioned key-value scenario format. Unknown sections or keys
/// and malformed values are reported with their line number.
inline Scenario parse_scenario(std::istream& in, const std::string& origin_name = "<stream>") {
    using detail::KeyLine;
    Scenario sc;

    std::string section;
    std::optional<std::string> builtin_name;
    double d_max = kDefaultDMax;
    Position origin{};
    std::map<NodeId, Position> nodes;
    std::vector<Obstacle> obstacles;
    std::vector<Position> waypoints;
    bool channel_seen[3] = {false, false, false};
    bool cutoff_seen[3] = {false, false, false};
    bool path_speed_set = false, path_loop_set = false;
    double path_speed = 0.78;
    bool path_loop = false;

    auto class_index = [&](const std::string& name, int lineno) -> int {
        if (name == "static_to_static") return 0;
        if (name == "mule_to_static") return 1;
        if (name == "static_to_mule") return 2;
        throw ScenarioError("line " + std::to_string(lineno) + ": unknown link class '" + name +
                            "'");
    };
    auto class_profile = [&](int idx) -> ClassProfile& {
        switch (idx) {
        case 0: return sc.channel.profile.static_to_static;
        case 1: return sc.channel.profile.mule_to_static;
        default: return sc.channel.profile.static_to_mule;
        }
    };

    std::string raw;
    int lineno = 0;
    auto num = [&lineno](const std::string& tok) -> double {
        try {
            std::size_t used = 0;
            const double v = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            return v;
        } catch (const std::exception&) {
            throw ScenarioError("line " + std::to_string(lineno) + ": bad number '" + tok + "'");
        }
    };
    while (std::getline(in, raw)) {
        ++lineno;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        const auto hash = raw.find('#');
        std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']')
                throw ScenarioError("line " + std::to_string(lineno) + ": malformed section");
            section = line.substr(1, line.size() - 2);
            if (section != "topology" && section != "path" && section != "protocol" &&
                section != "channel" && section != "run")
                throw ScenarioError("line " + std::to_string(lineno) + ": unknown section [" +
                                    section + "]");
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ScenarioError("line " + std::to_string(lineno) + ": expected key = value");
        KeyLine kl{detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)), lineno};
        if (section.empty())
            throw ScenarioError("line " + std::to_string(lineno) + ": key outside any section");

        auto bad_key = [&]() -> ScenarioError {
            return ScenarioError("line " + std::to_string(lineno) + ": unknown key '" + kl.key +
                                 "' in section [" + section + "]");
        };

        if (section == "topology") {
            if (kl.key == "builtin") {
                builtin_name = kl.value;
            } else if (kl.key == "d_max") {
                d_max = detail::parse_double(kl);
            } else if (kl.key == "origin") {
                auto t = detail::split_ws(kl.value);
                if (t.size() != 2)
                    throw ScenarioError("line " + std::to_string(lineno) +
                                        ": origin expects 'x y'");
                origin = {num(t[0]), num(t[1]), 0.0};
            } else if (kl.key == "node") {
                auto t = detail::split_ws(kl.value);
                if (t.size() != 3 && t.size() != 4)
                    throw ScenarioError("line " + std::to_string(lineno) +
                                        ": node expects 'id x y [depth]'");
                NodeId id;
                try {
                    id = NodeId(std::stoi(t[0]));
                } catch (const std::exception&) {
                    throw ScenarioError("line " + std::to_string(lineno) + ": bad node id '" +
                                        t[0] + "'");
                }
                if (nodes.count(id))
                    throw ScenarioError("line " + std::to_string(lineno) + ": duplicate node id " +
                                        id.wire());
                Position p{num(t[1]), num(t[2]), t.size() == 4 ? num(t[3]) : 0.0};
                nodes[id] = p;
            } else if (kl.key == "obstacle") {
                auto t = detail::split_ws(kl.value);
                if (t.size() < 4 || t.size() % 2 != 0)
                    throw ScenarioError("line " + std::to_string(lineno) +
                                        ": obstacle expects 'x1 y1 x2 y2 [...]'");
                Obstacle ob;
                for (std::size_t i = 0; i < t.size(); i += 2)
                    ob.push_back({num(t[i]), num(t[i + 1]), 0.0});
                obstacles.push_back(ob);
            } else {
                throw bad_key();
            }
        } else if (section == "path") {
            if (kl.key == "waypoint") {
                auto t = detail::split_ws(kl.value);
                if (t.size() != 2)
                    throw ScenarioError("line " + std::to_string(lineno) +
                                        ": waypoint expects 'x y'");
                waypoints.push_back({num(t[0]), num(t[1]), 0.0});
            } else if (kl.key == "speed") {
                path_speed = detail::parse_double(kl);
                path_speed_set = true;
            } else if (kl.key == "loop") {
                path_loop = detail::parse_bool(kl);
                path_loop_set = true;
            } else {
                throw bad_key();
            }
        } else if (section == "protocol") {
            if (kl.key == "t_b_min") sc.protocol.t_b_min = detail::parse_double(kl);
            else if (kl.key == "t_b_max") sc.protocol.t_b_max = detail::parse_double(kl);
            else if (kl.key == "burst_limit")
                sc.protocol.burst_limit = static_cast<int>(detail::parse_double(kl));
            else if (kl.key == "bitrate") sc.protocol.bitrate = detail::parse_double(kl);
            else if (kl.key == "generation_interval")
                sc.protocol.generation_interval = detail::parse_double(kl);
            else if (kl.key == "poll_guard") sc.protocol.poll_guard = detail::parse_double(kl);
            else if (kl.key == "max_prop_slack")
                sc.protocol.max_prop_slack = detail::parse_double(kl);
            else if (kl.key == "node_poll_timeout")
                sc.protocol.node_poll_timeout = detail::parse_double(kl);
            else throw bad_key();
        } else if (section == "channel") {
            if (kl.key == "sound_speed") {
                sc.channel.sound_speed = detail::parse_double(kl);
            } else if (kl.key == "band") {
                auto t = detail::split_ws(kl.value);
                if (t.size() != 3)
                    throw ScenarioError("line " + std::to_string(lineno) +
                                        ": band expects 'class max_distance p'");
                const int idx = class_index(t[0], lineno);
                if (!channel_seen[idx]) {
                    class_profile(idx).bands.clear();  // file overrides the default class
                    channel_seen[idx] = true;
                }
                class_profile(idx).bands.push_back({num(t[1]), num(t[2])});
            } else if (kl.key == "cutoff") {
                auto t = detail::split_ws(kl.value);
                if (t.size() != 2)
                    throw ScenarioError("line " + std::to_string(lineno) +
                                        ": cutoff expects 'class distance'");
                const int idx = class_index(t[0], lineno);
                class_profile(idx).cutoff_distance = num(t[1]);
                cutoff_seen[idx] = true;
            } else {
                throw bad_key();
            }
        } else if (section == "run") {
            if (kl.key == "duration") sc.duration = detail::parse_double(kl);
            else if (kl.key == "seed") {
                try {
                    sc.seed = std::stoull(kl.value);
                } catch (const std::exception&) {
                    throw ScenarioError("line " + std::to_string(lineno) + ": bad seed '" +
                                        kl.value + "'");
                }
            } else if (kl.key == "mule_id")
                sc.mule_id = NodeId(static_cast<int>(detail::parse_double(kl)));
            else if (kl.key == "start_utc") {
                try {
                    sc.start_utc = parse_iso8601(kl.value);
                } catch (const std::exception& e) {
                    throw ScenarioError("line " + std::to_string(lineno) + ": " + e.what());
                }
            } else if (kl.key == "generation_stop")
                sc.generation_stop = detail::parse_double(kl);
            else if (kl.key == "trace") sc.trace_path = kl.value;
            else if (kl.key == "shore_json") sc.shore_json_path = kl.value;
            else if (kl.key == "report") sc.report_path = kl.value;
            else if (kl.key == "reception_map") sc.reception_map_path = kl.value;
            else throw bad_key();
        }
    }

    // resolve the topology
    if (builtin_name && *builtin_name != "custom") {
        if (!nodes.empty() || !obstacles.empty())
            throw ScenarioError(origin_name +
                                ": builtin topology and explicit node/obstacle lines conflict");
        sc.topology = builtin_topology(topology_kind_from(*builtin_name), d_max, origin);
    } else {
        if (nodes.empty())
            throw ScenarioError(origin_name + ": no nodes given and no builtin topology");
        sc.topology.kind = TopologyKind::Custom;
        sc.topology.node_positions = nodes;
        sc.topology.obstacles = obstacles;
    }
    sc.channel.obstacles = sc.topology.obstacles;

    // default cutoff: end of the last band of that class
    for (int idx = 0; idx < 3; ++idx)
        if (channel_seen[idx] && !cutoff_seen[idx] && !class_profile(idx).bands.empty())
            class_profile(idx).cutoff_distance = class_profile(idx).bands.back().max_distance;

    // resolve the path
    if (!waypoints.empty()) {
        sc.path.waypoints = waypoints;
        sc.path.speed = path_speed;
        sc.path.loop = path_loop;
    } else if (builtin_name && *builtin_name != "custom") {
        sc.path = sc.topology.suggested_path;
        if (path_speed_set) sc.path.speed = path_speed;
        if (path_loop_set) sc.path.loop = path_loop;
    } else {
        throw ScenarioError(origin_name + ": no path waypoints given");
    }

    sc.validate();
    return sc;
}

inline Scenario load_scenario(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw ScenarioError("cannot open scenario file: " + file);
    return parse_scenario(in, file);
}

namespace detail {

inline std::string fmt_num(double v) {
    std::ostringstream out;
    out << v;
    return out.str();
}

}  // namespace detail

/// Canonical text form, the inverse of parse_scenario for emitted scenarios.
inline std::string scenario_text(const Scenario& sc) {
    std::ostringstream out;
    out << "# mulesim scenario\n\n[topology]\n";
    if (sc.topology.kind != TopologyKind::Custom) {
        out << "builtin = " << to_string(sc.topology.kind) << "\n";
    } else {
        for (const auto& [id, p] : sc.topology.node_positions) {
            out << "node = " << id.value << " " << detail::fmt_num(p.x) << " "
                << detail::fmt_num(p.y);
            if (p.depth != 0.0) out << " " << detail::fmt_num(p.depth);
            out << "\n";
        }
        for (const auto& ob : sc.topology.obstacles) {
            out << "obstacle =";
            for (const auto& p : ob)
                out << " " << detail::fmt_num(p.x) << " " << detail::fmt_num(p.y);
            out << "\n";
        }
    }
    out << "\n[path]\n";
    for (const auto& w : sc.path.waypoints)
        out << "waypoint = " << detail::fmt_num(w.x) << " " << detail::fmt_num(w.y) << "\n";
    out << "speed = " << detail::fmt_num(sc.path.speed) << "\n";
    out << "loop = " << (sc.path.loop ? "true" : "false") << "\n";
    out << "\n[protocol]\n";
    out << "t_b_min = " << detail::fmt_num(sc.protocol.t_b_min) << "\n";
    out << "t_b_max = " << detail::fmt_num(sc.protocol.t_b_max) << "\n";
    out << "burst_limit = " << sc.protocol.burst_limit << "\n";
    out << "bitrate = " << detail::fmt_num(sc.protocol.bitrate) << "\n";
    out << "generation_interval = " << detail::fmt_num(sc.protocol.generation_interval) << "\n";
    out << "poll_guard = " << detail::fmt_num(sc.protocol.poll_guard) << "\n";
    out << "max_prop_slack = " << detail::fmt_num(sc.protocol.max_prop_slack) << "\n";
    out << "node_poll_timeout = " << detail::fmt_num(sc.protocol.node_poll_timeout) << "\n";
    out << "\n[channel]\n";
    out << "sound_speed = " << detail::fmt_num(sc.channel.sound_speed) << "\n";
    const LinkClass classes[] = {LinkClass::StaticToStatic, LinkClass::MuleToStatic,
                                 LinkClass::StaticToMule};
    for (LinkClass c : classes) {
        const auto& prof = sc.channel.profile.for_class(c);
        for (const auto& b : prof.bands)
            out << "band = " << to_string(c) << " " << detail::fmt_num(b.max_distance) << " "
                << detail::fmt_num(b.p_deliver) << "\n";
        out << "cutoff = " << to_string(c) << " " << detail::fmt_num(prof.cutoff_distance)
            << "\n";
    }
    out << "\n[run]\n";
    out << "duration = " << detail::fmt_num(sc.duration) << "\n";
    out << "seed = " << (sc.seed ? std::to_string(*sc.seed) : std::string("1")) << "\n";
    out << "mule_id = " << sc.mule_id.value << "\n";
    out << "start_utc = " << format_iso8601(sc.start_utc) << "\n";
    if (sc.generation_stop >= 0.0)
        out << "generation_stop = " << detail::fmt_num(sc.generation_stop) << "\n";
    if (!sc.trace_path.empty()) out << "trace = " << sc.trace_path << "\n";
    if (!sc.shore_json_path.empty()) out << "shore_json = " << sc.shore_json_path << "\n";
    if (!sc.report_path.empty()) out << "report = " << sc.report_path << "\n";
    if (!sc.reception_map_path.empty())
        out << "reception_map = " << sc.reception_map_path << "\n";
    return out.str();
}

/// One ready-to-run scenario for a builtin layout.
inline Scenario builtin_scenario(TopologyKind kind, std::uint64_t seed = 1) {
    Scenario sc;
    sc.topology = builtin_topology(kind);
    sc.path = sc.topology.suggested_path;
    sc.channel.obstacles = sc.topology.obstacles;
    sc.seed = seed;
    return sc;
}

}  // namespace mulesim
