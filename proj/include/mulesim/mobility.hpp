#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mulesim/channel.hpp"
#include "mulesim/model.hpp"

namespace mulesim {

/// Constant-speed motion along a polyline. `loop` makes the vehicle continue
/// from the last waypoint back toward the first and repeat.
struct WaypointPath {
    std::vector<Position> waypoints;
    double speed = 0.78;  // the trials averaged ~1.5 knots
    bool loop = false;

    void validate() const {
        if (waypoints.size() < 2) throw std::invalid_argument("path needs >= 2 waypoints");
        if (!(speed > 0.0)) throw std::invalid_argument("path speed must be > 0");
        for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
            if (!waypoints[i].finite()) throw std::invalid_argument("waypoint not finite");
            if (distance(waypoints[i], waypoints[i + 1]) == 0.0)
                throw std::invalid_argument("consecutive waypoints must be distinct");
        }
        if (!waypoints.back().finite()) throw std::invalid_argument("waypoint not finite");
    }

    /// Planned route length: the waypoint polyline, loop closure excluded.
    double length() const {
        double total = 0.0;
        for (std::size_t i = 0; i + 1 < waypoints.size(); ++i)
            total += distance(waypoints[i], waypoints[i + 1]);
        return total;
    }

    /// Full cycle length when looping (adds the closing segment unless the
    /// polyline is already closed).
    double cycle_length() const {
        double total = length();
        if (loop) total += distance(waypoints.back(), waypoints.front());
        return total;
    }

    /// Times (from t=0) at which the vehicle crosses a segment boundary,
    /// up to `horizon`. Used by the engine to surface waypoint updates.
    std::vector<double> segment_change_times(double horizon) const {
        std::vector<double> out;
        const double cycle = cycle_length();
        if (cycle <= 0.0) return out;
        std::vector<double> marks;  // cumulative distance at each waypoint boundary
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
            acc += distance(waypoints[i], waypoints[i + 1]);
            marks.push_back(acc);
        }
        if (loop && distance(waypoints.back(), waypoints.front()) > 0.0) marks.push_back(cycle);
        for (int lap = 0;; ++lap) {
            const double base = lap * cycle;
            for (double m : marks) {
                const double t = (base + m) / speed;
                if (t > horizon) return out;
                out.push_back(t);
            }
            if (!loop) return out;
        }
    }
};

/// Position along the path at time t: linear interpolation at constant speed,
/// clamped at the final waypoint unless looping.
inline Position position_at(const WaypointPath& path, SimTime t) {
    if (t < 0.0) throw std::invalid_argument("time must be >= 0");
    double s = path.speed * t;
    const double cycle = path.cycle_length();
    if (path.loop && cycle > 0.0) s = std::fmod(s, cycle);

    std::size_t n = path.waypoints.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double seg = distance(path.waypoints[i], path.waypoints[i + 1]);
        if (s <= seg) {
            const double f = seg > 0.0 ? s / seg : 0.0;
            const Position& a = path.waypoints[i];
            const Position& b = path.waypoints[i + 1];
            return {a.x + f * (b.x - a.x), a.y + f * (b.y - a.y),
                    a.depth + f * (b.depth - a.depth)};
        }
        s -= seg;
    }
    if (path.loop) {
        const Position& a = path.waypoints.back();
        const Position& b = path.waypoints.front();
        const double seg = distance(a, b);
        if (seg > 0.0 && s <= seg) {
            const double f = s / seg;
            return {a.x + f * (b.x - a.x), a.y + f * (b.y - a.y),
                    a.depth + f * (b.depth - a.depth)};
        }
    }
    return path.waypoints.back();
}

enum class TopologyKind { T1, T2, T3, T4, Custom };

inline const char* to_string(TopologyKind k) {
    switch (k) {
    case TopologyKind::T1: return "T1";
    case TopologyKind::T2: return "T2";
    case TopologyKind::T3: return "T3";
    case TopologyKind::T4: return "T4";
    case TopologyKind::Custom: return "custom";
    }
    return "?";
}

struct Topology {
    TopologyKind kind = TopologyKind::Custom;
    std::map<NodeId, Position> node_positions;
    std::vector<Obstacle> obstacles;
    WaypointPath suggested_path;
};

inline constexpr double kDefaultDMax = 150.0;  // usable mobile range of the modem
inline constexpr double kMinPathClearance = 2.0;

namespace detail {

inline void check_clearance(const Topology& topo) {
    const auto& wps = topo.suggested_path.waypoints;
    for (const auto& [id, pos] : topo.node_positions) {
        for (std::size_t i = 0; i + 1 < wps.size(); ++i)
            if (geom::point_segment_distance(pos, wps[i], wps[i + 1]) < kMinPathClearance)
                throw std::logic_error("path passes closer than 2 m to node " + id.wire());
        if (topo.suggested_path.loop && wps.size() >= 2)
            if (geom::point_segment_distance(pos, wps.back(), wps.front()) < kMinPathClearance)
                throw std::logic_error("path passes closer than 2 m to node " + id.wire());
    }
}

inline bool cluster_pair_blocked(const Topology& topo, const std::vector<NodeId>& a,
                                 const std::vector<NodeId>& b) {
    ChannelParams ch;
    ch.obstacles = topo.obstacles;
    for (const auto& i : a)
        for (const auto& j : b)
            if (!is_blocked(topo.node_positions.at(i), topo.node_positions.at(j), ch))
                return false;
    return true;
}

}  // namespace detail

/// Node placements and patrol route for the four lake-trial layouts, scaled
/// around d_max (the canonical spacings assume d_max = 150 m):
///   T1: 4 isolated nodes on a ring, adjacent spacing 250 m > d_max
///   T2: 5 nodes in one cluster, all pairwise distances < d_max
///   T3: two 3-node clusters separated by 400 m > d_max
///   T4: three 2-node clusters, one pair shielded by a headland
/// The defining distance predicates are checked at construction.
inline Topology builtin_topology(TopologyKind kind, double d_max = kDefaultDMax,
                                 Position origin = {}) {
    if (!(d_max > 0.0)) throw std::invalid_argument("d_max must be > 0");
    const double f = d_max / kDefaultDMax;
    auto at = [&](double x, double y) {
        return Position{origin.x + f * x, origin.y + f * y, 0.0};
    };

    Topology topo;
    topo.kind = kind;
    topo.suggested_path.speed = 0.78;
    topo.suggested_path.loop = true;

    switch (kind) {
    case TopologyKind::T1: {
        // Table-style ids 1, 2, 4, 5: the trials ran this layout with 4 buoys.
        // Ring of equally spaced isolated nodes, adjacent spacing 250 m; the
        // route orbits the ring so every node gets one dwell per lap.
        topo.node_positions = {{NodeId(1), at(0, 0)},
                               {NodeId(2), at(250, 0)},
                               {NodeId(4), at(250, 250)},
                               {NodeId(5), at(0, 250)}};
        topo.suggested_path.waypoints = {at(25, 25), at(225, 25), at(225, 225), at(25, 225),
                                         at(25, 25)};
        for (const auto& [i, pi] : topo.node_positions)
            for (const auto& [j, pj] : topo.node_positions)
                if (i < j && !(distance(pi, pj) > d_max))
                    throw std::logic_error("T1 spacing must exceed d_max");
        break;
    }
    case TopologyKind::T2: {
        // One cluster; the vehicle orbits inside it (eight planned laps of a
        // small square around the center), staying within 90 m of every node.
        topo.node_positions = {{NodeId(1), at(0, 0)},
                               {NodeId(2), at(100, 0)},
                               {NodeId(3), at(100, 100)},
                               {NodeId(4), at(0, 100)},
                               {NodeId(5), at(50, 50)}};
        for (int lap = 0; lap < 8; ++lap) {
            topo.suggested_path.waypoints.push_back(at(38, 38));
            topo.suggested_path.waypoints.push_back(at(62, 38));
            topo.suggested_path.waypoints.push_back(at(62, 62));
            topo.suggested_path.waypoints.push_back(at(38, 62));
        }
        topo.suggested_path.waypoints.push_back(at(38, 38));
        for (const auto& [i, pi] : topo.node_positions)
            for (const auto& [j, pj] : topo.node_positions)
                if (i < j && !(distance(pi, pj) < d_max))
                    throw std::logic_error("T2 pairwise distance must be below d_max");
        break;
    }
    case TopologyKind::T3: {
        // Two compact 3-node clusters 400 m apart; racetrack around the
        // line between them passes both clusters twice per lap.
        topo.node_positions = {{NodeId(1), at(0, 0)},    {NodeId(2), at(30, 0)},
                               {NodeId(3), at(15, 26)},  {NodeId(4), at(430, 0)},
                               {NodeId(5), at(460, 0)},  {NodeId(6), at(445, 26)}};
        topo.suggested_path.waypoints = {at(-30, -20), at(490, -20), at(490, 46), at(-30, 46),
                                         at(-30, -20)};
        for (const auto& a : {NodeId(1), NodeId(2), NodeId(3)})
            for (const auto& b : {NodeId(4), NodeId(5), NodeId(6)})
                if (!(distance(topo.node_positions.at(a), topo.node_positions.at(b)) > d_max))
                    throw std::logic_error("T3 inter-cluster distance must exceed d_max");
        break;
    }
    case TopologyKind::T4: {
        // Clusters {4,5}, {2,3} and {1,6(PI)}; the headland shields {4,5}
        // from {2,3} like the Hemmoor spit did. The route starts mid-water
        // by the headland tip, sweeps past each cluster in turn and rounds
        // the tip again on the way back.
        topo.node_positions = {{NodeId(4), at(0, 0)},    {NodeId(5), at(25, 0)},
                               {NodeId(2), at(425, 0)},  {NodeId(3), at(450, 0)},
                               {NodeId(1), at(212, 160)}, {NodeId(6), at(237, 160)}};
        topo.obstacles = {{at(225, -120), at(225, 100)}};
        topo.suggested_path.waypoints = {at(275, 130), at(-35, 30), at(60, 30),
                                         at(165, 195), at(284, 195), at(390, 30),
                                         at(485, 30)};
        const std::vector<std::vector<NodeId>> clusters = {
            {NodeId(4), NodeId(5)}, {NodeId(2), NodeId(3)}, {NodeId(1), NodeId(6)}};
        for (std::size_t a = 0; a < clusters.size(); ++a)
            for (std::size_t b = a + 1; b < clusters.size(); ++b)
                for (const auto& i : clusters[a])
                    for (const auto& j : clusters[b])
                        if (!(distance(topo.node_positions.at(i), topo.node_positions.at(j)) >
                              d_max))
                            throw std::logic_error("T4 inter-cluster distance must exceed d_max");
        int blocked_pairs = 0;
        for (std::size_t a = 0; a < clusters.size(); ++a)
            for (std::size_t b = a + 1; b < clusters.size(); ++b)
                if (detail::cluster_pair_blocked(topo, clusters[a], clusters[b])) ++blocked_pairs;
        if (blocked_pairs != 1)
            throw std::logic_error("T4 must have exactly one obstacle-blocked cluster pair");
        break;
    }
    case TopologyKind::Custom:
        throw std::invalid_argument("custom topologies come from scenario files");
    }

    topo.suggested_path.validate();
    detail::check_clearance(topo);
    return topo;
}

inline TopologyKind topology_kind_from(const std::string& name) {
    if (name == "T1" || name == "t1") return TopologyKind::T1;
    if (name == "T2" || name == "t2") return TopologyKind::T2;
    if (name == "T3" || name == "t3") return TopologyKind::T3;
    if (name == "T4" || name == "t4") return TopologyKind::T4;
    if (name == "custom") return TopologyKind::Custom;
    throw std::invalid_argument("unknown topology name: " + name);
}

}  // namespace mulesim
