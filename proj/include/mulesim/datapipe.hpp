#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "mulesim/model.hpp"

namespace mulesim {

enum class DecodeErrorKind { Length, Field, UnknownDataType, ValueRange };

class DecodeError : public std::runtime_error {
public:
    DecodeError(DecodeErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}
    DecodeErrorKind kind() const { return kind_; }

private:
    DecodeErrorKind kind_;
};

class EncodeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Maps one-character type tags to shore-side names. Only temperature ships
/// by default; deployments register further sensor types themselves.
class DataTypeRegistry {
public:
    struct Entry {
        std::string name;
        int value_width = 4;
    };

    DataTypeRegistry() { entries_['T'] = {"temperature", 4}; }

    void register_type(char tag, const std::string& name, int value_width = 4) {
        entries_[tag] = {name, value_width};
    }

    bool known(char tag) const { return entries_.count(tag) > 0; }

    const Entry& lookup(char tag) const {
        auto it = entries_.find(tag);
        if (it == entries_.end())
            throw DecodeError(DecodeErrorKind::UnknownDataType,
                              std::string("unknown data type tag '") + tag + "'");
        return it->second;
    }

    static const DataTypeRegistry& standard() {
        static const DataTypeRegistry reg;
        return reg;
    }

private:
    std::map<char, Entry> entries_;
};

/// The 13-character compressed wire string: 2 (id) + 6 (HHmmss) + 1 (type)
/// + 4 (value).
struct EncodedRecord {
    std::string text;
};

/// Width-4 value rendering: one fractional digit, zero padded ("00.0",
/// "18.5"); negatives spend one character on the sign ("-1.5"). Values are
/// rounded to one decimal first; anything outside [-9.9, 99.9] after
/// rounding does not fit.
inline std::string format_value4(double value) {
    const double rounded = std::round(value * 10.0) / 10.0;
    if (!(rounded >= -9.95) || !(rounded <= 99.94) || !std::isfinite(rounded))
        throw EncodeError("value not representable in 4 characters: " + std::to_string(value));
    char buf[8];
    if (rounded < 0.0)
        std::snprintf(buf, sizeof(buf), "%.1f", rounded);
    else
        std::snprintf(buf, sizeof(buf), "%04.1f", rounded);
    std::string s(buf);
    if (s.size() != 4)
        throw EncodeError("value rendering is not 4 characters: '" + s + "'");
    return s;
}

inline EncodedRecord encode(const SensorRecord& r) {
    char ts[8];
    std::snprintf(ts, sizeof(ts), "%02d%02d%02d", r.time_of_day.hour, r.time_of_day.minute,
                  r.time_of_day.second);
    return {r.node.wire() + ts + r.data_type + format_value4(r.value)};
}

inline SensorRecord decode(const EncodedRecord& e,
                           const DataTypeRegistry& registry = DataTypeRegistry::standard()) {
    const std::string& s = e.text;
    if (s.size() != kEncodedRecordBytes)
        throw DecodeError(DecodeErrorKind::Length,
                          "encoded record must be 13 characters, got " +
                              std::to_string(s.size()));
    for (int i = 0; i < 8; ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i])))
            throw DecodeError(DecodeErrorKind::Field,
                              "id/timestamp fields must be decimal digits");
    SensorRecord r;
    r.node = NodeId::from_wire(s.substr(0, 2));
    const int hh = std::stoi(s.substr(2, 2));
    const int mm = std::stoi(s.substr(4, 2));
    const int ss = std::stoi(s.substr(6, 2));
    if (hh > 23 || mm > 59 || ss > 59)
        throw DecodeError(DecodeErrorKind::Field, "timestamp out of range: " + s.substr(2, 6));
    r.time_of_day = TimeOfDay(hh, mm, ss);
    r.data_type = s[8];
    if (!registry.known(r.data_type))
        throw DecodeError(DecodeErrorKind::UnknownDataType,
                          std::string("unknown data type tag '") + r.data_type + "'");
    const std::string v = s.substr(9, 4);
    try {
        std::size_t used = 0;
        r.value = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
    } catch (const std::exception&) {
        throw DecodeError(DecodeErrorKind::ValueRange, "malformed value field: '" + v + "'");
    }
    return r;
}

// ---- calendar helpers -------------------------------------------------

/// UTC wall-clock instant, second granularity.
struct UtcDateTime {
    std::int64_t unix_seconds = 0;

    auto operator<=>(const UtcDateTime&) const = default;

    UtcDateTime plus_seconds(std::int64_t s) const { return {unix_seconds + s}; }

    TimeOfDay time_of_day() const {
        std::int64_t sod = unix_seconds % 86400;
        if (sod < 0) sod += 86400;
        return TimeOfDay::from_day_seconds(static_cast<long>(sod));
    }
};

namespace civil {

// days-from-civil / civil-from-days, the usual proleptic Gregorian algorithms
inline std::int64_t days_from_ymd(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void ymd_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

}  // namespace civil

/// Parses a strict "YYYY-MM-DDThh:mm:ssZ" timestamp.
inline UtcDateTime parse_iso8601(const std::string& s) {
    int y, mo, d, h, mi, se;
    char t, z;
    if (std::sscanf(s.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d%c", &y, &mo, &d, &t, &h, &mi, &se,
                    &z) != 8 ||
        (t != 'T') || z != 'Z' || mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 ||
        se > 59)
        throw std::invalid_argument("bad ISO-8601 UTC timestamp: '" + s + "'");
    return {civil::days_from_ymd(y, mo, d) * 86400 + h * 3600 + mi * 60 + se};
}

inline std::string format_iso8601(const UtcDateTime& t) {
    std::int64_t days = t.unix_seconds / 86400;
    std::int64_t sod = t.unix_seconds % 86400;
    if (sod < 0) {
        sod += 86400;
        days -= 1;
    }
    int y, m, d;
    civil::ymd_from_days(days, y, m, d);
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", y, m, d,
                  static_cast<int>(sod / 3600), static_cast<int>((sod % 3600) / 60),
                  static_cast<int>(sod % 60));
    return buf;
}

/// Shore-format message, one per collected record.
struct ShoreMessage {
    std::string buoy_id;     // 2-digit wire id
    std::string data_type;   // full word, e.g. "temperature"
    std::string recorded_at; // ISO-8601 UTC with date
    double value = 0.0;

    bool operator==(const ShoreMessage&) const = default;

    /// One-line JSON object with the shore field names.
    std::string json() const {
        return nlohmann::json{{"buoy_id", buoy_id},
                              {"data_type", data_type},
                              {"recorded_at", recorded_at},
                              {"value", value}}
            .dump();
    }
};

/// Attaches a date to the wire timestamp: records are assumed at most
/// 24 hours old, so the date is today when the record's time of day is not
/// after now's, otherwise yesterday.
inline ShoreMessage to_shore_json(const SensorRecord& r, const UtcDateTime& now,
                                  const DataTypeRegistry& registry = DataTypeRegistry::standard()) {
    std::int64_t days = now.unix_seconds / 86400;
    std::int64_t sod = now.unix_seconds % 86400;
    if (sod < 0) {
        sod += 86400;
        days -= 1;
    }
    if (r.time_of_day.day_seconds() > sod) days -= 1;
    const UtcDateTime recorded{days * 86400 + r.time_of_day.day_seconds()};
    ShoreMessage msg;
    msg.buoy_id = r.node.wire();
    msg.data_type = registry.lookup(r.data_type).name;
    msg.recorded_at = format_iso8601(recorded);
    msg.value = r.value;
    return msg;
}

}  // namespace mulesim
