#include <catch_amalgamated.hpp>

#include <cmath>

#include "mulesim/datapipe.hpp"
#include "mulesim/rng.hpp"

using namespace mulesim;

TEST_CASE("encode produces the 13-character wire string") {
    SensorRecord r{NodeId(16), TimeOfDay(14, 23, 45), 'T', 18.5};
    CHECK(encode(r).text == "16142345T18.5");
    CHECK(encode(r).text.size() == kEncodedRecordBytes);

    SensorRecord zero{NodeId(0), TimeOfDay(0, 0, 0), 'T', 0.0};
    CHECK(encode(zero).text == "00000000T00.0");

    SensorRecord neg{NodeId(7), TimeOfDay(3, 4, 5), 'T', -1.5};
    CHECK(encode(neg).text == "07030405T-1.5");
}

TEST_CASE("values outside the 4-character range are rejected") {
    SensorRecord r{NodeId(1), TimeOfDay(0, 0, 0), 'T', 100.0};
    CHECK_THROWS_AS(encode(r), EncodeError);
    r.value = -10.0;
    CHECK_THROWS_AS(encode(r), EncodeError);
    r.value = 99.9;
    CHECK_NOTHROW(encode(r));
    r.value = -9.9;
    CHECK_NOTHROW(encode(r));
}

TEST_CASE("decode inverts encode") {
    const SensorRecord r = decode(EncodedRecord{"16142345T18.5"});
    CHECK(r.node == NodeId(16));
    CHECK(r.time_of_day == TimeOfDay(14, 23, 45));
    CHECK(r.data_type == 'T');
    CHECK(r.value == 18.5);
}

TEST_CASE("round trip over the representable value grid") {
    Rng rng(42);
    for (int i = 0; i < 10000; ++i) {
        SensorRecord r;
        r.node = NodeId(static_cast<int>(rng.next() % 100));
        r.time_of_day = TimeOfDay(static_cast<int>(rng.next() % 24),
                                  static_cast<int>(rng.next() % 60),
                                  static_cast<int>(rng.next() % 60));
        r.data_type = 'T';
        // one-decimal grid covering the 4-character range
        r.value = std::round(rng.uniform(-9.9, 99.9) * 10.0) / 10.0;
        const SensorRecord back = decode(encode(r));
        REQUIRE(back.node == r.node);
        REQUIRE(back.time_of_day == r.time_of_day);
        REQUIRE(back.data_type == r.data_type);
        REQUIRE(back.value == Catch::Approx(r.value).margin(1e-12));
    }
}

TEST_CASE("decode reports distinct parse errors") {
    auto kind_of = [](const std::string& text) {
        try {
            decode(EncodedRecord{text});
        } catch (const DecodeError& e) {
            return e.kind();
        }
        FAIL("expected a decode error");
        return DecodeErrorKind::Length;
    };
    CHECK(kind_of("1614234") == DecodeErrorKind::Length);
    CHECK(kind_of("16142345T18.55") == DecodeErrorKind::Length);
    CHECK(kind_of("1a142345T18.5") == DecodeErrorKind::Field);
    CHECK(kind_of("16942345T18.5") == DecodeErrorKind::Field);  // hour 94
    CHECK(kind_of("16142345X18.5") == DecodeErrorKind::UnknownDataType);
    CHECK(kind_of("16142345Tx8.5") == DecodeErrorKind::ValueRange);
}

TEST_CASE("the registry is extensible") {
    DataTypeRegistry registry;
    registry.register_type('S', "salinity");
    const SensorRecord r = decode(EncodedRecord{"01000000S30.1"}, registry);
    CHECK(r.data_type == 'S');
    const ShoreMessage msg = to_shore_json(r, parse_iso8601("2021-03-02T12:00:00Z"), registry);
    CHECK(msg.data_type == "salinity");
    CHECK_THROWS_AS(decode(EncodedRecord{"01000000S30.1"}), DecodeError);  // default registry
}

TEST_CASE("shore conversion attaches today's date when the time fits") {
    const SensorRecord r = decode(EncodedRecord{"16142345T18.5"});
    const ShoreMessage msg = to_shore_json(r, parse_iso8601("2021-03-02T15:00:00Z"));
    CHECK(msg.buoy_id == "16");
    CHECK(msg.data_type == "temperature");
    CHECK(msg.recorded_at == "2021-03-02T14:23:45Z");
    CHECK(msg.value == 18.5);
    CHECK(msg.json() ==
          R"({"buoy_id":"16","data_type":"temperature","recorded_at":"2021-03-02T14:23:45Z","value":18.5})");
}

TEST_CASE("a record from 'later today' must be from yesterday") {
    const SensorRecord r = decode(EncodedRecord{"16142345T18.5"});
    const ShoreMessage msg = to_shore_json(r, parse_iso8601("2021-03-02T10:00:00Z"));
    CHECK(msg.recorded_at == "2021-03-01T14:23:45Z");
}

TEST_CASE("a record timed exactly now is from today") {
    const SensorRecord r = decode(EncodedRecord{"16142345T18.5"});
    const ShoreMessage msg = to_shore_json(r, parse_iso8601("2021-03-02T14:23:45Z"));
    CHECK(msg.recorded_at == "2021-03-02T14:23:45Z");
}

TEST_CASE("recorded_at always lies within the last 24 hours") {
    Rng rng(9);
    for (int i = 0; i < 5000; ++i) {
        SensorRecord r;
        r.node = NodeId(static_cast<int>(rng.next() % 100));
        r.time_of_day = TimeOfDay(static_cast<int>(rng.next() % 24),
                                  static_cast<int>(rng.next() % 60),
                                  static_cast<int>(rng.next() % 60));
        r.data_type = 'T';
        r.value = 18.5;
        const UtcDateTime now{1614600000 + static_cast<std::int64_t>(rng.next() % 259200)};
        const ShoreMessage msg = to_shore_json(r, now);
        const UtcDateTime recorded = parse_iso8601(msg.recorded_at);
        REQUIRE(recorded.unix_seconds <= now.unix_seconds);
        REQUIRE(recorded.unix_seconds > now.unix_seconds - 86400);
        // strict round trip through the ISO form
        REQUIRE(format_iso8601(recorded) == msg.recorded_at);
    }
}

TEST_CASE("calendar helpers handle month and leap-year boundaries") {
    CHECK(format_iso8601(parse_iso8601("2020-02-29T23:59:59Z")) == "2020-02-29T23:59:59Z");
    const UtcDateTime t = parse_iso8601("2021-03-01T00:00:00Z");
    CHECK(format_iso8601(UtcDateTime{t.unix_seconds - 1}) == "2021-02-28T23:59:59Z");
    CHECK_THROWS_AS(parse_iso8601("2021-03-02 14:23:45"), std::invalid_argument);
    CHECK_THROWS_AS(parse_iso8601("not a date"), std::invalid_argument);
}

TEST_CASE("data frames carry exactly the compressed payload plus headers") {
    SensorRecord r{NodeId(16), TimeOfDay(14, 23, 45), 'T', 18.5};
    CHECK(static_cast<int>(encode(r).text.size()) == kEncodedRecordBytes);
    CHECK(kEncodedRecordBytes + 12 == kDataPacketBytes);
}
